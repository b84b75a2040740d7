//! Acceptance criteria 1 to 10. Each criterion prints one `PASS`/`FAIL`
//! line; the test fails if any criterion fails. Run with `--nocapture` to
//! see the lines.

use std::f64::consts::PI;

use smallbody::biot_savart::stream_function;
use smallbody::cutoff::{measure_cutoff_scalings, measure_testfn_convergence, CenterPath, CutoffFamily, CutoffProfile};
use smallbody::fields::{curl, lebesgue_norm, leray_project, Ball, Exponent, Grid, VectorField};
use smallbody::limit::{run_sweep, tracking_family, weak_residual, SweepPlan, SweepReport, WEAK_TOLERANCE};
use smallbody::modes::BandLimitedField;
use smallbody::rigid_body::{inertia_tensor, Shape};
use smallbody::solver::{run, InitialDatum, SimulationConfig, Solver};
use smallbody::{Mat3, Vec3};

const L: f64 = 2.0 * PI;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn cutoff_families(n: usize) -> Vec<CutoffFamily> {
    let g = Grid::new(L, n).unwrap();
    [16.0, 32.0, 64.0, 128.0]
        .iter()
        .map(|d| CutoffFamily::new(CutoffProfile::quintic(), L / d, CenterPath::Fixed(Vec3::new(0.1, -0.2, 0.3)), g).unwrap())
        .collect()
}

/// Lattice on which every ε of the schedule is resolved (ε ≥ 4h).
const CUTOFF_LATTICE: usize = 512;

fn criterion_1() -> Verdict {
    let rep = measure_cutoff_scalings(&cutoff_families(CUTOFF_LATTICE), &[1.2, 2.0, 3.0, 6.0], 0.0).unwrap();
    let worst = rep.entries.iter().map(|e| (e.slope - e.theory).abs()).fold(0.0, f64::max);
    verdict(rep.entries.len() == 12 && worst <= 0.15, format!("max |slope - theory| = {worst:.3e} over {} fits", rep.entries.len()))
}

fn criterion_2() -> Verdict {
    let phi = BandLimitedField::random(L, 2, 6, 11).unwrap();
    let rep = measure_testfn_convergence(&phi, &cutoff_families(CUTOFF_LATTICE), 0.0).unwrap();
    let slope = |q: &str| rep.entries.iter().find(|e| e.quantity == q).unwrap().slope;
    let (s0, s1) = (slope("testfn_l2"), slope("testfn_h1"));
    let spread = rep.extra("h1_over_h2_spread").unwrap();
    verdict(
        (1.35..=1.65).contains(&s0) && (0.35..=0.65).contains(&s1) && spread < 2.0,
        format!("L2 slope {s0:.3}, H1 slope {s1:.3}, H1/H2 spread {spread:.3}"),
    )
}

/// Compact vortex `φ = curl(e^{−r²/σ²}(−y, x, 0))`.
fn compact_vortex(x: Vec3, s: f64) -> Vec3 {
    let f = (-x.norm_squared() / (s * s)).exp();
    let a = 2.0 / (s * s);
    Vec3::new(a * x.z * x.x, a * x.z * x.y, 2.0 - a * (x.x * x.x + x.y * x.y)) * f
}

/// `ψ(x) = −∫ (x−y)/(4π|x−y|³) × φ(y) dy` by the midpoint rule on a lattice
/// offset by half a cell from `x`.
fn kernel_stream(x: Vec3, s: f64, m: usize) -> Vec3 {
    let hq = L / m as f64;
    let mut acc = Vec3::zeros();
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let y = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * hq - Vec3::repeat(L / 2.0);
                let d = x - y;
                let r = d.norm();
                acc -= d.cross(&compact_vortex(y, s)) / (4.0 * PI * r * r * r);
            }
        }
    }
    acc * hq.powi(3)
}

fn criterion_3() -> Verdict {
    let g = Grid::new(L, 32).unwrap();
    let mut curl_err: f64 = 0.0;
    for seed in 0..50 {
        let phi = BandLimitedField::random(L, 4, 12, 500 + seed).unwrap().sample(g).unwrap();
        let back = curl(&stream_function(&phi).unwrap());
        curl_err = curl_err.max(back.sub(&phi).max_norm() / phi.max_norm());
    }

    let g = Grid::new(L, 64).unwrap();
    let s = L / 12.0;
    let psi = stream_function(&VectorField::from_fn(g, |x| compact_vortex(x, s))).unwrap();
    let h = g.spacing();
    let targets: Vec<[i64; 3]> = [[0, 0, 0], [2, 0, 0], [0, 3, 1], [-3, 2, -1], [1, -4, 2], [4, 1, -3], [-2, -2, 4], [3, 3, 0]].to_vec();
    let (mut worst, mut scale): (f64, f64) = (0.0, 0.0);
    for t in &targets {
        let idx = g.index_wrapped(t[0] + 32, t[1] + 32, t[2] + 32);
        let x = Vec3::new(t[0] as f64, t[1] as f64, t[2] as f64) * h;
        let oracle = kernel_stream(x, s, 128);
        worst = worst.max((psi.get(idx) - oracle).norm());
        scale = scale.max(oracle.norm());
    }
    let rel = worst / scale;
    verdict(curl_err <= 1e-8 && rel <= 0.02, format!("curl error {curl_err:.2e} on 50 fields, kernel oracle gap {rel:.2e}"))
}

fn sweep_plan() -> SweepPlan {
    let base = SimulationConfig {
        nu: 0.05,
        resolution: 128,
        dt: 1.0 / 64.0,
        lambda: 1.0 / 64.0,
        t_final: 1.0,
        output_interval: 0.125,
        initial_field: InitialDatum::TaylorGreenBump,
        body_center: Vec3::new(L / 4.0, 0.0, 0.0),
        ..Default::default()
    };
    SweepPlan {
        base,
        epsilons: vec![L / 8.0, L / 16.0, L / 24.0, L / 32.0],
        alpha: 2.0,
        control_alpha: Some(0.0),
        k: Ball::new(Vec3::repeat(L / 2.0), L / 4.0),
        test_functions: SweepPlan::default_test_functions(L, 11).unwrap(),
        profile: CutoffProfile::quintic(),
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

fn criterion_4(r: &SweepReport) -> Verdict {
    let runs: Vec<_> = r.primary.iter().chain(&r.control).collect();
    let ok = runs.iter().all(|x| x.metrics().is_some_and(|m| m.energy_excess <= 1e-3));
    let worst = runs.iter().filter_map(|x| x.metrics()).map(|m| m.energy_excess).fold(0.0, f64::max);
    verdict(ok, format!("max energy excess {worst:.2e} over {} runs", runs.len()))
}

fn criterion_5(r: &SweepReport) -> Verdict {
    let runs: Vec<_> = r.primary.iter().chain(&r.control).collect();
    let ok = runs.iter().all(|x| x.metrics().is_some_and(|m| m.momentum_imbalance <= 1e-10));
    let worst = runs.iter().filter_map(|x| x.metrics()).map(|m| m.momentum_imbalance).fold(0.0, f64::max);
    verdict(ok, format!("max per-step momentum imbalance {worst:.2e}"))
}

fn criterion_6(r: &SweepReport) -> Verdict {
    let d: Vec<f64> = r.primary.iter().filter_map(|x| x.metrics().map(|m| m.d)).collect();
    let ratio = d.last().zip(d.first()).map_or(f64::INFINITY, |(a, b)| a / b);
    verdict(
        d.len() == 4 && r.d_monotone && ratio <= 0.5,
        format!("d = {}, monotone {}, ratio {ratio:.3e}", list(&d), r.d_monotone),
    )
}

fn criterion_7(r: &SweepReport) -> Verdict {
    let scaled: Vec<f64> = r.primary.iter().filter_map(|x| x.scaled_speed()).collect();
    let control = r.control_heavier_moves_less();
    verdict(
        r.scaled_speed_decreasing() && control == Some(true),
        format!("eps^1.5 sup|h'| = {}, control moves more {control:?}", list(&scaled)),
    )
}

fn criterion_8() -> Verdict {
    let phi = BandLimitedField::random(L, 2, 6, 11).unwrap();
    let cfg = |dt: f64| SimulationConfig { nu: 0.05, resolution: 32, dt, lambda: dt, output_interval: dt, t_final: 1.0, ..Default::default() };
    let reference = |dt: f64| {
        let c = cfg(dt).without_body();
        weak_residual(&run(&c).unwrap(), &c, &phi, None).unwrap().normalized()
    };
    let (coarse, fine) = (reference(1.0 / 64.0), reference(1.0 / 128.0));
    let c = SimulationConfig { epsilon: L / 8.0, body_center: Vec3::new(L / 4.0, 0.0, 0.0), ..cfg(1.0 / 64.0) };
    let traj = run(&c).unwrap();
    let fam = tracking_family(&traj, CutoffProfile::quintic(), c.epsilon).unwrap();
    let coupled = weak_residual(&traj, &c, &phi, Some(&fam)).unwrap().normalized();
    let ratio = fine / coarse;
    verdict(
        coarse <= WEAK_TOLERANCE && (0.375..=0.625).contains(&ratio) && coupled <= 3.0 * WEAK_TOLERANCE,
        format!("reference {coarse:.3e}, halving ratio {ratio:.3}, coupled {coupled:.3e}, tol_W {WEAK_TOLERANCE:.1e}"),
    )
}

fn criterion_9(r: &SweepReport) -> Verdict {
    let h: Vec<f64> = r.primary.iter().filter_map(|x| x.metrics().map(|m| m.xi.holder)).collect();
    verdict(h.len() == 4 && r.holder_spread < 3.0, format!("Hoelder constants {}, spread {:.3}", list(&h), r.holder_spread))
}

/// Voxel oracle: `∫ ρ (|x|² I − x xᵀ)` over the cube midpoints inside the shape.
fn voxel_oracle(axes: Vec3, rho: f64, n: usize) -> Mat3 {
    let ext = axes.max();
    let hv = 2.0 * ext / n as f64;
    let mut j = Mat3::zeros();
    for k in 0..n {
        for jj in 0..n {
            for i in 0..n {
                let x = Vec3::new(i as f64 + 0.5, jj as f64 + 0.5, k as f64 + 0.5) * hv - Vec3::repeat(ext);
                if (x.x / axes.x).powi(2) + (x.y / axes.y).powi(2) + (x.z / axes.z).powi(2) <= 1.0 {
                    j += (Mat3::identity() * x.norm_squared() - x * x.transpose()) * (rho * hv.powi(3));
                }
            }
        }
    }
    j
}

fn criterion_10() -> Verdict {
    let (r, rho) = (0.37, 2.3);
    let j = inertia_tensor(&Shape::Sphere { radius: r }, rho).unwrap();
    let m = rho * 4.0 / 3.0 * PI * r.powi(3);
    let sphere = (j - Mat3::identity() * (0.4 * m * r * r)).norm() / j.norm();

    let axes = Vec3::new(0.3, 0.2, 0.12);
    let je = inertia_tensor(&Shape::Ellipsoid { axes }, 1.7).unwrap();
    let ellipsoid = (je - voxel_oracle(axes, 1.7, 160)).norm() / je.norm();

    let cfg = SimulationConfig { nu: 0.05, resolution: 32, epsilon: 0.0, initial_field: InitialDatum::TaylorGreen, ..Default::default() };
    let mut s = Solver::new(&cfg).unwrap();
    let mut decay: f64 = 0.0;
    for _ in 0..8 {
        let before = s.velocity();
        s.step().unwrap();
        let want = before.scaled((-2.0 * cfg.nu * cfg.dt).exp());
        decay = decay.max(s.velocity().sub(&want).max_norm() / before.max_norm());
    }

    let g = Grid::new(L, 32).unwrap();
    let v = VectorField::from_fn(g, |x| Vec3::new(x.y.sin() * x.z.cos(), (2.0 * x.x).cos() + x.z.sin(), (x.x + x.y).sin()));
    let p = leray_project(&v);
    let l2 = |f: &VectorField| lebesgue_norm(f, Exponent::Finite(2.0), None).unwrap();
    let idem = l2(&leray_project(&p).sub(&p)) / l2(&v);

    verdict(
        sphere <= 1e-12 && ellipsoid <= 1e-2 && decay <= 1e-6 && idem <= 1e-12,
        format!("sphere {sphere:.1e}, ellipsoid {ellipsoid:.1e}, decay {decay:.1e}, projector {idem:.1e}"),
    )
}

#[test]
fn criteria_one_through_ten() {
    let sweep = run_sweep(&sweep_plan()).unwrap();
    let results = [
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4(&sweep)),
        (5, criterion_5(&sweep)),
        (6, criterion_6(&sweep)),
        (7, criterion_7(&sweep)),
        (8, criterion_8()),
        (9, criterion_9(&sweep)),
        (10, criterion_10()),
    ];
    for (k, v) in &results {
        println!("criterion {k:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<i32> = results.iter().filter(|(_, v)| !v.pass).map(|(k, _)| *k).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
