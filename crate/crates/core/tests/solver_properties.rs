use smallbody::fields::{sobolev_norm, Grid, VectorField};
use smallbody::solver::{make_initial_data, run, InitialDatum, SimulationConfig, Solver};
use smallbody::Vec3;

const L: f64 = 2.0 * std::f64::consts::PI;

fn base() -> SimulationConfig {
    SimulationConfig { t_final: 0.25, output_interval: 0.25, ..Default::default() }
}

#[test]
fn galilean_boost_shifts_body_and_flow_by_the_drift() {
    let cfg = base();
    let g = cfg.grid().unwrap();
    let cells = [1i64, -2, 1];
    let boost = Vec3::new(cells[0] as f64, cells[1] as f64, cells[2] as f64) * (g.spacing() / cfg.dt);
    let (u, body) = make_initial_data(&cfg).unwrap();
    let mut boosted_body = body.clone().unwrap();
    boosted_body.l += boost;
    let mut plain = Solver::from_state(&cfg, &u, body).unwrap();
    let mut moved = Solver::from_state(&cfg, &u.add(&VectorField::uniform(g, boost)), Some(boosted_body)).unwrap();
    for n in 1..=8i64 {
        plain.step().unwrap();
        moved.step().unwrap();
        let expected = plain.velocity().shifted([cells[0] * n, cells[1] * n, cells[2] * n]).add(&VectorField::uniform(g, boost));
        let err = moved.velocity().sub(&expected).max_norm();
        assert!(err <= 1e-8 * plain.velocity().max_norm(), "step {n}: {err}");
        let (a, b) = (plain.body().unwrap(), moved.body().unwrap());
        let t = n as f64 * cfg.dt;
        assert!((b.h - a.h - boost * t).norm() <= 1e-10, "step {n}");
        assert!((b.l - a.l - boost).norm() <= 1e-8 * boost.norm());
        assert!((b.omega - a.omega).norm() <= 1e-8 * (1.0 + a.omega.norm()));
    }
}

#[test]
fn slip_is_bounded_by_root_lambda_times_h1() {
    let mut prev: Option<f64> = None;
    for j in 0..4 {
        let cfg = SimulationConfig { lambda: base().dt / 2f64.powi(j), ..base() };
        let traj = run(&cfg).unwrap();
        let slip = traj.diagnostics.iter().map(|d| d.slip).fold(0.0, f64::max);
        let h1 = traj.snapshots.iter().map(|u| sobolev_norm(u, 1).unwrap()).fold(0.0, f64::max);
        let ratio = slip / (cfg.lambda.sqrt() * h1);
        assert!(ratio <= 0.2, "lambda {}: {ratio}", cfg.lambda);
        if let Some(p) = prev {
            assert!((p / slip).log2() >= 0.4, "lambda {}: {p} -> {slip}", cfg.lambda);
        }
        prev = Some(slip);
    }
}

#[test]
fn reference_energy_decays_and_balances() {
    let cfg = base().without_body();
    let traj = run(&cfg).unwrap();
    for w in traj.energy.windows(2) {
        assert!(w[1].fluid_kinetic < w[0].fluid_kinetic);
    }
    let e0 = traj.energy[0].total;
    let worst = traj.energy.iter().map(|r| r.total / e0 - 1.0).fold(f64::MIN, f64::max);
    assert!(worst <= 1e-7, "{worst}");
}

/// Nodes of the coarse grid are every `N/n`-th fine node.
fn restrict(u: &VectorField, coarse: Grid) -> VectorField {
    let fine = u.grid();
    let r = fine.n() / coarse.n();
    let mut out = VectorField::zeros(coarse);
    for k in 0..coarse.n() {
        for j in 0..coarse.n() {
            for i in 0..coarse.n() {
                out.set(coarse.index(i, j, k), u.get(fine.index(r * i, r * j, r * k)));
            }
        }
    }
    out
}

#[test]
fn reference_runs_converge_under_refinement() {
    let at = |n: usize| {
        let cfg = SimulationConfig { resolution: n, initial_field: InitialDatum::GaussianVortexRing, ..base() }.without_body();
        run(&cfg).unwrap().snapshots.pop().unwrap()
    };
    let fine = at(64);
    let coarse = Grid::new(L, 16).unwrap();
    let e16 = restrict(&at(16), coarse).sub(&restrict(&fine, coarse)).max_norm();
    let e32 = restrict(&at(32), coarse).sub(&restrict(&fine, coarse)).max_norm();
    assert!(e32 < 0.25 * e16, "{e16} {e32}");
}
