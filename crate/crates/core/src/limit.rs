//! Vanishing-body experiments: ε-sweeps against a body-free reference,
//! weak-form residuals with cut-off test functions, and the time-Hölder
//! diagnostic of the pairing `t ↦ ∫ u_ε(t)·φ_ε(t)`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;

use crate::cutoff::{test_function_from_stream, CenterPath, CutoffFamily, CutoffProfile};
use crate::error::{Error, Result};
use crate::fields::spectral::{Fft3, Wavenumbers};
use crate::fields::{curl, Ball, Grid, VectorField};
use crate::fit::{fit_rate, RateFit};
use crate::modes::BandLimitedField;
use crate::solver::{max_energy_excess, run_observed, EnergyRecord, SimulationConfig, Solver, Trajectory};
use crate::Vec3;

pub const MIN_SCHEDULE: usize = 4;
pub const MIN_XI_SNAPSHOTS: usize = 8;
pub const MIN_XI_FIELDS: usize = 5;
/// Hölder exponent of the pairing in time.
pub const HOLDER_EXPONENT: f64 = 0.25;
/// Normalized weak residual allowed for a reference run.
pub const WEAK_TOLERANCE: f64 = 2e-4;

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub base: SimulationConfig,
    /// Strictly decreasing body scales.
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    /// Density exponent of the comparison branch, run at the same scales.
    pub control_alpha: Option<f64>,
    pub k: Ball,
    /// Fields paired with `u_ε` for the Hölder diagnostic.
    pub test_functions: Vec<BandLimitedField>,
    pub profile: CutoffProfile,
    pub jobs: usize,
}

impl SweepPlan {
    /// Five random band-limited fields with wavenumbers up to 2.
    pub fn default_test_functions(length: f64, seed: u64) -> Result<Vec<BandLimitedField>> {
        (0..MIN_XI_FIELDS as u64).map(|j| BandLimitedField::random(length, 2, 6, seed.wrapping_add(j))).collect()
    }

    /// Body-free reference configuration.
    pub fn reference_config(&self) -> SimulationConfig {
        self.base.without_body()
    }

    pub fn config_for(&self, epsilon: f64, alpha: f64) -> SimulationConfig {
        SimulationConfig { epsilon, alpha, ..self.base.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.len() < MIN_SCHEDULE {
            return Err(Error::InsufficientData { needed: MIN_SCHEDULE, got: self.epsilons.len() });
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid("epsilon schedule must be strictly decreasing".into()));
        }
        for &eps in &self.epsilons {
            self.config_for(eps, self.alpha).validate()?;
            if let Some(a) = self.control_alpha {
                self.config_for(eps, a).validate()?;
            }
        }
        self.reference_config().validate()?;
        let grid = self.base.grid()?;
        if !(self.k.radius > 0.0 && self.k.radius < grid.length() / 2.0) {
            return Err(Error::RegionExceedsBox { radius: self.k.radius, half_box: grid.length() / 2.0 });
        }
        let margin = 4.0 * grid.spacing();
        let gap = grid.periodic_distance(self.k.center, self.base.body_center) - self.k.radius;
        let need = 2.0 * self.epsilons[0] + margin;
        if gap < need {
            return Err(Error::Invalid(format!(
                "comparison ball comes within {gap} of the body center; needs {need} (cut-off support plus margin)"
            )));
        }
        if self.test_functions.len() < MIN_XI_FIELDS {
            return Err(Error::InsufficientData { needed: MIN_XI_FIELDS, got: self.test_functions.len() });
        }
        if self.test_functions.iter().any(|f| f.length() != grid.length()) {
            return Err(Error::Invalid("test functions live on a different box".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Invalid("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pairings `⟨u(t_n), φ_{j,ε}(t_n)⟩` and the derived Hölder quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct XiReport {
    pub times: Vec<f64>,
    /// `values[n][j]`.
    pub values: Vec<Vec<f64>>,
    /// `‖φ_j‖_{H²}`.
    pub norms: Vec<f64>,
    /// `sup_{s<t} M(s,t)/(t−s)^{1/4}`.
    pub holder: f64,
    /// `sup_t max_j |⟨Ξ(t), φ_j⟩| / ‖φ_j‖_{H²}`.
    pub bound: f64,
}

impl XiReport {
    pub fn from_values(times: Vec<f64>, values: Vec<Vec<f64>>, norms: Vec<f64>) -> Result<Self> {
        if times.len() < MIN_XI_SNAPSHOTS {
            return Err(Error::InsufficientData { needed: MIN_XI_SNAPSHOTS, got: times.len() });
        }
        if norms.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::DegenerateTestFunction);
        }
        let mut holder: f64 = 0.0;
        let mut bound: f64 = 0.0;
        for (a, (ta, va)) in times.iter().zip(&values).enumerate() {
            for (j, n) in norms.iter().enumerate() {
                bound = bound.max(va[j].abs() / n);
            }
            for (tb, vb) in times.iter().zip(&values).skip(a + 1) {
                let m = (0..norms.len()).map(|j| (vb[j] - va[j]).abs() / norms[j]).fold(0.0, f64::max);
                holder = holder.max(m / (tb - ta).powf(HOLDER_EXPONENT));
            }
        }
        Ok(Self { times, values, norms, holder, bound })
    }

    /// `M(s_a, t_b)` between two snapshot indices.
    pub fn modulus(&self, a: usize, b: usize) -> f64 {
        (0..self.norms.len())
            .map(|j| (self.values[b][j] - self.values[a][j]).abs() / self.norms[j])
            .fold(0.0, f64::max)
    }
}

/// Cut-off family whose center follows the trajectory's body.
pub fn tracking_family(traj: &Trajectory, profile: CutoffProfile, epsilon: f64) -> Result<CutoffFamily> {
    let grid = traj.snapshots.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?.grid();
    let path: Vec<(f64, Vec3)> = traj
        .times
        .iter()
        .zip(&traj.bodies)
        .map(|(t, b)| b.as_ref().map(|b| (*t, b.h)).ok_or_else(|| Error::Invalid("trajectory has no body".into())))
        .collect::<Result<_>>()?;
    let path = if path.len() == 1 { CenterPath::Fixed(path[0].1) } else { CenterPath::Sampled(path) };
    CutoffFamily::new(profile, epsilon, path, grid)
}

fn at_center(fam: &CutoffFamily, h: Vec3) -> CutoffFamily {
    CutoffFamily { center: CenterPath::Fixed(h), ..fam.clone() }
}

/// Test field at one instant: `curl(η_ε ψ_ε)` or the plain field.
fn spatial_test_field(psi: &VectorField, phi: &VectorField, fam: Option<&CutoffFamily>, h: Vec3) -> VectorField {
    match fam {
        Some(f) => test_function_from_stream(psi, &at_center(f, h), 0.0),
        None => phi.clone(),
    }
}

/// `Ξ` by direct quadrature of `∫ u·φ_ε` at every snapshot.
pub fn xi_diagnostic(traj: &Trajectory, phis: &[BandLimitedField], fam: Option<&CutoffFamily>) -> Result<XiReport> {
    let grid = traj.snapshots.first().ok_or(Error::InsufficientData { needed: MIN_XI_SNAPSHOTS, got: 0 })?.grid();
    let norms: Vec<f64> = phis.iter().map(|p| p.sobolev_norm(2)).collect();
    if norms.iter().any(|n| *n == 0.0) {
        return Err(Error::DegenerateTestFunction);
    }
    let sampled: Vec<(VectorField, VectorField)> =
        phis.iter().map(|p| Ok((p.sample(grid)?, p.sample_stream(grid)?))).collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(traj.times.len());
    for (u, &t) in traj.snapshots.iter().zip(&traj.times) {
        let h = fam.map(|f| f.center.position(t)).unwrap_or_default();
        values.push(sampled.iter().map(|(phi, psi)| u.dot(&spatial_test_field(psi, phi, fam, h))).collect());
    }
    XiReport::from_values(traj.times.clone(), values, norms)
}

/// `Ξ` through the adjoint of the spectral curl: `∫ curl u · η_ε ψ_ε`.
/// Agrees with [`xi_diagnostic`] to round-off.
pub fn xi_pairings_by_vorticity(
    u: &VectorField,
    streams: &[VectorField],
    phis: &[VectorField],
    fam: Option<&CutoffFamily>,
    h: Vec3,
) -> Vec<f64> {
    match fam {
        None => phis.iter().map(|p| u.dot(p)).collect(),
        Some(f) => {
            let grid = u.grid();
            let w = curl(u);
            let dv = grid.cell_volume();
            streams
                .iter()
                .map(|psi| {
                    let anchor = crate::fields::interpolate_vector(psi, grid.wrap(h));
                    let mut acc = 0.0;
                    for idx in 0..grid.len() {
                        let eta = f.eta_at(grid.delta(grid.node(idx), h));
                        if eta != 0.0 {
                            acc += eta * w.get(idx).dot(&(psi.get(idx) - anchor));
                        }
                    }
                    acc * dv
                })
                .collect()
        }
    }
}

/// Time profile `θ(t) = cos²(πt/2T)` of the weak-form test field.
fn theta(t: f64, horizon: f64) -> (f64, f64) {
    let a = std::f64::consts::FRAC_PI_2 / horizon;
    ((a * t).cos().powi(2), -a * (2.0 * a * t).sin())
}

/// Signed pieces of the weak identity
/// `−∫∫u·∂_tφ + ν∫∫∇u:∇φ + ∫∫(u·∇u)·φ − ∫u(0)·φ(0) = 0`
/// for `φ(t) = θ(t) φ₀` (or its cut-off version).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakResidual {
    /// `∫₀ᵀ∫ u·∂_tφ`.
    pub time_term: f64,
    /// `ν∫₀ᵀ∫ ∇u:∇φ`.
    pub viscous_term: f64,
    /// `∫₀ᵀ∫ (u·∇u)·φ`.
    pub nonlinear_term: f64,
    /// `∫ u(0)·φ(0)`.
    pub initial_term: f64,
    /// `‖φ₀‖_{H²}`.
    pub phi_norm: f64,
}

impl WeakResidual {
    pub fn signed(&self) -> f64 {
        -self.time_term + self.viscous_term + self.nonlinear_term - self.initial_term
    }

    /// `|signed| / ‖φ₀‖_{H²}`.
    pub fn normalized(&self) -> f64 {
        self.signed().abs() / self.phi_norm
    }
}

fn spectral_pairing_weighted(a: &[Vec<Complex64>; 3], b: &[Vec<Complex64>; 3], grid: Grid, weight_k2: bool) -> f64 {
    let wn = Wavenumbers::new(grid);
    let mut acc = 0.0;
    for m in wn.modes() {
        let w = if weight_k2 { m.weight * m.k2() } else { m.weight };
        if w == 0.0 {
            continue;
        }
        let s: f64 = (0..3).map(|c| (a[c][m.idx] * b[c][m.idx].conj()).re).sum();
        acc += w * s;
    }
    acc * grid.volume()
}

/// Weak-form residual of a trajectory with trapezoid time quadrature over its
/// snapshots. With a family the test field is `curl(η_ε ψ_ε)` built around
/// the body position at each snapshot; its time derivative includes the
/// transport of the cut-off by `h'`.
pub fn weak_residual(
    traj: &Trajectory,
    cfg: &SimulationConfig,
    phi: &BandLimitedField,
    fam: Option<&CutoffFamily>,
) -> Result<WeakResidual> {
    let n = traj.snapshots.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let grid = traj.snapshots[0].grid();
    let horizon = *traj.times.last().expect("non-empty");
    let phi_norm = phi.sobolev_norm(2);
    if phi_norm == 0.0 {
        return Err(Error::DegenerateTestFunction);
    }
    if let Some(f) = fam {
        CutoffFamily::new(f.profile, f.epsilon, f.center.clone(), grid)?;
    }
    let phi0 = phi.sample(grid)?;
    let psi0 = phi.sample_stream(grid)?;
    let fft = Fft3::for_n(grid.n());
    let reference = cfg.without_body();
    let dh = 1e-3 * grid.spacing();

    let mut time_vals = Vec::with_capacity(n);
    let mut visc_vals = Vec::with_capacity(n);
    let mut nonlin_vals = Vec::with_capacity(n);
    let mut initial_term = 0.0;
    for (k, (u, &t)) in traj.snapshots.iter().zip(&traj.times).enumerate() {
        let (th, dth) = theta(t, horizon);
        let (h, hdot) = match (fam, traj.bodies[k].as_ref()) {
            (Some(_), Some(b)) => (b.h, b.l),
            (Some(f), None) => (f.center.position(t), Vec3::zeros()),
            (None, _) => (Vec3::zeros(), Vec3::zeros()),
        };
        let base = spatial_test_field(&psi0, &phi0, fam, h);
        let mut dphi = base.scaled(dth);
        if fam.is_some() && th != 0.0 && hdot.norm() > 0.0 {
            let dir = hdot / hdot.norm();
            let plus = spatial_test_field(&psi0, &phi0, fam, h + dir * dh);
            let minus = spatial_test_field(&psi0, &phi0, fam, h - dir * dh);
            dphi.axpy(th * hdot.norm() / (2.0 * dh), &plus.sub(&minus));
        }
        let test = base.scaled(th);
        if k == 0 {
            initial_term = u.dot(&test);
        }
        time_vals.push(u.dot(&dphi));

        let solver = Solver::from_state(&reference, u, None)?;
        let u_hat = solver.velocity_spectrum();
        let test_hat: [Vec<Complex64>; 3] = std::array::from_fn(|c| fft.forward(test.component(c)));
        visc_vals.push(cfg.nu * spectral_pairing_weighted(u_hat, &test_hat, grid, true));
        let adv = solver.advection_spectrum();
        nonlin_vals.push(-spectral_pairing_weighted(&adv, &test_hat, grid, false));
    }
    let trap = |v: &[f64]| -> f64 {
        traj.times.windows(2).zip(v.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
    };
    Ok(WeakResidual {
        time_term: trap(&time_vals),
        viscous_term: trap(&visc_vals),
        nonlinear_term: trap(&nonlin_vals),
        initial_term,
        phi_norm,
    })
}

/// Metrics of one coupled run of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub times: Vec<f64>,
    /// `‖u_ε(t_n) − u_ref(t_n)‖_{L²(K)}`.
    pub d_series: Vec<f64>,
    pub d: f64,
    pub energy: Vec<EnergyRecord>,
    pub energy_excess: f64,
    pub momentum_imbalance: f64,
    pub slip_max: f64,
    /// `sup_t |h'(t)|` over steps.
    pub speed_sup: f64,
    /// `sup_t |h(t) − h(0)|`.
    pub displacement_sup: f64,
    /// `min_t dist(h(t), center of K) − radius of K − 2ε`.
    pub k_clearance: f64,
    pub xi: XiReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub epsilon: f64,
    pub alpha: f64,
    pub density: f64,
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok()
    }

    /// `ε^{3/2} sup_t|h'|`.
    pub fn scaled_speed(&self) -> Option<f64> {
        self.metrics().map(|m| self.epsilon.powf(1.5) * m.speed_sup)
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub plan: SweepPlan,
    pub primary: Vec<RunRecord>,
    pub control: Vec<RunRecord>,
    /// Log–log fit of `d` against `ε`; absent with fewer than four usable runs.
    pub d_fit: Option<RateFit>,
    pub d_monotone: bool,
    /// Largest Hölder constant over the primary branch.
    pub holder_sup: f64,
    /// Largest over smallest Hölder constant over the primary branch.
    pub holder_spread: f64,
}

/// Values at the K nodes, one entry per node.
struct KSample {
    nodes: Vec<usize>,
}

impl KSample {
    fn new(grid: Grid, k: &Ball) -> Self {
        let mut nodes = Vec::new();
        grid.for_each_in_ball(k.center, k.radius, |idx, _| nodes.push(idx));
        nodes.sort_unstable();
        Self { nodes }
    }

    fn take(&self, u: &VectorField) -> Vec<Vec3> {
        self.nodes.iter().map(|&i| u.get(i)).collect()
    }
}

fn coupled_run(
    plan: &SweepPlan,
    cfg: &SimulationConfig,
    sample: &KSample,
    reference: &[Vec<Vec3>],
    fields: &[(VectorField, VectorField)],
) -> Result<RunMetrics> {
    let grid = cfg.grid()?;
    let dv = grid.cell_volume();
    let fam = CutoffFamily::new(plan.profile, cfg.epsilon, CenterPath::Fixed(cfg.body_center), grid)?;
    let norms: Vec<f64> = plan.test_functions.iter().map(|f| f.sobolev_norm(2)).collect();
    let streams: Vec<VectorField> = fields.iter().map(|f| f.1.clone()).collect();
    let phis: Vec<VectorField> = fields.iter().map(|f| f.0.clone()).collect();

    let mut times = Vec::new();
    let mut d_series = Vec::new();
    let mut xi_values = Vec::new();
    let mut clearance = f64::INFINITY;
    let h0 = cfg.body_center;
    let mut displacement: f64 = 0.0;
    let mut speed: f64 = 0.0;
    let energy = Mutex::new(Vec::new());
    let mut imbalance: f64 = 0.0;
    let mut slip: f64 = 0.0;
    run_observed(
        cfg,
        |s| {
            let n = times.len();
            let u = s.velocity();
            let body = s.body().expect("coupled run has a body");
            if n == 0 {
                energy.lock().expect("energy lock").push(s.energy_record());
            }
            let d2: f64 = sample
                .take(&u)
                .iter()
                .zip(&reference[n])
                .map(|(a, b)| (a - b).norm_squared())
                .sum();
            d_series.push((d2 * dv).sqrt());
            xi_values.push(xi_pairings_by_vorticity(&u, &streams, &phis, Some(&fam), body.h));
            clearance = clearance.min(grid.periodic_distance(body.h, plan.k.center) - plan.k.radius - 2.0 * cfg.epsilon);
            times.push(s.time());
            Ok(())
        },
        |s, d| {
            let body = s.body().expect("coupled run has a body");
            energy.lock().expect("energy lock").push(s.energy_record());
            imbalance = imbalance.max(d.momentum.relative_imbalance());
            slip = slip.max(d.slip);
            speed = speed.max(body.l.norm());
            displacement = displacement.max((body.h - h0).norm());
        },
    )?;
    let energy = energy.into_inner().expect("energy lock");
    let xi = XiReport::from_values(times.clone(), xi_values, norms)?;
    let d = d_series.iter().copied().fold(0.0, f64::max);
    Ok(RunMetrics {
        energy_excess: max_energy_excess(&energy),
        times,
        d_series,
        d,
        energy,
        momentum_imbalance: imbalance,
        slip_max: slip,
        speed_sup: speed,
        displacement_sup: displacement,
        k_clearance: clearance,
        xi,
    })
}

/// Run `tasks` on up to `jobs` threads; results keep task order.
fn parallel_map<T: Sync, R: Send>(tasks: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || tasks.len() <= 1 {
        return tasks.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let r = f(&tasks[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("task ran")).collect()
}

/// Reference run, then one coupled run per `(ε, α)`; a failed coupled run is
/// recorded with its error text and the sweep continues.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    plan.validate()?;
    let grid = plan.base.grid()?;
    let sample = KSample::new(grid, &plan.k);
    let mut reference = Vec::new();
    run_observed(
        &plan.reference_config(),
        |s| {
            reference.push(sample.take(&s.velocity()));
            Ok(())
        },
        |_, _| {},
    )?;
    let fields: Vec<(VectorField, VectorField)> = plan
        .test_functions
        .iter()
        .map(|f| Ok((f.sample(grid)?, f.sample_stream(grid)?)))
        .collect::<Result<_>>()?;

    let mut tasks: Vec<(f64, f64)> = plan.epsilons.iter().map(|&e| (e, plan.alpha)).collect();
    if let Some(a) = plan.control_alpha {
        tasks.extend(plan.epsilons.iter().map(|&e| (e, a)));
    }
    let records = parallel_map(&tasks, plan.jobs, |&(eps, alpha)| {
        let cfg = plan.config_for(eps, alpha);
        RunRecord {
            epsilon: eps,
            alpha,
            density: cfg.body_density(),
            outcome: coupled_run(plan, &cfg, &sample, &reference, &fields).map_err(|e| e.to_string()),
        }
    });
    let (primary, control) = records.split_at(plan.epsilons.len());
    let primary = primary.to_vec();
    let control = control.to_vec();

    let ok: Vec<&RunMetrics> = primary.iter().filter_map(RunRecord::metrics).collect();
    let pairs: Vec<(f64, f64)> =
        primary.iter().filter_map(|r| r.metrics().map(|m| (r.epsilon, m.d))).collect();
    let d_fit = fit_rate(&pairs).ok();
    let d_monotone = ok.len() == primary.len() && ok.windows(2).all(|w| w[1].d < w[0].d);
    let holders: Vec<f64> = ok.iter().map(|m| m.xi.holder).collect();
    let holder_sup = holders.iter().copied().fold(0.0, f64::max);
    let holder_min = holders.iter().copied().fold(f64::INFINITY, f64::min);
    let holder_spread = if holders.is_empty() { f64::INFINITY } else { holder_sup / holder_min };
    Ok(SweepReport { plan: plan.clone(), primary, control, d_fit, d_monotone, holder_sup, holder_spread })
}

impl SweepReport {
    pub fn summary_line(&self) -> String {
        format!(
            "d_slope={:.16e} d_monotone={} holder_sup={:.16e}",
            self.d_fit.as_ref().map_or(f64::NAN, |f| f.slope),
            self.d_monotone,
            self.holder_sup
        )
    }

    /// Displacement and scaled-speed checks across the branches.
    pub fn control_heavier_moves_less(&self) -> Option<bool> {
        if self.control.is_empty() {
            return None;
        }
        let mut all = true;
        for (p, c) in self.primary.iter().zip(&self.control) {
            match (p.metrics(), c.metrics()) {
                (Some(p), Some(c)) => all &= c.displacement_sup > p.displacement_sup,
                _ => all = false,
            }
        }
        Some(all)
    }

    pub fn scaled_speed_decreasing(&self) -> bool {
        let v: Vec<Option<f64>> = self.primary.iter().map(RunRecord::scaled_speed).collect();
        v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.plan;
        let _ = writeln!(s, "# sweep");
        let _ = writeln!(s, "alpha={:.16e}", p.alpha);
        if let Some(a) = p.control_alpha {
            let _ = writeln!(s, "control_alpha={a:.16e}");
        }
        let _ = writeln!(
            s,
            "k_center=({:.16e},{:.16e},{:.16e}) k_radius={:.16e}",
            p.k.center.x, p.k.center.y, p.k.center.z, p.k.radius
        );
        for (branch, recs) in [("primary", &self.primary), ("control", &self.control)] {
            for r in recs.iter() {
                let _ = writeln!(s, "\n[{branch} epsilon={:.16e} alpha={:.16e}]", r.epsilon, r.alpha);
                let _ = writeln!(s, "density={:.16e}", r.density);
                match &r.outcome {
                    Err(e) => {
                        let _ = writeln!(s, "status=failed");
                        let _ = writeln!(s, "error={e}");
                    }
                    Ok(m) => {
                        let _ = writeln!(s, "status=ok");
                        let _ = writeln!(s, "d={:.16e}", m.d);
                        let _ = writeln!(s, "energy_excess={:.16e}", m.energy_excess);
                        let _ = writeln!(s, "momentum_imbalance={:.16e}", m.momentum_imbalance);
                        let _ = writeln!(s, "slip_max={:.16e}", m.slip_max);
                        let _ = writeln!(s, "speed_sup={:.16e}", m.speed_sup);
                        let _ = writeln!(s, "scaled_speed={:.16e}", r.epsilon.powf(1.5) * m.speed_sup);
                        let _ = writeln!(s, "displacement_sup={:.16e}", m.displacement_sup);
                        let _ = writeln!(s, "k_clearance={:.16e}", m.k_clearance);
                        let _ = writeln!(s, "xi_holder={:.16e}", m.xi.holder);
                        let _ = writeln!(s, "xi_bound={:.16e}", m.xi.bound);
                        for (t, d) in m.times.iter().zip(&m.d_series) {
                            let _ = writeln!(s, "d(t={t:.16e})={d:.16e}");
                        }
                    }
                }
            }
        }
        let _ = writeln!(s, "\n[summary]");
        let _ = writeln!(s, "{}", self.summary_line());
        let _ = writeln!(s, "holder_spread={:.16e}", self.holder_spread);
        let _ = writeln!(s, "scaled_speed_decreasing={}", self.scaled_speed_decreasing());
        if let Some(c) = self.control_heavier_moves_less() {
            let _ = writeln!(s, "control_moves_more={c}");
        }
        s
    }

    /// `d_vs_eps.dat`, `slip_vs_eps.dat` and one `energy_eps<i>.dat` per
    /// primary run.
    pub fn write_plot_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut d = String::from("# epsilon d\n");
        let mut slip = String::from("# epsilon slip_max\n");
        for r in &self.primary {
            if let Some(m) = r.metrics() {
                let _ = writeln!(d, "{:.16e} {:.16e}", r.epsilon, m.d);
                let _ = writeln!(slip, "{:.16e} {:.16e}", r.epsilon, m.slip_max);
            }
        }
        std::fs::write(dir.join("d_vs_eps.dat"), d)?;
        std::fs::write(dir.join("slip_vs_eps.dat"), slip)?;
        for (i, r) in self.primary.iter().enumerate() {
            if let Some(m) = r.metrics() {
                let mut e = format!("# epsilon={:.16e}\n{}\n", r.epsilon, crate::solver::ENERGY_HEADER);
                for rec in &m.energy {
                    let _ = writeln!(e, "{}", rec.to_line());
                }
                std::fs::write(dir.join(format!("energy_eps{i}.dat")), e)?;
            }
        }
        Ok(())
    }
}
