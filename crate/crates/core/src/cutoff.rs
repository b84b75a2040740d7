//! Moving cut-off `η_ε(t,x) = η((x − h(t))/ε)` and the test-function family
//! `φ_ε = curl(η_ε ψ_ε)`.
//!
//! The profile vanishes on `[0, 3/2]`, equals one on `[2, ∞)` and is a
//! polynomial smoothstep in between. All quantities use the minimal-image
//! offset `x − h`, so the cut-off is periodic.
//!
//! Scaling measurements use ball quadrature: every integrand of interest is
//! supported in `B(h, 2ε)`, so only the lattice nodes inside that ball are
//! visited and no `N³` array is allocated.

use std::fmt::Write as _;

use crate::biot_savart::{modified_stream_function, stream_function};
use crate::error::{Error, Result};
use crate::fields::{curl, Grid, ScalarField, VectorField};
use crate::fit::fit_rate;
use crate::modes::BandLimitedField;
use crate::{Mat3, Vec3};

pub const INNER: f64 = 1.5;
pub const OUTER: f64 = 2.0;
/// Smallest admissible `ε` in grid spacings.
pub const MIN_CELLS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    /// `s³(10 − 15s + 6s²)`, C².
    Quintic,
    /// `s⁴(35 − 84s + 70s² − 20s³)`, C³.
    Septic,
    /// `η ≡ 1`; only meaningful as a degenerate check.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    pub transition: Transition,
    /// `sup |η'|` over the annulus.
    pub max_d1: f64,
    /// `sup |η''|` over the annulus.
    pub max_d2: f64,
}

impl CutoffProfile {
    pub fn new(transition: Transition) -> Self {
        let mut p = Self { transition, max_d1: 0.0, max_d2: 0.0 };
        const SAMPLES: usize = 20_000;
        for i in 0..=SAMPLES {
            let r = INNER + (OUTER - INNER) * i as f64 / SAMPLES as f64;
            let (_, d1, d2) = p.eval(r);
            p.max_d1 = p.max_d1.max(d1.abs());
            p.max_d2 = p.max_d2.max(d2.abs());
        }
        p
    }

    pub fn quintic() -> Self {
        Self::new(Transition::Quintic)
    }

    pub fn septic() -> Self {
        Self::new(Transition::Septic)
    }

    pub fn unit() -> Self {
        Self::new(Transition::Unit)
    }

    /// `(η, η', η'')` at rescaled radius `r`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if self.transition == Transition::Unit || r >= OUTER {
            return (1.0, 0.0, 0.0);
        }
        if r <= INNER {
            return (0.0, 0.0, 0.0);
        }
        let w = OUTER - INNER;
        let s = (r - INNER) / w;
        let u = 1.0 - s;
        let (v, ds, dss) = match self.transition {
            Transition::Quintic => (
                s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
                30.0 * s * s * u * u,
                60.0 * s * u * (1.0 - 2.0 * s),
            ),
            Transition::Septic => (
                s.powi(4) * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s),
                140.0 * s.powi(3) * u.powi(3),
                420.0 * s * s * u * u * (1.0 - 2.0 * s),
            ),
            Transition::Unit => unreachable!(),
        };
        (v, ds / w, dss / (w * w))
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }
}

/// Center trajectory `t ↦ h(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CenterPath {
    Fixed(Vec3),
    Linear { origin: Vec3, velocity: Vec3 },
    /// Piecewise-linear through `(t, h)` samples with increasing `t`; held
    /// constant outside the sampled interval.
    Sampled(Vec<(f64, Vec3)>),
}

impl CenterPath {
    pub fn position(&self, t: f64) -> Vec3 {
        match self {
            CenterPath::Fixed(h) => *h,
            CenterPath::Linear { origin, velocity } => origin + velocity * t,
            CenterPath::Sampled(s) => {
                let j = s.partition_point(|p| p.0 <= t);
                if j == 0 {
                    return s[0].1;
                }
                if j == s.len() {
                    return s[j - 1].1;
                }
                let (t0, h0) = s[j - 1];
                let (t1, h1) = s[j];
                h0 + (h1 - h0) * ((t - t0) / (t1 - t0))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffFamily {
    pub profile: CutoffProfile,
    pub epsilon: f64,
    pub center: CenterPath,
    pub grid: Grid,
}

impl CutoffFamily {
    pub fn new(profile: CutoffProfile, epsilon: f64, center: CenterPath, grid: Grid) -> Result<Self> {
        let min = MIN_CELLS * grid.spacing();
        if !(epsilon >= min * (1.0 - 1e-12)) {
            return Err(Error::CutoffUnderResolved { epsilon, min });
        }
        let max = grid.length() / 8.0;
        if epsilon > max * (1.0 + 1e-12) {
            return Err(Error::CutoffTooLarge { epsilon, max });
        }
        if let CenterPath::Sampled(s) = &center {
            if s.is_empty() || s.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Invalid("sampled center path needs increasing times".into()));
            }
        }
        Ok(Self { profile, epsilon, center, grid })
    }

    #[inline]
    pub fn eta_at(&self, offset: Vec3) -> f64 {
        self.profile.value(offset.norm() / self.epsilon)
    }

    #[inline]
    pub fn grad_at(&self, offset: Vec3) -> Vec3 {
        let r = offset.norm();
        let (_, d1, _) = self.profile.eval(r / self.epsilon);
        if d1 == 0.0 {
            return Vec3::zeros();
        }
        offset * (d1 / (self.epsilon * r))
    }

    /// `∇²η_ε = η''/ε² x̂x̂ᵀ + η'/(ε r) (I − x̂x̂ᵀ)`.
    #[inline]
    pub fn hessian_at(&self, offset: Vec3) -> Mat3 {
        let r = offset.norm();
        let (_, d1, d2) = self.profile.eval(r / self.epsilon);
        if d1 == 0.0 && d2 == 0.0 {
            return Mat3::zeros();
        }
        let xh = offset / r;
        let p = xh * xh.transpose();
        p * (d2 / (self.epsilon * self.epsilon)) + (Mat3::identity() - p) * (d1 / (self.epsilon * r))
    }

    /// Radius outside which `η_ε ≡ 1`.
    pub fn support_radius(&self) -> f64 {
        OUTER * self.epsilon
    }
}

pub fn evaluate_cutoff(fam: &CutoffFamily, t: f64) -> ScalarField {
    let g = fam.grid;
    let h = fam.center.position(t);
    ScalarField::from_fn(g, |x| fam.eta_at(g.delta(x, h)))
}

/// Nodal `∇η_ε` from the analytic profile derivative.
pub fn cutoff_gradient(fam: &CutoffFamily, t: f64) -> VectorField {
    let g = fam.grid;
    let h = fam.center.position(t);
    VectorField::from_fn(g, |x| fam.grad_at(g.delta(x, h)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingEntry {
    pub quantity: String,
    pub q: f64,
    pub slope: f64,
    pub stderr: f64,
    pub theory: f64,
    /// `(ε, value)` pairs the slope was fitted to.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalingReport {
    pub entries: Vec<ScalingEntry>,
    /// Auxiliary named scalars, e.g. uniform-bound ratios.
    pub extras: Vec<(String, f64)>,
}

impl ScalingReport {
    pub fn find(&self, quantity: &str, q: f64) -> Option<&ScalingEntry> {
        self.entries.iter().find(|e| e.quantity == quantity && (e.q - q).abs() < 1e-12)
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(
                s,
                "quantity={} q={:.16e} slope={:.16e} stderr={:.16e} theory={:.16e}",
                e.quantity, e.q, e.slope, e.stderr, e.theory
            );
        }
        for (k, v) in &self.extras {
            let _ = writeln!(s, "{k}={v:.16e}");
        }
        s
    }

    fn push(&mut self, quantity: &str, q: f64, theory: f64, samples: Vec<(f64, f64)>) -> Result<()> {
        let fit = fit_rate(&samples)?;
        self.entries.push(ScalingEntry {
            quantity: quantity.to_string(),
            q,
            slope: fit.slope,
            stderr: fit.stderr,
            theory,
            samples,
        });
        Ok(())
    }
}

fn check_schedule(fams: &[CutoffFamily]) -> Result<()> {
    if fams.len() < crate::fit::MIN_POINTS {
        return Err(Error::InsufficientData { needed: crate::fit::MIN_POINTS, got: fams.len() });
    }
    let mut eps: Vec<f64> = fams.iter().map(|f| f.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    if eps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("epsilon schedule has repeated values".into()));
    }
    Ok(())
}

/// Fitted exponents of `‖η_ε − 1‖_{L^q}`, `‖∇η_ε‖_{L^q}` and `‖∇²η_ε‖_{L^q}`
/// (Frobenius norm) against `ε`, with theory `3/q`, `(3−q)/q`, `(3−2q)/q`.
pub fn measure_cutoff_scalings(fams: &[CutoffFamily], qs: &[f64], t: f64) -> Result<ScalingReport> {
    check_schedule(fams)?;
    if let Some(&q) = qs.iter().find(|&&q| !(q.is_finite() && q >= 1.0)) {
        return Err(Error::InvalidExponent(q));
    }
    // sums[f][qi] = (Σ|η−1|^q, Σ|∇η|^q, Σ|∇²η|^q) · h³
    let sums: Vec<Vec<[f64; 3]>> = fams
        .iter()
        .map(|fam| {
            let g = fam.grid;
            let mut acc = vec![[0.0; 3]; qs.len()];
            g.for_each_in_ball(fam.center.position(t), fam.support_radius(), |_, d| {
                let a = (fam.eta_at(d) - 1.0).abs();
                let b = fam.grad_at(d).norm();
                let c = fam.hessian_at(d).norm();
                for (slot, &q) in acc.iter_mut().zip(qs) {
                    slot[0] += a.powf(q);
                    slot[1] += b.powf(q);
                    slot[2] += c.powf(q);
                }
            });
            let dv = g.cell_volume();
            acc.iter().map(|s| s.map(|v| v * dv)).collect()
        })
        .collect();

    let mut report = ScalingReport::default();
    let names = ["eta_minus_one", "grad_eta", "hess_eta"];
    for (qi, &q) in qs.iter().enumerate() {
        let theory = [3.0 / q, (3.0 - q) / q, (3.0 - 2.0 * q) / q];
        for k in 0..3 {
            let samples = fams.iter().zip(&sums).map(|(f, s)| (f.epsilon, s[qi][k].powf(1.0 / q))).collect();
            report.push(names[k], q, theory[k], samples)?;
        }
    }
    Ok(report)
}

/// Test function by the curl of the nodal product `η_ε ψ_ε` (spectral curl).
/// Divergence-free to round-off.
pub fn make_test_function(phi: &VectorField, fam: &CutoffFamily, t: f64) -> Result<VectorField> {
    let psi = stream_function(phi)?;
    Ok(test_function_from_stream(&psi, fam, t))
}

/// As [`make_test_function`], reusing a precomputed stream function.
pub fn test_function_from_stream(psi: &VectorField, fam: &CutoffFamily, t: f64) -> VectorField {
    let h = fam.center.position(t);
    let psi_eps = modified_stream_function(psi, h);
    curl(&psi_eps.mul_scalar_field(&evaluate_cutoff(fam, t)))
}

/// Test function by the expanded product rule `η_ε φ + ∇η_ε × ψ_ε`, nodewise.
/// Vanishes exactly wherever `η_ε` does.
pub fn test_function_pointwise(phi: &VectorField, fam: &CutoffFamily, t: f64) -> Result<VectorField> {
    let g = phi.grid();
    let psi = stream_function(phi)?;
    let h = fam.center.position(t);
    let psi_eps = modified_stream_function(&psi, h);
    let mut out = VectorField::zeros(g);
    for idx in 0..g.len() {
        let d = g.delta(g.node(idx), h);
        out.set(idx, phi.get(idx) * fam.eta_at(d) + fam.grad_at(d).cross(&psi_eps.get(idx)));
    }
    Ok(out)
}

/// Fitted exponents of `‖φ_ε − φ‖_{L²}` (theory 3/2) and `‖φ_ε − φ‖_{H¹}`
/// (theory 1/2) for a band-limited `φ`, plus the spread of
/// `‖φ_ε‖_{H¹}/‖φ‖_{H²}` across the schedule.
///
/// `φ_ε − φ = (η_ε − 1)φ + ∇η_ε × ψ_ε` is evaluated in closed form at the
/// lattice nodes of `B(h, 2ε)` with `ψ_ε = ψ − ψ(h)` exact.
pub fn measure_testfn_convergence(phi: &BandLimitedField, fams: &[CutoffFamily], t: f64) -> Result<ScalingReport> {
    check_schedule(fams)?;
    let phi_h1_sq = phi.sobolev_norm(1).powi(2);
    let phi_h2 = phi.sobolev_norm(2);
    if phi_h2 == 0.0 {
        return Err(Error::DegenerateTestFunction);
    }

    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    let mut bound = Vec::new();
    for fam in fams {
        let g = fam.grid;
        if (g.length() - phi.length()).abs() > 1e-12 * g.length() {
            return Err(Error::Invalid("test field period differs from the box".into()));
        }
        let c = fam.center.position(t);
        let psi_c = phi.stream(c);
        let (mut e2, mut de2, mut cross) = (0.0, 0.0, 0.0);
        g.for_each_in_ball(c, fam.support_radius(), |_, d| {
            let x = c + d;
            let eta = fam.eta_at(d);
            let ge = fam.grad_at(d);
            let he = fam.hessian_at(d);
            let f = phi.value(x);
            let gf = phi.gradient(x);
            let ps = phi.stream(x) - psi_c;
            let gps = phi.stream_gradient(x);

            let e = f * (eta - 1.0) + ge.cross(&ps);
            let mut de = Mat3::zeros();
            for j in 0..3 {
                let col = f * ge[j] + gf.column(j) * (eta - 1.0)
                    + he.column(j).into_owned().cross(&ps)
                    + ge.cross(&gps.column(j).into_owned());
                de.set_column(j, &col);
            }
            e2 += e.norm_squared();
            de2 += de.norm_squared();
            cross += f.dot(&e) + gf.dot(&de);
        });
        let dv = g.cell_volume();
        let (e2, de2, cross) = (e2 * dv, de2 * dv, cross * dv);
        l2.push((fam.epsilon, e2.sqrt()));
        h1.push((fam.epsilon, (e2 + de2).sqrt()));
        let phi_eps_h1 = (phi_h1_sq + 2.0 * cross + e2 + de2).max(0.0).sqrt();
        bound.push(phi_eps_h1 / phi_h2);
    }

    let mut report = ScalingReport::default();
    report.push("testfn_l2", 2.0, 1.5, l2)?;
    report.push("testfn_h1", 2.0, 0.5, h1)?;
    let bmax = bound.iter().copied().fold(0.0, f64::max);
    let bmin = bound.iter().copied().fold(f64::INFINITY, f64::min);
    for (fam, b) in fams.iter().zip(&bound) {
        report.extras.push((format!("h1_over_h2[eps={:.16e}]", fam.epsilon), *b));
    }
    report.extras.push(("h1_over_h2_spread".into(), bmax / bmin));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{divergence, lebesgue_norm, Exponent};

    fn fam(eps: f64, n: usize) -> CutoffFamily {
        let g = Grid::new(2.0, n).unwrap();
        CutoffFamily::new(CutoffProfile::quintic(), eps, CenterPath::Fixed(Vec3::new(0.01, -0.02, 0.03)), g).unwrap()
    }

    #[test]
    fn profile_is_c2_monotone_and_bounded() {
        for p in [CutoffProfile::quintic(), CutoffProfile::septic()] {
            let mut prev = 0.0;
            for i in 0..=4000 {
                let r = 1.4 + 0.7 * i as f64 / 4000.0;
                let (v, d1, _) = p.eval(r);
                assert!((0.0..=1.0).contains(&v) && v >= prev && d1 >= 0.0);
                prev = v;
            }
            // continuity of value and two derivatives at both junctions
            for r0 in [INNER, OUTER] {
                let (a, b) = (p.eval(r0 - 1e-9), p.eval(r0 + 1e-9));
                assert!((a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-7 && (a.2 - b.2).abs() < 1e-6);
            }
        }
        let q = CutoffProfile::quintic();
        assert!((q.max_d1 - 3.75).abs() < 1e-6);
        assert!((q.max_d2 - 40.0 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let f = fam(0.25, 32);
        let d = Vec3::new(0.26, 0.25, -0.25);
        let h = 1e-5;
        let hs = f.hessian_at(d);
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let col = (f.grad_at(d + e) - f.grad_at(d - e)) / (2.0 * h);
            for i in 0..3 {
                assert!((hs[(i, j)] - col[i]).abs() < 1e-5 * hs.norm());
            }
            let gj = (f.eta_at(d + e) - f.eta_at(d - e)) / (2.0 * h);
            assert!((f.grad_at(d)[j] - gj).abs() < 1e-6);
        }
    }

    #[test]
    fn plateaus_and_resolution_rules() {
        let g = Grid::new(2.0, 32).unwrap();
        assert!(matches!(
            CutoffFamily::new(CutoffProfile::quintic(), 0.2, CenterPath::Fixed(Vec3::zeros()), g),
            Err(Error::CutoffUnderResolved { .. })
        ));
        assert!(matches!(
            CutoffFamily::new(CutoffProfile::quintic(), 0.3, CenterPath::Fixed(Vec3::zeros()), g),
            Err(Error::CutoffTooLarge { .. })
        ));
        let f = CutoffFamily::new(CutoffProfile::quintic(), 0.25, CenterPath::Fixed(Vec3::zeros()), g).unwrap();
        let eta = evaluate_cutoff(&f, 0.0);
        for idx in 0..g.len() {
            let r = g.periodic_distance(g.node(idx), Vec3::zeros());
            let v = eta.values()[idx];
            if r <= 1.5 * 0.25 {
                assert_eq!(v, 0.0);
            }
            if r >= 2.0 * 0.25 {
                assert_eq!(v, 1.0);
            }
        }
        assert_eq!(lebesgue_norm(&eta, Exponent::Infinity, None).unwrap(), 1.0);
    }

    #[test]
    fn one_cell_shift_translates_nodes() {
        let g = Grid::new(2.0, 32).unwrap();
        let c = Vec3::new(0.1, 0.0, -0.3);
        let mk = |h| CutoffFamily::new(CutoffProfile::quintic(), 0.25, CenterPath::Fixed(h), g).unwrap();
        let a = evaluate_cutoff(&mk(c), 0.0);
        let b = evaluate_cutoff(&mk(c + Vec3::new(0.0, g.spacing(), 0.0)), 0.0);
        for k in 0..32 {
            for j in 0..32 {
                for i in 0..32 {
                    let x = a.values()[g.index(i, j, k)];
                    let y = b.values()[g.index_wrapped(i as i64, j as i64 + 1, k as i64)];
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampled_path_interpolates() {
        let p = CenterPath::Sampled(vec![(0.0, Vec3::zeros()), (1.0, Vec3::new(1.0, 2.0, 0.0))]);
        assert_eq!(p.position(0.5), Vec3::new(0.5, 1.0, 0.0));
        assert_eq!(p.position(-1.0), Vec3::zeros());
        assert_eq!(p.position(3.0), Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn unit_profile_reproduces_source() {
        let g = Grid::new(2.0, 32).unwrap();
        let phi = BandLimitedField::random(2.0, 2, 5, 9).unwrap().sample(g).unwrap();
        let f = CutoffFamily::new(CutoffProfile::unit(), 0.25, CenterPath::Fixed(Vec3::new(0.1, 0.2, 0.0)), g).unwrap();
        let out = make_test_function(&phi, &f, 0.0).unwrap();
        assert!(out.sub(&phi).max_norm() < 1e-10 * phi.max_norm());
    }

    #[test]
    fn test_function_is_solenoidal() {
        let f = fam(0.25, 32);
        let phi = BandLimitedField::random(2.0, 2, 6, 4).unwrap().sample(f.grid).unwrap();
        let out = make_test_function(&phi, &f, 0.0).unwrap();
        let rel = divergence(&out).max_abs() / (out.max_norm() * std::f64::consts::PI);
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn schedule_validation() {
        let fams: Vec<_> = [0.25, 0.25 * 0.5].iter().map(|&e| fam(e, 64)).collect();
        assert!(matches!(measure_cutoff_scalings(&fams, &[2.0], 0.0), Err(Error::InsufficientData { .. })));
    }
}
