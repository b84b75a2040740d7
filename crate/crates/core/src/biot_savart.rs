//! Stream functions of solenoidal fields and their anchored variant.
//!
//! `ψ̂(k) = i k × φ̂(k) / |k|²` with the odd-derivative symbol, so that the
//! spectral curl of `ψ` returns `φ` exactly on zero-mean solenoidal input.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::spectral::Wavenumbers;
use crate::fields::{forward3, interpolate_vector, inverse3, sobolev_norm, VectorField};
use crate::Vec3;

/// Relative tolerance on divergence and mean accepted by [`stream_function`].
pub const SOLENOIDAL_TOL: f64 = 1e-8;

/// Spectral Biot–Savart inversion without admissibility checks.
pub(crate) fn stream_spectral(wn: &Wavenumbers, ph: &[Vec<Complex64>; 3]) -> [Vec<Complex64>; 3] {
    let zero = Complex64::new(0.0, 0.0);
    let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![zero; wn.len()]);
    for mode in wn.modes() {
        let k2 = mode.k_odd2();
        if k2 == 0.0 {
            continue;
        }
        let i = mode.idx;
        let k = mode.k_odd;
        let ik = |c: Complex64, kk: f64| Complex64::new(-c.im * kk, c.re * kk);
        out[0][i] = (ik(ph[2][i], k[1]) - ik(ph[1][i], k[2])) / k2;
        out[1][i] = (ik(ph[0][i], k[2]) - ik(ph[2][i], k[0])) / k2;
        out[2][i] = (ik(ph[1][i], k[0]) - ik(ph[0][i], k[1])) / k2;
    }
    out
}

/// `ψ` with `curl ψ = φ`, `div ψ = 0`, zero mean.
pub fn stream_function(phi: &VectorField) -> Result<VectorField> {
    let g = phi.grid();
    let wn = Wavenumbers::new(g);
    let ph = forward3(phi);

    let (mut norm2, mut div2) = (0.0, 0.0);
    for mode in wn.modes() {
        let i = mode.idx;
        let c = [ph[0][i], ph[1][i], ph[2][i]];
        norm2 += mode.weight * c.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let d = c[0] * mode.k_odd[0] + c[1] * mode.k_odd[1] + c[2] * mode.k_odd[2];
        div2 += mode.weight * d.norm_sqr();
    }
    if norm2 == 0.0 {
        return Ok(VectorField::zeros(g));
    }
    let scale = norm2.sqrt();
    let mean = (ph[0][0].norm_sqr() + ph[1][0].norm_sqr() + ph[2][0].norm_sqr()).sqrt();
    if mean > SOLENOIDAL_TOL * scale {
        return Err(Error::NonzeroMean(mean / scale));
    }
    // compare |div φ| against |k|·|φ| at the fundamental so the test is scale-free
    let rel_div = div2.sqrt() / (scale * wn.k0);
    if rel_div > SOLENOIDAL_TOL {
        return Err(Error::NotSolenoidal(rel_div));
    }
    Ok(inverse3(g, stream_spectral(&wn, &ph)))
}

/// `ψ_h(x) = ψ(x) − ψ(h)`, with `ψ(h)` by trilinear interpolation.
pub fn modified_stream_function(psi: &VectorField, h: Vec3) -> VectorField {
    let g = psi.grid();
    let anchor = interpolate_vector(psi, g.wrap(h));
    let comps = std::array::from_fn(|c| psi.component(c).iter().map(|v| v - anchor[c]).collect());
    VectorField::from_components(g, comps).expect("same grid")
}

#[derive(Clone, Debug)]
pub struct StreamPair {
    pub psi: VectorField,
    pub psi_eps: VectorField,
    pub anchor: Vec3,
    pub source: VectorField,
}

impl StreamPair {
    pub fn new(source: VectorField, anchor: Vec3) -> Result<Self> {
        let psi = stream_function(&source)?;
        let psi_eps = modified_stream_function(&psi, anchor);
        Ok(Self { psi, psi_eps, anchor, source })
    }
}

/// Points used to probe `sup_{B(h,R)} |ψ_h|` off the grid.
fn probe_offsets(radius: f64) -> Vec<Vec3> {
    const SPHERE: usize = 96;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = vec![Vec3::zeros()];
    for frac in [0.25, 0.5, 0.75, 1.0] {
        for i in 0..SPHERE {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / SPHERE as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            out.push(Vec3::new(r * a.cos(), r * a.sin(), z) * (frac * radius));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamBoundsReport {
    /// `(R, ‖ψ_h‖_{L∞(B(h,R))} / (R ‖φ‖_{H²}))`.
    pub ratios: Vec<(f64, f64)>,
    /// `‖∇ψ‖_{H²} / ‖φ‖_{H²}`.
    pub global_grad_ratio: f64,
    pub cap: f64,
    pub pass: bool,
}

impl StreamBoundsReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for (r, q) in &self.ratios {
            let _ = writeln!(s, "R={r:.16e} ratio={q:.16e}");
        }
        let _ = writeln!(s, "global_grad_ratio={:.16e}", self.global_grad_ratio);
        s
    }
}

/// Local sup bound of the anchored stream function against `R ‖φ‖_{H²}`.
pub fn verify_stream_bounds(phi: &VectorField, h: Vec3, radii: &[f64], cap: f64) -> Result<StreamBoundsReport> {
    let g = phi.grid();
    let quarter = 0.25 * g.length();
    if radii.is_empty() {
        return Err(Error::Invalid("no radii given".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::Invalid("radii must be positive and ascending".into()));
    }
    let rmax = *radii.last().unwrap();
    if rmax >= quarter {
        return Err(Error::RadiusTooLarge { radius: rmax, max: quarter });
    }

    let pair = StreamPair::new(phi.clone(), h)?;
    let phi_h2 = sobolev_norm(phi, 2)?;

    let wn = Wavenumbers::new(g);
    let psi_hat = forward3(&pair.psi);
    let grad_h2_sq: f64 = wn
        .modes()
        .map(|m| {
            let a = psi_hat[0][m.idx].norm_sqr() + psi_hat[1][m.idx].norm_sqr() + psi_hat[2][m.idx].norm_sqr();
            m.weight * (1.0 + m.k2()).powi(2) * m.k2() * a
        })
        .sum();
    let grad_h2 = (g.volume() * grad_h2_sq).sqrt();

    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let center = g.wrap(h);
    let ratios: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut sup = 0.0f64;
            g.for_each_in_ball(center, r, |idx, _| sup = sup.max(pair.psi_eps.get(idx).norm()));
            for off in probe_offsets(r) {
                sup = sup.max(interpolate_vector(&pair.psi_eps, g.wrap(center + off)).norm());
            }
            (r, ratio(sup, r * phi_h2))
        })
        .collect();
    let global_grad_ratio = ratio(grad_h2, phi_h2);
    let pass = ratios.iter().all(|r| r.1 <= cap) && global_grad_ratio <= cap;
    Ok(StreamBoundsReport { ratios, global_grad_ratio, cap, pass })
}
