use super::spectral::{Fft3, Wavenumbers};
use super::{NodalField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::Vec3;

/// Lebesgue exponent `q ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(q) if !(q.is_finite() && q >= 1.0) => Err(Error::InvalidExponent(q)),
            e => Ok(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Rectangle-rule `L^q` norm of the pointwise Euclidean magnitude,
/// optionally restricted to the nodes of a ball (periodic distance).
pub fn lebesgue_norm<F: NodalField>(f: &F, q: Exponent, region: Option<Ball>) -> Result<f64> {
    let q = q.validate()?;
    let g = f.grid();
    let comps = f.component_slices();
    let mag = |idx: usize| -> f64 {
        if comps.len() == 1 {
            comps[0][idx].abs()
        } else {
            comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
        }
    };

    let mut acc = 0.0;
    let mut visit = |idx: usize| match q {
        Exponent::Infinity => acc = f64::max(acc, mag(idx)),
        Exponent::Finite(p) => acc += mag(idx).powf(p),
    };
    match region {
        None => (0..g.len()).for_each(&mut visit),
        Some(b) => {
            let half = 0.5 * g.length();
            if b.radius >= half {
                return Err(Error::RegionExceedsBox { radius: b.radius, half_box: half });
            }
            g.for_each_in_ball(b.center, b.radius, |idx, _| visit(idx));
        }
    }
    Ok(match q {
        Exponent::Infinity => acc,
        Exponent::Finite(p) => (acc * g.cell_volume()).powf(1.0 / p),
    })
}

fn sobolev_sum(grid: super::Grid, comps: &[&[f64]], s: i32) -> Result<f64> {
    if !(-3..=2).contains(&s) {
        return Err(Error::UnsupportedSobolev(s));
    }
    let fft = Fft3::for_n(grid.n());
    let wn = Wavenumbers::new(grid);
    let mut total = 0.0;
    for c in comps {
        let ch = fft.forward(c);
        total += wn.modes().map(|m| m.weight * (1.0 + m.k2()).powi(s) * ch[m.idx].norm_sqr()).sum::<f64>();
    }
    Ok((grid.volume() * total).sqrt())
}

/// `‖v‖_{H^s} = (L³ Σ_k (1+|k|²)^s |v̂(k)|²)^{1/2}`, `s ∈ -3..=2`.
pub fn sobolev_norm(v: &VectorField, s: i32) -> Result<f64> {
    sobolev_sum(v.grid(), &v.component_slices(), s)
}

pub fn sobolev_norm_scalar(f: &ScalarField, s: i32) -> Result<f64> {
    sobolev_sum(f.grid(), &f.component_slices(), s)
}
