//! Divergence-free trigonometric polynomials with closed-form point
//! evaluation, used as smooth test fields and oracles.
//!
//! `φ(x) = Σ_j Re(a_j e^{i k_j·x})` with `a_j ⊥ k_j`, `k_j = 2π m_j / L`. The
//! stored modes are distinct and no two are opposite, so `‖φ‖²_{L²} = L³ Σ |a_j|²/2`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{Grid, VectorField};
use crate::{Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct WaveMode {
    pub m: [i64; 3],
    pub k: Vec3,
    pub re: Vec3,
    pub im: Vec3,
}

impl WaveMode {
    /// `(cos θ, sin θ)` with `θ = k·x`.
    #[inline]
    fn phase(&self, x: Vec3) -> (f64, f64) {
        let (s, c) = self.k.dot(&x).sin_cos();
        (c, s)
    }

    /// Stream-function amplitude `i k × a / |k|²` as (re, im).
    fn stream_amplitude(&self) -> (Vec3, Vec3) {
        let k2 = self.k.norm_squared();
        // i(k × (re + i im)) = -k × im + i k × re
        (-self.k.cross(&self.im) / k2, self.k.cross(&self.re) / k2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandLimitedField {
    length: f64,
    modes: Vec<WaveMode>,
}

fn canonical(m: [i64; 3]) -> [i64; 3] {
    let first = m.iter().copied().find(|&c| c != 0).unwrap_or(0);
    if first < 0 {
        [-m[0], -m[1], -m[2]]
    } else {
        m
    }
}

impl BandLimitedField {
    /// Build from `(m, re(a), im(a))` triples; amplitudes are projected onto
    /// the plane orthogonal to `k`.
    pub fn from_modes(length: f64, modes: &[([i64; 3], Vec3, Vec3)]) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Invalid(format!("box length must be positive, got {length}")));
        }
        let k0 = 2.0 * std::f64::consts::PI / length;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(modes.len());
        for &(m, re, im) in modes {
            if m == [0, 0, 0] {
                return Err(Error::Invalid("zero mode is not allowed".into()));
            }
            if !seen.insert(canonical(m)) {
                return Err(Error::Invalid(format!("mode {m:?} repeated (up to sign)")));
            }
            let k = Vec3::new(m[0] as f64, m[1] as f64, m[2] as f64) * k0;
            let kh = k.normalize();
            out.push(WaveMode { m, k, re: re - kh * kh.dot(&re), im: im - kh * kh.dot(&im) });
        }
        Ok(Self { length, modes: out })
    }

    /// `count` distinct random modes with `|m_a| ≤ max_mode`, amplitudes
    /// damped like `1/(1+|m|²)`.
    pub fn random(length: f64, max_mode: i64, count: usize, seed: u64) -> Result<Self> {
        let side = 2 * max_mode + 1;
        let available = ((side * side * side - 1) / 2) as usize;
        if max_mode < 1 || count == 0 || count > available {
            return Err(Error::Invalid(format!(
                "cannot draw {count} distinct modes with |m| <= {max_mode}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut modes = Vec::with_capacity(count);
        while modes.len() < count {
            let m = canonical([
                rng.gen_range(-max_mode..=max_mode),
                rng.gen_range(-max_mode..=max_mode),
                rng.gen_range(-max_mode..=max_mode),
            ]);
            if m == [0, 0, 0] || !seen.insert(m) {
                continue;
            }
            let m2 = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64;
            let amp = 1.0 / (1.0 + m2);
            let mut draw = || Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let re = draw() * amp;
            let im = draw() * amp;
            modes.push((m, re, im));
        }
        Self::from_modes(length, &modes)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> &[WaveMode] {
        &self.modes
    }

    /// Largest `|m_a|` over all modes and axes.
    pub fn max_mode(&self) -> i64 {
        self.modes.iter().flat_map(|w| w.m.iter().map(|c| c.abs())).max().unwrap_or(0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|w| WaveMode { re: w.re * c, im: w.im * c, ..w.clone() })
            .collect();
        Self { length: self.length, modes }
    }

    /// `x ↦ φ(x - shift)`.
    pub fn translated(&self, shift: Vec3) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|w| {
                // a e^{-ik·s}
                let (s, c) = w.k.dot(&shift).sin_cos();
                WaveMode { re: w.re * c + w.im * s, im: w.im * c - w.re * s, ..w.clone() }
            })
            .collect();
        Self { length: self.length, modes }
    }

    pub fn value(&self, x: Vec3) -> Vec3 {
        self.modes.iter().fold(Vec3::zeros(), |acc, w| {
            let (c, s) = w.phase(x);
            acc + w.re * c - w.im * s
        })
    }

    /// `G[(i, j)] = ∂_j φ_i`.
    pub fn gradient(&self, x: Vec3) -> Mat3 {
        self.modes.iter().fold(Mat3::zeros(), |acc, w| {
            let (c, s) = w.phase(x);
            acc + (-w.re * s - w.im * c) * w.k.transpose()
        })
    }

    /// Stream function `ψ` with `curl ψ = φ`, `div ψ = 0`.
    pub fn stream(&self, x: Vec3) -> Vec3 {
        self.modes.iter().fold(Vec3::zeros(), |acc, w| {
            let (br, bi) = w.stream_amplitude();
            let (c, s) = w.phase(x);
            acc + br * c - bi * s
        })
    }

    /// `G[(i, j)] = ∂_j ψ_i`.
    pub fn stream_gradient(&self, x: Vec3) -> Mat3 {
        self.modes.iter().fold(Mat3::zeros(), |acc, w| {
            let (br, bi) = w.stream_amplitude();
            let (c, s) = w.phase(x);
            acc + (-br * s - bi * c) * w.k.transpose()
        })
    }

    /// Exact `‖φ‖_{H^s}` over one period cell.
    pub fn sobolev_norm(&self, s: i32) -> f64 {
        let sum: f64 = self
            .modes
            .iter()
            .map(|w| (1.0 + w.k.norm_squared()).powi(s) * 0.5 * (w.re.norm_squared() + w.im.norm_squared()))
            .sum();
        (self.length.powi(3) * sum).sqrt()
    }

    fn check_grid(&self, grid: Grid) -> Result<()> {
        if (grid.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::Invalid(format!(
                "field period {} differs from box length {}",
                self.length,
                grid.length()
            )));
        }
        if 2 * self.max_mode() >= grid.n() as i64 {
            return Err(Error::Invalid(format!(
                "mode {} not resolved on N = {}",
                self.max_mode(),
                grid.n()
            )));
        }
        Ok(())
    }

    pub fn sample(&self, grid: Grid) -> Result<VectorField> {
        self.check_grid(grid)?;
        Ok(VectorField::from_fn(grid, |x| self.value(x)))
    }

    pub fn sample_stream(&self, grid: Grid) -> Result<VectorField> {
        self.check_grid(grid)?;
        Ok(VectorField::from_fn(grid, |x| self.stream(x)))
    }
}
