//! Real-to-complex 3-D FFT on the periodic grid and wavenumber bookkeeping.
//!
//! Coefficients are normalized so that `u(x_j) = Σ_m û(m) e^{2πi m·j/N}` with
//! `j` the node index (phase origin at the corner node); `û(0)` is the mean.
//! Only the half spectrum `kx ∈ [0, N/2]` is stored, layout
//! `kx + (N/2+1)*(ky + N*kz)`.
//!
//! Wavenumbers are `k = 2πm/L`, `m ∈ {-N/2, ..., N/2-1}`. The Nyquist
//! component is dropped from odd-derivative symbols (`k_odd`).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::Grid;

pub struct Fft3 {
    n: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft3 {
    /// Shared plan for resolution `n`.
    pub fn for_n(n: usize) -> Arc<Fft3> {
        let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut rp = RealFftPlanner::<f64>::new();
                let mut cp = FftPlanner::<f64>::new();
                Arc::new(Fft3 {
                    n,
                    r2c: rp.plan_fft_forward(n),
                    c2r: rp.plan_fft_inverse(n),
                    fwd: cp.plan_fft_forward(n),
                    inv: cp.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    fn nh(&self) -> usize {
        self.n / 2 + 1
    }

    /// Forward transform of nodal values (normalized coefficients).
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let nh = self.nh();
        assert_eq!(values.len(), n * n * n);
        let mut data = vec![Complex64::new(0.0, 0.0); nh * n * n];

        let mut line = vec![0.0; n];
        let mut scratch = self.r2c.make_scratch_vec();
        for (row, out) in values.chunks_exact(n).zip(data.chunks_exact_mut(nh)) {
            line.copy_from_slice(row);
            self.r2c
                .process_with_scratch(&mut line, out, &mut scratch)
                .expect("r2c length mismatch");
        }
        self.complex_axes(&mut data, &self.fwd);

        let scale = 1.0 / (n * n * n) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Inverse transform; `data` is consumed as scratch.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        let n = self.n;
        let nh = self.nh();
        assert_eq!(data.len(), nh * n * n);
        self.complex_axes(&mut data, &self.inv);

        let mut out = vec![0.0; n * n * n];
        let mut scratch = self.c2r.make_scratch_vec();
        for (row, dst) in data.chunks_exact_mut(nh).zip(out.chunks_exact_mut(n)) {
            // a real signal has real DC and Nyquist coefficients
            row[0].im = 0.0;
            row[nh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(row, dst, &mut scratch)
                .expect("c2r length mismatch");
        }
        out
    }

    /// Complex transforms along y then z, in place.
    fn complex_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nh = self.nh();
        let mut tmp = vec![Complex64::new(0.0, 0.0); nh * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

        // y axis: each kz plane is [ky][kx]; transpose to [kx][ky]
        for plane in data.chunks_exact_mut(nh * n) {
            for ky in 0..n {
                for kx in 0..nh {
                    tmp[kx * n + ky] = plane[kx + nh * ky];
                }
            }
            fft.process_with_scratch(&mut tmp, &mut scratch);
            for ky in 0..n {
                for kx in 0..nh {
                    plane[kx + nh * ky] = tmp[kx * n + ky];
                }
            }
        }

        // z axis: for each ky gather [kz][kx] into [kx][kz]
        let plane_len = nh * n;
        for ky in 0..n {
            for kz in 0..n {
                let base = nh * ky + plane_len * kz;
                for kx in 0..nh {
                    tmp[kx * n + kz] = data[base + kx];
                }
            }
            fft.process_with_scratch(&mut tmp, &mut scratch);
            for kz in 0..n {
                let base = nh * ky + plane_len * kz;
                for kx in 0..nh {
                    data[base + kx] = tmp[kx * n + kz];
                }
            }
        }
    }
}

/// Wavenumber tables for one grid.
#[derive(Clone, Debug)]
pub struct Wavenumbers {
    pub n: usize,
    /// Integer mode numbers along x (half spectrum, `0..=N/2`).
    pub mx: Vec<i64>,
    /// Integer mode numbers along y and z (`0..N/2-1, -N/2, ..., -1`).
    pub m: Vec<i64>,
    /// `2π/L`.
    pub k0: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Mode {
    /// Flat index into the half spectrum.
    pub idx: usize,
    /// Integer mode numbers.
    pub m: [i64; 3],
    /// Physical wavevector.
    pub k: [f64; 3],
    /// Wavevector with Nyquist components zeroed (odd-derivative symbol).
    pub k_odd: [f64; 3],
    /// Multiplicity of the stored coefficient in Parseval sums (1 or 2).
    pub weight: f64,
}

impl Mode {
    pub fn k2(&self) -> f64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1] + self.k[2] * self.k[2]
    }

    pub fn k_odd2(&self) -> f64 {
        self.k_odd[0] * self.k_odd[0] + self.k_odd[1] * self.k_odd[1] + self.k_odd[2] * self.k_odd[2]
    }
}

impl Wavenumbers {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let half = (n / 2) as i64;
        let mx = (0..=half).collect();
        let m = (0..n as i64).map(|i| if i < half { i } else { i - n as i64 }).collect();
        Self { n, mx, m, k0: 2.0 * std::f64::consts::PI / grid.length() }
    }

    pub fn nh(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.nh() * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterate over all stored modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        let nh = self.nh();
        let n = self.n;
        let half = (n / 2) as i64;
        (0..n).flat_map(move |kz| {
            (0..n).flat_map(move |ky| {
                (0..nh).map(move |kx| {
                    let m = [self.mx[kx], self.m[ky], self.m[kz]];
                    let k = [m[0] as f64 * self.k0, m[1] as f64 * self.k0, m[2] as f64 * self.k0];
                    let mut k_odd = k;
                    for a in 0..3 {
                        if m[a].abs() == half {
                            k_odd[a] = 0.0;
                        }
                    }
                    let weight = if kx == 0 || kx == nh - 1 { 1.0 } else { 2.0 };
                    Mode { idx: kx + nh * (ky + n * kz), m, k, k_odd, weight }
                })
            })
        })
    }

    /// 2/3-rule mask: keep modes with `3|m_a| < N` on every axis.
    pub fn dealias_keep(&self, mode: &Mode) -> bool {
        let n = self.n as i64;
        mode.m.iter().all(|&m| 3 * m.abs() < n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let g = Grid::new(1.0, 16).unwrap();
        let fft = Fft3::for_n(16);
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let back = fft.inverse(fft.forward(&vals));
        let err = vals.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn single_mode_lands_on_its_coefficient() {
        let g = Grid::new(2.0, 16).unwrap();
        let k0 = std::f64::consts::PI; // 2π/L
        let vals: Vec<f64> = (0..g.len())
            .map(|idx| {
                let x = g.node(idx);
                (k0 * 2.0 * x.y + k0 * x.z).cos()
            })
            .collect();
        let spec = Fft3::for_n(16).forward(&vals);
        let wn = Wavenumbers::new(g);
        for mode in wn.modes() {
            let c = spec[mode.idx];
            if mode.m == [0, 2, 1] || mode.m == [0, -2, -1] {
                // corner-node phase origin: (-1)^(m1+m2) relative to the box center
                assert!((c.re + 0.5).abs() < 1e-12 && c.im.abs() < 1e-12, "{c}");
            } else {
                assert!(c.norm() < 1e-12, "{:?} {c}", mode.m);
            }
        }
    }
}
