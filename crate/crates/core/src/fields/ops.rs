use num_complex::Complex64;

use super::spectral::{Fft3, Wavenumbers};
use super::{Grid, ScalarField, VectorField};
use crate::Vec3;

#[inline]
fn times_ik(c: Complex64, k: f64) -> Complex64 {
    Complex64::new(-c.im * k, c.re * k)
}

pub(crate) fn forward3(v: &VectorField) -> [Vec<Complex64>; 3] {
    let fft = Fft3::for_n(v.grid().n());
    [fft.forward(v.component(0)), fft.forward(v.component(1)), fft.forward(v.component(2))]
}

pub(crate) fn inverse3(grid: Grid, spec: [Vec<Complex64>; 3]) -> VectorField {
    let fft = Fft3::for_n(grid.n());
    let [a, b, c] = spec;
    VectorField::from_components(grid, [fft.inverse(a), fft.inverse(b), fft.inverse(c)])
        .expect("inverse transform preserves length")
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    let fft = Fft3::for_n(g.n());
    let fh = fft.forward(f.values());
    let wn = Wavenumbers::new(g);
    let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); fh.len()]);
    for mode in wn.modes() {
        for a in 0..3 {
            out[a][mode.idx] = times_ik(fh[mode.idx], mode.k_odd[a]);
        }
    }
    inverse3(g, out)
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let vh = forward3(v);
    let wn = Wavenumbers::new(g);
    let mut out = vec![Complex64::new(0.0, 0.0); wn.len()];
    for mode in wn.modes() {
        let i = mode.idx;
        out[i] = times_ik(vh[0][i], mode.k_odd[0])
            + times_ik(vh[1][i], mode.k_odd[1])
            + times_ik(vh[2][i], mode.k_odd[2]);
    }
    ScalarField::from_values(g, Fft3::for_n(g.n()).inverse(out)).expect("length preserved")
}

/// Spectral curl of coefficients, `i k_odd × v̂`.
pub(crate) fn curl_spectral(wn: &Wavenumbers, vh: &[Vec<Complex64>; 3]) -> [Vec<Complex64>; 3] {
    let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); wn.len()]);
    for mode in wn.modes() {
        let i = mode.idx;
        let k = mode.k_odd;
        out[0][i] = times_ik(vh[2][i], k[1]) - times_ik(vh[1][i], k[2]);
        out[1][i] = times_ik(vh[0][i], k[2]) - times_ik(vh[2][i], k[0]);
        out[2][i] = times_ik(vh[1][i], k[0]) - times_ik(vh[0][i], k[1]);
    }
    out
}

pub fn curl(v: &VectorField) -> VectorField {
    let g = v.grid();
    let wn = Wavenumbers::new(g);
    inverse3(g, curl_spectral(&wn, &forward3(v)))
}

pub fn laplacian_scalar(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let fft = Fft3::for_n(g.n());
    let mut fh = fft.forward(f.values());
    for mode in Wavenumbers::new(g).modes() {
        fh[mode.idx] *= -mode.k2();
    }
    ScalarField::from_values(g, fft.inverse(fh)).expect("length preserved")
}

pub fn laplacian(v: &VectorField) -> VectorField {
    let g = v.grid();
    let mut vh = forward3(v);
    for mode in Wavenumbers::new(g).modes() {
        let k2 = mode.k2();
        for c in vh.iter_mut() {
            c[mode.idx] *= -k2;
        }
    }
    inverse3(g, vh)
}

/// In-place Leray projection of spectral coefficients using the odd symbol,
/// so that the spectral divergence of the result vanishes identically.
pub(crate) fn project_spectral(wn: &Wavenumbers, vh: &mut [Vec<Complex64>; 3]) {
    for mode in wn.modes() {
        let k2 = mode.k_odd2();
        if k2 == 0.0 {
            continue;
        }
        let i = mode.idx;
        let k = mode.k_odd;
        let kv = vh[0][i] * k[0] + vh[1][i] * k[1] + vh[2][i] * k[2];
        let s = kv / k2;
        for a in 0..3 {
            vh[a][i] -= s * k[a];
        }
    }
}

pub fn leray_project(v: &VectorField) -> VectorField {
    let g = v.grid();
    let wn = Wavenumbers::new(g);
    let mut vh = forward3(v);
    project_spectral(&wn, &mut vh);
    inverse3(g, vh)
}

/// Symmetric 3×3 tensor field, components stored as xx, yy, zz, xy, xz, yz.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    grid: Grid,
    comps: [Vec<f64>; 6],
}

impl SymTensorField {
    fn slot(i: usize, j: usize) -> usize {
        match (i.min(j), i.max(j)) {
            (0, 0) => 0,
            (1, 1) => 1,
            (2, 2) => 2,
            (0, 1) => 3,
            (0, 2) => 4,
            (1, 2) => 5,
            _ => panic!("tensor index out of range"),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[Self::slot(i, j)]
    }

    /// Frobenius norm `sqrt(D:D)` at one node.
    pub fn frobenius_at(&self, idx: usize) -> f64 {
        let c = &self.comps;
        let diag = c[0][idx].powi(2) + c[1][idx].powi(2) + c[2][idx].powi(2);
        let off = c[3][idx].powi(2) + c[4][idx].powi(2) + c[5][idx].powi(2);
        (diag + 2.0 * off).sqrt()
    }

    /// `‖D‖²_{L²} = ∫ D:D dx`.
    pub fn l2_norm_sq(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.frobenius_at(i).powi(2)).sum::<f64>() * self.grid.cell_volume()
    }
}

/// `D(v)_{ij} = ½(∂_j v_i + ∂_i v_j)`.
pub fn deformation_tensor(v: &VectorField) -> SymTensorField {
    let g = v.grid();
    let fft = Fft3::for_n(g.n());
    let wn = Wavenumbers::new(g);
    let vh = forward3(v);
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    let comps = pairs.map(|(i, j)| {
        let mut d = vec![Complex64::new(0.0, 0.0); wn.len()];
        for mode in wn.modes() {
            let q = mode.idx;
            d[q] = 0.5 * (times_ik(vh[i][q], mode.k_odd[j]) + times_ik(vh[j][q], mode.k_odd[i]));
        }
        fft.inverse(d)
    });
    SymTensorField { grid: g, comps }
}

fn trilinear_weights(grid: Grid, x: Vec3) -> ([i64; 3], [f64; 3]) {
    let h = grid.spacing();
    let half = 0.5 * grid.length();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = (x[a] + half) / h;
        let f = s.floor();
        base[a] = f as i64;
        frac[a] = s - f;
    }
    (base, frac)
}

/// Trilinear interpolation with periodic wrap.
pub fn interpolate(f: &ScalarField, x: Vec3) -> f64 {
    let g = f.grid();
    let (b, t) = trilinear_weights(g, x);
    let v = f.values();
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 0 { 1.0 - t[0] } else { t[0] })
                    * (if dy == 0 { 1.0 - t[1] } else { t[1] })
                    * (if dz == 0 { 1.0 - t[2] } else { t[2] });
                if w != 0.0 {
                    acc += w * v[g.index_wrapped(b[0] + dx, b[1] + dy, b[2] + dz)];
                }
            }
        }
    }
    acc
}

pub fn interpolate_vector(v: &VectorField, x: Vec3) -> Vec3 {
    let g = v.grid();
    let (b, t) = trilinear_weights(g, x);
    let mut acc = Vec3::zeros();
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 0 { 1.0 - t[0] } else { t[0] })
                    * (if dy == 0 { 1.0 - t[1] } else { t[1] })
                    * (if dz == 0 { 1.0 - t[2] } else { t[2] });
                if w != 0.0 {
                    acc += w * v.get(g.index_wrapped(b[0] + dx, b[1] + dy, b[2] + dz));
                }
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lebesgue_norm, Exponent};
    use std::f64::consts::PI;

    fn rel_l2(a: &VectorField, b: &VectorField) -> f64 {
        let d = a.sub(b);
        let n = lebesgue_norm(&d, Exponent::Finite(2.0), None).unwrap();
        n / lebesgue_norm(b, Exponent::Finite(2.0), None).unwrap().max(1e-300)
    }

    #[test]
    fn divergence_of_single_mode() {
        let l = 3.0;
        let g = Grid::new(l, 16).unwrap();
        let k = 2.0 * PI / l;
        let v = VectorField::from_fn(g, |x| Vec3::new((k * x.x).sin(), 0.0, 0.0));
        let d = divergence(&v);
        for idx in 0..g.len() {
            let x = g.node(idx);
            assert!((d.values()[idx] - k * (k * x.x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn taylor_green_is_solenoidal() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let v = VectorField::from_fn(g, |x| Vec3::new(x.x.sin() * x.y.cos(), -x.x.cos() * x.y.sin(), 0.0));
        assert!(divergence(&v).max_abs() < 1e-12);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| (x.x + 2.0 * x.y).sin() * (x.z).cos() + (3.0 * x.y).cos());
        let gr = gradient(&f);
        let c = curl(&gr);
        assert!(c.max_norm() < 1e-12 * gr.max_norm());
    }

    #[test]
    fn deformation_of_shear_and_symmetry() {
        // v = (sin y, 0, 0): D_xy = cos(y)/2
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let v = VectorField::from_fn(g, |x| Vec3::new(x.y.sin(), 0.0, 0.0));
        let d = deformation_tensor(&v);
        for idx in 0..g.len() {
            let x = g.node(idx);
            assert!((d.component(0, 1)[idx] - 0.5 * x.y.cos()).abs() < 1e-12);
            assert_eq!(d.component(0, 1)[idx], d.component(1, 0)[idx]);
            assert!(d.component(0, 0)[idx].abs() < 1e-12);
            assert!(d.component(2, 2)[idx].abs() < 1e-12);
        }
    }

    #[test]
    fn projector_annihilates_gradients_and_fixes_solenoidal() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| (x.x + x.z).sin() + (2.0 * x.y).cos());
        let gf = gradient(&f);
        assert!(leray_project(&gf).max_norm() < 1e-10 * gf.max_norm());

        let w = VectorField::from_fn(g, |x| Vec3::new(x.x.sin() * x.y.cos(), -x.x.cos() * x.y.sin(), 0.0));
        assert!(rel_l2(&leray_project(&w), &w) < 1e-12);

        // Helmholtz pair: w + ∇f → w
        let mixed = w.add(&gf);
        assert!(rel_l2(&leray_project(&mixed), &w) < 1e-12);
    }

    #[test]
    fn laplacian_of_mode() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let v = VectorField::from_fn(g, |x| Vec3::new(0.0, (2.0 * x.x + x.z).sin(), 0.0));
        let lap = laplacian(&v);
        assert!(rel_l2(&lap, &v.scaled(-5.0)) < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_ramps() {
        let g = Grid::new(1.0, 8).unwrap();
        let f = ScalarField::from_fn(g, |x| x.x + 2.0 * x.y - x.z);
        let idx = g.index(3, 4, 5);
        assert!((interpolate(&f, g.node(idx)) - f.values()[idx]).abs() < 1e-14);
        // interior cell, away from the periodic seam
        let p = g.node(idx) + Vec3::new(0.3, 0.55, 0.9) * g.spacing();
        assert!((interpolate(&f, p) - (p.x + 2.0 * p.y - p.z)).abs() < 1e-13);
    }
}
