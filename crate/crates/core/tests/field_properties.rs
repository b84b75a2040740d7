use proptest::prelude::*;
use smallbody::fields::{
    curl, divergence, gradient, lebesgue_norm, leray_project, sobolev_norm, Exponent, Grid, ScalarField, VectorField,
};
use smallbody::modes::BandLimitedField;
use smallbody::Vec3;

const L: f64 = 2.0 * std::f64::consts::PI;
const N: usize = 16;

/// Largest L³ and L⁴ Gagliardo–Nirenberg ratios seen over the corpus, with headroom.
const GN3_CAP: f64 = 0.5;
const GN4_CAP: f64 = 0.35;

type Coeffs = Vec<([i64; 3], [f64; 6])>;

fn coeffs() -> impl Strategy<Value = Coeffs> {
    prop::collection::vec((prop::array::uniform3(-3i64..=3), prop::array::uniform6(-1.0f64..1.0)), 1..6)
}

/// Smooth periodic field, not solenoidal in general.
fn field(grid: Grid, c: &Coeffs) -> VectorField {
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    VectorField::from_fn(grid, |x| {
        let mut v = Vec3::zeros();
        for (m, a) in c {
            let th = k0 * (m[0] as f64 * x.x + m[1] as f64 * x.y + m[2] as f64 * x.z);
            let (s, co) = th.sin_cos();
            v += Vec3::new(a[0], a[1], a[2]) * co + Vec3::new(a[3], a[4], a[5]) * s;
        }
        v
    })
}

fn l2(v: &VectorField) -> f64 {
    lebesgue_norm(v, Exponent::Finite(2.0), None).unwrap()
}

fn grad_l2(v: &VectorField) -> f64 {
    (0..3)
        .map(|c| {
            let f = ScalarField::from_values(v.grid(), v.component(c).to_vec()).unwrap();
            l2(&gradient(&f)).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn divergence_of_curl_vanishes(c in coeffs()) {
        let g = Grid::new(L, N).unwrap();
        let w = curl(&field(g, &c));
        let d = divergence(&w);
        let scale = w.max_norm().max(1e-300) * (N as f64 / 2.0);
        prop_assert!(d.max_abs() <= 1e-10 * scale, "{}", d.max_abs() / scale);
    }

    #[test]
    fn curl_of_gradient_vanishes(c in coeffs()) {
        let g = Grid::new(L, N).unwrap();
        let f = ScalarField::from_values(g, field(g, &c).component(0).to_vec()).unwrap();
        let gr = gradient(&f);
        let w = curl(&gr);
        let scale = gr.max_norm().max(1e-300) * (N as f64 / 2.0);
        prop_assert!(w.max_norm() <= 1e-10 * scale, "{}", w.max_norm() / scale);
    }

    #[test]
    fn leray_projection_is_idempotent(c in coeffs()) {
        let g = Grid::new(L, N).unwrap();
        let v = field(g, &c);
        let p = leray_project(&v);
        let pp = leray_project(&p);
        prop_assert!(l2(&pp.sub(&p)) <= 1e-12 * l2(&v));
    }

    #[test]
    fn sobolev_zero_is_the_l2_norm(c in coeffs()) {
        let g = Grid::new(L, N).unwrap();
        let v = field(g, &c);
        let a = sobolev_norm(&v, 0).unwrap();
        let b = l2(&v);
        prop_assert!((a - b).abs() <= 1e-10 * b, "{a} {b}");
    }

    #[test]
    fn gagliardo_nirenberg_ratios_are_bounded(seed in 0u64..1_000_000, max_mode in 1i64..=4, count in 1usize..=10) {
        let g = Grid::new(L, N).unwrap();
        let v = BandLimitedField::random(L, max_mode, count, seed).unwrap().sample(g).unwrap();
        let (a, d) = (l2(&v), grad_l2(&v));
        let l3 = lebesgue_norm(&v, Exponent::Finite(3.0), None).unwrap();
        let l4 = lebesgue_norm(&v, Exponent::Finite(4.0), None).unwrap();
        let r3 = l3 / (a.sqrt() * d.sqrt());
        let r4 = l4 / (a.powf(0.25) * d.powf(0.75));
        prop_assert!(r3 <= GN3_CAP, "L3 ratio {r3}");
        prop_assert!(r4 <= GN4_CAP, "L4 ratio {r4}");
    }
}
