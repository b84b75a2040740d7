use smallbody::biot_savart::{modified_stream_function, stream_function};
use smallbody::fields::{curl, Grid};
use smallbody::modes::BandLimitedField;
use smallbody::Vec3;

const L: f64 = 2.0 * std::f64::consts::PI;

/// Bound on `sup_B |∂_t ψ_h| / (R‖∂_tφ‖_{H²} + |h'|‖φ‖_{H²})` along the path.
const TIME_DERIVATIVE_CAP: f64 = 0.05;

#[test]
fn curl_inverts_the_stream_function_on_fifty_fields() {
    let g = Grid::new(L, 32).unwrap();
    for seed in 0..50 {
        let phi = BandLimitedField::random(L, 4, 12, 1000 + seed).unwrap().sample(g).unwrap();
        let back = curl(&stream_function(&phi).unwrap());
        let rel = back.sub(&phi).max_norm() / phi.max_norm();
        assert!(rel <= 1e-8, "seed {seed}: {rel}");
    }
}

#[test]
fn anchored_stream_function_keeps_its_curl() {
    let g = Grid::new(L, 32).unwrap();
    let phi = BandLimitedField::random(L, 3, 8, 5).unwrap().sample(g).unwrap();
    let psi = stream_function(&phi).unwrap();
    let anchored = modified_stream_function(&psi, Vec3::new(0.3, -1.1, 2.0));
    assert!(curl(&anchored).sub(&phi).max_norm() <= 1e-10 * phi.max_norm());
}

/// `φ(t) = cos t φ_a + sin t φ_b` with disjoint modes, so its stream function
/// and both H² norms are closed-form.
struct Rotating {
    a: BandLimitedField,
    b: BandLimitedField,
}

impl Rotating {
    fn new(seed: u64) -> Self {
        let f = BandLimitedField::random(L, 2, 8, seed).unwrap();
        let t: Vec<_> = f.modes().iter().map(|w| (w.m, w.re, w.im)).collect();
        Self { a: BandLimitedField::from_modes(L, &t[..4]).unwrap(), b: BandLimitedField::from_modes(L, &t[4..]).unwrap() }
    }

    fn stream(&self, x: Vec3, t: f64) -> Vec3 {
        self.a.stream(x) * t.cos() + self.b.stream(x) * t.sin()
    }

    fn h2(&self, ca: f64, cb: f64) -> f64 {
        (ca.powi(2) * self.a.sobolev_norm(2).powi(2) + cb.powi(2) * self.b.sobolev_norm(2).powi(2)).sqrt()
    }
}

/// Lipschitz path with a corner at `t = 0.5`.
fn path(t: f64) -> (Vec3, Vec3) {
    let v1 = Vec3::new(1.5, -0.5, 0.25);
    let v2 = Vec3::new(-0.75, 1.0, 0.5);
    if t < 0.5 {
        (v1 * t, v1)
    } else {
        (v1 * 0.5 + v2 * (t - 0.5), v2)
    }
}

#[test]
fn anchored_stream_time_derivative_is_bounded_along_a_path() {
    let dirs: Vec<Vec3> = (0..26)
        .map(|i| Vec3::new((i % 3) as f64 - 1.0, ((i / 3) % 3) as f64 - 1.0, (i / 9) as f64 - 1.0))
        .filter(|d| d.norm() > 0.0)
        .map(|d| d.normalize())
        .collect();
    let dt = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let f = Rotating::new(seed);
        for &t in &[0.1, 0.3, 0.7, 0.9] {
            let (h, hdot) = path(t);
            let psi_h = |x: Vec3, s: f64| f.stream(x, s) - f.stream(path(s).0, s);
            for r in [L / 8.0, L / 16.0, L / 32.0, L / 64.0] {
                let mut sup: f64 = 0.0;
                for d in &dirs {
                    for frac in [0.25, 0.5, 1.0] {
                        let x = h + d * (r * frac);
                        let deriv = (psi_h(x, t + dt) - psi_h(x, t - dt)) / (2.0 * dt);
                        sup = sup.max(deriv.norm());
                    }
                }
                let scale = r * f.h2(-t.sin(), t.cos()) + hdot.norm() * f.h2(t.cos(), t.sin());
                worst = worst.max(sup / scale);
            }
        }
    }
    assert!(worst <= TIME_DERIVATIVE_CAP, "{worst}");
}
