//! Random real divergence-free fields.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::LatticePoint;
use crate::spectral::{div_free_direction, FourierField};

/// Lexicographically positive `j` with `0 < |j|_∞ ≤ radius`.
pub fn half_box(radius: i64) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    for j1 in -radius..=radius {
        for j2 in -radius..=radius {
            let j = LatticePoint::new(j1, j2);
            if j.is_lex_positive() {
                out.push(j);
            }
        }
    }
    out
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * core::f64::consts::FRAC_1_SQRT_2
}

/// Real divergence-free field on the given lexicographically positive
/// wavenumbers, with `û_j = σ(j) z_j (-j2, j1)/|j|` for standard complex
/// Gaussians `z_j`.
pub fn gaussian_field<R: Rng + ?Sized>(
    rng: &mut R,
    m: i64,
    support: &[LatticePoint],
    sigma: impl Fn(LatticePoint) -> f64,
) -> FourierField {
    let mut f = FourierField::zero(m);
    for &j in support {
        debug_assert!(j.is_lex_positive());
        let a = complex_gaussian(rng) * sigma(j);
        let d = div_free_direction(j);
        f.set_real_pair(j, [a * d[0], a * d[1]]);
    }
    f
}

/// Random field with unit Gaussian amplitudes on `0 < |j|_∞ ≤ radius`.
pub fn random_field<R: Rng + ?Sized>(rng: &mut R, m: i64, radius: i64) -> FourierField {
    gaussian_field(rng, m, &half_box(radius.min(m)), |_| 1.0)
}

/// Rescales `u` so that its `H^s` norm equals `target`. The zero field is
/// returned unchanged.
pub fn with_sobolev_norm(u: &FourierField, s: f64, target: f64) -> FourierField {
    let n = crate::spectral::sobolev_norm(u, s);
    if n == 0.0 {
        return u.clone();
    }
    u.scale(target / n)
}

/// Uniform sample from the ball `‖u‖_{H^s} ≤ radius` restricted to real
/// divergence-free fields on `support` (lexicographically positive
/// representatives).
pub fn uniform_in_ball<R: Rng + ?Sized>(
    rng: &mut R,
    m: i64,
    support: &[LatticePoint],
    s: f64,
    radius: f64,
) -> FourierField {
    // In the weighted coordinates z_j = √2 |j|^s a_j the norm is Euclidean.
    let dir =
        gaussian_field(rng, m, support, |j| 1.0 / (core::f64::consts::SQRT_2 * libm::pow(j.norm_sq() as f64, 0.5 * s)));
    let dim = 2 * support.len();
    if dim == 0 {
        return dir;
    }
    let u: f64 = rng.random();
    let r = radius * libm::pow(u, 1.0 / dim as f64);
    with_sobolev_norm(&dir, s, r)
}
