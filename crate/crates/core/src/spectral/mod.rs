//! Fourier representation of mean-zero fields on the `2π`-periodic torus.
//!
//! All inner products and norms are taken with the normalized measure
//! `dx/(2π)²`, so that `(u, v) = Σ_j û_j · conj(v̂_j)` and Sobolev norms are
//! weighted coefficient sums.

mod convection;
mod fft;
mod field;
mod params;
mod projector;

pub use convection::{advect, bilinear_b, trilinear_b, trilinear_form, Dealias};
pub use fft::Fft;
pub use field::{div_free_direction, single_mode, FourierField, Mode, ZERO_MODE};
pub use params::{ParamError, SpectralParams};
pub use projector::{choose_cutoff, CutoffRejection, Hypothesis, ModeProjector, ProjectorFamily, ProjectorKind};

pub(crate) use field::mode_norm_sq;

use crate::lattice::LatticePoint;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("truncation radii differ: {left} vs {right}")]
    SizeMismatch { left: i64, right: i64 },
    #[error("power-gap inequality needs a >= b >= 0 and beta >= 1 (a={a}, b={b}, beta={beta})")]
    Domain { a: f64, b: f64, beta: f64 },
}

/// `P_j w` for a single coefficient.
pub fn leray_mode(j: LatticePoint, w: &Mode) -> Mode {
    let (j1, j2) = (j.j1 as f64, j.j2 as f64);
    let n2 = j.norm_sq() as f64;
    let dot = w[0] * j1 + w[1] * j2;
    [w[0] - dot * (j1 / n2), w[1] - dot * (j2 / n2)]
}

/// Applies `P_j = I - j jᵀ/|j|²` to every coefficient.
pub fn leray_project(w: &FourierField) -> FourierField {
    w.map_modes(leray_mode)
}

/// Multiplies `û_j` by `(|j|²)^p`, i.e. applies `A^p` with `A = -Δ`.
pub fn apply_a_power(u: &FourierField, p: f64) -> FourierField {
    if p == 0.0 {
        return u.clone();
    }
    u.map_modes(|j, md| {
        let f = libm::pow(j.norm_sq() as f64, p);
        [md[0] * f, md[1] * f]
    })
}

/// `(Σ_j |j|^{2s} |û_j|²)^{1/2}` over the stored modes.
pub fn sobolev_norm(u: &FourierField, s: f64) -> f64 {
    libm::sqrt(sobolev_norm_sq(u, s))
}

pub fn sobolev_norm_sq(u: &FourierField, s: f64) -> f64 {
    if s == 0.0 {
        return u.norm_sq();
    }
    u.iter().map(|(j, md)| libm::pow(j.norm_sq() as f64, s) * mode_norm_sq(md)).sum()
}

/// Zeroes every coefficient outside the projector's eigenvalue window.
pub fn project(u: &FourierField, proj: &ModeProjector) -> FourierField {
    u.filter(|j| proj.keeps(j))
}

/// Both sides of `a^β - b^β ≥ ½(a-b)(a^{β-1} + b^{β-1})`.
pub fn power_gap_lower_bound(a: f64, b: f64, beta: f64) -> Result<(f64, f64), SpectralError> {
    if !(a >= b && b >= 0.0 && beta >= 1.0) || !a.is_finite() || !beta.is_finite() {
        return Err(SpectralError::Domain { a, b, beta });
    }
    let lhs = libm::pow(a, beta) - libm::pow(b, beta);
    let rhs = 0.5 * (a - b) * (libm::pow(a, beta - 1.0) + libm::pow(b, beta - 1.0));
    Ok((lhs, rhs))
}
