//! The convection term `(u·∇)v`, the bilinear form `B(u, v) = P_σ((u·∇)v)`
//! and the trilinear form `b(u, v, w) = Σ_{m,n} ∫ u_m ∂_m v_n w_n`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use super::fft::{analyze, synthesize, Fft};
use super::field::{DenseIndex, FourierField, Lookup, Mode, ZERO_MODE};
use super::{leray_project, SpectralError};
use crate::lattice::LatticePoint;

/// How the quadratic product is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Dealias {
    /// Pseudo-spectral with the 2/3 rule: inputs and output are restricted to
    /// `|j|_∞ ≤ ⌊2M/3⌋`.
    #[default]
    TwoThirds,
    /// Pseudo-spectral on a grid large enough to be alias-free for the full
    /// truncation; the output is truncated to `M`.
    Padded,
    /// Direct convolution over stored mode pairs; the output is truncated to
    /// `M`. Exact, and the only option for sparse fields with large `M`.
    Direct,
}

impl Dealias {
    pub fn name(self) -> &'static str {
        match self {
            Dealias::TwoThirds => "two_thirds",
            Dealias::Padded => "padded",
            Dealias::Direct => "direct",
        }
    }
}

impl core::str::FromStr for Dealias {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "two_thirds" | "2/3" => Ok(Dealias::TwoThirds),
            "padded" => Ok(Dealias::Padded),
            "direct" => Ok(Dealias::Direct),
            _ => Err(()),
        }
    }
}

fn check_sizes(u: &FourierField, v: &FourierField) -> Result<i64, SpectralError> {
    if u.truncation() != v.truncation() {
        return Err(SpectralError::SizeMismatch { left: u.truncation(), right: v.truncation() });
    }
    Ok(u.truncation())
}

/// `(u·∇)v` without projection.
pub fn advect(u: &FourierField, v: &FourierField, dealias: Dealias) -> Result<FourierField, SpectralError> {
    let m = check_sizes(u, v)?;
    Ok(match dealias {
        Dealias::TwoThirds => {
            let k = 2 * m / 3;
            pseudo_spectral(&u.truncated(k), &v.truncated(k), k, m)
        }
        Dealias::Padded => pseudo_spectral(u, v, m, m),
        Dealias::Direct => direct(u, v, m),
    })
}

/// `B(u, v) = P_σ((u·∇)v)`.
pub fn bilinear_b(u: &FourierField, v: &FourierField, dealias: Dealias) -> Result<FourierField, SpectralError> {
    Ok(leray_project(&advect(u, v, dealias)?))
}

/// Products of fields supported in `|j|_∞ ≤ k`, read back on the same box.
fn pseudo_spectral(u: &FourierField, v: &FourierField, k: i64, m: i64) -> FourierField {
    if u.is_empty() || v.is_empty() || k == 0 {
        return FourierField::zero(m);
    }
    let n = ((3 * k + 1) as usize).next_power_of_two();
    let fft = Fft::new(n);
    let comp = |f: &FourierField, c: usize| -> Vec<Complex64> { synthesize(&fft, f.iter().map(|(j, md)| (j, md[c]))) };
    let deriv = |c: usize, axis: usize| -> Vec<Complex64> {
        synthesize(
            &fft,
            v.iter().map(|(j, md)| {
                let q = if axis == 0 { j.j1 } else { j.j2 } as f64;
                (j, md[c] * Complex64::new(0.0, q))
            }),
        )
    };
    let u1 = comp(u, 0);
    let u2 = comp(u, 1);
    let mut out = [vec![Complex64::zero(); n * n], vec![Complex64::zero(); n * n]];
    for c in 0..2 {
        let d1 = deriv(c, 0);
        let d2 = deriv(c, 1);
        for i in 0..n * n {
            out[c][i] = u1[i] * d1[i] + u2[i] * d2[i];
        }
    }
    analyze(&fft, out, k, m)
}

/// Exact convolution `Σ_{p+q=ℓ} i(û_p·q) v̂_q`, iterating `p` then `q` in
/// lexicographic order.
fn direct(u: &FourierField, v: &FourierField, m: i64) -> FourierField {
    let reach = (u.support_radius() + v.support_radius()).min(m);
    let dense = reach <= 128;
    let index = DenseIndex { r: reach };
    let mut acc_dense = if dense { vec![ZERO_MODE; index.len()] } else { Vec::new() };
    let mut acc_sparse: BTreeMap<LatticePoint, Mode> = BTreeMap::new();
    let vs: Vec<(LatticePoint, Mode)> = v.iter().map(|(j, md)| (j, *md)).collect();
    for (p, up) in u.iter() {
        for (q, vq) in &vs {
            let l = p + *q;
            if l.is_zero() || l.sup_norm() > m {
                continue;
            }
            let s = (up[0] * q.j1 as f64 + up[1] * q.j2 as f64) * Complex64::i();
            let slot =
                if dense { &mut acc_dense[index.index(l).unwrap()] } else { acc_sparse.entry(l).or_insert(ZERO_MODE) };
            slot[0] += s * vq[0];
            slot[1] += s * vq[1];
        }
    }
    let mut out = FourierField::zero(m);
    if dense {
        for (i, md) in acc_dense.into_iter().enumerate() {
            if md != ZERO_MODE {
                out.set(index.point(i), md);
            }
        }
    } else {
        for (l, md) in acc_sparse {
            out.set(l, md);
        }
    }
    out
}

/// Complex trilinear form `Σ_{p+q+r=0} i(û_p·q)(v̂_q·ŵ_r)`, which is
/// `∫ (u·∇)v · w dx/(2π)²` when the fields are real.
///
/// Evaluated as an exact triad sum over the stored modes of `v` and `w`.
pub fn trilinear_form(u: &FourierField, v: &FourierField, w: &FourierField) -> Complex64 {
    let lu = Lookup::new(u);
    let mut acc = Complex64::zero();
    for (q, vq) in v.iter() {
        for (r, wr) in w.iter() {
            let p = -(q + r);
            if let Some(up) = lu.get(p) {
                let s = (up[0] * q.j1 as f64 + up[1] * q.j2 as f64) * Complex64::i();
                acc += s * (vq[0] * wr[0] + vq[1] * wr[1]);
            }
        }
    }
    acc
}

/// Real trilinear form `b(u, v, w)` for real fields.
pub fn trilinear_b(u: &FourierField, v: &FourierField, w: &FourierField) -> f64 {
    trilinear_form(u, v, w).re
}
