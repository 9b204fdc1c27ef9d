//! The restricted operator `ℐ 𝓕'(u) ℐ` on an annulus window, its norm, and
//! the spatial-averaging diagnostics.
//!
//! The window basis is `e_j = d_j e^{ij·x}` with
//! `d_j = sgn(j) (-j2, j1)/|j|`, where `sgn(j) = +1` for lexicographically
//! positive `j` and `-1` otherwise. With this sign choice `conj(e_j) = e_{-j}`,
//! so for real `u` the matrix satisfies `M[-r, -c] = conj(M[r, c])`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;
use rand::Rng;

use crate::dynamics::fit_slope;
use crate::lattice::{is_representable, points_in_shell, LatticePoint, SparseAnnulus};
use crate::random::{complex_gaussian, half_box};
use crate::spectral::{
    div_free_direction, sobolev_norm, Dealias, FourierField, ModeProjector, ProjectorKind, SpectralError,
};
use crate::truncation::Truncation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AveragingError {
    #[error("window reaches |j|_inf = {needed} beyond truncation {m}")]
    OutsideTruncation { needed: i64, m: i64 },
    #[error("power iteration did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One basis direction `d_j e^{ij·x}` of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusMode {
    pub j: LatticePoint,
    pub direction: [f64; 2],
}

impl AnnulusMode {
    pub fn new(j: LatticePoint) -> Self {
        let d = div_free_direction(j);
        let sgn = if j.is_lex_positive() { 1.0 } else { -1.0 };
        Self { j, direction: [sgn * d[0], sgn * d[1]] }
    }
}

/// Ordered divergence-free basis of the modes with `λ - k ≤ |j|² ≤ λ + k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusBasis {
    pub lambda: f64,
    pub k: f64,
    pub modes: Vec<AnnulusMode>,
    /// `partner[i]` is the index of `-j_i`.
    pub partner: Vec<usize>,
}

impl AnnulusBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Two complex coefficients per lattice mode before the
    /// divergence-free constraint.
    pub fn ambient_dimension(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn projector(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::Window, self.lambda, self.k)
    }

    /// `Σ_i c_i e_i` as a (generally complex) field.
    pub fn field(&self, coords: &[Complex64], m: i64) -> FourierField {
        let mut f = FourierField::zero(m);
        for (mode, c) in self.modes.iter().zip(coords) {
            f.set(mode.j, [*c * mode.direction[0], *c * mode.direction[1]]);
        }
        f
    }

    /// `(f, e_i)` for every basis element.
    pub fn coordinates(&self, f: &FourierField) -> Vec<Complex64> {
        self.modes
            .iter()
            .map(|mode| {
                let md = f.get(mode.j);
                md[0] * mode.direction[0] + md[1] * mode.direction[1]
            })
            .collect()
    }

    pub fn basis_field(&self, i: usize, m: i64) -> FourierField {
        let mut c = vec![Complex64::zero(); self.len()];
        c[i] = Complex64::new(1.0, 0.0);
        self.field(&c, m)
    }

    pub fn max_sup_norm(&self) -> i64 {
        self.modes.iter().map(|m| m.j.sup_norm()).max().unwrap_or(0)
    }
}

/// Basis of the window `[λ - k, λ + k]`, lexicographically ordered.
pub fn annulus_basis(lambda: f64, k: f64, m: i64) -> Result<AnnulusBasis, AveragingError> {
    let proj = ModeProjector::new(ProjectorKind::Window, lambda, k);
    let (lo, hi) = proj.eigenvalue_range();
    let (lo, hi) = (lo.unwrap_or(1).max(1), hi.unwrap_or(0));
    let points = if hi >= lo { points_in_shell(lo, hi) } else { Vec::new() };
    if let Some(needed) = points.iter().map(|j| j.sup_norm()).max() {
        if needed > m {
            return Err(AveragingError::OutsideTruncation { needed, m });
        }
    }
    let index: BTreeMap<LatticePoint, usize> = points.iter().enumerate().map(|(i, j)| (*j, i)).collect();
    let partner = points.iter().map(|j| index[&-*j]).collect();
    Ok(AnnulusBasis { lambda, k, modes: points.into_iter().map(AnnulusMode::new).collect(), partner })
}

/// Dense column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[c * rows + r] = f(r, c);
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::zero(); self.rows];
        for c in 0..self.cols {
            let xc = x[c];
            for r in 0..self.rows {
                y[r] += self.data[c * self.rows + r] * xc;
            }
        }
        y
    }

    pub fn adjoint_mul_vec(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self.data[c * self.rows + r].conj() * y[r]).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Column `c` holds the window coordinates of `𝓕'(u) e_c`.
///
/// Products are evaluated by exact direct convolution regardless of the
/// dealiasing mode in `trunc`, since the window sits at wavenumbers far beyond
/// any practical transform grid.
pub fn assemble_restricted_operator(
    u: &FourierField,
    basis: &AnnulusBasis,
    trunc: &Truncation,
) -> Result<ComplexMatrix, AveragingError> {
    let m = u.truncation();
    if basis.max_sup_norm() > m {
        return Err(AveragingError::OutsideTruncation { needed: basis.max_sup_norm(), m });
    }
    let t = Truncation { dealias: Dealias::Direct, params: trunc.params.with_truncation(m), ..*trunc };
    let wu = t.apply_w(u);
    let n = basis.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        let col = t.f_prime_with(&wu, u, &basis.basis_field(c, m))?;
        for (r, z) in basis.coordinates(&col).into_iter().enumerate() {
            out.set(r, c, z);
        }
    }
    Ok(out)
}

/// Entry `(𝓕'(u) e_c, e_r)` through the weak form.
pub fn weak_entry(u: &FourierField, basis: &AnnulusBasis, trunc: &Truncation, r: usize, c: usize) -> Complex64 {
    let m = u.truncation();
    let t = Truncation { params: trunc.params.with_truncation(m), ..*trunc };
    t.f_prime_weak(u, &basis.basis_field(c, m), &basis.basis_field(r, m))
}

/// Iteration cap for [`restricted_norm`].
pub const POWER_ITERATION_CAP: usize = 50_000;
/// Relative tolerance for [`restricted_norm`], on the eigen-residual or the
/// extrapolated Rayleigh-quotient error.
pub const POWER_ITERATION_TOL: f64 = 1e-8;

/// Largest singular value by power iteration on `MᴴM`.
///
/// The start vector is fixed, and iteration stops when
/// `‖MᴴM x - ρ x‖ ≤ tol · ρ ‖x‖` for the Rayleigh quotient `ρ`.
pub fn restricted_norm(matrix: &ComplexMatrix) -> Result<f64, AveragingError> {
    if !matrix.is_finite() {
        return Err(AveragingError::NonFinite);
    }
    let n = matrix.cols;
    if n == 0 || matrix.rows == 0 || matrix.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64;
            Complex64::new(1.0 + 0.5 * libm::cos(1.7 * t), 0.3 * libm::sin(0.9 * t + 0.2))
        })
        .collect();
    normalize(&mut x);
    let (mut prev, mut prev_step) = (0.0, f64::INFINITY);
    for _ in 0..POWER_ITERATION_CAP {
        let mut y = matrix.adjoint_mul_vec(&matrix.mul_vec(&x));
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
        if rho <= 0.0 {
            return Ok(0.0);
        }
        let resid: f64 = libm::sqrt(x.iter().zip(&y).map(|(a, b)| (b - a * rho).norm_sqr()).sum());
        if normalize(&mut y) == 0.0 {
            return Ok(0.0);
        }
        x = y;
        // A near-degenerate top pair stalls the vector but not the value, so
        // also accept once the extrapolated error of the Rayleigh quotient is
        // below tolerance.
        let step = rho - prev;
        let q = step / prev_step;
        let tail = if step >= 0.0 && (0.0..1.0).contains(&q) { step / (1.0 - q) } else { f64::INFINITY };
        if resid <= POWER_ITERATION_TOL * rho || tail <= POWER_ITERATION_TOL * rho {
            let y = matrix.adjoint_mul_vec(&matrix.mul_vec(&x));
            let rho: f64 = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
            return Ok(libm::sqrt(rho.max(0.0)));
        }
        prev = rho;
        prev_step = step;
    }
    Err(AveragingError::NonConvergence { iterations: POWER_ITERATION_CAP })
}

fn normalize(x: &mut [Complex64]) -> f64 {
    let n = libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum());
    if n > 0.0 {
        for z in x.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Largest eigenvalue `≤ x`, or `None` below 1.
pub fn eigenvalue_at_or_below(x: f64) -> Option<u64> {
    let mut n = libm::floor(x) as i64;
    while n >= 1 {
        if is_representable(n as u64) {
            return Some(n as u64);
        }
        n -= 1;
    }
    None
}

/// Tail and product estimates evaluated on one field `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MechanismEstimate {
    /// `‖φ_{>r}‖`, the part of `φ` on `|j| > r`.
    pub tail: f64,
    /// `r^{-2} ‖φ‖_{H²}`, which bounds `tail`.
    pub tail_bound: f64,
    /// `r^{-1} ‖φ‖_{H²}`, the product-projection estimate up to its constant.
    pub product_bound: f64,
}

pub fn mechanism_estimate(phi: &FourierField, r: f64) -> MechanismEstimate {
    let h2 = sobolev_norm(phi, 2.0);
    let tail = libm::sqrt(
        phi.iter()
            .filter(|(j, _)| crate::exact::cmp_int_with_square(j.norm_sq(), r) == core::cmp::Ordering::Greater)
            .map(|(_, md)| md[0].norm_sqr() + md[1].norm_sqr())
            .sum(),
    );
    MechanismEstimate { tail, tail_bound: h2 / (r * r), product_bound: h2 / r }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleNorm {
    pub id: usize,
    /// `‖u‖_{H^{3+ε}}`.
    pub u_norm: f64,
    pub norm: f64,
    pub passes: bool,
    pub mechanism: MechanismEstimate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AveragingReport {
    #[cfg_attr(feature = "serde", serde(rename = "lambda_N"))]
    pub lambda_n: f64,
    /// Center of the window actually used, the certified annulus center.
    pub window_center: f64,
    pub k: f64,
    pub beta: f64,
    pub s: f64,
    /// `λ_N^{s/2}`.
    pub r: f64,
    pub k_over_lambda_s: f64,
    pub basis_dimension: usize,
    pub ambient_dimension: usize,
    pub sampled_norms: Vec<SampleNorm>,
    /// `(1/16) λ_N^{-(3-2β)/2}`.
    pub bound: f64,
    pub max_norm: f64,
    /// Sup of `‖φ_{>r}‖` over the `W`-components of the samples.
    pub mechanism_tail: f64,
    /// Sup of `r^{-2} ‖φ‖_{H²}` over the same components.
    pub mechanism_tail_bound: f64,
    /// Sup of `r^{-1} ‖φ‖_{H²}`.
    pub mechanism_product_bound: f64,
    pub all_pass: bool,
}

/// Truncation radius that covers the window and the given low modes.
pub fn covering_truncation(annulus: &SparseAnnulus, low_radius: i64) -> i64 {
    let hi = annulus.shell_bounds().1.max(1);
    (libm::floor(libm::sqrt(hi as f64)) as i64 + 1).max(low_radius).max(2)
}

/// Assembles the restricted operator for every sample on the certified
/// annulus window and compares each norm with `(1/16) λ_N^{-(3-2β)/2}`.
pub fn check_averaging(
    samples: &[FourierField],
    annulus: &SparseAnnulus,
    trunc: &Truncation,
) -> Result<AveragingReport, AveragingError> {
    let params = trunc.params;
    let m = samples.iter().map(|u| u.truncation()).max().unwrap_or(covering_truncation(annulus, 2));
    let basis = annulus_basis(annulus.lambda, annulus.half_width, m)?;
    let lambda_n = eigenvalue_at_or_below(annulus.lambda).unwrap_or(1) as f64;
    let r = libm::pow(lambda_n, params.s / 2.0);
    let bound = libm::pow(lambda_n, -(3.0 - 2.0 * params.beta) / 2.0) / 16.0;
    let t = Truncation { dealias: Dealias::Direct, params: params.with_truncation(m), ..*trunc };
    let mut sampled = Vec::with_capacity(samples.len());
    for (id, u) in samples.iter().enumerate() {
        let u = u.with_truncation(m);
        let norm =
            if basis.is_empty() { 0.0 } else { restricted_norm(&assemble_restricted_operator(&u, &basis, &t)?)? };
        let mechanism = mechanism_estimate(&t.apply_w(&u), r);
        sampled.push(SampleNorm {
            id,
            u_norm: sobolev_norm(&u, params.w_exponent()),
            norm,
            passes: norm <= bound,
            mechanism,
        });
    }
    let sup = |f: fn(&SampleNorm) -> f64| sampled.iter().map(f).fold(0.0, f64::max);
    Ok(AveragingReport {
        lambda_n,
        window_center: annulus.lambda,
        k: annulus.half_width,
        beta: params.beta,
        s: params.s,
        r,
        k_over_lambda_s: annulus.half_width / libm::pow(lambda_n, params.s),
        basis_dimension: basis.len(),
        ambient_dimension: basis.ambient_dimension(),
        bound,
        max_norm: sup(|x| x.norm),
        mechanism_tail: sup(|x| x.mechanism.tail),
        mechanism_tail_bound: sup(|x| x.mechanism.tail_bound),
        mechanism_product_bound: sup(|x| x.mechanism.product_bound),
        all_pass: sampled.iter().all(|x| x.passes),
        sampled_norms: sampled,
    })
}

/// Log-log slope of the largest sampled norm against `λ_N` across reports.
pub fn fit_averaging_trend(reports: &[AveragingReport]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        reports.iter().filter(|r| r.max_norm > 0.0).map(|r| (libm::log(r.lambda_n), libm::log(r.max_norm))).unzip();
    fit_slope(&xs, &ys)
}

/// Smallest `λ_N` among the reports at which every sample passes.
pub fn smallest_passing_lambda(reports: &[AveragingReport]) -> Option<f64> {
    reports
        .iter()
        .filter(|r| r.all_pass)
        .map(|r| r.lambda_n)
        .fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.min(x))))
}

/// Real samples supported on `0 < |j|_∞ ≤ low_radius` plus the window
/// modes. The first half is uniform in the ball `‖u‖_{H^{3+ε}} ≤ ρ`; the
/// second half is scaled to `10^{1+2U} ρ` with `U` uniform on `[0, 1)`.
///
/// Low-mode amplitudes and radii are drawn from `low_rng` and window
/// amplitudes from `window_rng`, so two windows sampled with identically
/// seeded `low_rng` share their low-mode content up to scale.
pub fn averaging_samples<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    low_rng: &mut R1,
    window_rng: &mut R2,
    basis: &AnnulusBasis,
    trunc: &Truncation,
    m: i64,
    low_radius: i64,
    count: usize,
) -> Vec<FourierField> {
    let s = trunc.params.w_exponent();
    let rho = trunc.params.rho;
    let low = half_box(low_radius.min(m));
    let window: Vec<LatticePoint> = basis.modes.iter().map(|md| md.j).filter(|j| j.is_lex_positive()).collect();
    let dim = 2 * (low.len() + window.len());
    let mut out = Vec::with_capacity(count);
    for id in 0..count {
        let mut f = FourierField::zero(m);
        let mut put = |j: LatticePoint, z: Complex64| {
            // Weighted coordinates make the H^s norm Euclidean.
            let a = z / (core::f64::consts::SQRT_2 * libm::pow(j.norm_sq() as f64, 0.5 * s));
            let d = div_free_direction(j);
            f.set_real_pair(j, [a * d[0], a * d[1]]);
        };
        for &j in &low {
            put(j, complex_gaussian(low_rng));
        }
        for &j in &window {
            put(j, complex_gaussian(window_rng));
        }
        let uni: f64 = low_rng.random();
        let radius = if id < count / 2 {
            rho * libm::pow(uni, 1.0 / dim.max(1) as f64)
        } else {
            rho * libm::pow(10.0, 1.0 + 2.0 * uni)
        };
        out.push(crate::random::with_sobolev_norm(&f, s, radius));
    }
    out
}

/// Scalar Fourier series, used for the cancellation check.
pub type ScalarField = BTreeMap<LatticePoint, Complex64>;

/// Random mean-zero real scalar field on `0 < |j| ≤ r`.
pub fn random_scalar_in_disk<R: Rng + ?Sized>(rng: &mut R, r: f64) -> ScalarField {
    let mut out = ScalarField::new();
    let rr = libm::floor(r) as i64;
    for j1 in -rr..=rr {
        for j2 in -rr..=rr {
            let j = LatticePoint::new(j1, j2);
            if j.is_lex_positive() && crate::exact::cmp_int_with_square(j.norm_sq(), r) != core::cmp::Ordering::Greater
            {
                let z = complex_gaussian(rng);
                out.insert(j, z);
                out.insert(-j, z.conj());
            }
        }
    }
    out
}

/// Largest coefficient of `ℐ(φ · ℐψ)`, computed by direct convolution and
/// restricted to the window.
pub fn cancellation_defect(phi: &ScalarField, psi: &FourierField, window: &ModeProjector) -> f64 {
    let psi_w = psi.filter(|j| window.keeps(j));
    let mut acc: BTreeMap<LatticePoint, [Complex64; 2]> = BTreeMap::new();
    for (p, a) in phi {
        for (n, md) in psi_w.iter() {
            let l = *p + n;
            if l.is_zero() || !window.keeps(l) {
                continue;
            }
            let e = acc.entry(l).or_insert([Complex64::zero(); 2]);
            e[0] += a * md[0];
            e[1] += a * md[1];
        }
    }
    acc.values().map(|md| libm::sqrt(md[0].norm_sqr() + md[1].norm_sqr())).fold(0.0, f64::max)
}
