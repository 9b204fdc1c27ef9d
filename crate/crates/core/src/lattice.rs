//! Sums of two squares and sparse annuli of lattice points.
//!
//! The eigenvalues of `-Δ` on the `2π`-periodic torus are the integers
//! `j1² + j2²`. This module enumerates them, measures the gaps between them,
//! and searches for annuli `{λ - k ≤ |x|² ≤ λ + k}` in which every pair of
//! lattice points is far apart. All membership tests compare integers with
//! the stored double bounds exactly (see [`crate::exact`]).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::exact;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid range: need lambda > k >= 0, got lambda = {lambda}, k = {k}")]
    InvalidRange { lambda: f64, k: f64 },
    #[error("invalid exponent: s = {s} is outside (0, 1/6)")]
    InvalidExponent { s: f64 },
    #[error("invalid mu: {mu} (need mu >= 2)")]
    InvalidMu { mu: f64 },
}

/// A wavenumber `j = (j1, j2)`. Ordering is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticePoint {
    pub j1: i64,
    pub j2: i64,
}

impl LatticePoint {
    pub const ZERO: LatticePoint = LatticePoint { j1: 0, j2: 0 };

    pub const fn new(j1: i64, j2: i64) -> Self {
        Self { j1, j2 }
    }

    /// The eigenvalue `|j|²`.
    pub const fn norm_sq(self) -> i64 {
        self.j1 * self.j1 + self.j2 * self.j2
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq() as f64)
    }

    pub const fn sup_norm(self) -> i64 {
        let a = self.j1.abs();
        let b = self.j2.abs();
        if a > b {
            a
        } else {
            b
        }
    }

    pub const fn is_zero(self) -> bool {
        self.j1 == 0 && self.j2 == 0
    }

    /// `j > 0` in lexicographic order.
    pub const fn is_lex_positive(self) -> bool {
        self.j1 > 0 || (self.j1 == 0 && self.j2 > 0)
    }

    pub const fn dot(self, other: Self) -> i64 {
        self.j1 * other.j1 + self.j2 * other.j2
    }

    pub const fn dist_sq(self, other: Self) -> i64 {
        let a = self.j1 - other.j1;
        let b = self.j2 - other.j2;
        a * a + b * b
    }
}

impl core::ops::Neg for LatticePoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.j1, -self.j2)
    }
}

impl core::ops::Add for LatticePoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.j1 + o.j1, self.j2 + o.j2)
    }
}

impl core::ops::Sub for LatticePoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.j1 - o.j1, self.j2 - o.j2)
    }
}

/// A maximal run of non-representable integers between two representable ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapRecord {
    pub lower: u64,
    pub upper: u64,
    pub gap: u64,
}

/// The disjoint bins `N_m = {μ + mκ < |x|² ≤ μ + (m+1)κ}`, `0 ≤ m ≤ J`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusFamily {
    pub mu: f64,
    pub s: f64,
    pub kappa: f64,
    #[cfg_attr(feature = "serde", serde(rename = "J"))]
    pub j_max: i64,
}

/// A closed annulus `[λ - κ/2, λ + κ/2]` whose lattice points are pairwise
/// farther apart than `max(μ^{s/2}, λ^{s/2})`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparseAnnulus {
    pub mu: f64,
    pub s: f64,
    pub m0: i64,
    pub lambda: f64,
    pub half_width: f64,
    /// `μ^{s/2}`.
    pub separation_threshold: f64,
    /// `λ^{s/2}`.
    pub lambda_threshold: f64,
    pub points: Vec<LatticePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StripStats {
    pub mu: f64,
    pub s: f64,
    pub strip_count: u64,
    pub lattice_hits: u64,
}

/// True iff `n = a² + b²` for some integers `a, b`. Exhaustive over `a`.
pub fn is_representable(n: u64) -> bool {
    let mut a = 0u64;
    while a * a <= n {
        let rest = n - a * a;
        let b = rest.isqrt();
        if b * b == rest {
            return true;
        }
        a += 1;
    }
    false
}

/// `table[n]` is true iff `n ≤ limit` is a sum of two squares.
pub fn representable_table(limit: u64) -> Vec<bool> {
    let mut table = vec![false; limit as usize + 1];
    let mut a = 0u64;
    while a * a <= limit {
        let mut b = a;
        while a * a + b * b <= limit {
            table[(a * a + b * b) as usize] = true;
            b += 1;
        }
        a += 1;
    }
    table
}

/// `counts[n]` = number of `j ∈ ℤ²` with `|j|² = n`, for `n ≤ limit`.
fn representation_counts(limit: u64) -> Vec<u64> {
    let mut counts = vec![0u64; limit as usize + 1];
    let r = limit.isqrt() as i64;
    for j1 in -r..=r {
        let rem = limit - (j1 * j1) as u64;
        let b = rem.isqrt() as i64;
        for j2 in -b..=b {
            counts[(j1 * j1 + j2 * j2) as usize] += 1;
        }
    }
    counts
}

/// All eigenvalues in `[1, limit]` with their lattice multiplicities, ascending.
pub fn eigenvalues_with_multiplicity(limit: u64) -> Vec<(u64, u64)> {
    let counts = representation_counts(limit);
    counts.iter().enumerate().skip(1).filter(|(_, &c)| c > 0).map(|(n, &c)| (n as u64, c)).collect()
}

/// Record-setting gaps between consecutive representable integers in `[1, limit]`.
///
/// A gap is recorded when it exceeds every earlier gap. Adjacent representable
/// integers (difference 1) are not gaps, so the running maximum starts at 1.
pub fn record_gaps(limit: u64) -> Vec<GapRecord> {
    let table = representable_table(limit);
    let mut records = Vec::new();
    let mut best = 1u64;
    let mut prev: Option<u64> = None;
    for n in 1..=limit {
        if !table[n as usize] {
            continue;
        }
        if let Some(p) = prev {
            let gap = n - p;
            if gap > best {
                best = gap;
                records.push(GapRecord { lower: p, upper: n, gap });
            }
        }
        prev = Some(n);
    }
    records
}

/// Nonzero lattice points with `lo ≤ |j|² ≤ hi`, in lexicographic order.
pub fn points_in_shell(lo: i64, hi: i64) -> Vec<LatticePoint> {
    let lo = lo.max(1);
    let mut out = Vec::new();
    if hi < lo {
        return out;
    }
    let r = (hi as u64).isqrt() as i64;
    for j1 in -r..=r {
        let base = j1 * j1;
        let top = hi - base;
        if top < 0 {
            continue;
        }
        let bmax = (top as u64).isqrt() as i64;
        let need = lo - base;
        let bmin = if need <= 0 {
            0
        } else {
            let b = (need as u64).isqrt() as i64;
            if b * b < need {
                b + 1
            } else {
                b
            }
        };
        if bmin > bmax {
            continue;
        }
        for j2 in (bmin..=bmax).rev() {
            if j2 != 0 {
                out.push(LatticePoint::new(j1, -j2));
            }
        }
        for j2 in bmin..=bmax {
            out.push(LatticePoint::new(j1, j2));
        }
    }
    out
}

/// Integer bounds `[ceil(λ - k), floor(λ + k)]` of the closed annulus.
pub fn closed_shell_bounds(lambda: f64, k: f64) -> (i64, i64) {
    let (lo, _) = exact::ceil_of_difference(lambda, k);
    let (hi, _) = exact::floor_of_sum(lambda, k);
    (lo, hi)
}

/// Lattice points `j ≠ 0` with `λ - k ≤ |j|² ≤ λ + k`, lexicographic order.
pub fn annulus_points(lambda: f64, k: f64) -> Result<Vec<LatticePoint>, LatticeError> {
    if !(lambda > k && k >= 0.0) || !lambda.is_finite() || !k.is_finite() {
        return Err(LatticeError::InvalidRange { lambda, k });
    }
    let (lo, hi) = closed_shell_bounds(lambda, k);
    Ok(points_in_shell(lo, hi))
}

/// Smallest squared distance over distinct pairs.
pub fn min_pairwise_distance_sq(points: &[LatticePoint]) -> Option<i64> {
    let mut best: Option<i64> = None;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.dist_sq(*b);
            best = Some(best.map_or(d, |x| x.min(d)));
        }
    }
    best
}

pub fn min_pairwise_distance(points: &[LatticePoint]) -> Option<f64> {
    min_pairwise_distance_sq(points).map(|d| libm::sqrt(d as f64))
}

fn check_exponent(mu: f64, s: f64) -> Result<(), LatticeError> {
    if !(s > 0.0 && s < 1.0 / 6.0) {
        return Err(LatticeError::InvalidExponent { s });
    }
    if !(mu >= 2.0) || !mu.is_finite() {
        return Err(LatticeError::InvalidMu { mu });
    }
    Ok(())
}

impl AnnulusFamily {
    pub fn new(mu: f64, s: f64) -> Result<Self, LatticeError> {
        check_exponent(mu, s)?;
        Ok(Self { mu, s, kappa: libm::pow(mu, s), j_max: libm::floor(libm::sqrt(mu)) as i64 })
    }

    /// Integer bounds of the half-open bin `N_m`.
    pub fn bin_bounds(&self, m: i64) -> (i64, i64) {
        let (lo, _) = exact::floor_of_affine(self.mu, m, self.kappa);
        let (hi, _) = exact::floor_of_affine(self.mu, m + 1, self.kappa);
        (lo + 1, hi)
    }

    pub fn bin_points(&self, m: i64) -> Vec<LatticePoint> {
        let (lo, hi) = self.bin_bounds(m);
        points_in_shell(lo, hi)
    }

    /// Integer bounds of the union `N^μ = {μ < |x|² ≤ μ + (J+1)κ}`.
    pub fn union_bounds(&self) -> (i64, i64) {
        let (lo, _) = exact::floor_of_affine(self.mu, 0, self.kappa);
        let (hi, _) = exact::floor_of_affine(self.mu, self.j_max + 1, self.kappa);
        (lo + 1, hi)
    }

    /// `μ^{s/2}`.
    pub fn separation_threshold(&self) -> f64 {
        libm::pow(self.mu, self.s / 2.0)
    }
}

/// True when some pair of `points` is at distance `≤ t`.
fn has_close_pair(points: &[LatticePoint], t: f64) -> bool {
    points
        .iter()
        .enumerate()
        .any(|(i, a)| points[i + 1..].iter().any(|b| exact::cmp_int_with_square(a.dist_sq(*b), t) != Ordering::Greater))
}

impl SparseAnnulus {
    /// `max(μ^{s/2}, λ^{s/2})`, the distance every pair must exceed.
    pub fn certified_threshold(&self) -> f64 {
        self.separation_threshold.max(self.lambda_threshold)
    }

    /// Integer bounds of the closed annulus.
    pub fn shell_bounds(&self) -> (i64, i64) {
        closed_shell_bounds(self.lambda, self.half_width)
    }

    /// The achieved ratio `k / λ^s`.
    pub fn k_over_lambda_s(&self) -> f64 {
        self.half_width / libm::pow(self.lambda, self.s)
    }

    /// Re-checks the stored invariants against a fresh enumeration.
    pub fn verify(&self) -> bool {
        let (lo, hi) = self.shell_bounds();
        let fresh = points_in_shell(lo, hi);
        fresh == self.points && !has_close_pair(&self.points, self.certified_threshold())
    }
}

/// Scans `m = 0..=J` and returns the first bin whose closed annulus
/// `[λ - κ/2, λ + κ/2]`, `λ = μ + (m + ½)κ`, has no pair of lattice points
/// within `max(μ^{s/2}, λ^{s/2})`. Empty annuli are skipped: they hold no
/// eigenvalue, so no cutoff can be placed in them.
///
/// Returns `Ok(None)` when every bin fails, which can happen at small `μ`.
pub fn find_sparse_annulus(mu: f64, s: f64) -> Result<Option<SparseAnnulus>, LatticeError> {
    let family = AnnulusFamily::new(mu, s)?;
    let t_mu = family.separation_threshold();
    for m in 0..=family.j_max {
        // Cheap rejection on the half-open bin first.
        if has_close_pair(&family.bin_points(m), t_mu) {
            continue;
        }
        let lambda = mu + (m as f64 + 0.5) * family.kappa;
        let half_width = family.kappa / 2.0;
        let t_lambda = libm::pow(lambda, s / 2.0);
        let (lo, hi) = closed_shell_bounds(lambda, half_width);
        let points = points_in_shell(lo, hi);
        if points.is_empty() || has_close_pair(&points, t_mu.max(t_lambda)) {
            continue;
        }
        return Ok(Some(SparseAnnulus {
            mu,
            s,
            m0: m,
            lambda,
            half_width,
            separation_threshold: t_mu,
            lambda_threshold: t_lambda,
            points,
        }));
    }
    Ok(None)
}

/// Strip directions `j ≠ 0` with `|j| ≤ radius`.
pub fn strip_directions(radius: f64) -> Vec<LatticePoint> {
    if !(radius >= 1.0) {
        return Vec::new();
    }
    let r = libm::floor(radius) as i64;
    let mut out = Vec::new();
    for j1 in -r..=r {
        for j2 in -r..=r {
            let j = LatticePoint::new(j1, j2);
            if !j.is_zero() && exact::cmp_int_with_square(j.norm_sq(), radius) != Ordering::Greater {
                out.push(j);
            }
        }
    }
    out
}

/// Counts lattice points of `N^μ` lying in some strip `|x·j| < μ^s`,
/// `0 < |j| ≤ μ^{s/2}`.
pub fn strip_statistics(mu: f64, s: f64) -> Result<StripStats, LatticeError> {
    let family = AnnulusFamily::new(mu, s)?;
    let dirs = strip_directions(family.separation_threshold());
    let width = family.kappa;
    let (lo, hi) = family.union_bounds();
    let hits = if dirs.is_empty() {
        0
    } else {
        points_in_shell(lo, hi).into_iter().filter(|x| dirs.iter().any(|j| ((x.dot(*j)).abs() as f64) < width)).count()
            as u64
    };
    Ok(StripStats { mu, s, strip_count: dirs.len() as u64, lattice_hits: hits })
}
