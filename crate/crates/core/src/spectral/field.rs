use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::lattice::LatticePoint;

/// Fourier coefficient `(û¹, û²)` of a two-component field at one wavenumber.
pub type Mode = [Complex64; 2];

pub const ZERO_MODE: Mode = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

pub(crate) fn mode_norm_sq(m: &Mode) -> f64 {
    m[0].norm_sqr() + m[1].norm_sqr()
}

/// Truncated Fourier series `u = Σ û_j e^{ij·x}` over `0 < |j|_∞ ≤ M`.
///
/// Coefficients are stored sparsely in lexicographic order of `j`; absent
/// modes are zero. The zero mode is never stored. Reality
/// (`û_{-j} = conj(û_j)`) and incompressibility (`j·û_j = 0`) are properties
/// that operations preserve and callers can check, not structural guarantees,
/// because complexified operators act on non-real fields too.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    m: i64,
    modes: BTreeMap<LatticePoint, Mode>,
}

impl FourierField {
    pub fn zero(m: i64) -> Self {
        assert!(m >= 1, "truncation radius must be positive");
        Self { m, modes: BTreeMap::new() }
    }

    /// Truncation radius `M`.
    pub fn truncation(&self) -> i64 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn admits(&self, j: LatticePoint) -> bool {
        !j.is_zero() && j.sup_norm() <= self.m
    }

    pub fn get(&self, j: LatticePoint) -> Mode {
        self.modes.get(&j).copied().unwrap_or(ZERO_MODE)
    }

    pub fn contains(&self, j: LatticePoint) -> bool {
        self.modes.contains_key(&j)
    }

    /// Panics if `j` is zero or outside the truncation.
    pub fn set(&mut self, j: LatticePoint, mode: Mode) {
        assert!(self.admits(j), "mode {:?} outside truncation {}", j, self.m);
        self.modes.insert(j, mode);
    }

    pub fn add_to(&mut self, j: LatticePoint, mode: Mode) {
        assert!(self.admits(j), "mode {:?} outside truncation {}", j, self.m);
        let e = self.modes.entry(j).or_insert(ZERO_MODE);
        e[0] += mode[0];
        e[1] += mode[1];
    }

    /// Sets `û_j = mode` and `û_{-j} = conj(mode)`.
    pub fn set_real_pair(&mut self, j: LatticePoint, mode: Mode) {
        self.set(j, mode);
        self.set(-j, [mode[0].conj(), mode[1].conj()]);
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, &Mode)> + '_ {
        self.modes.iter().map(|(j, m)| (*j, m))
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.modes.keys().copied()
    }

    /// Largest `|j|_∞` actually stored.
    pub fn support_radius(&self) -> i64 {
        self.modes.keys().map(|j| j.sup_norm()).max().unwrap_or(0)
    }

    pub fn from_modes(m: i64, modes: impl IntoIterator<Item = (LatticePoint, Mode)>) -> Self {
        let mut f = Self::zero(m);
        for (j, md) in modes {
            f.set(j, md);
        }
        f
    }

    /// Applies `f(j, û_j)` to every stored mode.
    pub fn map_modes(&self, mut f: impl FnMut(LatticePoint, &Mode) -> Mode) -> Self {
        Self { m: self.m, modes: self.modes.iter().map(|(j, md)| (*j, f(*j, md))).collect() }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_modes(|_, md| [md[0] * a, md[1] * a])
    }

    pub fn scale_complex(&self, a: Complex64) -> Self {
        self.map_modes(|_, md| [md[0] * a, md[1] * a])
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.m = self.m.max(other.m);
        for (j, md) in other.iter() {
            let e = out.modes.entry(j).or_insert(ZERO_MODE);
            e[0] += md[0] * a;
            e[1] += md[1] * a;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Keeps only modes with `|j|_∞ ≤ radius`.
    pub fn truncated(&self, radius: i64) -> Self {
        Self {
            m: self.m,
            modes: self.modes.iter().filter(|(j, _)| j.sup_norm() <= radius).map(|(j, md)| (*j, *md)).collect(),
        }
    }

    /// Same coefficients under a different truncation radius.
    pub fn with_truncation(&self, m: i64) -> Self {
        let mut f = Self::zero(m);
        for (j, md) in self.iter() {
            if f.admits(j) {
                f.set(j, *md);
            }
        }
        f
    }

    /// Keeps only the modes for which `keep` holds.
    pub fn filter(&self, mut keep: impl FnMut(LatticePoint) -> bool) -> Self {
        Self { m: self.m, modes: self.modes.iter().filter(|(j, _)| keep(**j)).map(|(j, md)| (*j, *md)).collect() }
    }

    /// Hermitian coefficient inner product `Σ û_j · conj(v̂_j)`, summed in
    /// lexicographic order of `j`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let mut acc = Complex64::zero();
        for (j, a) in self.iter() {
            if let Some(b) = other.modes.get(&j) {
                acc += a[0] * b[0].conj() + a[1] * b[1].conj();
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.modes.values().map(mode_norm_sq).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    /// Largest coefficient magnitude; zero for the empty field.
    pub fn max_abs(&self) -> f64 {
        self.modes.values().map(|m| libm::sqrt(mode_norm_sq(m))).fold(0.0, f64::max)
    }

    /// The pointwise complex conjugate: coefficient `conj(û_{-j})` at `j`.
    pub fn conjugate(&self) -> Self {
        Self { m: self.m, modes: self.modes.iter().map(|(j, md)| (-*j, [md[0].conj(), md[1].conj()])).collect() }
    }

    /// `max_j |û_{-j} - conj(û_j)|`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, md) in self.iter() {
            let o = self.get(-j);
            let d = (o[0] - md[0].conj()).norm_sqr() + (o[1] - md[1].conj()).norm_sqr();
            worst = worst.max(libm::sqrt(d));
        }
        worst
    }

    /// `max_j |j·û_j| / |j|`.
    pub fn divergence_defect(&self) -> f64 {
        self.iter().map(|(j, md)| (md[0] * j.j1 as f64 + md[1] * j.j2 as f64).norm() / j.norm()).fold(0.0, f64::max)
    }

    /// Replaces each conjugate pair by its symmetric average so the field is
    /// exactly real.
    pub fn enforce_reality(&mut self) {
        let keys: Vec<LatticePoint> = self.modes.keys().copied().filter(|j| j.is_lex_positive()).collect();
        for j in keys {
            let a = self.get(j);
            let b = self.get(-j);
            let avg = [(a[0] + b[0].conj()) * 0.5, (a[1] + b[1].conj()) * 0.5];
            self.modes.insert(j, avg);
            self.modes.insert(-j, [avg[0].conj(), avg[1].conj()]);
        }
        let orphans: Vec<LatticePoint> =
            self.modes.keys().copied().filter(|j| !j.is_lex_positive() && !self.modes.contains_key(&-*j)).collect();
        for j in orphans {
            let a = self.get(j);
            let avg = [a[0] * 0.5, a[1] * 0.5];
            self.modes.insert(j, avg);
            self.modes.insert(-j, [avg[0].conj(), avg[1].conj()]);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.modes
            .values()
            .all(|m| m[0].re.is_finite() && m[0].im.is_finite() && m[1].re.is_finite() && m[1].im.is_finite())
    }
}

/// Real divergence-free field with the single conjugate pair `±j`, whose
/// coefficient at `j` is `amplitude · (-j2, j1)/|j|`.
pub fn single_mode(m: i64, j: LatticePoint, amplitude: Complex64) -> FourierField {
    let mut f = FourierField::zero(m);
    let d = div_free_direction(j);
    f.set_real_pair(j, [amplitude * d[0], amplitude * d[1]]);
    f
}

/// Unit vector `(-j2, j1)/|j|`, orthogonal to `j`.
pub fn div_free_direction(j: LatticePoint) -> [f64; 2] {
    let n = j.norm();
    [-(j.j2 as f64) / n, j.j1 as f64 / n]
}

/// Dense `(2R+1)²` index over `|j|_∞ ≤ R`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DenseIndex {
    pub r: i64,
}

impl DenseIndex {
    pub fn side(&self) -> usize {
        (2 * self.r + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn index(&self, j: LatticePoint) -> Option<usize> {
        if j.sup_norm() > self.r {
            return None;
        }
        Some(((j.j1 + self.r) as usize) * self.side() + (j.j2 + self.r) as usize)
    }

    pub fn point(&self, idx: usize) -> LatticePoint {
        let side = self.side();
        LatticePoint::new((idx / side) as i64 - self.r, (idx % side) as i64 - self.r)
    }
}

/// Random-access view of a field's coefficients: dense when the support is
/// small enough, otherwise backed by the field's own map.
pub(crate) enum Lookup<'a> {
    Dense { index: DenseIndex, values: Vec<Mode> },
    Sparse(&'a FourierField),
}

pub(crate) const DENSE_LOOKUP_RADIUS: i64 = 256;

impl<'a> Lookup<'a> {
    pub fn new(f: &'a FourierField) -> Self {
        let r = f.support_radius();
        let index = DenseIndex { r };
        if r <= DENSE_LOOKUP_RADIUS && index.len() <= 4 * f.len().max(1) + 4096 {
            let mut values = alloc::vec![ZERO_MODE; index.len()];
            for (j, md) in f.iter() {
                values[index.index(j).unwrap()] = *md;
            }
            Lookup::Dense { index, values }
        } else {
            Lookup::Sparse(f)
        }
    }

    pub fn get(&self, j: LatticePoint) -> Option<&Mode> {
        match self {
            Lookup::Dense { index, values } => index.index(j).map(|i| &values[i]),
            Lookup::Sparse(f) => f.modes.get(&j),
        }
    }
}
