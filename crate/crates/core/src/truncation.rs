//! The smooth cut-off `θ`, the modewise truncation operator `W`, and the
//! prepared nonlinearity `𝓕(u) = A^{-1/2} B(W(u), W(u))` with its derivative.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::lattice::LatticePoint;
use crate::spectral::{
    apply_a_power, bilinear_b, leray_mode, trilinear_form, Dealias, FourierField, Mode, SpectralError, SpectralParams,
};

/// Largest outer radius `R` for which `sup_r r ψ(r) ≤ 2`, rounded down.
/// Recomputed by [`CutoffProfile::max_outer_radius`] in the tests.
pub const DEFAULT_OUTER_RADIUS: f64 = 5.317_219_399_434;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("outer radius {outer} must lie in (1, {max}]")]
    OuterRadius { outer: f64, max: f64 },
}

/// Radial profile `ψ` with `ψ = 1` on `[0, 1]`, `ψ = 0` on `[R, ∞)` and the
/// `exp(-1/t)` smooth step in between; `θ(ξ) = ξ ψ(|ξ|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutoffProfile {
    pub inner_radius: f64,
    pub bound: f64,
    pub outer_radius: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { inner_radius: 1.0, bound: 2.0, outer_radius: DEFAULT_OUTER_RADIUS }
    }
}

/// `(σ(z), σ(z)(1 - σ(z)))` for `σ(z) = 1/(1 + e^z)`, without overflow.
fn logistic(z: f64) -> (f64, f64) {
    if z > 0.0 {
        let e = libm::exp(-z);
        (e / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    } else {
        let e = libm::exp(z);
        (1.0 / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    }
}

impl CutoffProfile {
    pub fn with_outer_radius(outer: f64) -> Result<Self, ProfileError> {
        if !(outer > 1.0 && outer <= DEFAULT_OUTER_RADIUS) {
            return Err(ProfileError::OuterRadius { outer, max: DEFAULT_OUTER_RADIUS });
        }
        Ok(Self { outer_radius: outer, ..Self::default() })
    }

    /// `(ψ(r), ψ'(r))`.
    pub fn psi_and_derivative(&self, r: f64) -> (f64, f64) {
        let (r0, r1) = (self.inner_radius, self.outer_radius);
        if r <= r0 {
            return (1.0, 0.0);
        }
        if r >= r1 {
            return (0.0, 0.0);
        }
        // ψ = g(1-t) / (g(1-t) + g(t)) with g(t) = exp(-1/t) is the logistic
        // function of z = 1/(1-t) - 1/t.
        let t = (r - r0) / (r1 - r0);
        let z = 1.0 / (1.0 - t) - 1.0 / t;
        let (psi, w) = logistic(z);
        if w == 0.0 {
            return (psi, 0.0);
        }
        let dz = 1.0 / ((1.0 - t) * (1.0 - t)) + 1.0 / (t * t);
        (psi, -w * dz / (r1 - r0))
    }

    pub fn psi(&self, r: f64) -> f64 {
        self.psi_and_derivative(r).0
    }

    pub fn theta(&self, xi: Complex64) -> Complex64 {
        let r = xi.norm();
        if r <= self.inner_radius {
            return xi;
        }
        xi * self.psi(r)
    }

    /// Real Jacobian of `θ` at `ξ`, viewed as a map of the plane.
    pub fn theta_jacobian(&self, xi: Complex64) -> ThetaJacobian {
        let r = xi.norm();
        if r <= self.inner_radius {
            return ThetaJacobian::IDENTITY;
        }
        let (psi, dpsi) = self.psi_and_derivative(r);
        ThetaJacobian { a: psi + 0.5 * r * dpsi, b: xi * xi * (0.5 * dpsi / r) }
    }

    /// `sup_r r ψ(r)` by a grid search refined by golden sections.
    pub fn theta_sup(&self) -> f64 {
        sup_on(self.inner_radius, self.outer_radius, |r| r * self.psi(r))
    }

    /// `sup_r max(ψ, |ψ + r ψ'|)`, the Lipschitz constant of `θ`.
    pub fn jacobian_bound(&self) -> f64 {
        sup_on(self.inner_radius, self.outer_radius, |r| {
            let (p, d) = self.psi_and_derivative(r);
            p.max((p + r * d).abs())
        })
        .max(1.0)
    }

    /// The largest `R` with `sup_r r ψ_R(r) ≤ 2`, found by bisection.
    pub fn max_outer_radius() -> f64 {
        let sup = |outer: f64| Self { outer_radius: outer, ..Self::default() }.theta_sup();
        let (mut lo, mut hi) = (1.5, 3.0);
        while sup(hi) <= 2.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sup(mid) <= 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        lo
    }
}

fn sup_on(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 4000;
    let h = (b - a) / N as f64;
    let (mut best_i, mut best) = (0usize, f(a));
    for i in 1..=N {
        let v = f(a + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (a + (best_i.max(1) - 1) as f64 * h, a + ((best_i + 1).min(N)) as f64 * h);
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) >= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

/// `θ` with the default profile.
pub fn theta(xi: Complex64) -> Complex64 {
    CutoffProfile::default().theta(xi)
}

/// Jacobian of `θ` with the default profile.
pub fn theta_jacobian(xi: Complex64) -> ThetaJacobian {
    CutoffProfile::default().theta_jacobian(xi)
}

/// The real-linear map `h ↦ a h + b conj(h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaJacobian {
    pub a: f64,
    pub b: Complex64,
}

impl ThetaJacobian {
    pub const IDENTITY: Self = Self { a: 1.0, b: Complex64::new(0.0, 0.0) };

    pub fn apply(&self, h: Complex64) -> Complex64 {
        h * self.a + self.b * h.conj()
    }

    /// Operator norm on the plane, `|a| + |b|`.
    pub fn norm(&self) -> f64 {
        self.a.abs() + self.b.norm()
    }
}

/// `W`, `W'`, `𝓕` and `𝓕'` for fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub params: SpectralParams,
    pub profile: CutoffProfile,
    pub dealias: Dealias,
}

impl Truncation {
    pub fn new(params: SpectralParams, profile: CutoffProfile, dealias: Dealias) -> Self {
        Self { params, profile, dealias }
    }

    fn weight(&self, j: LatticePoint) -> f64 {
        libm::pow(j.norm_sq() as f64, 0.5 * self.params.w_exponent())
    }

    fn scaled(&self, j: LatticePoint, md: &Mode) -> (f64, [Complex64; 2]) {
        let w = self.weight(j) / self.params.rho;
        (w, [md[0] * w, md[1] * w])
    }

    /// `W(u) = Σ_j (ρ/|j|^{3+ε}) P_j θ⃗(|j|^{3+ε} û_j / ρ) e^{ij·x}`.
    ///
    /// Modes where both scaled components are in the identity region of `θ`
    /// are passed through `P_j` without rescaling.
    pub fn apply_w(&self, u: &FourierField) -> FourierField {
        let inner = self.profile.inner_radius;
        u.map_modes(|j, md| {
            let (w, z) = self.scaled(j, md);
            if z[0].norm() <= inner && z[1].norm() <= inner {
                return leray_mode(j, md);
            }
            let t = [self.profile.theta(z[0]) / w, self.profile.theta(z[1]) / w];
            leray_mode(j, &t)
        })
    }

    /// Per-mode Jacobians of `θ⃗` at the scaled coefficients of `u`.
    fn jacobians(&self, u: &FourierField, j: LatticePoint) -> [ThetaJacobian; 2] {
        let (_, z) = self.scaled(j, &u.get(j));
        [self.profile.theta_jacobian(z[0]), self.profile.theta_jacobian(z[1])]
    }

    /// `W'(u)v`, extended complex-linearly: on each mode,
    /// `P_j (a_j v̂_j + b_j v̂_{-j})` componentwise, which equals the real
    /// derivative `P_j Jθ⃗(·)[v̂_j]` whenever `v` is real.
    pub fn apply_w_prime(&self, u: &FourierField, v: &FourierField) -> FourierField {
        let mut out = FourierField::zero(v.truncation().max(u.truncation()));
        let mut touched: Vec<LatticePoint> = v.wavenumbers().collect();
        touched.extend(v.wavenumbers().map(|j| -j));
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            if !out.admits(j) {
                continue;
            }
            let jac = self.jacobians(u, j);
            let (vj, vm) = (v.get(j), v.get(-j));
            let h = [vj[0] * jac[0].a + jac[0].b * vm[0], vj[1] * jac[1].a + jac[1].b * vm[1]];
            let p = leray_mode(j, &h);
            if p != crate::spectral::ZERO_MODE {
                out.set(j, p);
            }
        }
        out
    }

    /// `B(W(u), W(u))`.
    pub fn convection(&self, u: &FourierField) -> Result<FourierField, SpectralError> {
        let wu = self.apply_w(u);
        bilinear_b(&wu, &wu, self.dealias)
    }

    /// `𝓕(u) = A^{-1/2} B(W(u), W(u))`.
    pub fn nonlinearity_f(&self, u: &FourierField) -> Result<FourierField, SpectralError> {
        Ok(apply_a_power(&self.convection(u)?, -0.5))
    }

    /// `𝓕'(u)v = A^{-1/2}[B(W'(u)v, W(u)) + B(W(u), W'(u)v)]`.
    pub fn nonlinearity_f_prime(&self, u: &FourierField, v: &FourierField) -> Result<FourierField, SpectralError> {
        let wu = self.apply_w(u);
        self.f_prime_with(&wu, u, v)
    }

    /// As [`Self::nonlinearity_f_prime`] with `W(u)` precomputed.
    pub fn f_prime_with(
        &self,
        wu: &FourierField,
        u: &FourierField,
        v: &FourierField,
    ) -> Result<FourierField, SpectralError> {
        let wv = self.apply_w_prime(u, v).with_truncation(wu.truncation());
        let a = bilinear_b(&wv, wu, self.dealias)?;
        let b = bilinear_b(wu, &wv, self.dealias)?;
        Ok(apply_a_power(&a.add(&b), -0.5))
    }

    /// `(𝓕'(u)v, w) = -b(W(u), A^{-1/2} w̄, W'(u)v) - b(W'(u)v, A^{-1/2} w̄, W(u))`
    /// evaluated through the trilinear form. Agrees with the strong form when
    /// the products are computed without truncating their inputs.
    pub fn f_prime_weak(&self, u: &FourierField, v: &FourierField, w: &FourierField) -> Complex64 {
        let wu = self.apply_w(u);
        let wv = self.apply_w_prime(u, v);
        let aw = apply_a_power(&w.conjugate(), -0.5);
        -trilinear_form(&wu, &aw, &wv) - trilinear_form(&wv, &aw, &wu)
    }

    /// Upper bound for `‖W(u)‖_{H²}` over all `u` at this truncation:
    /// `(8ρ² Σ_{0<|j|_∞≤M} |j|^{-2-2ε})^{1/2}`.
    pub fn w_h2_bound(&self) -> f64 {
        let m = self.params.m;
        let e = self.params.epsilon;
        let mut sum = 0.0;
        for j1 in -m..=m {
            for j2 in -m..=m {
                let j = LatticePoint::new(j1, j2);
                if !j.is_zero() {
                    sum += libm::pow(j.norm_sq() as f64, -1.0 - e);
                }
            }
        }
        libm::sqrt(8.0 * self.params.rho * self.params.rho * sum)
    }

    /// Upper bound for `‖𝓕(u)‖_{H²}` over all `u` at this truncation:
    /// `c² (Σ_n |n|² S(n)²)^{1/2}` with `c = 2√2 ρ` and
    /// `S(n) = Σ_{p+q=n} |p|^{-3-ε} |q|^{-2-ε}`.
    pub fn f_h2_bound(&self) -> f64 {
        let m = self.params.m;
        let e = self.params.epsilon;
        let side = (2 * m + 1) as usize;
        let idx = |j: LatticePoint| ((j.j1 + m) as usize) * side + (j.j2 + m) as usize;
        let mut a = alloc::vec![0.0; side * side];
        let mut b = alloc::vec![0.0; side * side];
        for j1 in -m..=m {
            for j2 in -m..=m {
                let j = LatticePoint::new(j1, j2);
                if !j.is_zero() {
                    let n2 = j.norm_sq() as f64;
                    a[idx(j)] = libm::pow(n2, -0.5 * (3.0 + e));
                    b[idx(j)] = libm::pow(n2, -0.5 * (2.0 + e));
                }
            }
        }
        let mut total = 0.0;
        for n1 in -m..=m {
            for n2 in -m..=m {
                let n = LatticePoint::new(n1, n2);
                if n.is_zero() {
                    continue;
                }
                let mut s = 0.0;
                for p1 in (n1 - m).max(-m)..=(n1 + m).min(m) {
                    for p2 in (n2 - m).max(-m)..=(n2 + m).min(m) {
                        let p = LatticePoint::new(p1, p2);
                        s += a[idx(p)] * b[idx(n - p)];
                    }
                }
                total += n.norm_sq() as f64 * s * s;
            }
        }
        let c = 2.0 * core::f64::consts::SQRT_2 * self.params.rho;
        c * c * libm::sqrt(total)
    }
}
