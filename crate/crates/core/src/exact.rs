//! Exact comparisons between integers and sums of doubles.
//!
//! Every finite double is a dyadic rational `m * 2^e`. Sums, integer
//! multiples and squares of a few doubles stay dyadic, so lattice membership
//! tests can be decided without rounding as long as the mantissas fit in an
//! `i128`. When they do not, callers fall back to plain double arithmetic and
//! the result is flagged as inexact.

use core::cmp::Ordering;

use num_traits::Float;

/// A dyadic rational `mant * 2^exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    mant: i128,
    exp: i32,
}

impl Dyadic {
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let (m, e, sign) = x.integer_decode();
        let mant = i128::from(m) * i128::from(sign);
        Some(Self { mant, exp: i32::from(e) }.normalized())
    }

    pub fn from_int(n: i64) -> Self {
        Self { mant: i128::from(n), exp: 0 }.normalized()
    }

    fn normalized(self) -> Self {
        if self.mant == 0 {
            return Self { mant: 0, exp: 0 };
        }
        let tz = self.mant.trailing_zeros() as i32;
        Self { mant: self.mant >> tz, exp: self.exp + tz }
    }

    /// Rescale both operands to the smaller exponent.
    fn align(self, other: Self) -> Option<(i128, i128, i32)> {
        let exp = self.exp.min(other.exp);
        let a = shl_checked(self.mant, self.exp - exp)?;
        let b = shl_checked(other.mant, other.exp - exp)?;
        Some((a, b, exp))
    }

    pub fn checked_add(self, other: Self) -> Option<Self> {
        let (a, b, exp) = self.align(other)?;
        Some(Self { mant: a.checked_add(b)?, exp }.normalized())
    }

    pub fn checked_neg(self) -> Option<Self> {
        Some(Self { mant: self.mant.checked_neg()?, exp: self.exp })
    }

    pub fn checked_mul(self, other: Self) -> Option<Self> {
        Some(Self { mant: self.mant.checked_mul(other.mant)?, exp: self.exp.checked_add(other.exp)? }.normalized())
    }

    pub fn floor(self) -> Option<i64> {
        let v = if self.exp >= 0 {
            shl_checked(self.mant, self.exp)?
        } else {
            let sh = -self.exp;
            if sh >= 127 {
                if self.mant >= 0 {
                    0
                } else {
                    -1
                }
            } else {
                self.mant >> sh
            }
        };
        i64::try_from(v).ok()
    }

    pub fn ceil(self) -> Option<i64> {
        self.checked_neg()?.floor()?.checked_neg()
    }

    pub fn cmp_int(self, n: i64) -> Option<Ordering> {
        let (a, b, _) = self.align(Self::from_int(n))?;
        Some(a.cmp(&b))
    }
}

fn shl_checked(x: i128, sh: i32) -> Option<i128> {
    if !(0..127).contains(&sh) {
        return if x == 0 && sh >= 0 { Some(0) } else { None };
    }
    let r = x.checked_shl(sh as u32)?;
    if r >> sh == x {
        Some(r)
    } else {
        None
    }
}

/// `floor(a + b)` evaluated exactly when possible. The flag is `false` when
/// the fallback double sum was used.
pub fn floor_of_sum(a: f64, b: f64) -> (i64, bool) {
    match Dyadic::from_f64(a).zip(Dyadic::from_f64(b)).and_then(|(x, y)| x.checked_add(y)).and_then(Dyadic::floor) {
        Some(v) => (v, true),
        None => (libm::floor(a + b) as i64, false),
    }
}

/// `ceil(a - b)` evaluated exactly when possible.
pub fn ceil_of_difference(a: f64, b: f64) -> (i64, bool) {
    match Dyadic::from_f64(a)
        .zip(Dyadic::from_f64(b).and_then(Dyadic::checked_neg))
        .and_then(|(x, y)| x.checked_add(y))
        .and_then(Dyadic::ceil)
    {
        Some(v) => (v, true),
        None => (libm::ceil(a - b) as i64, false),
    }
}

/// `floor(base + m * step)` evaluated exactly when possible.
pub fn floor_of_affine(base: f64, m: i64, step: f64) -> (i64, bool) {
    match Dyadic::from_f64(base)
        .zip(Dyadic::from_f64(step))
        .and_then(|(b, s)| s.checked_mul(Dyadic::from_int(m)).and_then(|ms| b.checked_add(ms)))
        .and_then(Dyadic::floor)
    {
        Some(v) => (v, true),
        None => (libm::floor(base + m as f64 * step) as i64, false),
    }
}

/// Compares the integer `n` with `t * t` for a nonnegative double `t`.
pub fn cmp_int_with_square(n: i64, t: f64) -> Ordering {
    Dyadic::from_f64(t)
        .and_then(|d| d.checked_mul(d))
        .and_then(|sq| sq.cmp_int(n))
        .map(Ordering::reverse)
        .unwrap_or_else(|| (n as f64).partial_cmp(&(t * t)).unwrap_or(Ordering::Greater))
}

/// True when `x` lies within `tol` of an integer.
pub fn near_integer(x: f64, tol: f64) -> bool {
    (x - libm::round(x)).abs() <= tol
}
