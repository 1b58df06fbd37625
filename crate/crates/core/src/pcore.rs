//! Scalar p-power maps and the discrete energy functionals shared by the
//! shooting and variational engines.
//!
//! Grid functions live on the uniform interior grid `x_i = i h`,
//! `i = 1..=n`, `h = 1/(n+1)`, with zero boundary values implied. The
//! second difference at the nodes next to the boundary uses those zeros, and
//! every integral is a rectangle sum over the interior nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size below which a weighted p-norm counts as zero in
/// [`rayleigh`].
pub const DEFAULT_DENOM_EPS: f64 = 1e-12;

/// Exponent pair `(p, p')` with `1/p + 1/p' = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent {
    p: f64,
    p_conj: f64,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self {
            p,
            p_conj: p / (p - 1.0),
        })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    /// The conjugate exponent `p' = p/(p-1)`.
    #[inline]
    pub fn conjugate(&self) -> f64 {
        self.p_conj
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(e: Exponent) -> f64 {
        e.p
    }
}

/// `|s|^(q-2) s`, extended by 0 at the origin.
#[inline]
pub fn phi(s: f64, q: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if q == 2.0 {
        s
    } else {
        s.abs().powf(q - 2.0) * s
    }
}

/// `phi_p(s) = |s|^(p-2) s`.
#[inline]
pub fn phi_p(s: f64, e: Exponent) -> f64 {
    phi(s, e.p)
}

/// Inverse of [`phi_p`], i.e. `phi_{p'}`.
#[inline]
pub fn phi_p_inv(s: f64, e: Exponent) -> f64 {
    phi(s, e.p_conj)
}

/// Node values of a function on the uniform interior grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    h: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::GridTooSmall { n: 0, min: 1 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let h = 1.0 / (values.len() + 1) as f64;
        Ok(Self { h, values })
    }

    /// Samples `f` at the interior nodes `x_i = i/(n+1)`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 1.0 / (n + 1) as f64;
        Self::new((1..=n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            h: 1.0 / (n + 1) as f64,
            values: vec![0.0; n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node coordinates `x_1, ..., x_n`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n()).map(move |i| i as f64 * self.h)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h: self.h,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Central second difference with zero boundary values.
    pub fn second_difference(&self) -> Vec<f64> {
        second_difference(&self.values, self.h)
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::GridMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(())
    }
}

/// `(u_{i-1} - 2 u_i + u_{i+1}) / h^2` with `u_0 = u_{n+1} = 0`.
pub fn second_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let inv_h2 = 1.0 / (h * h);
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            (left - 2.0 * u[i] + right) * inv_h2
        })
        .collect()
}

/// `A(u) = (1/p) sum |D^2 u|^p h`.
pub fn energy_a(u: &GridFunction, e: Exponent) -> Result<f64> {
    if u.n() < 3 {
        return Err(Error::GridTooSmall { n: u.n(), min: 3 });
    }
    let sum: f64 = u
        .second_difference()
        .iter()
        .map(|d| d.abs().powf(e.p()))
        .sum();
    Ok(sum * u.h() / e.p())
}

/// `B(u) = (1/p) sum m_i |u_i|^p h`. Sign unrestricted.
pub fn energy_b(u: &GridFunction, m: &GridFunction, e: Exponent) -> Result<f64> {
    u.check_same_grid(m)?;
    let sum: f64 = u
        .values()
        .iter()
        .zip(m.values())
        .map(|(ui, mi)| mi * ui.abs().powf(e.p()))
        .sum();
    Ok(sum * u.h() / e.p())
}

/// `A(u) / B(u)`, rejecting numerically m-orthogonal `u`.
pub fn rayleigh(u: &GridFunction, m: &GridFunction, e: Exponent) -> Result<f64> {
    rayleigh_with_eps(u, m, e, DEFAULT_DENOM_EPS)
}

/// Like [`rayleigh`], with `|B(u)| < eps * (1/p) sum |m_i| |u_i|^p h` treated
/// as zero.
pub fn rayleigh_with_eps(u: &GridFunction, m: &GridFunction, e: Exponent, eps: f64) -> Result<f64> {
    let b = energy_b(u, m, e)?;
    let scale: f64 = u
        .values()
        .iter()
        .zip(m.values())
        .map(|(ui, mi)| mi.abs() * ui.abs().powf(e.p()))
        .sum::<f64>()
        * u.h()
        / e.p();
    if !(b.abs() > eps * scale) {
        return Err(Error::ZeroDenominator(b));
    }
    Ok(energy_a(u, e)? / b)
}
