//! Continuous sign-changing weights on `[0, 1]`.
//!
//! Weights are drawn from a small catalog (constant, cosine, shifted linear,
//! piecewise polynomial) so that evaluation is exact. Admissibility means
//! `{m > 0}` has positive measure, certified by a grid search.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pcore::GridFunction;

/// Sample count used for the admissibility grid search.
pub const ADMISSIBILITY_SAMPLES: usize = 10_000;
/// A weight is admissible when its sampled maximum exceeds this.
pub const ADMISSIBILITY_THRESHOLD: f64 = 1e-10;
/// Largest tolerated jump between adjacent piecewise segments.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// Anything that can be evaluated pointwise as a weight on `[0, 1]`.
pub trait Weight: Sync {
    /// Value at `x`. Callers keep `x` inside the interval (up to roundoff).
    fn at(&self, x: f64) -> f64;

    /// Samples on the interior nodes of an `n`-node grid.
    fn samples(&self, n: usize) -> GridFunction {
        let h = 1.0 / (n + 1) as f64;
        GridFunction::new((1..=n).map(|i| self.at(i as f64 * h)).collect())
            .expect("weight values are finite")
    }

    /// `max |m|` on `[a, b]` from `count` equispaced samples.
    fn sup_abs_on(&self, a: f64, b: f64, count: usize) -> f64 {
        let count = count.max(2);
        (0..count)
            .map(|i| self.at(a + (b - a) * i as f64 / (count - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    /// True when some sample point of `[a, b]` carries a positive weight.
    fn positive_somewhere_on(&self, a: f64, b: f64, count: usize) -> bool {
        let count = count.max(2);
        (0..count).any(|i| self.at(a + (b - a) * i as f64 / (count - 1) as f64) > ADMISSIBILITY_THRESHOLD)
    }
}

impl<W: Weight + ?Sized> Weight for &W {
    fn at(&self, x: f64) -> f64 {
        (**self).at(x)
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

/// Catalog weight specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `m(x) = c`.
    Constant { c: f64 },
    /// `m(x) = amplitude * cos(2 pi f x)`.
    Cosine {
        f: u32,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        amplitude: f64,
    },
    /// `m(x) = slope * (x - a)`.
    LinearShift {
        a: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        slope: f64,
    },
    /// Ascending-power polynomial per segment `[breakpoints[j], breakpoints[j+1]]`.
    Piecewise {
        breakpoints: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
}

/// Parses and validates a weight block.
///
/// Accepts either a TOML table body (`kind = "cosine"\nf = 1`) or a single
/// inline table (`{kind = "cosine", f = 1}`).
pub fn parse_weight(text: &str) -> Result<WeightSpec> {
    let trimmed = text.trim();
    let spec: WeightSpec = if trimmed.starts_with('{') {
        #[derive(Deserialize)]
        struct Wrapper {
            w: WeightSpec,
        }
        toml::from_str::<Wrapper>(&format!("w = {trimmed}"))
            .map_err(|e| Error::Schema(e.message().to_string()))?
            .w
    } else {
        toml::from_str(trimmed).map_err(|e| Error::Schema(e.message().to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl WeightSpec {
    pub fn constant(c: f64) -> Self {
        WeightSpec::Constant { c }
    }

    pub fn cosine(f: u32) -> Self {
        WeightSpec::Cosine { f, amplitude: 1.0 }
    }

    pub fn linear_shift(a: f64) -> Self {
        WeightSpec::LinearShift { a, slope: 1.0 }
    }

    /// Structural checks, continuity and admissibility.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Schema(format!("{what} must be finite")))
            }
        };
        match self {
            WeightSpec::Constant { c } => finite(*c, "c")?,
            WeightSpec::Cosine { f, amplitude } => {
                if *f == 0 {
                    return Err(Error::Schema("cosine frequency f must be a positive integer".into()));
                }
                finite(*amplitude, "amplitude")?;
            }
            WeightSpec::LinearShift { a, slope } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(Error::Schema(format!("linear_shift root a = {a} must lie in (0, 1)")));
                }
                finite(*slope, "slope")?;
            }
            WeightSpec::Piecewise { breakpoints, coeffs } => {
                if breakpoints.len() < 2 {
                    return Err(Error::Schema("piecewise weight needs at least two breakpoints".into()));
                }
                if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
                    return Err(Error::Schema("breakpoints must start at 0 and end at 1".into()));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Schema("breakpoints must be strictly increasing".into()));
                }
                if coeffs.len() + 1 != breakpoints.len() {
                    return Err(Error::Schema(format!(
                        "{} breakpoints need {} coefficient lists, got {}",
                        breakpoints.len(),
                        breakpoints.len() - 1,
                        coeffs.len()
                    )));
                }
                if coeffs.iter().any(|c| c.is_empty()) {
                    return Err(Error::Schema("empty coefficient list".into()));
                }
                if coeffs.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::Schema("coefficients must be finite".into()));
                }
                for (j, &x) in breakpoints.iter().enumerate().skip(1).take(breakpoints.len() - 2) {
                    let jump = horner(&coeffs[j - 1], x) - horner(&coeffs[j], x);
                    if jump.abs() > CONTINUITY_TOL {
                        return Err(Error::DiscontinuousWeight { at: x, jump });
                    }
                }
            }
        }
        if !self.is_admissible() {
            return Err(Error::NotAdmissible);
        }
        Ok(())
    }

    /// Grid-search certificate that `{m > 0}` has positive measure.
    pub fn is_admissible(&self) -> bool {
        self.positive_somewhere_on(0.0, 1.0, ADMISSIBILITY_SAMPLES)
    }

    /// Checked pointwise evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.at(x))
    }

    /// The weight `-m`, for the negative half of the spectrum.
    ///
    /// Fails with [`Error::NotAdmissible`] when `m >= 0` everywhere, in which
    /// case there are no negative eigenvalues.
    pub fn negate(&self) -> Result<WeightSpec> {
        let neg = match self {
            WeightSpec::Constant { c } => WeightSpec::Constant { c: -c },
            WeightSpec::Cosine { f, amplitude } => WeightSpec::Cosine {
                f: *f,
                amplitude: -amplitude,
            },
            WeightSpec::LinearShift { a, slope } => WeightSpec::LinearShift { a: *a, slope: -slope },
            WeightSpec::Piecewise { breakpoints, coeffs } => WeightSpec::Piecewise {
                breakpoints: breakpoints.clone(),
                coeffs: coeffs
                    .iter()
                    .map(|c| c.iter().map(|v| -v).collect())
                    .collect(),
            },
        };
        if !neg.is_admissible() {
            return Err(Error::NotAdmissible);
        }
        Ok(neg)
    }

    /// `max |m|` over `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            WeightSpec::Constant { c } => c.abs(),
            WeightSpec::Cosine { amplitude, .. } => amplitude.abs(),
            WeightSpec::LinearShift { a, slope } => slope.abs() * a.max(1.0 - a),
            WeightSpec::Piecewise { .. } => self.sup_abs_on(0.0, 1.0, ADMISSIBILITY_SAMPLES),
        }
    }
}

impl Weight for WeightSpec {
    fn at(&self, x: f64) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::Cosine { f, amplitude } => amplitude * (2.0 * PI * *f as f64 * x).cos(),
            WeightSpec::LinearShift { a, slope } => slope * (x - a),
            WeightSpec::Piecewise { breakpoints, coeffs } => {
                let seg = breakpoints[1..breakpoints.len() - 1].partition_point(|&b| b <= x);
                horner(&coeffs[seg], x)
            }
        }
    }
}

/// `y -> m(a + (b - a) y)`: a weight restricted to `[a, b]` and pulled back
/// to `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Restricted<W> {
    pub inner: W,
    pub a: f64,
    pub b: f64,
}

impl<W: Weight> Weight for Restricted<W> {
    fn at(&self, y: f64) -> f64 {
        self.inner.at(self.a + (self.b - self.a) * y)
    }
}

/// `x -> m(x) + offset`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<W> {
    pub inner: W,
    pub offset: f64,
}

impl<W: Weight> Weight for Shifted<W> {
    fn at(&self, x: f64) -> f64 {
        self.inner.at(x) + self.offset
    }
}

/// `x -> -m(x)`, without an admissibility check.
#[derive(Debug, Clone, Copy)]
pub struct Negated<W>(pub W);

impl<W: Weight> Weight for Negated<W> {
    fn at(&self, x: f64) -> f64 {
        -self.0.at(x)
    }
}
