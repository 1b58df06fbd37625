//! Nodal structure of computed eigenfunctions and the checks built on it.
//!
//! Negative-branch pairs are handled through the weight `-m` and `|lambda|`,
//! under which they become positive-branch pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{default_init, oracle_p2, projected_gradient_lambda1, DescentConfig, DiscreteProblem};
use crate::error::{Error, Result};
use crate::pcore::Exponent;
use crate::shoot::{continue_in_p, refine_linear_anchor, ContinuationConfig, ShootConfig};
use crate::spectrum::{Eigenpair, Sign};
use crate::weight::{Negated, Restricted, Weight};

/// Samples per domain for sup norms and admissibility.
pub const DOMAIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalDomain {
    pub a: f64,
    pub b: f64,
    /// `+1` or `-1`.
    pub sign: i8,
    /// Whether the branch weight is positive somewhere on `(a, b)`.
    pub weight_admissible: bool,
}

impl NodalDomain {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }
}

/// The weight seen by the positive-branch problem of `pair`.
fn branch_weight<'a, W: Weight + ?Sized>(pair: &Eigenpair, m: &'a W) -> Box<dyn Weight + 'a> {
    match pair.sign {
        Sign::Plus => Box::new(m),
        Sign::Minus => Box::new(Negated(m)),
    }
}

/// Splits `[0, 1]` at the refined zeros of `pair`.
///
/// The sign of each domain is that of the largest eigenfunction sample inside
/// it. Adjacent domains of equal sign mean a zero was counted that is not a
/// sign change, which flags a defective solve.
pub fn nodal_decompose<W: Weight + ?Sized>(pair: &Eigenpair, m: &W) -> Result<Vec<NodalDomain>> {
    let w = branch_weight(pair, m);
    let mut breaks = vec![0.0];
    breaks.extend(pair.zeros.iter().copied());
    breaks.push(1.0);
    let u = pair.eigenfunction.values();
    let h = pair.eigenfunction.h();
    let mut out: Vec<NodalDomain> = Vec::with_capacity(breaks.len() - 1);
    for ab in breaks.windows(2) {
        let (a, b) = (ab[0], ab[1]);
        let peak = u
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = (i + 1) as f64 * h;
                x > a && x < b
            })
            .map(|(_, v)| *v)
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or_else(|| pair.eigenfunction_at(0.5 * (a + b)));
        let sign = if peak >= 0.0 { 1 } else { -1 };
        if let Some(prev) = out.last() {
            if prev.sign == sign {
                return Err(Error::NonAlternating { at: a });
            }
        }
        out.push(NodalDomain {
            a,
            b,
            sign,
            weight_admissible: w.positive_somewhere_on(a, b, DOMAIN_SAMPLES),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub a: f64,
    pub b: f64,
    pub length: f64,
    /// `(1 / (|lambda| max_[a,b] |m|))^(1/(2p))`.
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub entries: Vec<MeasureEntry>,
    pub min_margin: f64,
    pub holds: bool,
}

/// Lower bound on the length of every nodal domain.
pub fn measure_bound_check<W: Weight + ?Sized>(pair: &Eigenpair, domains: &[NodalDomain], m: &W) -> MeasureReport {
    let lambda = pair.lambda.abs();
    let entries: Vec<MeasureEntry> = domains
        .iter()
        .map(|d| {
            let sup = m.sup_abs_on(d.a, d.b, DOMAIN_SAMPLES);
            let bound = (1.0 / (lambda * sup)).powf(1.0 / (2.0 * pair.p));
            MeasureEntry {
                a: d.a,
                b: d.b,
                length: d.len(),
                bound,
                margin: d.len() - bound,
            }
        })
        .collect();
    let min_margin = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    MeasureReport {
        holds: min_margin > 0.0,
        entries,
        min_margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub per_domain: Vec<bool>,
    pub all: bool,
}

/// Whether the branch weight is positive at some sample of every domain.
pub fn weight_admissible_on_domains<W: Weight + ?Sized>(pair: &Eigenpair, domains: &[NodalDomain], m: &W) -> AdmissibilityReport {
    let w = branch_weight(pair, m);
    let per_domain: Vec<bool> = domains.iter().map(|d| w.positive_somewhere_on(d.a, d.b, DOMAIN_SAMPLES)).collect();
    AdmissibilityReport {
        all: per_domain.iter().all(|&ok| ok),
        per_domain,
    }
}

/// Engine used for the principal eigenvalue of a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubEngine {
    /// `p = 2` oracle anchor, shooting refinement, continuation to `p`.
    Shooting,
    /// Projected gradient on the restricted grid.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsolveConfig {
    pub engine: SubEngine,
    pub shoot: ShootConfig,
    pub continuation: ContinuationConfig,
    /// Oracle grid for the shooting anchor (Richardson with `2n + 1`).
    pub oracle_n: usize,
    /// Grid for the discrete engine.
    pub discrete_n: usize,
    pub descent: DescentConfig,
}

impl Default for SubsolveConfig {
    fn default() -> Self {
        Self {
            engine: SubEngine::Shooting,
            shoot: ShootConfig::default(),
            continuation: ContinuationConfig::default(),
            oracle_n: 99,
            discrete_n: 199,
            descent: DescentConfig::default(),
        }
    }
}

/// Smallest positive eigenvalue of `(p, m)` on `[a, b]` with Navier
/// conditions at both ends, and the interior zero count of its
/// eigenfunction (always 0 for the discrete engine, whose minimizer is not
/// examined).
///
/// The subproblem is solved on `[0, 1]` for `y -> m(a + (b - a) y)` and
/// mapped back with `lambda = lambda~ (b - a)^(-2p)`.
pub fn principal_on<W: Weight + ?Sized>(m: &W, a: f64, b: f64, p: f64, cfg: &SubsolveConfig) -> Result<(f64, usize)> {
    let fail = |reason: String| Error::SubsolveFailure { a, b, reason };
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(fail("empty or out-of-range interval".into()));
    }
    let w = Restricted { inner: m, a, b };
    let e = Exponent::new(p)?;
    let (scaled, zeros) = match cfg.engine {
        SubEngine::Shooting => {
            let two = Exponent::new(2.0)?;
            let first = |n: usize| -> Result<f64> {
                let spec = oracle_p2(&DiscreteProblem::from_weight(&w, n, two)?)?;
                spec.positive.first().map(|m| m.lambda).ok_or(Error::NotAdmissible)
            };
            let coarse = first(cfg.oracle_n).map_err(|err| fail(err.to_string()))?;
            let fine = first(2 * cfg.oracle_n + 1).map_err(|err| fail(err.to_string()))?;
            let estimate = (4.0 * fine - coarse) / 3.0;
            let anchor = refine_linear_anchor(estimate, &w, &cfg.shoot).map_err(|err| fail(err.to_string()))?;
            let sol = continue_in_p(&anchor, p, &w, &cfg.shoot, &cfg.continuation).map_err(|err| fail(err.to_string()))?;
            (sol.lambda, sol.zero_count())
        }
        SubEngine::Discrete => {
            let prob = DiscreteProblem::from_weight(&w, cfg.discrete_n, e).map_err(|err| fail(err.to_string()))?;
            let out = projected_gradient_lambda1(&prob, &default_init(&prob), &cfg.descent).map_err(|err| fail(err.to_string()))?;
            (out.value, 0)
        }
    };
    Ok((scaled * (b - a).powf(-2.0 * p), zeros))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub a: f64,
    pub b: f64,
    pub lambda_sub: f64,
    /// Interior zeros of the subproblem's eigenfunction.
    pub sub_zeros: usize,
    /// `|lambda_sub - |lambda|| / |lambda|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub entries: Vec<PartitionEntry>,
    pub max_deviation: f64,
}

/// Compares `|lambda|` with the principal eigenvalue of the branch problem
/// restricted to each nodal domain. Subsolves run in parallel.
pub fn equi_eigenvalue_partition_check<W: Weight + ?Sized>(
    pair: &Eigenpair,
    domains: &[NodalDomain],
    m: &W,
    cfg: &SubsolveConfig,
) -> Result<PartitionReport> {
    let lambda = pair.lambda.abs();
    let entries = domains
        .par_iter()
        .map(|d| {
            let w = branch_weight(pair, m);
            let (lambda_sub, sub_zeros) = principal_on(&*w, d.a, d.b, pair.p, cfg)?;
            Ok(PartitionEntry {
                a: d.a,
                b: d.b,
                lambda_sub,
                sub_zeros,
                deviation: (lambda_sub - lambda).abs() / lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = entries.iter().map(|e| e.deviation).fold(0.0, f64::max);
    Ok(PartitionReport { entries, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcore::GridFunction;
    use crate::spectrum::Residuals;
    use crate::spectrum::Engine;
    use crate::weight::WeightSpec;
    use std::f64::consts::PI;

    fn sine_pair(k: usize) -> Eigenpair {
        let kf = k as f64;
        Eigenpair {
            lambda: (kf * PI).powi(4),
            sign: Sign::Plus,
            k,
            p: 2.0,
            u_prime0: 1.0,
            beta: -(kf * PI).powi(2),
            u_prime1: if k % 2 == 0 { 1.0 } else { -1.0 },
            beta1: if k % 2 == 0 { -(kf * PI).powi(2) } else { (kf * PI).powi(2) },
            parity: None,
            zeros: (1..k).map(|j| j as f64 / kf).collect(),
            zero_classes: Vec::new(),
            residuals: Residuals { miss_u: 0.0, miss_v: 0.0, boundary: 0.0 },
            weighted_unit: true,
            engine: Engine::Shooting,
            eigenfunction: GridFunction::from_fn(999, |x| (kf * PI * x).sin()).unwrap(),
        }
    }

    #[test]
    fn decomposes_sines() {
        let one = WeightSpec::constant(1.0);
        let d1 = nodal_decompose(&sine_pair(1), &one).unwrap();
        assert_eq!(d1.len(), 1);
        assert_eq!((d1[0].a, d1[0].b, d1[0].sign), (0.0, 1.0, 1));
        let d2 = nodal_decompose(&sine_pair(2), &one).unwrap();
        assert_eq!(d2.iter().map(|d| d.sign).collect::<Vec<_>>(), vec![1, -1]);
        assert!((d2[0].b - 0.5).abs() < 1e-15);
        let d3 = nodal_decompose(&sine_pair(3), &one).unwrap();
        assert_eq!(d3.len(), 3);
        assert!((d3[1].a - 1.0 / 3.0).abs() < 1e-15 && (d3[1].b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spurious_zero_is_non_alternating() {
        let mut pair = sine_pair(1);
        pair.zeros = vec![0.3];
        let err = nodal_decompose(&pair, &WeightSpec::constant(1.0)).unwrap_err();
        assert_eq!(err, Error::NonAlternating { at: 0.3 });
    }

    #[test]
    fn measure_bound_examples() {
        let one = WeightSpec::constant(1.0);
        let pair = sine_pair(2);
        let rep = measure_bound_check(&pair, &nodal_decompose(&pair, &one).unwrap(), &one);
        assert!((rep.entries[0].bound - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!(rep.holds && rep.min_margin > 0.3);
        let pair = sine_pair(1);
        let rep = measure_bound_check(&pair, &nodal_decompose(&pair, &one).unwrap(), &one);
        assert!((rep.entries[0].bound - 1.0 / PI).abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn admissibility_examples() {
        let cos = WeightSpec::cosine(1);
        let pair = sine_pair(1);
        let domains = nodal_decompose(&pair, &cos).unwrap();
        assert!(weight_admissible_on_domains(&pair, &domains, &cos).all);
        // -cos(2 pi x) is negative on (0, 1/4); on the negative branch the
        // domain (0, 0.2) sees -m > 0 there.
        let neg = WeightSpec::Cosine { f: 1, amplitude: -1.0 };
        let d = [NodalDomain { a: 0.0, b: 0.2, sign: 1, weight_admissible: false }];
        assert!(!weight_admissible_on_domains(&pair, &d, &neg).all);
        let mut minus = sine_pair(1);
        minus.sign = Sign::Minus;
        assert!(weight_admissible_on_domains(&minus, &d, &neg).all);
    }

    #[test]
    fn partition_of_sines_at_p2() {
        let one = WeightSpec::constant(1.0);
        for k in [2, 3] {
            let pair = sine_pair(k);
            let domains = nodal_decompose(&pair, &one).unwrap();
            let rep = equi_eigenvalue_partition_check(&pair, &domains, &one, &SubsolveConfig::default()).unwrap();
            assert_eq!(rep.entries.len(), k);
            assert!(rep.max_deviation < 1e-8, "{k}: {}", rep.max_deviation);
        }
    }

    #[test]
    fn interval_scaling_law() {
        let one = WeightSpec::constant(1.0);
        for p in [1.5, 2.0, 3.0] {
            let cfg = SubsolveConfig::default();
            let base = principal_on(&one, 0.0, 1.0, p, &cfg).unwrap().0;
            for len in [0.5, 0.25] {
                let (l, zeros) = principal_on(&one, 0.0, len, p, &cfg).unwrap();
                assert_eq!(zeros, 0);
                assert!((l * len.powf(2.0 * p) / base - 1.0).abs() < 1e-4, "p {p} len {len}");
            }
        }
    }

    #[test]
    fn engines_agree_on_a_subinterval() {
        let cos = WeightSpec::cosine(1);
        let shoot = principal_on(&cos, 0.0, 0.8, 2.5, &SubsolveConfig::default()).unwrap().0;
        let cfg = SubsolveConfig {
            engine: SubEngine::Discrete,
            ..SubsolveConfig::default()
        };
        let disc = principal_on(&cos, 0.0, 0.8, 2.5, &cfg).unwrap().0;
        assert!((shoot / disc - 1.0).abs() < 1e-3, "{shoot} {disc}");
    }
}
