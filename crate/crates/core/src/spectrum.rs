//! Enumeration of both eigenvalue sequences, p-sweeps, and verification.
//!
//! Each positive eigenvalue is anchored on the dense `p = 2` oracle, polished
//! by shooting at `p = 2`, and continued in `p` to the target exponent. The
//! negative sequence is the positive sequence of `-m` with the sign flipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{default_init, mu1_at, oracle_p2, DescentConfig, DiscreteProblem};
use crate::error::{Error, Result};
use crate::nodal::{
    equi_eigenvalue_partition_check, measure_bound_check, nodal_decompose, weight_admissible_on_domains, SubsolveConfig,
};
use crate::pcore::{Exponent, GridFunction};
use crate::shoot::{
    classify_zeros, continue_in_p, refine_linear_anchor, reshoot, solve_from, solve_near, ContinuationConfig, Parity, ShootConfig,
    ShotData, ShotSolution, ZeroClass,
};
use crate::weight::{Weight, WeightSpec, ADMISSIBILITY_SAMPLES};

/// Interior nodes of the reported eigenfunction samples.
pub const EIGENFUNCTION_NODES: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Shooting,
    DiscreteOracle,
    Variational,
}

/// Scaled residuals where the two shots meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub miss_u: f64,
    pub miss_v: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub lambda: f64,
    pub sign: Sign,
    pub k: usize,
    pub p: f64,
    /// `u'(0)`, `v'(0)`, `u'(1)`, `v'(1)` as solved, on the branch problem
    /// (`-m` and `|lambda|` for the negative sign).
    pub u_prime0: f64,
    pub beta: f64,
    pub u_prime1: f64,
    pub beta1: f64,
    pub parity: Option<Parity>,
    pub zeros: Vec<f64>,
    pub zero_classes: Vec<ZeroClass>,
    pub residuals: Residuals,
    pub engine: Engine,
    /// True when the samples satisfy `sum m |u|^p h = 1` for the branch
    /// weight; otherwise they are scaled to `max |u| = 1`.
    pub weighted_unit: bool,
    /// Samples on [`EIGENFUNCTION_NODES`] interior nodes, with `u > 0` near
    /// `x = 0`.
    pub eigenfunction: GridFunction,
}

impl Eigenpair {
    /// Packs a shooting solution of the branch problem with weight `branch`.
    pub fn from_shot<W: Weight + ?Sized>(sol: &ShotSolution, sign: Sign, k: usize, branch: &W, cfg: &ShootConfig) -> Result<Self> {
        let e = sol.trace.exponent;
        let r = sol.match_residual(branch, cfg)?;
        let mut u = sol.trace.resample_u(EIGENFUNCTION_NODES);
        let h = 1.0 / (EIGENFUNCTION_NODES + 1) as f64;
        let mass: f64 = u
            .iter()
            .enumerate()
            .map(|(i, v)| branch.at((i + 1) as f64 * h) * v.abs().powf(e.p()) * h)
            .sum();
        let lead = u.iter().copied().find(|v| v.abs() > 1e-12 * sol.trace.max_abs_u()).unwrap_or(1.0);
        let weighted_unit = mass > 0.0;
        let size = if weighted_unit {
            mass.powf(1.0 / e.p())
        } else {
            u.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
        };
        let c = lead.signum() / size;
        u.iter_mut().for_each(|v| *v *= c);
        Ok(Self {
            lambda: sign.factor() * sol.lambda,
            sign,
            k,
            p: e.p(),
            u_prime0: sol.u_prime0,
            beta: sol.beta,
            u_prime1: sol.right_slope,
            beta1: sol.right_beta,
            parity: sol.parity,
            zeros: sol.trace.zero_crossings.clone(),
            zero_classes: classify_zeros(&sol.trace, ZERO_TOL),
            residuals: Residuals {
                miss_u: r.u,
                miss_v: r.v,
                boundary: r.u.max(r.v),
            },
            engine: Engine::Shooting,
            weighted_unit,
            eigenfunction: GridFunction::new(u)?,
        })
    }

    /// Unknowns of the branch problem, ready for [`reshoot`].
    pub fn shot_data(&self) -> ShotData {
        ShotData {
            lambda: self.lambda.abs(),
            u_prime0: self.u_prime0,
            beta: self.beta,
            right_slope: self.u_prime1,
            right_beta: self.beta1,
            parity: self.parity,
        }
    }

    /// Linear interpolation of the eigenfunction samples, zero at the ends.
    pub fn eigenfunction_at(&self, x: f64) -> f64 {
        let v = self.eigenfunction.values();
        let t = x / self.eigenfunction.h();
        let i = t.floor() as isize;
        let at = |j: isize| if j < 1 || j as usize > v.len() { 0.0 } else { v[j as usize - 1] };
        let f = t - i as f64;
        (1.0 - f) * at(i) + f * at(i + 1)
    }
}

/// Tolerance for the generalized-simple-zero classification.
pub const ZERO_TOL: f64 = 1e-5;

/// Thresholds and probe sizes of [`build_verify_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub residual_tol: f64,
    pub zero_tol: f64,
    pub partition_tol: f64,
    /// Grid for `mu_1(lambda_1)`.
    pub mu1_n: usize,
    pub simplicity_seeds: usize,
    /// Largest `k` probed for simplicity.
    pub simplicity_k_max: usize,
    pub simplicity_tol: f64,
    /// Relative size of the seed perturbation, capped by a quarter of the
    /// relative gap to the neighbouring eigenvalues.
    pub simplicity_spread: f64,
    pub isolation_seeds: usize,
    pub isolation_delta: f64,
    pub duality_tol: f64,
    pub subsolve: SubsolveConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 20240607,
            residual_tol: 1e-6,
            zero_tol: ZERO_TOL,
            partition_tol: 1e-3,
            mu1_n: 199,
            simplicity_seeds: 10,
            simplicity_k_max: 3,
            simplicity_tol: 1e-8,
            simplicity_spread: 1e-3,
            isolation_seeds: 12,
            isolation_delta: 0.05,
            duality_tol: 1e-6,
            subsolve: SubsolveConfig::default(),
        }
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub p: f64,
    pub weight: WeightSpec,
    #[serde(default)]
    pub shoot: ShootConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    /// Coarse oracle grid; anchors use Richardson extrapolation with
    /// `2 oracle_n + 1`.
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default)]
    pub descent: DescentConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_oracle_n() -> usize {
    199
}

impl ProblemSpec {
    pub fn new(p: f64, weight: WeightSpec) -> Self {
        Self {
            p,
            weight,
            shoot: ShootConfig::default(),
            continuation: ContinuationConfig::default(),
            oracle_n: default_oracle_n(),
            descent: DescentConfig::default(),
            verify: VerifyConfig::default(),
        }
    }

    pub fn exponent(&self) -> Result<Exponent> {
        Exponent::new(self.p)
    }

    /// Weight of the positive-branch problem for `sign`.
    pub fn branch_weight(&self, sign: Sign) -> Result<WeightSpec> {
        match sign {
            Sign::Plus => {
                self.weight.validate()?;
                Ok(self.weight.clone())
            }
            Sign::Minus => self.weight.negate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFailure {
    pub sign: Sign,
    pub k: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub problem: ProblemSpec,
    pub pairs_plus: Vec<Eigenpair>,
    pub pairs_minus: Vec<Eigenpair>,
    pub failures: Vec<SlotFailure>,
    /// Why the negative sequence is empty, when it is.
    pub negative_reason: Option<String>,
    pub verify: VerifyReport,
}

impl SpectrumTable {
    pub fn pairs(&self) -> impl Iterator<Item = &Eigenpair> {
        self.pairs_plus.iter().chain(&self.pairs_minus)
    }
}

/// The first `count` positive `p = 2` eigenvalues of `w`, extrapolated from
/// the dense oracle on `n` and `2n + 1` nodes.
pub fn oracle_estimates<W: Weight + ?Sized>(w: &W, n: usize, count: usize) -> Result<Vec<f64>> {
    let two = Exponent::new(2.0)?;
    let (coarse, fine) = rayon::join(
        || oracle_p2(&DiscreteProblem::from_weight(&w, n, two)?),
        || oracle_p2(&DiscreteProblem::from_weight(&w, 2 * n + 1, two)?),
    );
    let (coarse, fine) = (coarse?, fine?);
    Ok(coarse
        .positive
        .iter()
        .zip(&fine.positive)
        .take(count)
        .map(|(a, b)| (4.0 * b.lambda - a.lambda) / 3.0)
        .collect())
}

/// Solves slot `k` (1-based) of the positive branch of `w` at exponent `p`
/// from its `p = 2` estimate.
fn solve_slot(w: &WeightSpec, estimate: f64, p: f64, spec: &ProblemSpec) -> Result<ShotSolution> {
    let anchor = refine_linear_anchor(estimate, w, &spec.shoot)?;
    continue_in_p(&anchor, p, w, &spec.shoot, &spec.continuation)
}

fn branch(spec: &ProblemSpec, sign: Sign, k_max: usize) -> Result<(Vec<Eigenpair>, Vec<SlotFailure>)> {
    let w = spec.branch_weight(sign)?;
    let estimates = oracle_estimates(&w, spec.oracle_n, k_max)?;
    let results: Vec<(usize, Result<Eigenpair>)> = estimates
        .par_iter()
        .enumerate()
        .map(|(i, &est)| {
            let k = i + 1;
            let pair = solve_slot(&w, est, spec.p, spec).and_then(|s| Eigenpair::from_shot(&s, sign, k, &w, &spec.shoot));
            (k, pair)
        })
        .collect();
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results {
        match r {
            Ok(pair) => pairs.push(pair),
            Err(e) => failures.push(SlotFailure {
                sign,
                k,
                error: e.to_string(),
            }),
        }
    }
    for k in estimates.len() + 1..=k_max {
        failures.push(SlotFailure {
            sign,
            k,
            error: "the p = 2 oracle has fewer eigenvalues on this grid".into(),
        });
    }
    Ok((pairs, failures))
}

/// Negative sequence: the positive pipeline on `-m`, mapped back by
/// `lambda_k^- = -lambda_k^+(-m)`. An inadmissible `-m` gives an empty list
/// and the reason.
pub fn negative_branch(spec: &ProblemSpec, k_max: usize) -> (Vec<Eigenpair>, Vec<SlotFailure>, Option<String>) {
    match branch(spec, Sign::Minus, k_max) {
        Ok((pairs, failures)) => (pairs, failures, None),
        Err(e) => (Vec::new(), Vec::new(), Some(e.to_string())),
    }
}

/// Both sequences up to `k_max`, with the verification report filled in.
/// Slots that fail are listed in `failures`; the rest of the table is kept.
pub fn enumerate(spec: &ProblemSpec, k_max: usize) -> Result<SpectrumTable> {
    let mut table = enumerate_unverified(spec, k_max)?;
    table.verify = build_verify_report(&table);
    Ok(table)
}

/// [`enumerate`] without running the checks.
pub fn enumerate_unverified(spec: &ProblemSpec, k_max: usize) -> Result<SpectrumTable> {
    if k_max == 0 {
        return Err(Error::Schema("k_max must be at least 1".into()));
    }
    spec.exponent()?;
    let (plus, minus) = rayon::join(|| branch(spec, Sign::Plus, k_max), || negative_branch(spec, k_max));
    let (pairs_plus, mut failures) = plus?;
    let (pairs_minus, neg_failures, negative_reason) = minus;
    failures.extend(neg_failures);
    Ok(SpectrumTable {
        problem: spec.clone(),
        pairs_plus,
        pairs_minus,
        failures,
        negative_reason,
        verify: VerifyReport::default(),
    })
}

// ---------------------------------------------------------------------------
// p-sweeps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub lambda: f64,
    /// `|lambda|^(1/p)`, which varies on a much tamer scale.
    pub lambda_root: f64,
    pub zero_count: usize,
    /// Relative change from the previous grid point.
    pub rel_jump: f64,
    pub jump_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub sign: Sign,
    pub k: usize,
    pub jump_threshold: f64,
    pub points: Vec<SweepPoint>,
    pub max_rel_jump: f64,
    pub zero_counts_constant: bool,
    /// Set when continuation stopped early.
    pub error: Option<String>,
}

impl SweepTable {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.zero_counts_constant && self.points.iter().all(|pt| !pt.jump_flag)
    }
}

/// Default continuity threshold for adjacent sweep points.
pub const JUMP_THRESHOLD: f64 = 0.05;

/// `lambda_k` of branch `sign` along `p_grid`, continued from the `p = 2`
/// anchor outward in both directions. Adjacent relative changes above
/// `jump_threshold` are flagged. Points past a continuation failure are
/// omitted and the failure recorded.
pub fn p_sweep(spec: &ProblemSpec, sign: Sign, k: usize, p_grid: &[f64], jump_threshold: f64) -> Result<SweepTable> {
    if k == 0 {
        return Err(Error::Schema("k must be at least 1".into()));
    }
    if p_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Schema("p grid must be strictly increasing".into()));
    }
    for &p in p_grid {
        Exponent::new(p)?;
    }
    let w = spec.branch_weight(sign)?;
    let est = *oracle_estimates(&w, spec.oracle_n, k)?
        .get(k - 1)
        .ok_or_else(|| Error::Schema(format!("the p = 2 oracle has fewer than {k} eigenvalues")))?;
    let anchor = refine_linear_anchor(est, &w, &spec.shoot)?;

    let split = p_grid.partition_point(|&p| p < 2.0);
    let walk = |ps: Vec<f64>| -> (Vec<(f64, ShotSolution)>, Option<String>) {
        let mut out = Vec::new();
        let mut current = anchor.clone();
        for p in ps {
            match continue_in_p(&current, p, &w, &spec.shoot, &spec.continuation) {
                Ok(sol) => {
                    current = sol.clone();
                    out.push((p, sol));
                }
                Err(e) => return (out, Some(format!("k = {k}, sign {}: {e}", sign.symbol()))),
            }
        }
        (out, None)
    };
    let ((mut down, err_down), (up, err_up)) = rayon::join(
        || walk(p_grid[..split].iter().rev().copied().collect()),
        || walk(p_grid[split..].to_vec()),
    );
    down.reverse();
    down.extend(up);

    let mut points: Vec<SweepPoint> = Vec::with_capacity(down.len());
    for (p, sol) in &down {
        let lambda = sign.factor() * sol.lambda;
        let rel_jump = points.last().map_or(0.0, |prev| ((lambda - prev.lambda) / prev.lambda).abs());
        points.push(SweepPoint {
            p: *p,
            lambda,
            lambda_root: lambda.abs().powf(1.0 / p),
            zero_count: sol.zero_count(),
            rel_jump,
            jump_flag: rel_jump > jump_threshold,
        });
    }
    let expected = anchor.zero_count();
    Ok(SweepTable {
        sign,
        k,
        jump_threshold,
        max_rel_jump: points.iter().map(|pt| pt.rel_jump).fold(0.0, f64::max),
        zero_counts_constant: points.iter().all(|pt| pt.zero_count == expected),
        points,
        error: match (err_down, err_up) {
            (None, None) => None,
            (a, b) => Some([a, b].into_iter().flatten().collect::<Vec<_>>().join("; ")),
        },
    })
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub sign: Option<Sign>,
    pub k: Option<usize>,
    pub passed: bool,
    /// Measured quantity, described in `detail`; absent when the
    /// measurement itself failed.
    pub value: Option<f64>,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
    pub failed: usize,
}

impl VerifyReport {
    fn from_checks(checks: Vec<CheckRecord>) -> Self {
        let failed = checks.iter().filter(|c| !c.passed).count();
        Self {
            passed: failed == 0,
            failed,
            checks,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Checks whose name matches.
    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }
}

fn record(name: &str, pair: Option<&Eigenpair>, passed: bool, value: f64, threshold: f64, detail: String) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        sign: pair.map(|p| p.sign),
        k: pair.map(|p| p.k),
        passed,
        value: value.is_finite().then_some(value),
        threshold,
        detail,
    }
}

/// Relative distance from `pair` to its nearest neighbour, both in `seq`
/// and among the `p = 2` estimates `anchors` (which reach one slot further).
fn relative_gap(pair: &Eigenpair, seq: &[Eigenpair], anchors: &[f64]) -> f64 {
    let in_table = seq
        .iter()
        .filter(|q| q.k != pair.k)
        .map(|q| ((q.lambda - pair.lambda) / pair.lambda).abs());
    let at_two = anchors.get(pair.k - 1).map(|&own| {
        anchors
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != pair.k)
            .map(|(_, l)| ((l - own) / own).abs())
            .fold(f64::INFINITY, f64::min)
    });
    in_table.chain(at_two).fold(f64::INFINITY, f64::min)
}

fn pair_checks(spec: &ProblemSpec, pair: &Eigenpair, seq: &[Eigenpair], anchors: &[f64]) -> Vec<CheckRecord> {
    let vc = &spec.verify;
    let mut out = Vec::new();
    let (w, e) = match (spec.branch_weight(pair.sign), Exponent::new(pair.p)) {
        (Ok(w), Ok(e)) => (w, e),
        (Err(err), _) | (_, Err(err)) => {
            out.push(record("setup", Some(pair), false, f64::NAN, 0.0, err.to_string()));
            return out;
        }
    };
    let some = Some(pair);

    // Residual, zero count and zero classes come from a fresh integration
    // of the stored unknowns.
    match reshoot(&pair.shot_data(), &w, e, &spec.shoot) {
        Ok(sol) => {
            out.push(record(
                "residual",
                some,
                sol.residual <= vc.residual_tol,
                sol.residual,
                vc.residual_tol,
                "scaled matching residual of the stored unknowns".into(),
            ));
            let zc = sol.zero_count();
            out.push(record(
                "zero_count",
                some,
                zc + 1 == pair.k,
                zc as f64,
                (pair.k - 1) as f64,
                format!("interior zeros {:?}", sol.trace.zero_crossings),
            ));
            let classes = classify_zeros(&sol.trace, vc.zero_tol);
            let worst = classes.iter().map(|c| c.rel_v).fold(0.0, f64::max);
            out.push(record(
                "generalized_simple_zeros",
                some,
                classes.iter().all(|c| c.generalized_simple),
                worst,
                vc.zero_tol,
                "largest |v| / sup |v| at a zero".into(),
            ));
        }
        Err(err) => {
            for name in ["residual", "zero_count", "generalized_simple_zeros"] {
                out.push(record(name, some, false, f64::NAN, 0.0, format!("re-integration failed: {err}")));
            }
        }
    }

    let u = pair.eigenfunction.values();
    let sup = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if pair.k == 1 {
        out.push(record(
            "first_positive",
            some,
            min > 0.0,
            min / sup,
            0.0,
            format!("min u / max |u| over {} nodes", u.len()),
        ));
        let sup_m = w.sup_abs_on(0.0, 1.0, ADMISSIBILITY_SAMPLES);
        let bound = 1.0 / sup_m;
        out.push(record(
            "principal_lower_bound",
            some,
            pair.lambda.abs() >= bound,
            pair.lambda.abs(),
            bound,
            "|lambda_1| against 1 / max |m|".into(),
        ));
    } else {
        let swing = min.abs().min(max) / sup;
        out.push(record(
            "sign_change",
            some,
            min < 0.0 && max > 0.0 && swing > 1e-8,
            swing,
            1e-8,
            "min(|min u|, max u) / max |u|".into(),
        ));
    }

    match nodal_decompose(pair, &spec.weight) {
        Ok(domains) => {
            let measure = measure_bound_check(pair, &domains, &spec.weight);
            out.push(record(
                "measure_bound",
                some,
                measure.holds,
                measure.min_margin,
                0.0,
                "smallest (length - bound) over nodal domains".into(),
            ));
            let adm = weight_admissible_on_domains(pair, &domains, &spec.weight);
            out.push(record(
                "domain_admissible",
                some,
                adm.all,
                adm.per_domain.iter().filter(|&&ok| ok).count() as f64,
                domains.len() as f64,
                "domains where the branch weight is positive somewhere".into(),
            ));
            match equi_eigenvalue_partition_check(pair, &domains, &spec.weight, &vc.subsolve) {
                Ok(rep) => out.push(record(
                    "partition",
                    some,
                    rep.max_deviation <= vc.partition_tol,
                    rep.max_deviation,
                    vc.partition_tol,
                    format!(
                        "principal eigenvalues on the nodal domains: {:?}",
                        rep.entries.iter().map(|e| e.lambda_sub).collect::<Vec<_>>()
                    ),
                )),
                Err(err) => out.push(record("partition", some, false, f64::NAN, vc.partition_tol, err.to_string())),
            }
        }
        Err(err) => {
            for name in ["measure_bound", "domain_admissible", "partition"] {
                out.push(record(name, some, false, f64::NAN, 0.0, err.to_string()));
            }
        }
    }

    if pair.k == 1 {
        let mu = DiscreteProblem::from_weight(&w, vc.mu1_n, e)
            .and_then(|prob| mu1_at(&prob, pair.lambda.abs(), &default_init(&prob), &spec.descent));
        let tol = 1e-3 * (1.0 + pair.lambda.abs());
        out.push(match mu {
            Ok(pt) => record(
                "mu1_at_principal",
                some,
                pt.mu1.abs() <= tol,
                pt.mu1,
                tol,
                format!("mu_1(|lambda_1|) on {} nodes", vc.mu1_n),
            ),
            Err(err) => record("mu1_at_principal", some, false, f64::NAN, tol, err.to_string()),
        });
    }

    let spread = vc.simplicity_spread.min(0.25 * relative_gap(pair, seq, anchors));
    if pair.k <= vc.simplicity_k_max {
        out.push(simplicity_probe(spec, pair, &w, e, spread));
    }
    if pair.sign == Sign::Minus {
        out.push(duality_check(spec, pair, e, 0.1 * spread));
    }
    out
}

/// Newton from perturbed seeds must return to the same eigenvalue.
fn simplicity_probe(spec: &ProblemSpec, pair: &Eigenpair, w: &WeightSpec, e: Exponent, spread: f64) -> CheckRecord {
    let vc = &spec.verify;
    let mut rng = ChaCha8Rng::seed_from_u64(vc.seed ^ (pair.k as u64) << 8 ^ pair.sign as u64);
    let seeds: Vec<[f64; 3]> = (0..vc.simplicity_seeds)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
        .collect();
    let target = pair.lambda.abs();
    let devs: Vec<Result<f64>> = seeds
        .par_iter()
        .map(|r| {
            let mut d = pair.shot_data();
            d.lambda *= 1.0 + spread * r[0];
            d.u_prime0 *= 1.0 + spread * r[1];
            d.beta *= 1.0 + spread * r[2];
            d.right_slope *= 1.0 + spread * r[2];
            d.right_beta *= 1.0 + spread * r[1];
            let sol = solve_near(&d, w, e, &spec.shoot)?;
            Ok((sol.lambda - target).abs() / target)
        })
        .collect();
    let converged = devs.iter().filter(|d| d.is_ok()).count();
    let worst = devs.iter().map(|d| *d.as_ref().unwrap_or(&f64::INFINITY)).fold(0.0, f64::max);
    record(
        "simplicity",
        Some(pair),
        worst <= vc.simplicity_tol,
        worst,
        vc.simplicity_tol,
        format!("{converged}/{} seeds converged, relative spread {spread:e}", seeds.len()),
    )
}

/// Re-derives a negative eigenvalue by shooting directly on `m` with
/// `lambda < 0`.
fn duality_check(spec: &ProblemSpec, pair: &Eigenpair, e: Exponent, spread: f64) -> CheckRecord {
    let tol = spec.verify.duality_tol;
    let mut d = pair.shot_data();
    d.lambda = pair.lambda * (1.0 + spread);
    let direct = solve_near(&d, &spec.weight, e, &spec.shoot);
    match direct {
        Ok(sol) => {
            let dev = ((sol.lambda - pair.lambda) / pair.lambda).abs();
            record(
                "negative_duality",
                Some(pair),
                sol.lambda < 0.0 && dev <= tol,
                dev,
                tol,
                format!("direct negative shooting gives {}", sol.lambda),
            )
        }
        Err(err) => record("negative_duality", Some(pair), false, f64::NAN, tol, err.to_string()),
    }
}

/// Seeds below `(1 - delta) lambda_1` must not converge to an eigenvalue
/// there.
fn isolation_probe(spec: &ProblemSpec, first: &Eigenpair) -> CheckRecord {
    let vc = &spec.verify;
    let (Ok(w), Ok(e)) = (spec.branch_weight(first.sign), Exponent::new(first.p)) else {
        return record("isolation", Some(first), false, f64::NAN, 0.0, "invalid branch".into());
    };
    let l1 = first.lambda.abs();
    let ceiling = l1 * (1.0 - vc.isolation_delta);
    let n = vc.isolation_seeds.max(1);
    // Geometric seeds from 1e-3 lambda_1 up to the ceiling.
    let seeds: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            l1 * 1e-3 * (ceiling / (l1 * 1e-3)).powf(t)
        })
        .collect();
    let found: Vec<f64> = seeds
        .par_iter()
        .filter_map(|&l0| {
            let beta0 = -l0.powf(1.0 / first.p);
            solve_from(l0, 1.0, beta0, &w, e, &spec.shoot).ok().map(|s| s.lambda)
        })
        .filter(|&l| l > 0.0 && l <= ceiling)
        .collect();
    let lowest = found.iter().copied().fold(f64::INFINITY, f64::min);
    record(
        "isolation",
        Some(first),
        found.is_empty(),
        if found.is_empty() { 0.0 } else { lowest / l1 },
        1.0 - vc.isolation_delta,
        format!("{} of {n} seeds converged below the ceiling", found.len()),
    )
}

fn ordering_check(sign: Sign, pairs: &[Eigenpair]) -> CheckRecord {
    let mut sorted: Vec<&Eigenpair> = pairs.iter().collect();
    sorted.sort_by_key(|p| p.k);
    let worst = sorted
        .windows(2)
        .map(|w| (w[1].lambda.abs() - w[0].lambda.abs()) / w[0].lambda.abs())
        .fold(f64::INFINITY, f64::min);
    CheckRecord {
        name: "strict_ordering".into(),
        sign: Some(sign),
        k: None,
        passed: !(worst <= 0.0),
        value: worst.is_finite().then_some(worst),
        threshold: 0.0,
        detail: "smallest relative gap |lambda_{k+1}| - |lambda_k|".into(),
    }
}

/// Runs every check on every pair of `table`. Failures are data.
pub fn build_verify_report(table: &SpectrumTable) -> VerifyReport {
    let spec = &table.problem;
    let anchors = |sign: Sign, seq: &[Eigenpair]| -> Vec<f64> {
        let reach = seq.iter().map(|p| p.k).max().unwrap_or(0) + 1;
        spec.branch_weight(sign)
            .and_then(|w| oracle_estimates(&w, spec.oracle_n, reach))
            .unwrap_or_default()
    };
    let (plus, minus) = (anchors(Sign::Plus, &table.pairs_plus), anchors(Sign::Minus, &table.pairs_minus));
    let mut checks: Vec<CheckRecord> = table
        .pairs_plus
        .par_iter()
        .map(|p| pair_checks(spec, p, &table.pairs_plus, &plus))
        .chain(table.pairs_minus.par_iter().map(|p| pair_checks(spec, p, &table.pairs_minus, &minus)))
        .flatten()
        .collect();
    for (sign, seq) in [(Sign::Plus, &table.pairs_plus), (Sign::Minus, &table.pairs_minus)] {
        if seq.is_empty() {
            continue;
        }
        checks.push(ordering_check(sign, seq));
        if let Some(first) = seq.iter().find(|p| p.k == 1) {
            checks.push(isolation_probe(spec, first));
        }
    }
    for f in &table.failures {
        checks.push(CheckRecord {
            name: "slot_solved".into(),
            sign: Some(f.sign),
            k: Some(f.k),
            passed: false,
            value: None,
            threshold: 0.0,
            detail: f.error.clone(),
        });
    }
    VerifyReport::from_checks(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_weight_table_at_p2() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        let table = enumerate(&spec, 4).unwrap();
        assert!(table.pairs_minus.is_empty());
        assert!(table.negative_reason.is_some());
        for pair in &table.pairs_plus {
            let exact = (pair.k as f64 * PI).powi(4);
            assert!((pair.lambda / exact - 1.0).abs() < 1e-6, "k {}: {}", pair.k, pair.lambda);
            assert_eq!(pair.zeros.len(), pair.k - 1);
        }
        let failing: Vec<_> = table.verify.failing().collect();
        assert!(table.verify.passed, "{failing:#?}");
    }

    #[test]
    fn eigenfunction_is_weighted_unit() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        let table = enumerate_unverified(&spec, 2).unwrap();
        for pair in &table.pairs_plus {
            assert!(pair.weighted_unit);
            let h = pair.eigenfunction.h();
            let mass: f64 = pair.eigenfunction.values().iter().map(|v| v * v * h).sum();
            assert!((mass - 1.0).abs() < 1e-12);
            assert!(pair.eigenfunction.values()[0] > 0.0);
            // sin(k pi x) scaled to unit L2 norm.
            let peak = pair.eigenfunction.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            assert!((peak - 2f64.sqrt()).abs() < 1e-4);
        }
    }

    #[test]
    fn corrupted_lambda_fails_residual_and_partition() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        let mut table = enumerate_unverified(&spec, 2).unwrap();
        table.pairs_plus[1].lambda *= 1.1;
        let rep = build_verify_report(&table);
        assert!(!rep.passed);
        let bad = |name: &str| rep.named(name).any(|c| c.k == Some(2) && !c.passed);
        assert!(bad("residual"));
        assert!(bad("partition"));
        assert!(rep.named("residual").any(|c| c.k == Some(1) && c.passed));
    }

    #[test]
    fn cosine_table_matches_oracle_at_p2() {
        let spec = ProblemSpec::new(2.0, WeightSpec::cosine(1));
        let table = enumerate_unverified(&spec, 2).unwrap();
        assert!(table.failures.is_empty(), "{:?}", table.failures);
        let w = WeightSpec::cosine(1);
        let est = oracle_estimates(&w, 399, 2).unwrap();
        for (pair, e) in table.pairs_plus.iter().zip(&est) {
            assert!((pair.lambda / e - 1.0).abs() < 1e-3);
        }
        let neg = oracle_estimates(&w.negate().unwrap(), 399, 2).unwrap();
        for (pair, e) in table.pairs_minus.iter().zip(&neg) {
            assert!(pair.lambda < 0.0);
            assert!((-pair.lambda / e - 1.0).abs() < 1e-3);
        }
        assert!(table.pairs_minus[1].lambda < table.pairs_minus[0].lambda);
    }

    #[test]
    fn sweep_constant_weight_first_mode() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        let sweep = p_sweep(&spec, Sign::Plus, 1, &[2.0], JUMP_THRESHOLD).unwrap();
        assert_eq!(sweep.points.len(), 1);
        assert!((sweep.points[0].lambda / PI.powi(4) - 1.0).abs() < 1e-6);
        let grid = [1.5, 2.0, 2.5, 3.0];
        let s1 = p_sweep(&spec, Sign::Plus, 1, &grid, JUMP_THRESHOLD).unwrap();
        let s2 = p_sweep(&spec, Sign::Plus, 2, &grid, JUMP_THRESHOLD).unwrap();
        assert!(s1.error.is_none() && s2.error.is_none());
        for (a, b) in s1.points.iter().zip(&s2.points) {
            assert!(a.lambda > 0.0);
            assert!((b.lambda / a.lambda / 2f64.powf(2.0 * a.p) - 1.0).abs() < 1e-4, "p {}", a.p);
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        assert!(p_sweep(&spec, Sign::Plus, 1, &[2.5, 2.0], JUMP_THRESHOLD).is_err());
        assert!(p_sweep(&spec, Sign::Plus, 1, &[0.5, 2.0], JUMP_THRESHOLD).is_err());
    }

    #[test]
    fn eigenfunction_interpolation_hits_ends() {
        let spec = ProblemSpec::new(2.0, WeightSpec::constant(1.0));
        let table = enumerate_unverified(&spec, 1).unwrap();
        let pair = &table.pairs_plus[0];
        assert_eq!(pair.eigenfunction_at(0.0), 0.0);
        assert!(pair.eigenfunction_at(1.0).abs() < 1e-12);
        assert!((pair.eigenfunction_at(0.5) - 2f64.sqrt()).abs() < 1e-4);
    }
}
