//! Variational engine on the finite-difference grid.
//!
//! The discrete energies are `sum |D^2 u|^p h` and `sum m |u|^p h` with `D^2`
//! the Dirichlet second difference. At `p = 2` the stationarity condition is
//! the generalized eigenproblem `K u = lambda M u` with `K = D^2 D^2` and
//! `M = diag(m)`, solved densely by [`oracle_p2`]. For any `p` the
//! constrained minima are found by projected gradient descent on a
//! homogeneous quotient: descend, then rescale back onto the constraint
//! surface. The gradient is preconditioned by `K^{-1}` (two tridiagonal
//! solves), which at `p = 2` turns a unit step into one inverse-iteration
//! step.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcore::{phi, second_difference, Exponent, GridFunction};
use crate::weight::Weight;

/// Oracle eigenvalues above this magnitude come from `m(x_i) ~ 0` rows.
pub const SPURIOUS_CAP: f64 = 1e10;
const ARMIJO_C: f64 = 1e-4;
const STALL_WINDOW: usize = 50;
const STALL_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub m: Vec<f64>,
    pub h: f64,
    pub exponent: Exponent,
}

impl DiscreteProblem {
    pub fn new(m: GridFunction, exponent: Exponent) -> Result<Self> {
        if m.n() < 7 {
            return Err(Error::GridTooSmall { n: m.n(), min: 7 });
        }
        Ok(Self {
            h: m.h(),
            m: m.into_values(),
            exponent,
        })
    }

    pub fn from_weight(w: &impl Weight, n: usize, exponent: Exponent) -> Result<Self> {
        Self::new(w.samples(n), exponent)
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn p(&self) -> f64 {
        self.exponent.p()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n()).map(move |i| i as f64 * self.h)
    }
}

// ---------------------------------------------------------------------------
// p = 2 dense oracle

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMode {
    pub lambda: f64,
    /// Eigenvector, sign-normalized so that it starts positive.
    pub u: GridFunction,
}

impl OracleMode {
    /// Interior sign changes of the eigenvector.
    pub fn zero_count(&self) -> usize {
        sign_changes(self.u.values(), 1e-9)
    }

    /// Shooting seed `(lambda, beta)` for the normalization `u'(0) = 1`,
    /// from `u_1 ~ u'(0) h` and `(D^2 u)_1 ~ beta h`.
    pub fn shooting_seed(&self) -> (f64, f64) {
        let u = self.u.values();
        let v = self.u.second_difference();
        (self.lambda, v[0] / u[0])
    }
}

/// Counts sign changes, ignoring entries below `rel_tol * max|u|`.
pub fn sign_changes(u: &[f64], rel_tol: f64) -> usize {
    let scale = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut last = 0.0;
    let mut count = 0;
    for &v in u {
        if v.abs() <= rel_tol * scale {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    /// Positive eigenvalues, ascending.
    pub positive: Vec<OracleMode>,
    /// Negative eigenvalues, descending.
    pub negative: Vec<OracleMode>,
}

/// Dense generalized eigensolver for `K u = lambda M u` at `p = 2`.
///
/// With `K = L L^T` the problem is equivalent to the symmetric standard
/// problem `L^{-1} M L^{-T} y = sigma y`, `lambda = 1/sigma`.
pub fn oracle_p2(prob: &DiscreteProblem) -> Result<OracleSpectrum> {
    if prob.p() != 2.0 {
        return Err(Error::InvalidExponent(prob.p()));
    }
    if prob.m.iter().all(|m| m.abs() < 1e-14) {
        return Err(Error::DegenerateWeight);
    }
    let n = prob.n();
    let d = DMatrix::from_fn(n, n, |i, j| {
        let inv_h2 = 1.0 / (prob.h * prob.h);
        match i.abs_diff(j) {
            0 => -2.0 * inv_h2,
            1 => inv_h2,
            _ => 0.0,
        }
    });
    let k = &d * &d;
    let chol = k.cholesky().expect("D^2 D^2 is symmetric positive definite");
    let l = chol.l();
    // C = L^{-1} M L^{-T} = L^{-1} (L^{-1} M)^T
    let m_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&prob.m));
    let x = l.solve_lower_triangular(&m_diag).expect("nonsingular");
    let c = l.solve_lower_triangular(&x.transpose()).expect("nonsingular");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lt = l.transpose();

    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (idx, &sigma) in eig.eigenvalues.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        let lambda = 1.0 / sigma;
        if lambda.abs() > SPURIOUS_CAP {
            continue;
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut u = lt.solve_upper_triangular(&y).expect("nonsingular");
        let first = u.iter().copied().find(|v| v.abs() > 1e-12 * u.amax()).unwrap_or(1.0);
        let norm = u.amax() * first.signum();
        u /= norm;
        let mode = OracleMode {
            lambda,
            u: GridFunction::new(u.iter().copied().collect())?,
        };
        if lambda > 0.0 {
            positive.push(mode);
        } else {
            negative.push(mode);
        }
    }
    positive.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    negative.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    Ok(OracleSpectrum { positive, negative })
}

// ---------------------------------------------------------------------------
// Projected gradient on homogeneous quotients

/// Solves `D y = g` for the Dirichlet second difference (Thomas algorithm).
fn solve_second_difference(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let h2 = h * h;
    // (y_{i-1} - 2 y_i + y_{i+1}) = h^2 g_i
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = 1.0 / -2.0;
    d[0] = h2 * g[0] / -2.0;
    for i in 1..n {
        let denom = -2.0 - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (h2 * g[i] - d[i - 1]) / denom;
    }
    let mut y = vec![0.0; n];
    y[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = d[i] - c[i] * y[i + 1];
    }
    y
}

/// `R(u) = (sum |D^2 u|^p - shift * sum m |u|^p) / sum b |u|^p`.
struct Quotient<'a> {
    prob: &'a DiscreteProblem,
    shift: f64,
    denom: &'a [f64],
}

struct Eval {
    value: f64,
    stiffness: f64,
    denom: f64,
}

impl Quotient<'_> {
    fn eval(&self, u: &[f64]) -> Eval {
        let p = self.prob.p();
        let du = second_difference(u, self.prob.h);
        let stiffness: f64 = du.iter().map(|d| d.abs().powf(p)).sum();
        let mut shifted = 0.0;
        let mut denom = 0.0;
        for (i, ui) in u.iter().enumerate() {
            let a = ui.abs().powf(p);
            shifted += self.prob.m[i] * a;
            denom += self.denom[i] * a;
        }
        Eval {
            value: (stiffness - self.shift * shifted) / denom,
            stiffness,
            denom,
        }
    }

    /// Gradient of `R` divided by `p / denom`.
    fn gradient(&self, u: &[f64], r: f64) -> Vec<f64> {
        let p = self.prob.p();
        let h = self.prob.h;
        let du = second_difference(u, h);
        let phi_du: Vec<f64> = du.iter().map(|d| phi(*d, p)).collect();
        let mut g = second_difference(&phi_du, h);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi -= (self.shift * self.prob.m[i] + r * self.denom[i]) * phi(u[i], p);
        }
        g
    }

    /// Full gradient of `R`, for checks.
    #[cfg(test)]
    fn full_gradient(&self, u: &[f64]) -> Vec<f64> {
        let ev = self.eval(u);
        let s = self.prob.p() / ev.denom;
        self.gradient(u, ev.value).into_iter().map(|g| g * s).collect()
    }

    fn normalize(&self, u: &mut [f64]) -> bool {
        let p = self.prob.p();
        let w: f64 = u.iter().zip(self.denom).map(|(x, b)| b * x.abs().powf(p)).sum::<f64>() * self.prob.h;
        if !(w > 0.0) || !w.is_finite() {
            return false;
        }
        let s = w.powf(-1.0 / p);
        u.iter_mut().for_each(|x| *x *= s);
        true
    }
}

/// Result of a projected-gradient minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMin {
    pub value: f64,
    pub minimizer: GridFunction,
    pub iterations: usize,
    /// False when the iteration cap was hit (best iterate returned).
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub max_iter: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { max_iter: 200_000 }
    }
}

fn minimize(q: &Quotient<'_>, init: &[f64], cfg: &DescentConfig) -> Result<QuotientMin> {
    let p = q.prob.p();
    let h = q.prob.h;
    let mut u = init.to_vec();
    if !q.normalize(&mut u) {
        return Err(Error::InfeasibleStart);
    }
    let mut ev = q.eval(&u);
    let mut history = vec![ev.value];
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let g = q.gradient(&u, ev.value);
        // K^{-1} g, rescaled so that the unit step is commensurate with u for
        // any p (the scale factor is exactly 1 at p = 2).
        let du = second_difference(&u, h);
        let quad: f64 = du.iter().map(|d| d * d).sum();
        let scale = if p == 2.0 { 1.0 } else { quad / ev.stiffness };
        let dir: Vec<f64> = solve_second_difference(&solve_second_difference(&g, h), h)
            .into_iter()
            .map(|x| -scale * x)
            .collect();
        let slope = p / ev.denom * g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        if !(slope < 0.0) {
            converged = true;
            break;
        }

        let mut tau = 1.0;
        let mut next = None;
        while tau > 1e-20 {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + tau * b).collect();
            let te = q.eval(&trial);
            if te.denom > 0.0 && te.value <= ev.value + ARMIJO_C * tau * slope {
                if q.normalize(&mut trial) {
                    next = Some(trial);
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some(next) = next else {
            converged = true;
            break;
        };
        u = next;
        ev = q.eval(&u);
        history.push(ev.value);

        if history.len() > STALL_WINDOW {
            let old = history[history.len() - 1 - STALL_WINDOW];
            let scale = (ev.stiffness / ev.denom).abs().max(ev.value.abs());
            if old - ev.value < STALL_REL * scale {
                converged = true;
                break;
            }
        }
    }
    Ok(QuotientMin {
        value: ev.value,
        minimizer: GridFunction::new(u)?,
        iterations,
        converged,
    })
}

/// A feasible, deliberately asymmetric starting vector: positive, weighted
/// towards `{m > 0}`.
pub fn default_init(prob: &DiscreteProblem) -> GridFunction {
    let vals = prob
        .nodes()
        .zip(&prob.m)
        .map(|(x, m)| (m.max(0.0) + 0.05) * x * (1.0 - x) * (1.0 + 0.5 * x))
        .collect();
    GridFunction::new(vals).expect("finite")
}

/// Minimizes `sum |D^2 u|^p / sum m |u|^p` over `{sum m |u|^p h = 1}`.
///
/// Returns the principal eigenvalue and a minimizer normalized on the
/// constraint surface with `sum u > 0`.
pub fn projected_gradient_lambda1(prob: &DiscreteProblem, init: &GridFunction, cfg: &DescentConfig) -> Result<QuotientMin> {
    if init.n() != prob.n() {
        return Err(Error::GridMismatch {
            left: init.n(),
            right: prob.n(),
        });
    }
    let q = Quotient {
        prob,
        shift: 0.0,
        denom: &prob.m,
    };
    let mut out = minimize(&q, init.values(), cfg)?;
    if out.minimizer.values().iter().sum::<f64>() < 0.0 {
        out.minimizer = out.minimizer.scaled(-1.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mu1Point {
    pub lambda: f64,
    pub mu1: f64,
    pub minimizer: GridFunction,
    pub converged: bool,
}

/// `mu_1(lambda) = min { sum |D^2 u|^p h - lambda sum m |u|^p h : sum |u|^p h = 1 }`.
pub fn mu1_at(prob: &DiscreteProblem, lambda: f64, init: &GridFunction, cfg: &DescentConfig) -> Result<Mu1Point> {
    let ones = vec![1.0; prob.n()];
    let q = Quotient {
        prob,
        shift: lambda,
        denom: &ones,
    };
    let out = minimize(&q, init.values(), cfg)?;
    Ok(Mu1Point {
        lambda,
        mu1: out.value,
        minimizer: out.minimizer,
        converged: out.converged,
    })
}

/// `mu_1` at each requested `lambda`, evaluated in parallel.
pub fn mu1_curve(prob: &DiscreteProblem, lambdas: &[f64], cfg: &DescentConfig) -> Result<Vec<Mu1Point>> {
    if let Some(bad) = lambdas.iter().find(|l| !l.is_finite()) {
        return Err(Error::Schema(format!("lambda = {bad} is not finite")));
    }
    let init = default_init(prob);
    lambdas.par_iter().map(|&l| mu1_at(prob, l, &init, cfg)).collect()
}

/// Principal eigenvalue as the unique positive zero of the concave,
/// decreasing-past-the-maximum curve `mu_1`, located by bisection.
pub fn principal_via_mu1(prob: &DiscreteProblem, cfg: &DescentConfig) -> Result<f64> {
    const CAP: f64 = 1e12;
    const REL_TOL: f64 = 1e-9;
    let init = default_init(prob);
    let at0 = mu1_at(prob, 0.0, &init, cfg)?;
    if !(at0.mu1 > 0.0) {
        return Err(Error::BracketFailure { cap: 0.0 });
    }
    let sup = prob.m.iter().map(|m| m.abs()).fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = at0.mu1 / sup.max(f64::MIN_POSITIVE);
    while mu1_at(prob, hi, &init, cfg)?.mu1 >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > CAP {
            return Err(Error::BracketFailure { cap: CAP });
        }
    }
    while hi - lo > REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mu1_at(prob, mid, &init, cfg)?.mu1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Monotonicity of the discrete operator

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub positive: usize,
    pub min_pairing: f64,
}

/// `<L(u) - L(w), u - w> = sum (phi_p(D^2 u) - phi_p(D^2 w)) (D^2 u - D^2 w) h`.
pub fn operator_pairing(u: &[f64], w: &[f64], h: f64, e: Exponent) -> f64 {
    let du = second_difference(u, h);
    let dw = second_difference(w, h);
    du.iter()
        .zip(&dw)
        .map(|(a, b)| (phi(*a, e.p()) - phi(*b, e.p())) * (a - b))
        .sum::<f64>()
        * h
}

/// Evaluates the pairing on `trials` random pairs drawn from a fixed seed.
pub fn discrete_monotonicity_probe(prob: &DiscreteProblem, trials: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = prob.n();
    let mut min_pairing = f64::INFINITY;
    let mut positive = 0;
    for _ in 0..trials.max(1) {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pairing = operator_pairing(&u, &w, prob.h, prob.exponent);
        if pairing > 0.0 {
            positive += 1;
        }
        min_pairing = min_pairing.min(pairing);
    }
    MonotonicityReport {
        trials: trials.max(1),
        positive,
        min_pairing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::WeightSpec;
    use std::f64::consts::PI;

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    fn problem(w: &WeightSpec, n: usize, p: f64) -> DiscreteProblem {
        DiscreteProblem::from_weight(w, n, ex(p)).unwrap()
    }

    #[test]
    fn thomas_solver_inverts_second_difference() {
        let u: Vec<f64> = (1..=20).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let h = 1.0 / 21.0;
        let back = solve_second_difference(&second_difference(&u, h), h);
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_constant_weight_matches_closed_form() {
        let spec = oracle_p2(&problem(&WeightSpec::constant(1.0), 399, 2.0)).unwrap();
        assert!(spec.negative.is_empty());
        for k in 1..=4 {
            let exact = (k as f64 * PI).powi(4);
            let got = spec.positive[k - 1].lambda;
            assert!((got / exact - 1.0).abs() < 5e-3, "k={k}: {got}");
            assert_eq!(spec.positive[k - 1].zero_count(), k - 1);
        }
    }

    #[test]
    fn oracle_rejects_bad_inputs() {
        assert!(matches!(oracle_p2(&problem(&WeightSpec::constant(1.0), 20, 3.0)), Err(Error::InvalidExponent(_))));
        assert_eq!(oracle_p2(&problem(&WeightSpec::constant(0.0), 20, 2.0)), Err(Error::DegenerateWeight));
        assert!(matches!(DiscreteProblem::from_weight(&WeightSpec::constant(1.0), 5, ex(2.0)), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn oracle_converges_at_second_order() {
        let err = |n| {
            let s = oracle_p2(&problem(&WeightSpec::constant(1.0), n, 2.0)).unwrap();
            (s.positive[0].lambda - PI.powi(4)).abs()
        };
        let (e1, e2, e3) = (err(99), err(199), err(399));
        for r in [e1 / e2, e2 / e3] {
            assert!((r - 4.0).abs() < 0.1, "ratio {r}");
        }
    }

    #[test]
    fn projected_gradient_constant_weight() {
        let prob = problem(&WeightSpec::constant(1.0), 199, 2.0);
        let init = GridFunction::from_fn(199, |x| x * (1.0 - x)).unwrap();
        let out = projected_gradient_lambda1(&prob, &init, &DescentConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.value / PI.powi(4) - 1.0).abs() < 0.01);
        assert!(out.minimizer.values().iter().all(|v| *v > 0.0));
        for c in [0.1, 10.0] {
            let again = projected_gradient_lambda1(&prob, &init.scaled(c), &DescentConfig::default()).unwrap();
            assert!((again.value / out.value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn projected_gradient_matches_oracle_for_cosine() {
        let prob = problem(&WeightSpec::cosine(1), 199, 2.0);
        let oracle = oracle_p2(&prob).unwrap();
        let out = projected_gradient_lambda1(&prob, &default_init(&prob), &DescentConfig::default()).unwrap();
        let want = oracle.positive[0].lambda;
        assert!((out.value / want - 1.0).abs() < 1e-6, "{} vs {want}", out.value);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let prob = problem(&WeightSpec::linear_shift(0.5), 51, 2.0);
        // Supported where m < 0 only.
        let init = GridFunction::from_fn(51, |x| if x < 0.4 { x } else { 0.0 }).unwrap();
        assert_eq!(
            projected_gradient_lambda1(&prob, &init, &DescentConfig::default()),
            Err(Error::InfeasibleStart)
        );
    }

    // Central finite differences against the analytic gradient.
    #[test]
    fn quotient_gradient_matches_finite_differences() {
        for (p, shift) in [(2.0, 0.0), (3.0, 0.0), (1.5, 40.0), (2.5, -10.0)] {
            let prob = problem(&WeightSpec::cosine(1), 15, p);
            let q = Quotient {
                prob: &prob,
                shift,
                denom: &[1.0; 15],
            };
            let u: Vec<f64> = prob.nodes().map(|x| (PI * x).sin() + 0.3 * x).collect();
            let g = q.full_gradient(&u);
            for i in 0..u.len() {
                let step = 1e-6 * u[i].abs().max(1e-3);
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += step;
                dn[i] -= step;
                let fd = (q.eval(&up).value - q.eval(&dn).value) / (2.0 * step);
                assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1e-8 * g.iter().map(|x| x.abs()).fold(0.0, f64::max)),
                    "p={p} i={i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn mu1_is_linear_for_constant_weight() {
        let prob = problem(&WeightSpec::constant(1.0), 99, 2.0);
        let l1 = oracle_p2(&prob).unwrap().positive[0].lambda;
        let pts = mu1_curve(&prob, &[0.0, 20.0, 50.0], &DescentConfig::default()).unwrap();
        for pt in &pts {
            assert!((pt.mu1 - (l1 - pt.lambda)).abs() < 1e-6 * l1, "{} {}", pt.lambda, pt.mu1);
            let norm: f64 = pt.minimizer.values().iter().map(|v| v * v).sum::<f64>() * prob.h;
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn principal_via_mu1_constant_weight() {
        let prob = problem(&WeightSpec::constant(1.0), 199, 2.0);
        let l = principal_via_mu1(&prob, &DescentConfig::default()).unwrap();
        assert!((l / PI.powi(4) - 1.0).abs() < 0.01);
        assert!(l >= 1.0);
    }

    #[test]
    fn monotonicity_probe() {
        let prob = problem(&WeightSpec::constant(1.0), 50, 3.0);
        let u: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        assert_eq!(operator_pairing(&u, &u, prob.h, prob.exponent), 0.0);
        let w: Vec<f64> = u.iter().map(|x| x * 0.5 + 0.1).collect();
        let p2 = operator_pairing(&u, &w, prob.h, ex(2.0));
        let diff: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let direct: f64 = second_difference(&diff, prob.h).iter().map(|d| d * d).sum::<f64>() * prob.h;
        assert!((p2 - direct).abs() < 1e-9 * direct);
        let rep = discrete_monotonicity_probe(&prob, 1000, 7);
        assert_eq!(rep.positive, 1000);
        assert!(rep.min_pairing > 0.0);
        assert_eq!(rep, discrete_monotonicity_probe(&prob, 1000, 7));
    }

    #[test]
    fn sign_change_counter() {
        assert_eq!(sign_changes(&[1.0, 2.0, -1.0, -3.0, 4.0], 1e-9), 2);
        assert_eq!(sign_changes(&[1.0, 1e-15, 2.0], 1e-9), 0);
        assert_eq!(sign_changes(&[1.0, -1e-15, 2.0], 1e-9), 0);
    }

    proptest::proptest! {
        #[test]
        fn operator_is_strictly_monotone(
            u in proptest::collection::vec(-1.0f64..1.0, 16),
            w in proptest::collection::vec(-1.0f64..1.0, 16),
            p in 1.2f64..5.0,
        ) {
            let pairing = operator_pairing(&u, &w, 1.0 / 17.0, ex(p));
            if u == w {
                proptest::prop_assert_eq!(pairing, 0.0);
            } else {
                proptest::prop_assert!(pairing > 0.0);
            }
        }

        #[test]
        fn sign_changes_ignore_scaling(u in proptest::collection::vec(-1.0f64..1.0, 2..40), c in 0.1f64..100.0) {
            let scaled: Vec<f64> = u.iter().map(|v| -c * v).collect();
            proptest::prop_assert_eq!(sign_changes(&u, 1e-9), sign_changes(&scaled, 1e-9));
        }
    }
}
