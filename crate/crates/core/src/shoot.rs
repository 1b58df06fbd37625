//! Shooting engine.
//!
//! With `v = phi_p(u'')` the eigenvalue problem becomes the first-order
//! system
//!
//! ```text
//! u' = du,  du' = phi_{p'}(v),  v' = dv,  dv' = lambda m(x) phi_p(u)
//! ```
//!
//! started from the left Navier data `u(0) = v(0) = 0`, `u'(0) = 1`,
//! `v'(0) = beta`. [`integrate`] and [`miss_map`] expose the one-ended map
//! `(lambda, beta) -> (u(1), v(1))`. The eigenpair solver [`newton_solve`]
//! instead shoots from both ends and matches at an interior point, which
//! keeps the growing modes of high eigenvalues from swamping the Jacobian.
//! Integration is fixed-step RK4 so every map is reproducible bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcore::{phi, Exponent};
use crate::weight::Weight;

/// Any state component above this aborts the integration.
pub const MAGNITUDE_CAP: f64 = 1e12;
/// Substeps on each side of a zero of `u` or `v`, graded quadratically
/// toward the zero, where `phi_p` or `phi_{p'}` loses smoothness.
const ZONE_SUBSTEPS: usize = 16;
/// Zero crossings closer than this to an endpoint are boundary artifacts.
const EDGE_EXCLUSION: f64 = 1e-6;
const BISECTION_ITERS: usize = 60;
/// Relative size of `|u|` at a sample that counts as touching zero.
const TANGENT_TOL: f64 = 1e-9;
const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootState {
    pub x: f64,
    pub u: f64,
    pub du: f64,
    /// `phi_p(u'')`.
    pub v: f64,
    pub dv: f64,
}

impl ShootState {
    fn from_vec(x: f64, y: [f64; 4]) -> Self {
        Self {
            x,
            u: y[0],
            du: y[1],
            v: y[2],
            dv: y[3],
        }
    }

    fn as_vec(&self) -> [f64; 4] {
        [self.u, self.du, self.v, self.dv]
    }

    /// `u'' = phi_{p'}(v)`.
    pub fn u_second(&self, e: Exponent) -> f64 {
        phi(self.v, e.conjugate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootTrace {
    pub lambda: f64,
    pub exponent: Exponent,
    pub states: Vec<ShootState>,
    /// Refined sign changes of `u` inside `(0, 1)`, increasing.
    pub zero_crossings: Vec<f64>,
    /// Sample points where `u` touches zero without changing sign.
    pub tangential_zeros: Vec<f64>,
    pub miss_u: f64,
    pub miss_v: f64,
}

impl ShootTrace {
    pub fn max_abs_u(&self) -> f64 {
        self.states.iter().map(|s| s.u.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_v(&self) -> f64 {
        self.states.iter().map(|s| s.v.abs()).fold(0.0, f64::max)
    }

    /// Boundary miss relative to the trajectory size.
    pub fn scaled_residual(&self) -> (f64, f64) {
        (
            self.miss_u.abs() / self.max_abs_u().max(f64::MIN_POSITIVE),
            self.miss_v.abs() / self.max_abs_v().max(f64::MIN_POSITIVE),
        )
    }

    fn bracket(&self, x: f64) -> usize {
        let i = self.states.partition_point(|s| s.x <= x);
        i.saturating_sub(1).min(self.states.len() - 2)
    }

    /// Cubic Hermite interpolation of `(u, u', v, v')` at `x`.
    pub fn interpolate(&self, x: f64) -> ShootState {
        let i = self.bracket(x);
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let e = self.exponent;
        let u = hermite(a.x, b.x, a.u, b.u, a.du, b.du, x);
        let du = hermite(a.x, b.x, a.du, b.du, a.u_second(e), b.u_second(e), x);
        let v = hermite(a.x, b.x, a.v, b.v, a.dv, b.dv, x);
        let t = (x - a.x) / (b.x - a.x);
        let dv = a.dv + t * (b.dv - a.dv);
        ShootState { x, u, du, v, dv }
    }

    /// `u` at `count` equispaced interior points `i/(count+1)`.
    pub fn resample_u(&self, count: usize) -> Vec<f64> {
        let h = 1.0 / (count + 1) as f64;
        (1..=count).map(|i| self.interpolate(i as f64 * h).u).collect()
    }

    /// Trapezoid rule for `integral of w(x) |u|^p` over the trace.
    pub fn weighted_p_integral(&self, w: &impl Weight) -> f64 {
        let p = self.exponent.p();
        self.states
            .windows(2)
            .map(|s| {
                let fa = w.at(s[0].x) * s[0].u.abs().powf(p);
                let fb = w.at(s[1].x) * s[1].u.abs().powf(p);
                0.5 * (fa + fb) * (s[1].x - s[0].x)
            })
            .sum()
    }
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootConfig {
    pub step_count: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub fd_jacobian_step: f64,
    pub damping_factor: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            step_count: 4096,
            newton_tol: 1e-12,
            newton_max_iter: 60,
            fd_jacobian_step: 1e-6,
            damping_factor: 1.0,
        }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_count < 100 {
            return Err(Error::Schema(format!("step_count = {} must be at least 100", self.step_count)));
        }
        if !(self.newton_tol > 0.0) || !(self.fd_jacobian_step > 0.0) {
            return Err(Error::Schema("tolerances must be positive".into()));
        }
        if !(self.damping_factor > 0.0 && self.damping_factor <= 1.0) {
            return Err(Error::Schema("damping_factor must lie in (0, 1]".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Schema("newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Right-hand side `(u', u'', v', v'')` of the shooting system.
#[inline]
pub fn system_rhs<W: Weight + ?Sized>(s: &ShootState, lambda: f64, m: &W, e: Exponent) -> [f64; 4] {
    rhs(s.x, &s.as_vec(), lambda, m, e)
}

#[inline]
fn rhs<W: Weight + ?Sized>(x: f64, y: &[f64; 4], lambda: f64, m: &W, e: Exponent) -> [f64; 4] {
    [
        y[1],
        phi(y[2], e.conjugate()),
        y[3],
        lambda * m.at(x) * phi(y[0], e.p()),
    ]
}

fn rk4<W: Weight + ?Sized>(x: f64, y: &[f64; 4], h: f64, lambda: f64, m: &W, e: Exponent) -> [f64; 4] {
    let add = |a: &[f64; 4], k: &[f64; 4], s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]];
    let k1 = rhs(x, y, lambda, m, e);
    let k2 = rhs(x + 0.5 * h, &add(y, &k1, 0.5 * h), lambda, m, e);
    let k3 = rhs(x + 0.5 * h, &add(y, &k2, 0.5 * h), lambda, m, e);
    let k4 = rhs(x + h, &add(y, &k3, h), lambda, m, e);
    let mut out = *y;
    for j in 0..4 {
        out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

fn flips(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
}

/// Earliest sign change of `u` or `v` inside `(x0, reach)`, located on the
/// cubic Hermite interpolant of the step `x0 -> x1` (extrapolated when
/// `reach > x1`).
fn first_sign_change(x0: f64, y0: &[f64; 4], x1: f64, y1: &[f64; 4], reach: f64) -> Option<f64> {
    let root = |a: f64, b: f64, da: f64, db: f64| {
        let f = |x: f64| hermite(x0, x1, a, b, da, db, x);
        if !flips(a, f(reach)) {
            return None;
        }
        let (mut lo, mut hi) = (x0, reach);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if flips(a, f(mid)) || f(mid) == 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let zu = root(y0[0], y1[0], y0[1], y1[1]);
    let zv = root(y0[2], y1[2], y0[3], y1[3]);
    match (zu, zv) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Integrates from `x = 0` with `u'(0) = 1`, `v'(0) = beta`.
pub fn integrate<W: Weight + ?Sized>(lambda: f64, beta: f64, m: &W, e: Exponent, cfg: &ShootConfig) -> Result<ShootTrace> {
    integrate_from(lambda, 1.0, beta, m, e, cfg)
}

/// Integrates from `x = 0` with `u'(0) = slope`, `v'(0) = beta`.
///
/// The first `h/100` is covered by the leading terms of the series
/// expansion at the degenerate corner `u = v = 0`; the rest by
/// `cfg.step_count` RK4 steps.
pub fn integrate_from<W: Weight + ?Sized>(
    lambda: f64,
    slope: f64,
    beta: f64,
    m: &W,
    e: Exponent,
    cfg: &ShootConfig,
) -> Result<ShootTrace> {
    let states = integrate_span(lambda, slope, beta, m, e, cfg.step_count, 1.0)?;
    Ok(ShootTrace::from_states(lambda, e, states))
}

impl ShootTrace {
    fn from_states(lambda: f64, exponent: Exponent, states: Vec<ShootState>) -> Self {
        let last = states[states.len() - 1];
        let mut trace = ShootTrace {
            lambda,
            exponent,
            miss_u: last.u,
            miss_v: last.v,
            states,
            zero_crossings: Vec::new(),
            tangential_zeros: Vec::new(),
        };
        trace.zero_crossings = find_crossings(&trace);
        trace.tangential_zeros = find_tangential(&trace);
        trace
    }
}

/// Integrates over `[0, end]` in `n` RK4 steps after the series start.
fn integrate_span<W: Weight + ?Sized>(
    lambda: f64,
    slope: f64,
    beta: f64,
    m: &W,
    e: Exponent,
    n: usize,
    end: f64,
) -> Result<Vec<ShootState>> {
    let (p, q) = (e.p(), e.conjugate());
    let x0 = end / n as f64 / 100.0;

    let a = phi(beta, q);
    let b = lambda * m.at(0.0) * phi(slope, p);
    let start = [
        slope * x0 + a * x0.powf(q + 1.0) / (q * (q + 1.0)),
        slope + a * x0.powf(q) / q,
        beta * x0 + b * x0.powf(p + 1.0) / (p * (p + 1.0)),
        beta + b * x0.powf(p) / p,
    ];

    let mut states = Vec::with_capacity(n + 2);
    states.push(ShootState {
        x: 0.0,
        u: 0.0,
        du: slope,
        v: 0.0,
        dv: beta,
    });
    states.push(ShootState::from_vec(x0, start));

    // Every zero x* of u or v gets the window [x* - h, x* + h] integrated
    // on a mesh graded toward x*. The window moves continuously with x*, so
    // the result stays smooth in (lambda, beta, p) when a zero passes a grid
    // node. Zeros just beyond `end` are tracked too: at an eigenpair u and v
    // both vanish at x = 1.
    let h = (end - x0) / n as f64;
    let node = |i: usize| if i >= n { end } else { x0 + i as f64 * h };
    let check = |y: &[f64; 4], x: f64| {
        if y.iter().any(|c| !(c.abs() <= MAGNITUDE_CAP)) {
            Err(Error::Overflow { x })
        } else {
            Ok(())
        }
    };
    let mut y = start;
    let mut x = x0;
    let mut i = 0;
    let mut zone_end = x0;
    while x < end {
        while node(i) <= x {
            i += 1;
        }
        let x_next = node(i);
        let y_next = rk4(x, &y, x_next - x, lambda, m, e);
        check(&y_next, x_next)?;
        let reach = if i >= n { end + h } else { x_next };
        let zone = first_sign_change(x, &y, x_next, &y_next, reach).filter(|z| (z - h).max(zone_end) < end);
        let Some(z) = zone else {
            x = x_next;
            y = y_next;
            states.push(ShootState::from_vec(x, y));
            continue;
        };

        // Rewind to the last stored state at or before the window start.
        let lo = (z - h).max(zone_end);
        while states.len() > 2 && states[states.len() - 1].x > lo {
            states.pop();
        }
        let back = *states.last().expect("start states are kept");
        let (mut xs, mut ys) = (back.x, back.as_vec());
        let hi = (z + h).min(end);
        let left = (0..=ZONE_SUBSTEPS).map(|j| {
            let t = (ZONE_SUBSTEPS - j) as f64 / ZONE_SUBSTEPS as f64;
            z - (z - lo) * t * t
        });
        let right = (1..=ZONE_SUBSTEPS).map(|j| {
            let t = j as f64 / ZONE_SUBSTEPS as f64;
            z + (hi - z) * t * t
        });
        let tail = std::iter::once(end).filter(|_| z >= end);
        for xt in left.chain(right).map(|xt| xt.min(end)).chain(tail) {
            if xt > xs {
                ys = rk4(xs, &ys, xt - xs, lambda, m, e);
                check(&ys, xt)?;
                xs = xt;
                states.push(ShootState::from_vec(xs, ys));
            }
        }
        x = xs;
        y = ys;
        zone_end = xs;
    }
    Ok(states)
}

fn find_crossings(trace: &ShootTrace) -> Vec<f64> {
    let mut zeros = Vec::new();
    for w in trace.states.windows(2).skip(1) {
        let (a, b) = (&w[0], &w[1]);
        if !flips(a.u, b.u) {
            continue;
        }
        let (mut lo, mut hi) = (a.x, b.x);
        let f = |x: f64| hermite(a.x, b.x, a.u, b.u, a.du, b.du, x);
        let f_lo = f(lo);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if flips(f_lo, f(mid)) || f(mid) == 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let z = 0.5 * (lo + hi);
        if z > EDGE_EXCLUSION && z < 1.0 - EDGE_EXCLUSION {
            zeros.push(z);
        }
    }
    zeros
}

fn find_tangential(trace: &ShootTrace) -> Vec<f64> {
    let scale = trace.max_abs_u();
    let s = &trace.states;
    let mut out = Vec::new();
    for i in 2..s.len().saturating_sub(1) {
        let (l, c, r) = (s[i - 1].u, s[i].u, s[i + 1].u);
        let same_side = (l > 0.0 && r > 0.0) || (l < 0.0 && r < 0.0);
        if same_side
            && c.abs() <= l.abs()
            && c.abs() <= r.abs()
            && c.abs() < TANGENT_TOL * scale
            && s[i].x > EDGE_EXCLUSION
            && s[i].x < 1.0 - EDGE_EXCLUSION
        {
            out.push(s[i].x);
        }
    }
    out
}

/// Right-end miss `(u(1), v(1))`.
pub fn miss_map<W: Weight + ?Sized>(lambda: f64, beta: f64, m: &W, e: Exponent, cfg: &ShootConfig) -> Result<(f64, f64)> {
    let t = integrate(lambda, beta, m, e, cfg)?;
    Ok((t.miss_u, t.miss_v))
}

/// Interior point where the left and right shots of [`newton_solve`] meet.
/// Kept off the midpoint, which is a zero of every antisymmetric mode of a
/// symmetric weight.
pub const MATCH_POINT: f64 = 0.447213595499958;

/// `m(1 - y)`: the weight seen by a shot started at the right end.
struct Reflected<'a, W: ?Sized>(&'a W);

impl<W: Weight + ?Sized> Weight for Reflected<'_, W> {
    fn at(&self, y: f64) -> f64 {
        self.0.at(1.0 - y)
    }
}

/// Whether `m(x) = m(1 - x)` on a fine sample of `[0, 1/2]`.
pub fn is_mirror_symmetric<W: Weight + ?Sized>(m: &W) -> bool {
    const SAMPLES: usize = 1024;
    let xs = (0..=SAMPLES).map(|i| 0.5 * i as f64 / SAMPLES as f64);
    let scale = xs.clone().map(|x| m.at(x).abs()).fold(0.0, f64::max);
    xs.into_iter().all(|x| (m.at(x) - m.at(1.0 - x)).abs() <= 1e-12 * scale)
}

/// Reflection symmetry of an eigenfunction of a mirror-symmetric weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// `u(1 - x) = u(x)`, so `u'(1/2) = v'(1/2) = 0`.
    Even,
    /// `u(1 - x) = -u(x)`, so `u(1/2) = v(1/2) = 0`.
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Unknowns `(lambda, theta, u'(1), v'(1))` with
/// `(u'(0), v'(0)) = (cos theta, sin theta)`.
///
/// The angle fixes the amplitude of the eigenfunction without assuming
/// `u'(0) != 0`; along some branches `u'(0)` tends to zero as p moves.
type Unknowns = [f64; 4];

/// How the boundary value problem is posed to Newton.
///
/// `Matched` shoots from both ends and matches all four components at
/// [`MATCH_POINT`]. `Mirror` applies to symmetric weights: it shoots over
/// `[0, 1/2]` only and imposes the parity conditions there, which keeps the
/// nearly degenerate even/odd pairs of such weights apart.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Form {
    Matched,
    Mirror(Parity),
}

/// A [`Form`] together with the scale `sigma` of the left data
/// `(u'(0), v'(0)) = (cos theta, sigma sin theta)`. `v'(0)` naturally
/// carries a factor of about `sqrt(lambda)` relative to `u'(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    form: Form,
    sigma: f64,
}

/// Left shot on `[0, xm]` and right shot on `[xm, 1]`, both in increasing
/// `x`, together with the residual components of the pose.
struct Halves {
    left: Vec<ShootState>,
    right: Vec<ShootState>,
    mismatch: Vec<f64>,
    scales: Vec<f64>,
}

impl Halves {
    fn new(form: Form, left: Vec<ShootState>, right: Vec<ShootState>) -> Self {
        let mut sup = [f64::MIN_POSITIVE; 4];
        for s in left.iter().chain(&right) {
            for (o, c) in sup.iter_mut().zip(s.as_vec()) {
                *o = o.max(c.abs());
            }
        }
        let l = left[left.len() - 1].as_vec();
        let r = right[0].as_vec();
        let (mismatch, scales) = match form {
            Form::Matched => ((0..4).map(|i| l[i] - r[i]).collect(), sup.to_vec()),
            Form::Mirror(Parity::Even) => (vec![l[1], l[3]], vec![sup[1], sup[3]]),
            Form::Mirror(Parity::Odd) => (vec![l[0], l[2]], vec![sup[0], sup[2]]),
        };
        Self {
            left,
            right,
            mismatch,
            scales,
        }
    }

    fn residual(&self) -> f64 {
        self.mismatch.iter().zip(&self.scales).map(|(d, s)| d.abs() / s).fold(0.0, f64::max)
    }

    fn merit(&self, scales: &[f64]) -> f64 {
        self.mismatch.iter().zip(scales).map(|(d, s)| (d / s).powi(2)).sum::<f64>().sqrt()
    }

    fn stitch(self, form: Form, lambda: f64, e: Exponent) -> ShootTrace {
        // Under a parity constraint the zeros are those of the left half,
        // mirrored; an odd mode also vanishes at the midpoint. Counting
        // across the junction would see the midpoint zero up to three times.
        let half = match form {
            Form::Matched => None,
            Form::Mirror(par) => {
                let left = ShootTrace::from_states(lambda, e, self.left.clone());
                let inner: Vec<f64> = left.zero_crossings.into_iter().filter(|z| *z < 0.5 - EDGE_EXCLUSION).collect();
                let mut zeros = inner.clone();
                if par == Parity::Odd {
                    zeros.push(0.5);
                }
                zeros.extend(inner.iter().rev().map(|z| 1.0 - z));
                Some(zeros)
            }
        };
        let mut states = self.left;
        states.extend(self.right.into_iter().skip(1));
        let mut trace = ShootTrace::from_states(lambda, e, states);
        if let Some(zeros) = half {
            trace.zero_crossings = zeros;
        }
        trace
    }
}

/// Maps states of a shot in `y = 1 - x` back to `x`, in increasing order.
fn reflect(states: &[ShootState], sign: f64) -> Vec<ShootState> {
    states
        .iter()
        .rev()
        .map(|s| ShootState {
            x: 1.0 - s.x,
            u: sign * s.u,
            du: -sign * s.du,
            v: sign * s.v,
            dv: -sign * s.dv,
        })
        .collect()
}

impl Form {
    /// Mirror forms take the parity suggested by the left data `(a, b)` and
    /// the right data `(s, g)`: an even mode has `(s, g) = -(a, b)`, an odd
    /// one `(s, g) = (a, b)`.
    fn for_weight<W: Weight + ?Sized>(m: &W, left: (f64, f64), right: (f64, f64), sigma: f64) -> Self {
        if !is_mirror_symmetric(m) {
            Form::Matched
        } else if left.0 * right.0 + left.1 * right.1 / (sigma * sigma) < 0.0 {
            Form::Mirror(Parity::Even)
        } else {
            Form::Mirror(Parity::Odd)
        }
    }

    fn dim(self) -> usize {
        match self {
            Form::Matched => 4,
            Form::Mirror(_) => 2,
        }
    }

    fn split(self) -> f64 {
        match self {
            Form::Matched => MATCH_POINT,
            Form::Mirror(_) => 0.5,
        }
    }
}

impl Pose {
    fn new(form: Form, lambda: f64) -> Self {
        Self {
            form,
            sigma: lambda.abs().sqrt().max(1.0),
        }
    }

    fn dim(self) -> usize {
        self.form.dim()
    }

    /// `(u'(0), v'(0))` for the angle `theta`.
    fn left_data(self, theta: f64) -> (f64, f64) {
        (theta.cos(), self.sigma * theta.sin())
    }

    /// Angle of the left data `(a, b)` after rescaling the eigenfunction onto
    /// the pose's ellipse, and the factor `c` of that rescaling. Scaling `u`
    /// by `c` scales `v` by `c^{p-1}`.
    fn angle_of(self, a: f64, b: f64, e: Exponent) -> (f64, f64) {
        let bs = b / self.sigma;
        let g = |c: f64| (c * a).powi(2) + (c.powf(e.p() - 1.0) * bs).powi(2) - 1.0;
        let mut hi = 1.0;
        while g(hi) < 0.0 && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let c = 0.5 * (lo + hi);
        ((c.powf(e.p() - 1.0) * bs).atan2(c * a), c)
    }

    /// Reduced unknowns of `data`, rescaled onto the pose's ellipse.
    fn unknowns_of(self, data: &ShotData, e: Exponent) -> Vec<f64> {
        let (theta, c) = self.angle_of(data.u_prime0, data.beta, e);
        let z = [data.lambda, theta, c * data.right_slope, c.powf(e.p() - 1.0) * data.right_beta];
        z[..self.dim()].to_vec()
    }

    /// Full unknowns from the reduced ones.
    fn expand(self, z: &[f64]) -> Unknowns {
        match self.form {
            Form::Matched => [z[0], z[1], z[2], z[3]],
            Form::Mirror(par) => {
                let (a, b) = self.left_data(z[1]);
                [z[0], z[1], -par.sign() * a, -par.sign() * b]
            }
        }
    }

    fn shoot<W: Weight + ?Sized>(self, z: &[f64], m: &W, e: Exponent, cfg: &ShootConfig) -> Result<Halves> {
        let xm = self.form.split();
        let nl = ((cfg.step_count as f64 * xm).round() as usize).max(1);
        let (a, b) = self.left_data(z[1]);
        let left = integrate_span(z[0], a, b, m, e, nl, xm)?;
        let right = match self.form {
            Form::Matched => {
                let nr = cfg.step_count.saturating_sub(nl).max(1);
                let r = integrate_span(z[0], -z[2], -z[3], &Reflected(m), e, nr, 1.0 - xm)?;
                reflect(&r, 1.0)
            }
            Form::Mirror(par) => reflect(&left, par.sign()),
        };
        Ok(Halves::new(self.form, left, right))
    }
}

/// A converged eigenpair of the shooting system.
#[derive(Debug, Clone)]
pub struct ShotSolution {
    pub lambda: f64,
    /// `u'(0)` and `v'(0)`, normalized so that
    /// `u'(0)^2 + v'(0)^2 / max(|lambda|, 1) = 1`.
    pub u_prime0: f64,
    pub beta: f64,
    /// `u'(1)` and `v'(1)` of the same eigenfunction.
    pub right_slope: f64,
    pub right_beta: f64,
    /// Set when the weight is mirror symmetric and the solve ran on half the
    /// interval.
    pub parity: Option<Parity>,
    /// Left and right shots joined at the matching point.
    pub trace: ShootTrace,
    pub iterations: usize,
    /// Largest component of the mismatch at the matching point, each relative
    /// to the sup norm of that component.
    pub residual: f64,
}

impl ShotSolution {
    pub fn p(&self) -> f64 {
        self.trace.exponent.p()
    }

    pub fn zero_count(&self) -> usize {
        self.trace.zero_crossings.len()
    }

    pub fn data(&self) -> ShotData {
        ShotData {
            lambda: self.lambda,
            u_prime0: self.u_prime0,
            beta: self.beta,
            right_slope: self.right_slope,
            right_beta: self.right_beta,
            parity: self.parity,
        }
    }

    fn pose(&self) -> Pose {
        Pose::new(self.parity.map_or(Form::Matched, Form::Mirror), self.lambda)
    }

    /// Unknowns in the coordinates of [`Self::pose`].
    fn reduced(&self) -> Vec<f64> {
        self.pose().unknowns_of(&self.data(), self.trace.exponent)
    }

    /// Re-integrates from the stored unknowns and returns the scaled matching
    /// residual.
    pub fn recompute_residual<W: Weight + ?Sized>(&self, m: &W, cfg: &ShootConfig) -> Result<f64> {
        let r = self.match_residual(m, cfg)?;
        Ok(r.u.max(r.v))
    }

    /// Re-integrates from the stored unknowns and splits the scaled matching
    /// residual into its `u` and `v` parts.
    pub fn match_residual<W: Weight + ?Sized>(&self, m: &W, cfg: &ShootConfig) -> Result<MatchResidual> {
        let h = self.pose().shoot(&self.reduced(), m, self.trace.exponent, cfg)?;
        let r: Vec<f64> = h.mismatch.iter().zip(&h.scales).map(|(d, s)| d.abs() / s).collect();
        Ok(match r.len() {
            4 => MatchResidual {
                u: r[0].max(r[1]),
                v: r[2].max(r[3]),
            },
            _ => MatchResidual { u: r[0], v: r[1] },
        })
    }
}

/// Scaled mismatch where the shots meet: `u` covers `u` and `u'`, `v`
/// covers `v` and `v'`, each relative to its sup norm over the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResidual {
    pub u: f64,
    pub v: f64,
}

/// Central-difference derivative of the residual components along one
/// unknown.
///
/// The step starts at `h0` and shrinks until the scaled change stays in the
/// linear regime; near sharp eigenvalues a fixed relative step lands far
/// outside it.
fn fd_column(eval: impl Fn(f64) -> Result<Vec<f64>>, h0: f64, base: &[f64], scale: &[f64]) -> Result<Vec<f64>> {
    const LINEAR_LIMIT: f64 = 1e-3;
    const TARGET: f64 = 1e-5;
    let mut h = h0;
    for attempt in 0..4 {
        let (fp, fm) = (eval(h)?, eval(-h)?);
        let size = (0..base.len())
            .map(|i| ((fp[i] - base[i]) / scale[i]).abs().max(((fm[i] - base[i]) / scale[i]).abs()))
            .fold(0.0, f64::max);
        if size <= LINEAR_LIMIT || attempt == 3 || size == 0.0 {
            return Ok((0..base.len()).map(|i| (fp[i] - fm[i]) / (2.0 * h)).collect());
        }
        h *= (TARGET / size).max(1e-4);
    }
    unreachable!()
}

/// Typical magnitude of each unknown, used for steps and scaling.
fn unknown_scales(z: &[f64]) -> Vec<f64> {
    let floor = 1e-3 * z[2..].iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
    z.iter()
        .enumerate()
        .map(|(c, v)| match c {
            0 => v.abs().max(1.0),
            1 => 1.0,
            _ => v.abs().max(floor),
        })
        .collect()
}

fn jacobian<W: Weight + ?Sized>(pose: Pose, z: &[f64], base: &Halves, m: &W, e: Exponent, cfg: &ShootConfig) -> Result<DMatrix<f64>> {
    let n = z.len();
    let zs = unknown_scales(z);
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let col = fd_column(
            |h| {
                let mut zh = z.to_vec();
                zh[c] += h;
                Ok(pose.shoot(&zh, m, e, cfg)?.mismatch)
            },
            cfg.fd_jacobian_step * zs[c],
            &base.mismatch,
            &base.scales,
        )?;
        j.set_column(c, &DVector::from_vec(col));
    }
    Ok(j)
}

/// `sigma_max / sigma_min` of `a`.
fn condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo > 0.0 && hi.is_finite() {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Guesses `u'(1)`, `v'(1)` for the left data `(u'(0), v'(0))`: the
/// combination of the two right fundamental shots that best matches the left
/// state at [`MATCH_POINT`]. Exact at `p = 2`.
fn right_guess<W: Weight + ?Sized>(lambda: f64, left: (f64, f64), m: &W, e: Exponent, cfg: &ShootConfig) -> Result<(f64, f64)> {
    let nl = ((cfg.step_count as f64 * MATCH_POINT).round() as usize).max(1);
    let nr = cfg.step_count.saturating_sub(nl).max(1);
    let shot = integrate_span(lambda, left.0, left.1, m, e, nl, MATCH_POINT)?;
    let l = shot[shot.len() - 1].as_vec();
    let end = |slope: f64, b: f64| -> Result<[f64; 4]> {
        let r = integrate_span(lambda, slope, b, &Reflected(m), e, nr, 1.0 - MATCH_POINT)?;
        Ok(reflect(&r, 1.0)[0].as_vec())
    };
    let (ra, rb) = (end(-1.0, 0.0)?, end(0.0, -1.0)?);
    let sc: Vec<f64> = (0..4).map(|i| l[i].abs().max(ra[i].abs()).max(rb[i].abs()).max(f64::MIN_POSITIVE)).collect();
    let a = DMatrix::from_fn(4, 2, |i, c| if c == 0 { ra[i] / sc[i] } else { rb[i] / sc[i] });
    let y = DVector::from_fn(4, |i, _| l[i] / sc[i]);
    let sol = a
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|_| Error::SingularJacobian { condition: f64::INFINITY })?;
    Ok((sol[0], sol[1]))
}

/// Damped Newton for an eigenpair near `(lambda0, beta0)`, where `beta0` is
/// `v'(0)` for `u'(0) = 1`.
///
/// A single shot from `x = 0` is dominated at `x = 1` by whichever mode grows
/// fastest, which makes the right-end miss nearly rank one for higher modes.
/// The solve therefore shoots from both ends and matches `(u, u', v, v')` at
/// [`MATCH_POINT`], with unknowns `(lambda, theta, u'(1), v'(1))` where
/// `(u'(0), v'(0)) = (cos theta, sin theta)`. For a mirror-symmetric weight
/// the parity is read off the starting guess and the solve runs on
/// `[0, 1/2]` with unknowns `(lambda, theta)`.
pub fn newton_solve<W: Weight + ?Sized>(
    lambda0: f64,
    beta0: f64,
    m: &W,
    e: Exponent,
    cfg: &ShootConfig,
) -> Result<ShotSolution> {
    solve_from(lambda0, 1.0, beta0, m, e, cfg)
}

/// [`newton_solve`] from general left data `(u'(0), v'(0)) = (slope0, beta0)`.
pub fn solve_from<W: Weight + ?Sized>(
    lambda0: f64,
    slope0: f64,
    beta0: f64,
    m: &W,
    e: Exponent,
    cfg: &ShootConfig,
) -> Result<ShotSolution> {
    let probe = Pose::new(Form::Matched, lambda0);
    let (theta, _) = probe.angle_of(slope0, beta0, e);
    let left = probe.left_data(theta);
    let (s, g) = right_guess(lambda0, left, m, e, cfg)?;
    let pose = Pose::new(Form::for_weight(m, left, (s, g), probe.sigma), lambda0);
    newton_posed(pose, &pose.expand(&[lambda0, theta, s, g])[..pose.dim()], m, e, cfg)
}

/// Stored unknowns of a solution, without a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotData {
    pub lambda: f64,
    pub u_prime0: f64,
    pub beta: f64,
    pub right_slope: f64,
    pub right_beta: f64,
    pub parity: Option<Parity>,
}

/// Integrates `data` once as posed and returns it as a solution, with the
/// residual it actually attains. No Newton step is taken.
pub fn reshoot<W: Weight + ?Sized>(data: &ShotData, m: &W, e: Exponent, cfg: &ShootConfig) -> Result<ShotSolution> {
    let pose = Pose::new(data.parity.map_or(Form::Matched, Form::Mirror), data.lambda);
    let halves = pose.shoot(&pose.unknowns_of(data, e), m, e, cfg)?;
    let residual = halves.residual();
    Ok(ShotSolution {
        lambda: data.lambda,
        u_prime0: data.u_prime0,
        beta: data.beta,
        right_slope: data.right_slope,
        right_beta: data.right_beta,
        parity: data.parity,
        trace: halves.stitch(pose.form, data.lambda, e),
        iterations: 0,
        residual,
    })
}

/// Newton from stored unknowns, posed as they were solved. Unlike
/// [`solve_from`] the parity of a mirror-symmetric weight is kept rather
/// than re-derived from the seed, which matters for nearly degenerate
/// even/odd pairs whose left data almost coincide.
pub fn solve_near<W: Weight + ?Sized>(data: &ShotData, m: &W, e: Exponent, cfg: &ShootConfig) -> Result<ShotSolution> {
    let pose = Pose::new(data.parity.map_or(Form::Matched, Form::Mirror), data.lambda);
    newton_posed(pose, &pose.unknowns_of(data, e), m, e, cfg)
}

/// Converges when the scaled residual drops below `cfg.newton_tol`, or when
/// progress stalls at the floating-point floor with a residual under
/// `1e-6`: a relative update below `1e-13`, a failed line search, or three
/// steps that each shave off less than ten percent.
fn newton_posed<W: Weight + ?Sized>(pose: Pose, z0: &[f64], m: &W, e: Exponent, cfg: &ShootConfig) -> Result<ShotSolution> {
    const FLOOR_STEP: f64 = 1e-13;
    const FLOOR_RESIDUAL: f64 = 1e-6;
    const STALL_LIMIT: usize = 3;

    let n = pose.dim();
    let mut z = z0.to_vec();
    let mut halves = pose.shoot(&z, m, e, cfg)?;
    let mut res = halves.residual();
    let mut stalled = 0;
    let done = |z: &[f64], halves: Halves, iterations, residual| {
        let full = pose.expand(z);
        let (a, b) = pose.left_data(full[1]);
        Ok(ShotSolution {
            lambda: full[0],
            u_prime0: a,
            beta: b,
            right_slope: full[2],
            right_beta: full[3],
            parity: match pose.form {
                Form::Matched => None,
                Form::Mirror(par) => Some(par),
            },
            trace: halves.stitch(pose.form, full[0], e),
            iterations,
            residual,
        })
    };

    for iter in 0..cfg.newton_max_iter {
        if res < cfg.newton_tol {
            return done(&z, halves, iter, res);
        }
        let scale = halves.scales.clone();
        let zs = unknown_scales(&z);
        let j = jacobian(pose, &z, &halves, m, e, cfg)?;
        let scaled = DMatrix::from_fn(n, n, |r, c| j[(r, c)] * zs[c] / scale[r]);
        let cond = condition(&scaled);
        if !(cond < CONDITION_CAP) {
            return Err(Error::SingularJacobian { condition: cond });
        }
        let rhs = DVector::from_fn(n, |r, _| -halves.mismatch[r] / scale[r]);
        let Some(step) = scaled.lu().solve(&rhs) else {
            return Err(Error::SingularJacobian { condition: f64::INFINITY });
        };
        let mut dz: Vec<f64> = (0..n).map(|c| step[c] * zs[c] * cfg.damping_factor).collect();
        // Never let lambda cross (or approach) zero in one step.
        let cap = 0.5 * z[0].abs();
        if dz[0].abs() > cap {
            let f = cap / dz[0].abs();
            dz.iter_mut().for_each(|d| *d *= f);
        }

        let at_floor = (0..n).all(|c| dz[c].abs() <= FLOOR_STEP * zs[c] * if c == 0 { 1.0 } else { 1e2 });
        if (at_floor || stalled >= STALL_LIMIT) && res < FLOOR_RESIDUAL {
            return done(&z, halves, iter, res);
        }

        // Line search on the mismatch measured against the current scales.
        let current = halves.merit(&scale);
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let zt: Vec<f64> = (0..n).map(|c| z[c] + t * dz[c]).collect();
            if let Ok(ht) = pose.shoot(&zt, m, e, cfg) {
                if ht.merit(&scale) < current {
                    let rt = ht.residual();
                    stalled = if rt > 0.9 * res { stalled + 1 } else { 0 };
                    z = zt;
                    halves = ht;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res < FLOOR_RESIDUAL {
                return done(&z, halves, iter, res);
            }
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                residual: res,
            });
        }
    }
    if res < cfg.newton_tol {
        return done(&z, halves, cfg.newton_max_iter, res);
    }
    Err(Error::NoConvergence {
        iterations: cfg.newton_max_iter,
        residual: res,
    })
}

/// Matching matrix at `p = 2` for `pose`, each column scaled to unit length.
///
/// `Matched`: columns are the states at [`MATCH_POINT`] of the left
/// fundamental shots `(u'(0), v'(0)) = (1, 0), (0, 1)` and of the right ones
/// `(u'(1), v'(1)) = (1, 0), (0, 1)`. `Mirror`: the two left shots to
/// `x = 1/2`, restricted to the components the parity forces to zero.
/// Also returns the column norms.
fn linear_matching<W: Weight + ?Sized>(form: Form, lambda: f64, m: &W, cfg: &ShootConfig) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let e = Exponent::new(2.0)?;
    let xm = form.split();
    let nl = ((cfg.step_count as f64 * xm).round() as usize).max(1);
    let nr = cfg.step_count.saturating_sub(nl).max(1);
    let left = |slope: f64, beta: f64| -> Result<[f64; 4]> {
        let l = integrate_span(lambda, slope, beta, m, e, nl, xm)?;
        Ok(l[l.len() - 1].as_vec())
    };
    let right = |slope: f64, beta: f64| -> Result<[f64; 4]> {
        let r = integrate_span(lambda, -slope, -beta, &Reflected(m), e, nr, 1.0 - xm)?;
        Ok(reflect(&r, 1.0)[0].as_vec())
    };
    let cols: Vec<Vec<f64>> = match form {
        Form::Matched => [left(1.0, 0.0)?, left(0.0, 1.0)?, right(1.0, 0.0)?, right(0.0, 1.0)?]
            .iter()
            .map(|c| c.to_vec())
            .collect(),
        Form::Mirror(par) => {
            let rows = if par == Parity::Even { [1, 3] } else { [0, 2] };
            [left(1.0, 0.0)?, left(0.0, 1.0)?].iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect()
        }
    };
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let n = cols.len();
    Ok((DMatrix::from_fn(n, n, |r, c| cols[c][r] / norms[c]), norms))
}

/// Determinant of the column-normalized matching matrix of the two left and
/// two right fundamental shots. At `p = 2` the problem is linear and its
/// eigenvalues are exactly the roots of this map.
pub fn linear_determinant<W: Weight + ?Sized>(lambda: f64, m: &W, cfg: &ShootConfig) -> Result<f64> {
    Ok(linear_matching(Form::Matched, lambda, m, cfg)?.0.determinant())
}

/// Locates the `p = 2` eigenvalue nearest to `estimate` as a sign change of
/// the matching determinant, then polishes it with Newton.
///
/// The scan starts at relative half-width `2e-4` (64 samples) and widens
/// until a sign change appears, so nearly degenerate pairs are resolved as
/// long as `estimate` is closer to the wanted root than to its neighbour.
/// For a mirror-symmetric weight the even and odd determinants are scanned
/// separately; their roots interlace closely but each is simple.
pub fn refine_linear_anchor<W: Weight + ?Sized>(estimate: f64, m: &W, cfg: &ShootConfig) -> Result<ShotSolution> {
    const SAMPLES: usize = 64;
    let forms: &[Form] = if is_mirror_symmetric(m) {
        &[Form::Mirror(Parity::Even), Form::Mirror(Parity::Odd)]
    } else {
        &[Form::Matched]
    };
    let det = |form: Form, l: f64| linear_matching(form, l, m, cfg).map(|d| d.0.determinant());
    let mut half = 2e-4;
    while half <= 0.25 {
        let lo = estimate * (1.0 - half);
        let hi = estimate * (1.0 + half);
        let grid: Vec<f64> = (0..=SAMPLES).map(|i| lo + (hi - lo) * i as f64 / SAMPLES as f64).collect();
        let mut brackets = Vec::new();
        for &form in forms {
            let vals: Vec<f64> = grid.iter().map(|&l| det(form, l)).collect::<Result<_>>()?;
            brackets.extend(
                (0..SAMPLES)
                    .filter(|&i| vals[i] == 0.0 || flips(vals[i], vals[i + 1]))
                    .map(|i| (form, grid[i], grid[i + 1], vals[i])),
            );
        }
        let best = brackets.into_iter().min_by(|x, y| {
            let dx = (0.5 * (x.1 + x.2) - estimate).abs();
            let dy = (0.5 * (y.1 + y.2) - estimate).abs();
            dx.total_cmp(&dy)
        });
        if let Some((form, mut a, mut b, fa)) = best {
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (a + b);
                let fm = det(form, mid)?;
                if fm == 0.0 || flips(fa, fm) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let lambda = 0.5 * (a + b);
            // The null vector holds the shot coefficients once the column
            // scaling is undone; at p = 2 they rescale linearly onto the
            // pose's ellipse.
            let (mat, norms) = linear_matching(form, lambda, m, cfg)?;
            let svd = mat.svd(false, true);
            let v_t = svd.v_t.ok_or(Error::SingularJacobian { condition: f64::INFINITY })?;
            let k = svd.singular_values.imin();
            let coef: Vec<f64> = (0..norms.len()).map(|c| v_t[(k, c)] / norms[c]).collect();
            let pose = Pose::new(form, lambda);
            let scale = 1.0 / coef[0].hypot(coef[1] / pose.sigma);
            let theta = (scale * coef[1] / pose.sigma).atan2(scale * coef[0]);
            let z: Vec<f64> = match form {
                Form::Matched => vec![lambda, theta, scale * coef[2], scale * coef[3]],
                Form::Mirror(_) => vec![lambda, theta],
            };
            return newton_posed(pose, &z, m, Exponent::new(2.0)?, cfg);
        }
        half *= 2.0;
    }
    Err(Error::NoConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })
}

/// Classification of one interior zero of a converged eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroClass {
    pub location: f64,
    pub generalized_simple: bool,
    /// `|v(x*)| / max|v|`, i.e. how far `u''` is from vanishing.
    pub rel_v: f64,
    pub du: f64,
    pub dv: f64,
}

/// Checks each refined zero against the generalized-simple-zero definition:
/// `u''(x*) = 0` together with `u'(x*) != 0` or `(phi_p(u''))'(x*) != 0`.
/// All comparisons are relative to the trajectory's own sup norms.
pub fn classify_zeros(trace: &ShootTrace, tol: f64) -> Vec<ZeroClass> {
    let sv = trace.max_abs_v().max(f64::MIN_POSITIVE);
    let sdu = trace.states.iter().map(|s| s.du.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let sdv = trace.states.iter().map(|s| s.dv.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    trace
        .zero_crossings
        .iter()
        .map(|&z| {
            let s = trace.interpolate(z);
            let rel_v = s.v.abs() / sv;
            let transversal = s.du.abs() > tol * sdu || s.dv.abs() > tol * sdv;
            ZeroClass {
                location: z,
                generalized_simple: rel_v < tol && transversal,
                rel_v,
                du: s.du,
                dv: s.dv,
            }
        })
        .collect()
}

/// Continuation parameters for [`continue_in_p`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationConfig {
    pub step_init: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Newton iteration cap per continuation step.
    pub newton_max_iter: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            step_init: 0.05,
            step_min: 1e-4,
            step_max: 0.1,
            newton_max_iter: 25,
        }
    }
}

/// Tangent `dz/dp` of the branch through `sol`, from the implicit function
/// theorem applied to the matching mismatch.
fn branch_tangent<W: Weight + ?Sized>(sol: &ShotSolution, m: &W, cfg: &ShootConfig) -> Option<Vec<f64>> {
    let (pose, z, e) = (sol.pose(), sol.reduced(), sol.trace.exponent);
    let base = pose.shoot(&z, m, e, cfg).ok()?;
    let j = jacobian(pose, &z, &base, m, e, cfg).ok()?;
    let fp = fd_column(
        |h| Ok(pose.shoot(&z, m, Exponent::new(e.p() + h)?, cfg)?.mismatch),
        cfg.fd_jacobian_step,
        &base.mismatch,
        &base.scales,
    )
    .ok()?;
    let t = j.lu().solve(&-DVector::from_vec(fp))?;
    t.iter().all(|c| c.is_finite()).then(|| t.iter().copied().collect())
}

/// Predicts the reduced unknowns at `p_next`. Lambda follows the tangent in
/// log scale, which matches its roughly geometric growth in p. The angle
/// moves linearly and the right slopes follow lambda's rule while their
/// relative change stays moderate.
fn predict(sol: &ShotSolution, tangent: Option<&[f64]>, p_next: f64) -> Vec<f64> {
    let z = sol.reduced();
    let Some(t) = tangent else { return z };
    let dp = p_next - sol.p();
    (0..z.len())
        .map(|c| {
            let rel = if z[c] != 0.0 { t[c] / z[c] * dp } else { f64::INFINITY };
            if c == 1 {
                z[c] + t[c] * dp
            } else if c == 0 || rel.abs() < 1.0 {
                z[c] * rel.exp()
            } else {
                z[c] + t[c] * dp
            }
        })
        .collect()
}

/// Tracks a converged eigenpair from its exponent to `p_target`.
///
/// Each accepted step must reproduce the starting zero count; a mismatch or a
/// failed Newton solve halves the step. Once the step falls below
/// `cont.step_min` the walk aborts with [`Error::BranchJump`] or
/// [`Error::StepUnderflow`].
pub fn continue_in_p<W: Weight + ?Sized>(
    start: &ShotSolution,
    p_target: f64,
    m: &W,
    cfg: &ShootConfig,
    cont: &ContinuationConfig,
) -> Result<ShotSolution> {
    let target = Exponent::new(p_target)?;
    let expected = start.zero_count();
    let mut current = start.clone();
    let mut p = start.p();
    if p == p_target {
        return Ok(current);
    }
    let dir = (p_target - p).signum();
    let mut step = cont.step_init;
    let mut tangent = branch_tangent(&current, m, cfg);
    let step_cfg = ShootConfig {
        newton_max_iter: cont.newton_max_iter.min(cfg.newton_max_iter),
        ..*cfg
    };

    while p != p_target {
        let mut p_next = p + dir * step;
        if (p_next - p_target) * dir >= 0.0 {
            p_next = p_target;
        }
        let e = if p_next == p_target { target } else { Exponent::new(p_next)? };
        let guess = predict(&current, tangent.as_deref(), p_next);
        let outcome = newton_posed(current.pose(), &guess, m, e, &step_cfg);
        match outcome {
            Ok(sol) if sol.zero_count() == expected => {
                p = p_next;
                current = sol;
                tangent = branch_tangent(&current, m, cfg);
                step = (step * 1.5).min(cont.step_max);
            }
            Ok(sol) => {
                step *= 0.5;
                if step < cont.step_min {
                    return Err(Error::BranchJump {
                        p: p_next,
                        expected,
                        found: sol.zero_count(),
                    });
                }
            }
            Err(_) => {
                step *= 0.5;
                if step < cont.step_min {
                    return Err(Error::StepUnderflow { last_p: p });
                }
            }
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::WeightSpec;
    use std::f64::consts::PI;

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let one = WeightSpec::constant(1.0);
        let cos = WeightSpec::cosine(1);
        let s = ShootState { x: 0.5, u: 0.0, du: 1.0, v: 0.0, dv: 0.0 };
        assert_eq!(system_rhs(&s, 7.0, &cos, ex(3.0)), [1.0, 0.0, 0.0, 0.0]);
        let s = ShootState { x: 0.5, u: 1.0, du: 0.0, v: 1.0, dv: 0.0 };
        assert_eq!(system_rhs(&s, 2.0, &one, ex(2.0)), [0.0, 1.0, 0.0, 2.0]);
        let s = ShootState { x: 0.25, u: 2.0, du: 0.0, v: 0.0, dv: 0.0 };
        let r = system_rhs(&s, 1.0, &cos, ex(3.0));
        assert_eq!(&r[..3], &[0.0, 0.0, 0.0]);
        assert!(r[3].abs() < 1e-15);
    }

    #[test]
    fn closed_form_first_mode_has_zero_miss() {
        let cfg = ShootConfig { step_count: 10_000, ..Default::default() };
        let one = WeightSpec::constant(1.0);
        let t = integrate(PI.powi(4), -PI * PI, &one, ex(2.0), &cfg).unwrap();
        assert!(t.miss_u.abs() < 1e-8 && t.miss_v.abs() < 1e-8, "{} {}", t.miss_u, t.miss_v);
        assert!(t.zero_crossings.is_empty());
        assert_eq!(t.states[0].u, 0.0);
        assert_eq!(t.states[0].v, 0.0);
    }

    #[test]
    fn wrong_slope_or_lambda_misses() {
        let cfg = ShootConfig::default();
        let one = WeightSpec::constant(1.0);
        let (_, mv) = miss_map(PI.powi(4), 0.0, &one, ex(2.0), &cfg).unwrap();
        assert!(mv.abs() > 1.0);
        let (mu, mv) = miss_map(50.0, -5.0, &one, ex(2.0), &cfg).unwrap();
        assert!(mu.abs() > 1e-3 && mv.abs() > 1e-3);
    }

    #[test]
    fn trajectory_is_homogeneous() {
        let cfg = ShootConfig::default();
        let cos = WeightSpec::cosine(1);
        for p in [1.5, 2.0, 3.0] {
            let e = ex(p);
            let base = integrate_from(400.0, 1.0, -20.0, &cos, e, &cfg).unwrap();
            for c in [0.5f64, 2.0] {
                let cp = c.powf(p - 1.0);
                let t = integrate_from(400.0, c, cp * -20.0, &cos, e, &cfg).unwrap();
                for (a, b) in base.states.iter().zip(&t.states) {
                    assert!((b.u - c * a.u).abs() <= 1e-9 * (c * a.u).abs().max(1e-300) + 1e-15);
                    assert!((b.v - cp * a.v).abs() <= 1e-9 * (cp * a.v).abs().max(1e-300) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn rk4_is_fourth_order_at_p2() {
        let one = WeightSpec::constant(1.0);
        let miss = |n| {
            let cfg = ShootConfig { step_count: n, ..Default::default() };
            let (u, v) = miss_map(PI.powi(4), -PI * PI, &one, ex(2.0), &cfg).unwrap();
            u.abs().max(v.abs() / PI.powi(2))
        };
        let ratio = miss(200) / miss(400);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn overflow_is_reported() {
        let one = WeightSpec::constant(1.0);
        let err = integrate(-1e9, 1e6, &one, ex(2.0), &ShootConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }

    #[test]
    fn newton_finds_first_two_modes() {
        let cfg = ShootConfig::default();
        let one = WeightSpec::constant(1.0);
        let s1 = newton_solve(90.0, -8.0, &one, ex(2.0), &cfg).unwrap();
        assert!((s1.lambda / PI.powi(4) - 1.0).abs() < 1e-9, "{}", s1.lambda);
        assert_eq!(s1.zero_count(), 0);
        let s2 = newton_solve(1550.0, -4.0 * PI * PI, &one, ex(2.0), &cfg).unwrap();
        assert!((s2.lambda / (16.0 * PI.powi(4)) - 1.0).abs() < 1e-9, "{}", s2.lambda);
        assert_eq!(s2.zero_count(), 1);
        assert!((s2.trace.zero_crossings[0] - 0.5).abs() < 1e-8);
        let classes = classify_zeros(&s2.trace, 1e-5);
        assert!(classes[0].generalized_simple);
        assert!((classes[0].du.abs() / s2.u_prime0.abs() - 1.0).abs() < 1e-6);
        assert!((s2.beta / s2.u_prime0 + 4.0 * PI * PI).abs() < 1e-6);
        assert!(classify_zeros(&s1.trace, 1e-5).is_empty());
    }

    #[test]
    fn continuation_to_same_p_is_identity() {
        let cfg = ShootConfig::default();
        let one = WeightSpec::constant(1.0);
        let s1 = newton_solve(90.0, -8.0, &one, ex(2.0), &cfg).unwrap();
        let c = continue_in_p(&s1, 2.0, &one, &cfg, &ContinuationConfig::default()).unwrap();
        assert_eq!(c.lambda, s1.lambda);
    }

    #[test]
    fn condition_estimate() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((condition(&id) - 1.0).abs() < 1e-12);
        let mut d = id;
        d[(2, 2)] = 100.0;
        assert!((condition(&d) - 100.0).abs() < 1e-9);
        assert!(condition(&DMatrix::from_element(4, 4, 1.0)) > 1e15);
    }

    #[test]
    fn matched_and_mirror_poses_agree() {
        let cfg = ShootConfig::default();
        let cos = WeightSpec::cosine(1);
        let mirror = refine_linear_anchor(12392.0, &cos, &cfg).unwrap();
        assert_eq!(mirror.parity, Some(Parity::Odd));
        let pose = Pose::new(Form::Matched, mirror.lambda);
        let mut z = pose.unknowns_of(&mirror.data(), ex(2.0));
        z[0] *= 1.0 + 1e-6;
        let matched = newton_posed(pose, &z, &cos, ex(2.0), &cfg).unwrap();
        assert!((matched.lambda / mirror.lambda - 1.0).abs() < 1e-9);
        assert_eq!(matched.zero_count(), mirror.zero_count());
    }

    #[test]
    fn angle_rescales_onto_ellipse() {
        let pose = Pose::new(Form::Matched, 400.0);
        for p in [1.5, 2.0, 3.0] {
            let (theta, _) = pose.angle_of(1.0, -30.0, ex(p));
            let (a, b) = pose.left_data(theta);
            // (a, b) = (c, c^{p-1} (-30)) for some c > 0.
            assert!(a > 0.0);
            assert!((b / a.powf(p - 1.0) + 30.0).abs() < 1e-9, "{p}");
        }
    }
}
