//! Free-energy landscape of the cloud gadget.
//!
//! A cloud of `t` spins with bias `b` (that is, `t/2 + b` plus spins) has
//! profile `Q(b) = 2 beta b^2 + t H(1/2 + b/t)`, where `H` is the binary
//! entropy in nats. Summing over clouds and adding the inter-cloud term gives
//! the aggregate potential
//!
//! ```text
//! Phi(b) = sum_v Q(b_v) - 4 gamma sum_{uv in E} b_u b_v,
//! ```
//!
//! which upper-bounds the log-contribution of every magnetization vector up to
//! the constant `ln K`. This module evaluates these functions, locates their
//! maximizers, and checks the bounds the reduction relies on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{GadgetError, GadgetParams, IsingInstance};
use crate::graph::{cut_size, CutAssignment, Graph, GraphError};
use crate::logspace::ln_binomial;

#[derive(Debug, Error, PartialEq)]
pub enum LandscapeError {
    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("bias vector has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value} lies on the box boundary |b| = t/2")]
    Boundary { index: usize, value: f64 },
    #[error("{0}")]
    Inconsistent(String),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(x: f64) -> Result<f64, LandscapeError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(LandscapeError::Domain { value: x, domain: "[0, 1]" });
    }
    let xlx = |p: f64| if p == 0.0 { 0.0 } else { p * p.ln() };
    Ok(-(xlx(x) + xlx(1.0 - x)))
}

/// `g(y) = (1/y) ln((1+y)/(1-y))`, strictly increasing on `(0, 1)` with
/// `g(0+) = 2`. Returns NaN outside `[0, 1)`.
pub fn g_mono(y: f64) -> f64 {
    if !(0.0..1.0).contains(&y) {
        return f64::NAN;
    }
    if y < 1e-4 {
        let y2 = y * y;
        2.0 * (1.0 + y2 / 3.0 + y2 * y2 / 5.0)
    } else {
        2.0 * y.atanh() / y
    }
}

fn check_bias(b: f64, t: f64) -> Result<(), LandscapeError> {
    if b.abs() > t / 2.0 || b.is_nan() {
        return Err(LandscapeError::Domain { value: b, domain: "[-t/2, t/2]" });
    }
    Ok(())
}

/// Cloud profile `Q(b) = 2 beta b^2 + t H(1/2 + b/t)`.
pub fn q_profile(b: f64, t: u64, beta: f64) -> Result<f64, LandscapeError> {
    let tf = t as f64;
    check_bias(b, tf)?;
    Ok(tf * std::f64::consts::LN_2 + q_rise(b, tf, beta))
}

/// `Q(b) - Q(0)`, evaluated without the `t ln 2` cancellation.
pub(crate) fn q_rise(b: f64, t: f64, beta: f64) -> f64 {
    let s = b.abs() / t;
    let mix = if 2.0 * s >= 1.0 {
        // H(1) - ln 2
        std::f64::consts::LN_2
    } else {
        (0.5 + s) * (2.0 * s).ln_1p() + (0.5 - s) * (-2.0 * s).ln_1p()
    };
    2.0 * beta * b * b - t * mix
}

/// `dQ/db = 4 beta b - ln((t+2b)/(t-2b))`.
pub fn q_derivative(b: f64, t: f64, beta: f64) -> f64 {
    4.0 * beta * b - 2.0 * (2.0 * b / t).atanh()
}

/// Result of scanning `Q` on `[0, t/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QScan {
    pub argmax: f64,
    pub value: f64,
    /// Maximum attained at `b = 0` or `b = t/2`.
    pub on_boundary: bool,
    /// Number of sign changes of `dQ/db` on `(0, t/2)`.
    pub sign_changes: usize,
    /// All interior critical points, refined by bisection.
    pub critical_points: Vec<f64>,
}

/// Grid scan of `dQ/db` on `(0, t/2)` with spacing `step`, followed by
/// bisection inside every bracket where the derivative changes sign.
pub fn q_maximizer_scan(t: u64, beta: f64, step: f64) -> Result<QScan, LandscapeError> {
    if !(step > 0.0) {
        return Err(LandscapeError::Domain { value: step, domain: "step > 0" });
    }
    let tf = t as f64;
    let half = tf / 2.0;
    let top = half * (1.0 - 1e-12);
    // Sign of the derivative on (0, eps): Q'(b) ~ (4 beta - 4/t) b.
    let slope0 = 4.0 * beta - 4.0 / tf;
    let mut prev = (0.0, if slope0 > 0.0 { 1.0 } else { -1.0 });
    let mut critical = Vec::new();
    let mut k = 1u64;
    loop {
        let b = (k as f64 * step).min(top);
        let d = q_derivative(b, tf, beta);
        let sign = if d > 0.0 { 1.0 } else { -1.0 };
        if sign != prev.1 {
            critical.push(bisect(|x| q_derivative(x, tf, beta), prev.0, b));
        }
        prev = (b, sign);
        if b >= top {
            break;
        }
        k += 1;
    }

    let mut best = (0.0, 0.0);
    for &c in critical.iter().chain([top].iter()) {
        let v = q_rise(c, tf, beta);
        if v > best.1 {
            best = (c, v);
        }
    }
    let on_boundary = best.0 == 0.0 || best.0 >= top;
    Ok(QScan {
        argmax: if best.0 >= top { half } else { best.0 },
        value: tf * std::f64::consts::LN_2 + best.1,
        on_boundary,
        sign_changes: critical.len(),
        critical_points: critical,
    })
}

/// Root of `f` between `lo` and `hi`, where `f(lo)` and `f(hi)` have opposite
/// signs. Runs until the bracket cannot shrink further in `f64`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_positive = f(lo) > 0.0 || lo == 0.0 && f(hi) <= 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Real-valued cloud biases, one per base vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealBiasVector(pub Vec<f64>);

impl RealBiasVector {
    pub fn zeros(n: usize) -> Self {
        RealBiasVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `S_v`, the sum of the biases of `v`'s neighbours.
    pub fn neighbor_sum(&self, g: &Graph, v: usize) -> f64 {
        g.neighbors(v).iter().map(|&u| self.0[u]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn check_vector(b: &RealBiasVector, inst: &IsingInstance) -> Result<(), LandscapeError> {
    if b.0.len() != inst.n() {
        return Err(LandscapeError::LengthMismatch { expected: inst.n(), got: b.0.len() });
    }
    for &x in &b.0 {
        check_bias(x, inst.t as f64)?;
    }
    Ok(())
}

/// `Phi(b) = sum_v Q(b_v) - 4 gamma sum_{uv in E} b_u b_v`.
pub fn phi(b: &RealBiasVector, inst: &IsingInstance) -> Result<f64, LandscapeError> {
    check_vector(b, inst)?;
    let t = inst.t as f64;
    let clouds: f64 = b.0.iter().map(|&x| q_rise(x, t, inst.beta)).sum();
    let coupling: f64 = inst.base.edges().iter().map(|&(u, v)| b.0[u] * b.0[v]).sum();
    Ok(inst.n() as f64 * t * std::f64::consts::LN_2 + clouds - 4.0 * inst.gamma * coupling)
}

/// Gradient of `Phi`: `4 beta b_v - 4 gamma S_v - ln((t+2b_v)/(t-2b_v))`.
pub fn phi_gradient(b: &RealBiasVector, inst: &IsingInstance) -> Result<Vec<f64>, LandscapeError> {
    check_vector(b, inst)?;
    let t = inst.t as f64;
    (0..inst.n())
        .map(|v| {
            let x = b.0[v];
            if x.abs() >= t / 2.0 {
                return Err(LandscapeError::Boundary { index: v, value: x });
            }
            Ok(q_derivative(x, t, inst.beta) - 4.0 * inst.gamma * b.neighbor_sum(&inst.base, v))
        })
        .collect()
}

/// Knobs for [`ascend_orthant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    /// Stop once the projected gradient sup-norm drops below `tol_rel * t`.
    pub tol_rel: f64,
    pub max_sweeps: usize,
    /// Box inset `eta = inset_rel * t` keeping the logarithms finite.
    pub inset_rel: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            tol_rel: 1e-10,
            max_sweeps: 50_000,
            inset_rel: 1e-12,
        }
    }
}

/// A stationary point reached by projected coordinate ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentPoint {
    pub b: RealBiasVector,
    pub value: f64,
    /// Projected-gradient sup-norm at `b`.
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Maximizes `Phi` over the orthant `{a_v b_v in [0, t/2 - eta]}` by exact
/// round-robin coordinate maximization, starting from `start` (clamped into
/// the orthant).
///
/// Along one coordinate the objective is `f(x) = Q(x) - c x` with
/// `x = a_v b_v`; `f''` is decreasing, so `f'` is unimodal and there are at
/// most two critical points. Both candidates and the endpoint `x = 0` are
/// compared directly.
pub fn ascend_orthant(
    inst: &IsingInstance,
    signs: &CutAssignment,
    start: &[f64],
    opts: &AscentOptions,
) -> Result<AscentPoint, LandscapeError> {
    let n = inst.n();
    if signs.len() != n || start.len() != n {
        return Err(LandscapeError::LengthMismatch {
            expected: n,
            got: if signs.len() != n { signs.len() } else { start.len() },
        });
    }
    let t = inst.t as f64;
    let xmax = t / 2.0 - opts.inset_rel * t;
    let orient: Vec<f64> = signs.sides().iter().map(|s| s.sign() as f64).collect();
    let mut b: Vec<f64> = start
        .iter()
        .zip(&orient)
        .map(|(&x, &a)| a * (a * x).clamp(0.0, xmax))
        .collect();

    let g = &inst.base;
    let pull = |b: &[f64], v: usize| -> f64 {
        4.0 * inst.gamma * orient[v] * g.neighbors(v).iter().map(|&u| b[u]).sum::<f64>()
    };
    let projected = |b: &[f64]| -> f64 {
        (0..n)
            .map(|v| {
                let x = orient[v] * b[v];
                let d = q_derivative(x, t, inst.beta) - pull(b, v);
                if (x <= 0.0 && d < 0.0) || (x >= xmax && d > 0.0) {
                    0.0
                } else {
                    d.abs()
                }
            })
            .fold(0.0, f64::max)
    };

    let tol = opts.tol_rel * t;
    let mut residual = projected(&b);
    let mut sweeps = 0;
    while residual >= tol && sweeps < opts.max_sweeps {
        for v in 0..n {
            let c = pull(&b, v);
            b[v] = orient[v] * coordinate_argmax(t, inst.beta, c, xmax);
        }
        sweeps += 1;
        residual = projected(&b);
    }
    let b = RealBiasVector(b);
    let value = phi(&b, inst)?;
    Ok(AscentPoint {
        b,
        value,
        residual,
        sweeps,
        converged: residual < tol,
    })
}

/// Maximizer of `Q(x) - c x` over `[0, xmax]`.
fn coordinate_argmax(t: f64, beta: f64, c: f64, xmax: f64) -> f64 {
    let d = |x: f64| q_derivative(x, t, beta) - c;
    // f' is increasing up to the inflection point and decreasing after it.
    let inflection = if beta * t > 1.0 {
        (0.5 * (t * t - t / beta).sqrt()).min(xmax)
    } else {
        0.0
    };
    if d(inflection) <= 0.0 {
        return 0.0;
    }
    let root = if d(xmax) >= 0.0 { xmax } else { bisect(d, inflection, xmax) };
    if d(0.0) >= 0.0 {
        return root;
    }
    // Two local maxima: x = 0 and `root`.
    if q_rise(root, t, beta) - c * root > 0.0 {
        root
    } else {
        0.0
    }
}

/// Outcome of maximizing `Phi` on one sign orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantMax {
    pub signs: CutAssignment,
    /// The best point over all starts.
    pub best: AscentPoint,
    /// Every start's end point, in start order.
    pub starts: Vec<AscentPoint>,
    /// Largest minus smallest value over the starts.
    pub multistart_spread: f64,
    pub uhat: f64,
    pub max_abs: f64,
    /// `max_abs <= uhat + 1e-6 t` for every converged start.
    pub within_uhat: bool,
    /// `n Q(bhat) + 4 gamma uhat^2 |cut(signs)|`, an upper bound on `Phi` over
    /// the box `|b_v| <= uhat` restricted to this orthant.
    pub cut_bound: f64,
}

/// Multi-start coordinate ascent of `Phi` on the orthant fixed by `signs`,
/// for the gadget built from `g` and `p`. Starts at `a bhat`, `a uhat` and
/// near the box corner `a (t/2)`.
pub fn maximize_phi_orthant(
    g: &Graph,
    p: &GadgetParams,
    signs: &CutAssignment,
    opts: &AscentOptions,
) -> Result<OrthantMax, LandscapeError> {
    let inst = crate::gadget::build_instance(g, p)?;
    let t = p.t as f64;
    let lhs = p.beta + g.max_degree() as f64 * p.gamma;
    let rhs = g_mono(2.0 * p.uhat / t) / (2.0 * t);
    if lhs > rhs * (1.0 + 1e-12) {
        return Err(LandscapeError::Inconsistent(format!(
            "beta + max_degree * gamma = {lhs} exceeds the uhat calibration {rhs}"
        )));
    }
    let bhat = p.bhat_int() as f64;
    let starts = [bhat, p.uhat, 0.45 * t];
    let mut points = Vec::with_capacity(starts.len());
    for s in starts {
        let x0: Vec<f64> = signs.sides().iter().map(|a| a.sign() as f64 * s).collect();
        points.push(ascend_orthant(&inst, signs, &x0, opts)?);
    }
    let best = points
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .expect("at least one start");
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.value), hi.max(p.value)));
    let within_uhat = points
        .iter()
        .filter(|p| p.converged)
        .all(|pt| pt.b.max_abs() <= p.uhat + 1e-6 * t);
    let q_peak = q_profile(bhat, p.t, p.beta)?;
    let cut = cut_size(g, signs)? as f64;
    Ok(OrthantMax {
        signs: signs.clone(),
        max_abs: best.b.max_abs(),
        best,
        starts: points,
        multistart_spread: hi - lo,
        uhat: p.uhat,
        within_uhat,
        cut_bound: g.n() as f64 * q_peak + 4.0 * p.gamma * p.uhat * p.uhat * cut,
    })
}

/// `t H(1/2 + b/t) - ln(t+1) <= ln C(t, t/2 + b) <= t H(1/2 + b/t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialBounds {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

impl BinomialBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }
}

pub fn binomial_entropy_gap(t: u64, b: i64) -> Result<BinomialBounds, LandscapeError> {
    let tf = t as f64;
    if t % 2 == 1 || b.unsigned_abs() > t / 2 {
        return Err(LandscapeError::Domain { value: b as f64, domain: "|b| <= t/2, t even" });
    }
    let k = (t / 2) as i64 + b;
    let upper = tf * entropy(0.5 + b as f64 / tf)?;
    Ok(BinomialBounds {
        lower: upper - (tf + 1.0).ln(),
        exact: ln_binomial(t, k as u64),
        upper,
    })
}

/// `ln C(t, t/2 + b) - t H(1/2 + b/t)`, accurate for large `t` where the two
/// terms are individually around `t ln 2`.
pub fn ln_binomial_deficit(t: u64, b: i64) -> Result<f64, LandscapeError> {
    if t % 2 == 1 || b.unsigned_abs() > t / 2 {
        return Err(LandscapeError::Domain { value: b as f64, domain: "|b| <= t/2, t even" });
    }
    let k = (t / 2) as i64 + b;
    let (k, rest) = (k as u64, t - k as u64);
    if k.min(rest) < 64 {
        let tf = t as f64;
        return Ok(ln_binomial(t, k) - tf * entropy(k as f64 / tf)?);
    }
    // Stirling series; the first omitted term is below 1e-15 here.
    let s = |m: f64| {
        let r = 1.0 / m;
        r * (1.0 / 12.0 - r * r * (1.0 / 360.0 - r * r / 1260.0))
    };
    let (tf, kf, rf) = (t as f64, k as f64, rest as f64);
    Ok(0.5 * (tf / (2.0 * std::f64::consts::PI * kf * rf)).ln() + s(tf) - s(kf) - s(rf))
}

/// Rise of the cloud profile from the balanced point to its peak, against
/// the quartic leading term `(4/3) bhat^4 / t^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QbExpansion {
    pub exact_gap: f64,
    pub leading: f64,
    pub residual: f64,
}

/// `Q(bhat) - Q(0)` with `beta` calibrated to `bhat`, compared with its
/// quartic approximation.
pub fn qb_expansion_check(t: u64, bhat: f64) -> Result<QbExpansion, LandscapeError> {
    let tf = t as f64;
    if !(bhat >= 0.0 && bhat <= tf / 4.0) {
        return Err(LandscapeError::Domain { value: bhat, domain: "[0, t/4]" });
    }
    if bhat == 0.0 {
        return Ok(QbExpansion { exact_gap: 0.0, leading: 0.0, residual: 0.0 });
    }
    let beta = crate::gadget::beta_from_bhat(t, bhat)?;
    let exact_gap = q_rise(bhat, tf, beta);
    let leading = 4.0 / 3.0 * bhat.powi(4) / tf.powi(3);
    Ok(QbExpansion {
        exact_gap,
        leading,
        residual: exact_gap - leading,
    })
}
