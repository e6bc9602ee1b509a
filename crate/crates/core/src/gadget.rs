//! Parameter schedule and construction of the cloud gadget instance.
//!
//! Every base vertex `v` is blown up into a cloud of `t` spins joined
//! pairwise with weight `beta`; every base edge `{u, v}` becomes a complete
//! bipartite connection of weight `-gamma` between the two clouds. The
//! intra-cloud coupling is calibrated so that a single cloud's free-energy
//! profile peaks at bias `bhat`, and `gamma` so that the profile with the
//! worst-case neighbour pull peaks at `uhat`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::landscape::g_mono;

/// Default cap on `N` for dense materialization.
pub const DENSE_CAP: usize = 10_000;

/// Largest cloud size accepted by the schedule: beyond `2^53` the cloud size
/// stops being exactly representable as `f64`.
pub const MAX_CLOUD_SIZE: u64 = 1 << 53;

#[derive(Debug, Error, PartialEq)]
pub enum GadgetError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cloud size n^C = {n}^{exponent} is not representable (limit 2^53)")]
    CloudSizeOverflow { n: usize, exponent: u32 },
    #[error("bias {bias} must lie strictly inside (0, t/2) = (0, {half})")]
    BiasOutOfRange { bias: f64, half: f64 },
    #[error("need 0 < bhat < uhat < t/2, got bhat = {bhat}, uhat = {uhat}, t = {t}")]
    Ordering { bhat: f64, uhat: f64, t: u64 },
    #[error("N = {n_total} exceeds the dense materialization cap {cap}")]
    DenseCap { n_total: usize, cap: usize },
    #[error("base graph has max degree {graph} but gamma was calibrated for {params}")]
    DegreeExceedsCalibration { graph: usize, params: usize },
}

/// How a parameter set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMode {
    /// The asymptotic schedule `t = n^C`, `bhat = t^(3/4+delta)`, ...
    Paper,
    /// Explicit desk-scale choices of `t`, `bhat`, `uhat`.
    Lab,
}

/// The full parameter schedule. Exponent fields that a lab run does not use
/// are `None` and serialize as explicit `null`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadgetParams {
    pub mode: ParamMode,
    pub epsilon: Option<f64>,
    pub tau: f64,
    /// Exponent `C` in `t = n^C`.
    pub cloud_exponent: Option<u32>,
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
    pub t: u64,
    pub bhat: f64,
    pub uhat: f64,
    pub max_degree: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Gap exponent `c = 1/(C+1)`.
    pub gap_exponent: Option<f64>,
}

/// `beta = (1/(4 bhat)) ln((t + 2 bhat)/(t - 2 bhat))`, which makes `bhat` the
/// unique maximizer of the cloud profile on `[0, t/2]`.
pub fn beta_from_bhat(t: u64, bhat: f64) -> Result<f64, GadgetError> {
    let half = t as f64 / 2.0;
    if !(bhat > 0.0 && bhat < half) {
        return Err(GadgetError::BiasOutOfRange { bias: bhat, half });
    }
    Ok(g_mono(2.0 * bhat / t as f64) / (2.0 * t as f64))
}

/// `gamma` solving `beta + max_degree * gamma = (1/(4 uhat)) ln((t+2uhat)/(t-2uhat))`.
pub fn gamma_from_uhat(t: u64, bhat: f64, uhat: f64, max_degree: usize) -> Result<f64, GadgetError> {
    if max_degree == 0 {
        return Err(GadgetError::Precondition("max degree must be at least 1".into()));
    }
    let half = t as f64 / 2.0;
    if !(bhat > 0.0 && bhat < uhat && uhat < half) {
        return Err(GadgetError::Ordering { bhat, uhat, t });
    }
    let beta = beta_from_bhat(t, bhat)?;
    let at_uhat = g_mono(2.0 * uhat / t as f64) / (2.0 * t as f64);
    Ok((at_uhat - beta) / max_degree as f64)
}

/// The asymptotic schedule for an `n`-vertex 3-regular base graph.
pub fn schedule_params(n: usize, epsilon: f64, tau: f64) -> Result<GadgetParams, GadgetError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(GadgetError::Precondition(format!("epsilon = {epsilon} not in (0, 1/2)")));
    }
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(GadgetError::Precondition(format!("tau = {tau} must exceed 1")));
    }
    if n < 4 || n % 2 == 1 {
        return Err(GadgetError::Precondition(format!(
            "n = {n}: a 3-regular base graph needs even n >= 4"
        )));
    }
    let exponent = (3.0 / epsilon).ceil() as u32;
    let t = (n as u64)
        .checked_pow(exponent)
        .filter(|&t| t <= MAX_CLOUD_SIZE)
        .ok_or(GadgetError::CloudSizeOverflow { n, exponent })?;
    let delta = epsilon / 6.0;
    let delta_prime = epsilon / 12.0;
    let tf = t as f64;
    let bhat = tf.powf(0.75 + delta);
    let uhat = bhat + tf.powf(0.75 + delta_prime);
    let mut p = GadgetParams {
        mode: ParamMode::Paper,
        epsilon: Some(epsilon),
        tau,
        cloud_exponent: Some(exponent),
        delta: Some(delta),
        delta_prime: Some(delta_prime),
        t,
        bhat,
        uhat,
        max_degree: 3,
        beta: 0.0,
        gamma: 0.0,
        gap_exponent: Some(1.0 / (exponent as f64 + 1.0)),
    };
    p.calibrate()?;
    Ok(p)
}

/// Desk-scale overrides. Missing biases are derived from `delta`/`delta_prime`
/// the same way the asymptotic schedule does, with `bhat` rounded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabSpec {
    pub t: u64,
    pub bhat: Option<f64>,
    pub uhat: Option<f64>,
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_degree: usize,
}

impl LabSpec {
    pub fn new(t: u64, bhat: f64, uhat: f64, max_degree: usize) -> Self {
        LabSpec {
            t,
            bhat: Some(bhat),
            uhat: Some(uhat),
            max_degree,
            ..Default::default()
        }
    }
}

impl GadgetParams {
    pub fn lab(spec: &LabSpec, tau: f64) -> Result<GadgetParams, GadgetError> {
        if !(tau > 1.0) || !tau.is_finite() {
            return Err(GadgetError::Precondition(format!("tau = {tau} must exceed 1")));
        }
        if spec.t < 2 || spec.t % 2 == 1 {
            return Err(GadgetError::Precondition(format!("t = {} must be even and >= 2", spec.t)));
        }
        let tf = spec.t as f64;
        let need = |name: &str| GadgetError::Precondition(format!("lab mode needs --{name} or --bhat/--uhat"));
        let bhat = match (spec.bhat, spec.delta) {
            (Some(b), _) => b,
            (None, Some(d)) => tf.powf(0.75 + d).round(),
            (None, None) => return Err(need("delta")),
        };
        let uhat = match (spec.uhat, spec.delta_prime) {
            (Some(u), _) => u,
            (None, Some(d)) => bhat + tf.powf(0.75 + d),
            (None, None) => return Err(need("delta-prime")),
        };
        let (cloud_exponent, gap_exponent) = match spec.epsilon {
            Some(e) if e > 0.0 => {
                let c = (3.0 / e).ceil() as u32;
                (Some(c), Some(1.0 / (c as f64 + 1.0)))
            }
            _ => (None, None),
        };
        let mut p = GadgetParams {
            mode: ParamMode::Lab,
            epsilon: spec.epsilon,
            tau,
            cloud_exponent,
            delta: spec.delta,
            delta_prime: spec.delta_prime,
            t: spec.t,
            bhat,
            uhat,
            max_degree: spec.max_degree,
            beta: 0.0,
            gamma: 0.0,
            gap_exponent,
        };
        p.calibrate()?;
        Ok(p)
    }

    /// The integer bias realized by configurations, `round(bhat)`.
    pub fn bhat_int(&self) -> i64 {
        self.bhat.round() as i64
    }

    /// Recomputes `beta` from the rounded bias and `gamma` from `uhat`.
    fn calibrate(&mut self) -> Result<(), GadgetError> {
        let b = self.bhat_int() as f64;
        let half = self.t as f64 / 2.0;
        if !(self.bhat > 0.0 && self.bhat < half) {
            return Err(GadgetError::BiasOutOfRange { bias: self.bhat, half });
        }
        if !(b > 0.0 && b < half) {
            return Err(GadgetError::BiasOutOfRange { bias: b, half });
        }
        self.beta = beta_from_bhat(self.t, b)?;
        self.gamma = gamma_from_uhat(self.t, b, self.uhat, self.max_degree)?;
        Ok(())
    }

    /// Re-derives the couplings and checks they match the stored ones, e.g.
    /// after reading parameters from JSON.
    pub fn validate(&self) -> Result<(), GadgetError> {
        let mut fresh = self.clone();
        fresh.calibrate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if !close(fresh.beta, self.beta) || !close(fresh.gamma, self.gamma) {
            return Err(GadgetError::Precondition(
                "stored beta/gamma disagree with t, bhat, uhat".into(),
            ));
        }
        Ok(())
    }
}

/// Structured cloud instance; the `N x N` coupling matrix is only built on
/// request by [`materialize_dense`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingInstance {
    pub base: Graph,
    pub t: usize,
    pub beta: f64,
    pub gamma: f64,
}

impl IsingInstance {
    /// Instance with arbitrary nonnegative couplings and any cloud size.
    pub fn new(base: Graph, t: usize, beta: f64, gamma: f64) -> Result<Self, GadgetError> {
        if t == 0 {
            return Err(GadgetError::Precondition("cloud size must be positive".into()));
        }
        if !(beta >= 0.0 && gamma >= 0.0) || !beta.is_finite() || !gamma.is_finite() {
            return Err(GadgetError::Precondition(format!(
                "couplings must be finite and nonnegative, got beta = {beta}, gamma = {gamma}"
            )));
        }
        Ok(IsingInstance { base, t, beta, gamma })
    }

    /// Curie-Weiss model `J = (beta/N)(11^T - I)` as a one-cloud instance.
    pub fn complete_graph(spins: usize, beta: f64) -> Result<Self, GadgetError> {
        Self::new(Graph::complete(1), spins, beta / spins as f64, 0.0)
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Total spin count `N = n t`.
    pub fn total_spins(&self) -> usize {
        self.base.n() * self.t
    }

    /// `ln K = -beta n t / 2`, the configuration-independent factor.
    pub fn ln_k(&self) -> f64 {
        -0.5 * self.beta * self.total_spins() as f64
    }

    pub fn cloud_of(&self, spin: usize) -> usize {
        spin / self.t
    }
}

pub fn build_instance(g: &Graph, p: &GadgetParams) -> Result<IsingInstance, GadgetError> {
    if p.t % 2 == 1 {
        return Err(GadgetError::Precondition(format!("t = {} must be even", p.t)));
    }
    if g.max_degree() > p.max_degree {
        return Err(GadgetError::DegreeExceedsCalibration {
            graph: g.max_degree(),
            params: p.max_degree,
        });
    }
    let t = usize::try_from(p.t)
        .map_err(|_| GadgetError::Precondition(format!("t = {} exceeds usize", p.t)))?;
    IsingInstance::new(g.clone(), t, p.beta, p.gamma)
}

/// Dense `J` with spin `(v, i)` at index `v t + i`.
pub fn materialize_dense(inst: &IsingInstance, cap: usize) -> Result<DMatrix<f64>, GadgetError> {
    let n_total = inst.n().saturating_mul(inst.t);
    if n_total > cap {
        return Err(GadgetError::DenseCap { n_total, cap });
    }
    let t = inst.t;
    let mut j = DMatrix::zeros(n_total, n_total);
    for v in 0..inst.n() {
        for a in 0..t {
            for b in 0..t {
                if a != b {
                    j[(v * t + a, v * t + b)] = inst.beta;
                }
            }
        }
    }
    for &(u, v) in inst.base.edges() {
        for a in 0..t {
            for b in 0..t {
                j[(u * t + a, v * t + b)] = -inst.gamma;
                j[(v * t + b, u * t + a)] = -inst.gamma;
            }
        }
    }
    Ok(j)
}
