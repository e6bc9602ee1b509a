//! Lower and upper certificates on the gadget partition function, and the
//! decision procedure that turns an approximate `ln Z` into a MAX-CUT answer.
//!
//! For a base graph with `n` vertices and `|E|` edges, write `b` for the
//! rounded peak bias and `u` for `uhat`. Then
//!
//! ```text
//! ln T1 = ln K + n ln C(t, t/2 + b) + 2 beta n b^2 + 4 gamma b^2 (2A - |E|)
//! ln T2 = ln K + n ln(t + 1) + n Q(b) + 4 gamma u^2 (2A/tau - |E|)
//! ```
//!
//! `T1 <= Z_J` whenever the graph has a cut of size at least `A`: it counts
//! only the configurations whose clouds sit at bias `+-b` along that cut.
//! `T2` bounds `Z_J` from above when every cut is smaller than `A/tau`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{
    build_instance, schedule_params, GadgetError, GadgetParams, LabSpec, ParamMode,
};
use crate::graph::{max_cut_exact, CutAssignment, Graph, GraphError, Side};
use crate::landscape::{ln_binomial_deficit, q_rise, LandscapeError};
use crate::logspace::LogWeight;
use crate::partition::{magnetization_log_z, orthant_log_z, PartitionError};
use crate::spectral::{instance_psd_shift, SpectralError};

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certificate gap {gap} is below the required 2 N^c = {required}")]
    GapTooSmall { gap: f64, required: f64 },
    #[error("exact ln Z = {log_z} is below ln T1 = {log_t1} although the max cut reaches A")]
    LowerBoundViolated { log_z: f64, log_t1: f64 },
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

fn check_a_le_edges(g: &Graph, a: usize) -> Result<(), ReductionError> {
    if a > g.edge_count() {
        return Err(ReductionError::Precondition(format!(
            "A = {a} exceeds the edge count {}",
            g.edge_count()
        )));
    }
    Ok(())
}

fn check_a_vs_tau(g: &Graph, p: &GadgetParams, a: usize) -> Result<(), ReductionError> {
    let floor = p.tau * g.edge_count() as f64 / 2.0;
    if (a as f64) < floor * (1.0 - 1e-12) {
        return Err(ReductionError::Precondition(format!(
            "A = {a} is below tau |E| / 2 = {floor}"
        )));
    }
    Ok(())
}

/// The parts of `ln T1` and `ln T2` that do not cancel in their difference.
struct Pieces {
    /// `ln K + n t ln 2 + n (Q(b) - Q(0))`, common to both.
    common: f64,
    /// `n (ln C(t, t/2+b) - t H(1/2 + b/t))`.
    deficit: f64,
    log_t_plus_one: f64,
    cut1: f64,
    cut2: f64,
}

fn pieces(g: &Graph, p: &GadgetParams, a: usize) -> Result<Pieces, ReductionError> {
    let inst = build_instance(g, p)?;
    let n = g.n() as f64;
    let t = p.t as f64;
    let b = p.bhat_int();
    let bf = b as f64;
    let edges = g.edge_count() as f64;
    let a = a as f64;
    Ok(Pieces {
        common: inst.ln_k() + n * t * std::f64::consts::LN_2 + n * q_rise(bf, t, p.beta),
        deficit: n * ln_binomial_deficit(p.t, b)?,
        log_t_plus_one: n * t.ln_1p(),
        cut1: 4.0 * p.gamma * bf * bf * (2.0 * a - edges),
        cut2: 4.0 * p.gamma * p.uhat * p.uhat * (2.0 * a / p.tau - edges),
    })
}

/// `ln T1`. Valid as a lower bound on `ln Z_J` for any `A` not exceeding the
/// max cut, so only `A <= |E|` is checked here.
pub fn compute_t1(g: &Graph, p: &GadgetParams, a: usize) -> Result<LogWeight, ReductionError> {
    check_a_le_edges(g, a)?;
    let pc = pieces(g, p, a)?;
    Ok(LogWeight(pc.common + pc.deficit + pc.cut1))
}

/// `ln T2`. Requires `A / tau >= |E| / 2` so the cut factor is nonnegative.
pub fn compute_t2(g: &Graph, p: &GadgetParams, a: usize) -> Result<LogWeight, ReductionError> {
    check_a_le_edges(g, a)?;
    check_a_vs_tau(g, p, a)?;
    let pc = pieces(g, p, a)?;
    Ok(LogWeight(pc.common + pc.log_t_plus_one + pc.cut2))
}

/// Right-hand side of the chain
/// `ln T1 - ln T2 >= -2 n ln(t+1) + 4 gamma [b^2 (2A - |E|) - u^2 (2A/tau - |E|)]`.
pub fn gap_lower_bound(g: &Graph, p: &GadgetParams, a: usize) -> Result<f64, ReductionError> {
    let pc = pieces(g, p, a)?;
    Ok(-2.0 * pc.log_t_plus_one + pc.cut1 - pc.cut2)
}

/// How the gadget parameters are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertMode {
    /// The asymptotic schedule for a 3-regular graph.
    Paper { epsilon: f64 },
    /// Explicit desk-scale parameters.
    Lab(LabSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCertificate {
    pub params: GadgetParams,
    pub a: usize,
    pub vertices: usize,
    pub edges: usize,
    pub log_t1: LogWeight,
    pub log_t2: LogWeight,
    /// `-beta n t / 2`.
    pub ln_k_instance: f64,
    pub lambda_min: f64,
    /// `-lambda_min N / 2`.
    pub ln_k_shift: f64,
    pub total_spins: u64,
    pub c: Option<f64>,
    /// `ln T1 - ln T2`, computed without cancelling the `t ln 2` terms.
    pub gap: f64,
    /// `2 N^c`, when `c` is known.
    pub required_gap: Option<f64>,
    pub meets_required_gap: Option<bool>,
}

pub fn build_certificate(
    g: &Graph,
    tau: f64,
    a: usize,
    mode: &CertMode,
) -> Result<ReductionCertificate, ReductionError> {
    let params = match mode {
        CertMode::Paper { epsilon } => {
            if !g.is_regular(3) {
                return Err(ReductionError::Precondition(
                    "the asymptotic schedule needs a 3-regular graph".into(),
                ));
            }
            schedule_params(g.n(), *epsilon, tau)?
        }
        CertMode::Lab(spec) => GadgetParams::lab(spec, tau)?,
    };
    check_a_le_edges(g, a)?;
    check_a_vs_tau(g, &params, a)?;
    let inst = build_instance(g, &params)?;
    let shift = instance_psd_shift(&inst)?;
    let pc = pieces(g, &params, a)?;
    let log_t1 = pc.common + pc.deficit + pc.cut1;
    let log_t2 = pc.common + pc.log_t_plus_one + pc.cut2;
    let gap = pc.deficit - pc.log_t_plus_one + pc.cut1 - pc.cut2;
    if !log_t1.is_finite() || !log_t2.is_finite() {
        return Err(ReductionError::Precondition("certificate values are not finite".into()));
    }
    let total_spins = (g.n() as u64)
        .checked_mul(params.t)
        .ok_or_else(|| ReductionError::Precondition("N = n t overflows".into()))?;
    let c = params.gap_exponent;
    let required_gap = c.map(|c| 2.0 * (total_spins as f64).powf(c));
    let meets_required_gap = required_gap.map(|r| gap >= r);
    if params.mode == ParamMode::Paper && meets_required_gap == Some(false) {
        return Err(ReductionError::GapTooSmall { gap, required: required_gap.unwrap_or(f64::NAN) });
    }
    Ok(ReductionCertificate {
        a,
        vertices: g.n(),
        edges: g.edge_count(),
        log_t1: LogWeight(log_t1),
        log_t2: LogWeight(log_t2),
        ln_k_instance: inst.ln_k(),
        lambda_min: shift.lambda_min,
        ln_k_shift: shift.ln_k_shift,
        total_spins,
        c,
        gap,
        required_gap,
        meets_required_gap,
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapDecision {
    /// The graph has a cut of size at least `A`.
    MaxcutAtLeastA,
    /// Every cut is smaller than `A / tau`.
    AllCutsBelowAOverTau,
    Indeterminate,
}

/// `log_zhat` estimates `ln Z` of the shifted matrix `J - lambda_min I` to
/// within `ln_r`. Both thresholds holding at once (possible only when the
/// certificate gap is negative) is reported as indeterminate.
pub fn decide_gap(log_zhat: f64, ln_r: f64, cert: &ReductionCertificate) -> GapDecision {
    let z = log_zhat - cert.ln_k_shift;
    let first = z - ln_r >= cert.log_t1.ln();
    let second = cert.log_t2.ln() >= z + ln_r;
    match (first, second) {
        (true, false) => GapDecision::MaxcutAtLeastA,
        (false, true) => GapDecision::AllCutsBelowAOverTau,
        _ => GapDecision::Indeterminate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantEntry {
    pub signs: CutAssignment,
    pub cut: usize,
    pub log_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub a: usize,
    pub log_z: f64,
    pub log_t1: f64,
    /// Present when `A >= tau |E| / 2`.
    pub log_t2: Option<f64>,
    pub max_cut: usize,
    pub witness: CutAssignment,
    /// `max_cut >= A`, so `ln Z >= ln T1` was checked.
    pub t1_checked: bool,
    pub below_t2: Option<bool>,
    /// Orthants with vertex 0 on the minus side, by decreasing `ln Z`.
    pub orthants: Vec<OrthantEntry>,
    pub dominant_is_max_cut: bool,
}

/// Exact check of the certificates on a small instance.
pub fn verify_small(
    g: &Graph,
    p: &GadgetParams,
    a: usize,
    budget: u128,
) -> Result<VerifyReport, ReductionError> {
    let inst = build_instance(g, p)?;
    let log_z = magnetization_log_z(&inst, budget)?.log_z.ln();
    let log_t1 = compute_t1(g, p, a)?.ln();
    let log_t2 = match check_a_vs_tau(g, p, a) {
        Ok(()) => Some(compute_t2(g, p, a)?.ln()),
        Err(_) => None,
    };
    let (max_cut, witness) = max_cut_exact(g)?;
    let t1_checked = max_cut >= a;
    if t1_checked && log_z < log_t1 {
        return Err(ReductionError::LowerBoundViolated { log_z, log_t1 });
    }
    let n = g.n();
    let mut orthants = Vec::with_capacity(1 << n.saturating_sub(1));
    for mask in 0..1u64 << n.saturating_sub(1) {
        // bit for vertex 0 stays clear
        let signs = CutAssignment::from_mask(n, mask << 1);
        debug_assert!(n == 0 || signs.sides()[0] == Side::Minus);
        let cut = crate::graph::cut_size(g, &signs)?;
        let lz = orthant_log_z(&inst, &signs, budget)?.log_z.ln();
        orthants.push(OrthantEntry { signs, cut, log_z: lz });
    }
    orthants.sort_by(|x, y| y.log_z.total_cmp(&x.log_z));
    let dominant_is_max_cut = orthants.first().is_some_and(|o| o.cut == max_cut);
    Ok(VerifyReport {
        a,
        log_z,
        log_t1,
        log_t2,
        max_cut,
        witness,
        t1_checked,
        below_t2: log_t2.map(|t2| log_z <= t2),
        orthants,
        dominant_is_max_cut,
    })
}
