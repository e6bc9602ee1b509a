//! Heat-bath Glauber dynamics on cloud instances.
//!
//! The local field at a spin in cloud `v` is
//! `beta (m_v - sigma_i) - gamma sum_{u ~ v} m_u`, where `m_v` is the cloud
//! magnetization, so each update costs `O(deg v)` once the cloud totals are
//! cached. A Curie-Weiss model is a single cloud with coupling `beta / N`.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, one stream per replica
//! (`set_stream(replica)`), so replicas are independent and any single chain
//! can be reproduced on its own.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{GadgetError, IsingInstance};
use crate::graph::{cut_size, CutAssignment, Side};
use crate::logspace::{ln_binomial, LogSumExp};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid run setting: {0}")]
    Setting(String),
    #[error("an exponent fit needs at least {need} sizes, got {got}")]
    TooFewSizes { need: usize, got: usize },
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinState {
    pub sigma: Vec<i8>,
    pub m: i64,
    pub cloud_m: Vec<i64>,
}

impl SpinState {
    pub fn from_spins(inst: &IsingInstance, sigma: Vec<i8>) -> Self {
        let mut cloud_m = vec![0i64; inst.n()];
        for (i, &s) in sigma.iter().enumerate() {
            cloud_m[inst.cloud_of(i)] += s as i64;
        }
        let m = cloud_m.iter().sum();
        SpinState { sigma, m, cloud_m }
    }

    /// Field `(J sigma)_i` from the cached cloud totals.
    pub fn local_field(&self, inst: &IsingInstance, i: usize) -> f64 {
        let v = inst.cloud_of(i);
        let own = (self.cloud_m[v] - self.sigma[i] as i64) as f64;
        let across: i64 = inst.base.neighbors(v).iter().map(|&u| self.cloud_m[u]).sum();
        inst.beta * own - inst.gamma * across as f64
    }

    /// `m` and `cloud_m` agree with `sigma`.
    pub fn is_consistent(&self, inst: &IsingInstance) -> bool {
        let fresh = SpinState::from_spins(inst, self.sigma.clone());
        fresh.m == self.m && fresh.cloud_m == self.cloud_m
    }
}

/// A single reproducible chain.
pub struct GlauberChain<'a> {
    inst: &'a IsingInstance,
    state: SpinState,
    rng: ChaCha8Rng,
    /// `P(sigma_i = +1)` indexed by `m_v - sigma_i + t - 1`, for instances
    /// whose fields ignore the other clouds.
    table: Option<Vec<f64>>,
    steps: u64,
}

fn heat_bath(h: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * h).exp())
}

impl<'a> GlauberChain<'a> {
    /// Starts from independent uniform spins.
    pub fn new(inst: &'a IsingInstance, seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        let sigma = (0..inst.total_spins())
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        let state = SpinState::from_spins(inst, sigma);
        let table = (inst.gamma == 0.0 || inst.base.edge_count() == 0).then(|| {
            let t = inst.t as i64;
            (0..2 * t - 1).map(|k| heat_bath(inst.beta * (k - (t - 1)) as f64)).collect()
        });
        GlauberChain { inst, state, rng, table, steps: 0 }
    }

    pub fn state(&self) -> &SpinState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    #[inline]
    pub fn step(&mut self) {
        let n = self.state.sigma.len();
        let i = self.rng.gen_range(0..n);
        let v = i / self.inst.t;
        let old = self.state.sigma[i] as i64;
        let p_plus = match &self.table {
            Some(tab) => tab[(self.state.cloud_m[v] - old + self.inst.t as i64 - 1) as usize],
            None => heat_bath(self.state.local_field(self.inst, i)),
        };
        let new: i64 = if self.rng.gen::<f64>() < p_plus { 1 } else { -1 };
        if new != old {
            self.state.sigma[i] = new as i8;
            self.state.cloud_m[v] += new - old;
            self.state.m += new - old;
        }
        self.steps += 1;
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

/// `10 N ln N`, at least one step.
pub fn default_burn_in(spins: usize) -> u64 {
    let n = spins as f64;
    ((10.0 * n * n.ln()).ceil() as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Recorded steps after burn-in.
    pub steps: u64,
    pub stride: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub record_clouds: bool,
}

impl RunSettings {
    pub fn new(steps: u64, stride: u64, seed: u64) -> Self {
        RunSettings { steps, stride, burn_in: 0, seed, record_clouds: false }
    }

    fn check(&self) -> Result<(), DynamicsError> {
        if self.steps == 0 {
            return Err(DynamicsError::Setting("steps must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(DynamicsError::Setting("stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub replica: u64,
    pub burn_in: u64,
    pub stride: u64,
    /// Step index (counted after burn-in) of each sample.
    pub step: Vec<u64>,
    pub m: Vec<i64>,
    /// Per-cloud magnetizations per sample, when requested.
    pub cloud_m: Vec<Vec<i64>>,
}

impl Trajectory {
    pub fn mean_abs_m(&self) -> f64 {
        self.m.iter().map(|m| m.unsigned_abs() as f64).sum::<f64>() / self.m.len().max(1) as f64
    }
}

/// One chain: burn-in, then a sample every `stride` steps.
pub fn glauber_run(inst: &IsingInstance, settings: &RunSettings, replica: u64) -> Result<Trajectory, DynamicsError> {
    settings.check()?;
    if inst.total_spins() == 0 {
        return Err(DynamicsError::Setting("instance has no spins".into()));
    }
    let mut chain = GlauberChain::new(inst, settings.seed, replica);
    chain.run(settings.burn_in);
    let samples = (settings.steps / settings.stride) as usize;
    let mut traj = Trajectory {
        seed: settings.seed,
        replica,
        burn_in: settings.burn_in,
        stride: settings.stride,
        step: Vec::with_capacity(samples),
        m: Vec::with_capacity(samples),
        cloud_m: Vec::new(),
    };
    for k in 1..=samples as u64 {
        chain.run(settings.stride);
        traj.step.push(k * settings.stride);
        traj.m.push(chain.state.m);
        if settings.record_clouds {
            traj.cloud_m.push(chain.state.cloud_m.clone());
        }
    }
    Ok(traj)
}

/// Independent replicas `0..replicas`, run in parallel and returned in order.
pub fn glauber_replicas(
    inst: &IsingInstance,
    settings: &RunSettings,
    replicas: u64,
) -> Result<Vec<Trajectory>, DynamicsError> {
    settings.check()?;
    (0..replicas)
        .into_par_iter()
        .map(|r| glauber_run(inst, settings, r))
        .collect()
}

/// Exact `E|m|` of the Curie-Weiss model `J = (beta/N)(11^T - I)`.
pub fn curie_weiss_mean_abs_m(spins: usize, beta: f64) -> f64 {
    let n = spins as f64;
    let log_w = |k: usize| {
        let m = 2.0 * k as f64 - n;
        ln_binomial(spins as u64, k as u64) + beta * (m * m - n) / (2.0 * n)
    };
    let z: LogSumExp = (0..=spins).map(log_w).collect();
    let num: LogSumExp = (0..=spins)
        .filter(|&k| 2 * k != spins)
        .map(|k| log_w(k) + (2.0 * k as f64 - n).abs().ln())
        .collect();
    (num.value().ln() - z.value().ln()).exp()
}

/// Integrated autocorrelation time of a series, in samples, with Sokal's
/// self-consistent window `W >= 5 tau`. Returns 0.5 for a constant series.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.5;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for lag in 1..n {
        let c = xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>()
            / n as f64;
        tau += c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub spins: usize,
    pub mean_abs_m: f64,
    /// Standard error across replicas.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub beta: f64,
    pub alpha: f64,
    pub alpha_std_err: f64,
    pub points: Vec<SizePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSettings {
    pub sizes: Vec<usize>,
    pub replicas: u64,
    pub seed: u64,
    /// Recorded steps per replica, as a multiple of `N^(3/2)`.
    pub sweeps: f64,
    /// Burn-in as a multiple of `N^(3/2)`; `None` uses `10 N ln N`.
    pub burn_in_sweeps: Option<f64>,
}

/// Weighted least-squares slope of `ln y` against `ln x`, with its standard
/// error. Weights are `1/var(ln y)` when every point has a positive error,
/// otherwise equal weights with a residual-based error.
pub fn log_log_slope(points: &[SizePoint]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| (p.spins as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_abs_m.ln()).collect();
    let weighted = points.iter().all(|p| p.std_err > 0.0);
    let ws: Vec<f64> = points
        .iter()
        .map(|p| if weighted { (p.mean_abs_m / p.std_err).powi(2) } else { 1.0 })
        .collect();
    let s: f64 = ws.iter().sum();
    let sx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x).sum();
    let sy: f64 = ws.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * x * y).sum();
    let det = s * sxx - sx * sx;
    let slope = (s * sxy - sx * sy) / det;
    let err = if weighted {
        (s / det).sqrt()
    } else {
        let icpt = (sy - slope * sx) / s;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
        let dof = (points.len() as f64 - 2.0).max(1.0);
        (rss / dof * s / det).sqrt()
    };
    (slope, err)
}

/// Fits `E|m| ~ N^alpha` on Curie-Weiss models at inverse temperature `beta`
/// (the critical point is `beta = 1`).
pub fn magnetization_exponent(beta: f64, settings: &ExponentSettings) -> Result<ExponentFit, DynamicsError> {
    if settings.sizes.len() < 4 {
        return Err(DynamicsError::TooFewSizes { need: 4, got: settings.sizes.len() });
    }
    if settings.replicas < 2 {
        return Err(DynamicsError::Setting("need at least 2 replicas for error bars".into()));
    }
    let mut points = Vec::with_capacity(settings.sizes.len());
    for &n in &settings.sizes {
        let inst = IsingInstance::complete_graph(n, beta)?;
        let scale = (n as f64).powf(1.5);
        let run = RunSettings {
            steps: ((settings.sweeps * scale).ceil() as u64).max(n as u64),
            stride: n as u64,
            burn_in: settings
                .burn_in_sweeps
                .map_or_else(|| default_burn_in(n), |b| (b * scale).ceil() as u64),
            seed: settings.seed,
            record_clouds: false,
        };
        let trajs = glauber_replicas(&inst, &run, settings.replicas)?;
        let means: Vec<f64> = trajs.iter().map(Trajectory::mean_abs_m).collect();
        let r = means.len() as f64;
        let mean = means.iter().sum::<f64>() / r;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        points.push(SizePoint { spins: n, mean_abs_m: mean, std_err: (var / r).sqrt() });
    }
    let (alpha, alpha_std_err) = log_log_slope(&points);
    Ok(ExponentFit { beta, alpha, alpha_std_err, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternShare {
    pub signs: CutAssignment,
    pub cut: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOccupancy {
    pub samples: u64,
    /// Observed sign patterns by decreasing frequency, ties by pattern.
    pub patterns: Vec<PatternShare>,
}

/// Sign pattern of `m_v` over time; a cloud with `m_v <= 0` counts as minus.
pub fn phase_occupancy(inst: &IsingInstance, settings: &RunSettings) -> Result<PhaseOccupancy, DynamicsError> {
    settings.check()?;
    let n = inst.n();
    if n > 63 {
        return Err(DynamicsError::Setting(format!("{n} clouds exceed the 63-cloud pattern limit")));
    }
    let mut chain = GlauberChain::new(inst, settings.seed, 0);
    chain.run(settings.burn_in);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let samples = settings.steps / settings.stride;
    for _ in 0..samples {
        chain.run(settings.stride);
        let mask = chain
            .state
            .cloud_m
            .iter()
            .enumerate()
            .fold(0u64, |acc, (v, &m)| if m > 0 { acc | 1 << v } else { acc });
        *counts.entry(mask).or_default() += 1;
    }
    let mut patterns: Vec<PatternShare> = counts
        .into_iter()
        .map(|(mask, c)| {
            let sides = (0..n).map(|v| if mask >> v & 1 == 1 { Side::Plus } else { Side::Minus }).collect();
            let signs = CutAssignment::new(sides);
            let cut = cut_size(&inst.base, &signs).expect("pattern matches the graph");
            PatternShare { signs, cut, fraction: c as f64 / samples as f64 }
        })
        .collect();
    patterns.sort_by(|a, b| b.fraction.total_cmp(&a.fraction));
    Ok(PhaseOccupancy { samples, patterns })
}
