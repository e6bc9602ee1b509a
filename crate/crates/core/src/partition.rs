//! Exact evaluation of `ln Z_J` by three independent routes: brute force over
//! spin configurations, the magnetization-vector decomposition, and the same
//! decomposition restricted to one sign orthant.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::IsingInstance;
use crate::graph::{CutAssignment, Side};
use crate::logspace::{ln_binomial, LogSumExp, LogWeight};

/// Largest `N` accepted by [`brute_force_log_z`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Default cap on the number of magnetization vectors enumerated.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("brute force handles N <= {limit}, got N = {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("interaction matrix is not square and symmetric")]
    NotSymmetric,
    #[error("magnetization vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bias {value} at vertex {index} exceeds t/2 = {half}")]
    BiasOutOfRange { index: usize, value: i64, half: i64 },
    #[error("magnetization routes need an even cloud size, got t = {0}")]
    OddCloud(usize),
    #[error("enumeration of {terms} terms exceeds the budget {budget}")]
    BudgetExceeded { terms: u128, budget: u128 },
}

/// A log partition value together with the number of terms summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionValue {
    pub log_z: LogWeight,
    pub terms: u64,
}

/// `ln sum_sigma exp(sigma^T J sigma / 2)` over all `2^N` spin vectors.
///
/// Configurations are visited in Gray-code order with the local fields
/// updated per flip; fields and energy are recomputed from scratch every
/// 4096 flips to bound drift.
pub fn brute_force_log_z(j: &DMatrix<f64>) -> Result<PartitionValue, PartitionError> {
    let n = j.nrows();
    if j.ncols() != n || (0..n).any(|r| (0..r).any(|c| j[(r, c)] != j[(c, r)])) {
        return Err(PartitionError::NotSymmetric);
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(PartitionError::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut sigma = vec![-1.0f64; n];
    let recompute = |sigma: &[f64], field: &mut [f64]| -> f64 {
        let mut e = 0.0;
        for r in 0..n {
            let mut h = 0.0;
            for c in 0..n {
                if c != r {
                    h += j[(r, c)] * sigma[c];
                }
            }
            field[r] = h;
            e += 0.5 * sigma[r] * (h + j[(r, r)] * sigma[r]);
        }
        e
    };
    let mut field = vec![0.0; n];
    let mut energy = recompute(&sigma, &mut field);
    let mut acc = LogSumExp::new();
    acc.push(energy);
    let total = 1u64 << n;
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        energy -= 2.0 * sigma[i] * field[i];
        sigma[i] = -sigma[i];
        let s = 2.0 * sigma[i];
        for r in 0..n {
            if r != i {
                field[r] += s * j[(r, i)];
            }
        }
        if step & 0xfff == 0 {
            energy = recompute(&sigma, &mut field);
        }
        acc.push(energy);
    }
    Ok(PartitionValue { log_z: acc.value(), terms: total })
}

/// Integer cloud biases `b_v`: cloud `v` has `t/2 + b_v` plus spins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MagVector(pub Vec<i64>);

impl MagVector {
    /// Biases read off a spin configuration (entries `+-1`).
    pub fn from_spins(inst: &IsingInstance, sigma: &[f64]) -> Self {
        MagVector(
            sigma
                .chunks(inst.t)
                .map(|cloud| (cloud.iter().sum::<f64>() / 2.0).round() as i64)
                .collect(),
        )
    }

    pub fn negated(&self) -> Self {
        MagVector(self.0.iter().map(|b| -b).collect())
    }
}

fn check_mag(inst: &IsingInstance, b: &MagVector) -> Result<(), PartitionError> {
    if inst.t % 2 == 1 {
        return Err(PartitionError::OddCloud(inst.t));
    }
    if b.0.len() != inst.n() {
        return Err(PartitionError::LengthMismatch { expected: inst.n(), got: b.0.len() });
    }
    let half = (inst.t / 2) as i64;
    match b.0.iter().enumerate().find(|(_, x)| x.abs() > half) {
        Some((index, &value)) => Err(PartitionError::BiasOutOfRange { index, value, half }),
        None => Ok(()),
    }
}

/// `ln K + 2 beta sum b_v^2 - 4 gamma sum_E b_u b_v`, the common value of
/// `sigma^T J sigma / 2` over configurations with biases `b`.
pub fn magnetization_energy(inst: &IsingInstance, b: &MagVector) -> f64 {
    let sq: f64 = b.0.iter().map(|&x| (x * x) as f64).sum();
    let cross: f64 = inst.base.edges().iter().map(|&(u, v)| (b.0[u] * b.0[v]) as f64).sum();
    inst.ln_k() + 2.0 * inst.beta * sq - 4.0 * inst.gamma * cross
}

/// Log of the total weight of configurations whose cloud biases are `b`.
pub fn contribution(inst: &IsingInstance, b: &MagVector) -> Result<LogWeight, PartitionError> {
    check_mag(inst, b)?;
    let t = inst.t as u64;
    let half = (inst.t / 2) as i64;
    let entropy: f64 = b.0.iter().map(|&x| ln_binomial(t, (half + x) as u64)).sum();
    Ok(LogWeight(entropy + magnetization_energy(inst, b)))
}

/// Terms of the magnetization sum, precomputed for one instance.
struct Enumerator<'a> {
    inst: &'a IsingInstance,
    half: i64,
    ln_binom: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn new(inst: &'a IsingInstance) -> Result<Self, PartitionError> {
        if inst.t % 2 == 1 {
            return Err(PartitionError::OddCloud(inst.t));
        }
        let t = inst.t as u64;
        Ok(Enumerator {
            inst,
            half: (inst.t / 2) as i64,
            ln_binom: (0..=t).map(|k| ln_binomial(t, k)).collect(),
        })
    }

    #[inline]
    fn term(&self, b: &[i64]) -> f64 {
        let mut sum = self.inst.ln_k();
        for &x in b {
            sum += self.ln_binom[(self.half + x) as usize] + 2.0 * self.inst.beta * (x * x) as f64;
        }
        let mut cross = 0i64;
        for &(u, v) in self.inst.base.edges() {
            cross += b[u] * b[v];
        }
        sum - 4.0 * self.inst.gamma * cross as f64
    }

    /// Odometer over the box `ranges`, split into slices by the leading
    /// coordinate. Slices are summed independently and folded in order, so
    /// the result does not depend on the thread count.
    fn sum(&self, ranges: &[(i64, i64)], budget: u128) -> Result<PartitionValue, PartitionError> {
        let terms: u128 = ranges.iter().map(|(lo, hi)| (hi - lo + 1) as u128).product();
        if terms > budget {
            return Err(PartitionError::BudgetExceeded { terms, budget });
        }
        let Some(&(lead_lo, lead_hi)) = ranges.first() else {
            let mut acc = LogSumExp::new();
            acc.push(self.term(&[]));
            return Ok(PartitionValue { log_z: acc.value(), terms: 1 });
        };
        let slices: Vec<LogSumExp> = (lead_lo..=lead_hi)
            .into_par_iter()
            .map(|lead| {
                let mut b: Vec<i64> = ranges.iter().map(|r| r.0).collect();
                b[0] = lead;
                let mut acc = LogSumExp::new();
                loop {
                    acc.push(self.term(&b));
                    // advance the odometer, last coordinate fastest
                    let mut k = ranges.len() - 1;
                    loop {
                        if k == 0 {
                            return acc;
                        }
                        if b[k] < ranges[k].1 {
                            b[k] += 1;
                            break;
                        }
                        b[k] = ranges[k].0;
                        k -= 1;
                    }
                }
            })
            .collect();
        let mut total = LogSumExp::new();
        for s in &slices {
            total.merge(s);
        }
        Ok(PartitionValue { log_z: total.value(), terms: total.terms() })
    }
}

/// `ln Z_J` as the log-sum-exp of [`contribution`] over all `(t+1)^n`
/// magnetization vectors.
pub fn magnetization_log_z(inst: &IsingInstance, budget: u128) -> Result<PartitionValue, PartitionError> {
    let e = Enumerator::new(inst)?;
    let ranges = vec![(-e.half, e.half); inst.n()];
    e.sum(&ranges, budget)
}

/// The magnetization sum restricted to `a_v b_v >= 0`. Orthants share their
/// faces (`b_v = 0`), so summing all `2^n` of them overcounts `Z`.
pub fn orthant_log_z(
    inst: &IsingInstance,
    signs: &CutAssignment,
    budget: u128,
) -> Result<PartitionValue, PartitionError> {
    if signs.len() != inst.n() {
        return Err(PartitionError::LengthMismatch { expected: inst.n(), got: signs.len() });
    }
    let e = Enumerator::new(inst)?;
    let ranges: Vec<_> = signs
        .sides()
        .iter()
        .map(|s| match s {
            Side::Plus => (0, e.half),
            Side::Minus => (-e.half, 0),
        })
        .collect();
    e.sum(&ranges, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::{materialize_dense, DENSE_CAP};
    use crate::graph::{random_regular, Graph};
    use crate::logspace::log_add_exp;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(beta: f64) -> IsingInstance {
        IsingInstance::new(Graph::complete(1), 2, beta, 0.0).unwrap()
    }

    #[test]
    fn brute_force_trivial_cases() {
        let z = brute_force_log_z(&DMatrix::zeros(3, 3)).unwrap();
        assert_relative_eq!(z.log_z.ln(), 8f64.ln(), max_relative = 1e-15);
        assert_eq!(z.terms, 8);
        assert_relative_eq!(brute_force_log_z(&DMatrix::zeros(1, 1)).unwrap().log_z.ln(), 2f64.ln());
        let j = materialize_dense(&single(0.5), DENSE_CAP).unwrap();
        let expect = (2.0 * 0.5f64.exp() + 2.0 * (-0.5f64).exp()).ln();
        assert_relative_eq!(brute_force_log_z(&j).unwrap().log_z.ln(), expect, max_relative = 1e-15);
        assert_relative_eq!(expect, 1.5064089, epsilon = 1e-7);
        assert!(matches!(
            brute_force_log_z(&DMatrix::zeros(25, 25)),
            Err(PartitionError::TooLarge { n: 25, .. })
        ));
        let mut asym = DMatrix::zeros(2, 2);
        asym[(0, 1)] = 1.0;
        assert_eq!(brute_force_log_z(&asym), Err(PartitionError::NotSymmetric));
    }

    #[test]
    fn brute_force_diagonal_is_constant_shift() {
        let mut j = materialize_dense(&IsingInstance::new(Graph::path(2), 2, 0.3, 0.1).unwrap(), DENSE_CAP).unwrap();
        let base = brute_force_log_z(&j).unwrap().log_z.ln();
        j.fill_diagonal(0.7);
        assert_relative_eq!(brute_force_log_z(&j).unwrap().log_z.ln(), base + 0.5 * 0.7 * 4.0, max_relative = 1e-14);
    }

    #[test]
    fn contribution_examples() {
        let inst = single(0.5);
        assert_relative_eq!(contribution(&inst, &MagVector(vec![0])).unwrap().ln(), -0.5 + 2f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(contribution(&inst, &MagVector(vec![1])).unwrap().ln(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(contribution(&inst, &MagVector(vec![-1])).unwrap().ln(), 0.5, epsilon = 1e-14);
        assert!(matches!(
            contribution(&inst, &MagVector(vec![2])),
            Err(PartitionError::BiasOutOfRange { index: 0, value: 2, half: 1 })
        ));
        let odd = IsingInstance::new(Graph::complete(1), 3, 0.5, 0.0).unwrap();
        assert_eq!(contribution(&odd, &MagVector(vec![0])), Err(PartitionError::OddCloud(3)));
    }

    #[test]
    fn magnetization_single_cloud() {
        let z = magnetization_log_z(&single(0.5), DEFAULT_BUDGET).unwrap();
        let expect = log_add_exp(log_add_exp(0.5, -0.5 + 2f64.ln()), 0.5);
        assert_relative_eq!(z.log_z.ln(), expect, max_relative = 1e-15);
        assert_eq!(z.terms, 3);
    }

    #[test]
    fn magnetization_matches_brute_force_on_p2() {
        for (beta, gamma) in [(0.5, 0.1), (1.3, 0.7), (0.0, 0.4)] {
            let inst = IsingInstance::new(Graph::path(2), 2, beta, gamma).unwrap();
            let brute = brute_force_log_z(&materialize_dense(&inst, DENSE_CAP).unwrap()).unwrap();
            let mag = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap();
            assert_relative_eq!(brute.log_z.ln(), mag.log_z.ln(), max_relative = 1e-13);
        }
    }

    #[test]
    fn uncoupled_clouds_factorize() {
        let inst = IsingInstance::new(Graph::complete(3), 6, 0.2, 0.0).unwrap();
        let one = IsingInstance::new(Graph::complete(1), 6, 0.2, 0.0).unwrap();
        let z = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
        let z1 = magnetization_log_z(&one, DEFAULT_BUDGET).unwrap().log_z.ln();
        assert_relative_eq!(z, 3.0 * z1, max_relative = 1e-13);
    }

    #[test]
    fn budget_guard() {
        let inst = IsingInstance::new(Graph::complete(4), 10, 0.1, 0.01).unwrap();
        assert_eq!(
            magnetization_log_z(&inst, 1000),
            Err(PartitionError::BudgetExceeded { terms: 14641, budget: 1000 })
        );
    }

    #[test]
    fn orthant_examples() {
        let inst = single(0.5);
        let plus = orthant_log_z(&inst, &"+".parse().unwrap(), DEFAULT_BUDGET).unwrap();
        assert_relative_eq!(plus.log_z.ln(), log_add_exp(-0.5 + 2f64.ln(), 0.5), epsilon = 1e-14);

        let inst = IsingInstance::new(Graph::complete(4), 4, 0.3, 0.05).unwrap();
        let total = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
        let mut union = LogSumExp::new();
        for mask in 0..16u64 {
            let signs = CutAssignment::from_mask(4, mask);
            let o = orthant_log_z(&inst, &signs, DEFAULT_BUDGET).unwrap().log_z.ln();
            let f = orthant_log_z(&inst, &signs.flipped(), DEFAULT_BUDGET).unwrap().log_z.ln();
            assert_relative_eq!(o, f, max_relative = 1e-13);
            assert!(o <= total);
            union.push(o);
        }
        assert!(union.value().ln() >= total);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let inst = IsingInstance::new(random_regular(6, 3, 3).unwrap(), 4, 0.3, 0.02).unwrap();
        let a = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap());
        assert_eq!(a.log_z.ln().to_bits(), b.log_z.ln().to_bits());
    }

    #[test]
    fn log_z_increases_with_beta() {
        let g = random_regular(4, 3, 0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let inst = IsingInstance::new(g.clone(), 4, 0.05 * k as f64, 0.03).unwrap();
            let z = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
            assert!(z > prev);
            prev = z;
        }
    }

    #[test]
    fn energy_identity_on_random_spins() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = IsingInstance::new(random_regular(6, 3, 1).unwrap(), 4, 0.37, 0.11).unwrap();
        let j = materialize_dense(&inst, DENSE_CAP).unwrap();
        for _ in 0..100 {
            let sigma: Vec<f64> = (0..24).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let s = nalgebra::DVector::from_vec(sigma.clone());
            let dense = 0.5 * s.dot(&(&j * &s));
            let b = MagVector::from_spins(&inst, &sigma);
            assert!((dense - magnetization_energy(&inst, &b)).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn flip_symmetry(seed in any::<u64>(), raw in proptest::collection::vec(-3i64..=3, 6)) {
            let inst = IsingInstance::new(random_regular(6, 3, seed).unwrap(), 6, 0.2, 0.05).unwrap();
            let b = MagVector(raw);
            let (x, y) = (contribution(&inst, &b).unwrap().ln(), contribution(&inst, &b.negated()).unwrap().ln());
            prop_assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0));
        }
    }
}
