//! Spectrum of the gadget coupling matrix.
//!
//! `J` splits into the block-diagonal cloud part `beta (11^T - I)` per cloud and
//! the inter-cloud part `-gamma A_G (x) 11^T`. Both are polynomials in the
//! all-ones block, so they commute, and the `N` eigenvalues are
//!
//! * `beta (t - 1) - gamma t lambda_i(A_G)` for each adjacency eigenvalue, and
//! * `-beta` with multiplicity `n (t - 1)`.
//!
//! Only the `n x n` adjacency matrix is ever diagonalized on this route; the
//! dense route exists to check it.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{build_instance, GadgetError, GadgetParams, IsingInstance, ParamMode};
use crate::graph::Graph;

/// Off-diagonal tolerance of the Jacobi solver, relative to the Frobenius norm.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Largest matrix handed to the dense eigensolver.
pub const DENSE_EIGEN_CAP: usize = 4000;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix of order {n} exceeds the dense eigensolver cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("matrix is not square and symmetric")]
    NotSymmetric,
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>, SpectralError> {
    let n = a.nrows();
    check_symmetric(a)?;
    let mut m = a.clone();
    let norm = m.norm();
    let off = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > JACOBI_TOLERANCE * norm {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(SpectralError::NoConvergence(sweeps));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        m[(k, p)] = c * akp - s * akq;
                        m[(p, k)] = m[(k, p)];
                        m[(k, q)] = s * akp + c * akq;
                        m[(q, k)] = m[(k, q)];
                    }
                }
                m[(p, p)] -= t * apq;
                m[(q, q)] += t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
        sweeps += 1;
    }
    let mut ev: Vec<f64> = m.diagonal().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<(), SpectralError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SpectralError::NotSymmetric);
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in 0..r {
            if (a[(r, c)] - a[(c, r)]).abs() > 1e-14 * scale {
                return Err(SpectralError::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// One distinct eigenvalue and how often it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenGroup {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// `n` lifted adjacency eigenvalues, then the `-beta` group.
    pub groups: Vec<EigenGroup>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub diameter: f64,
    /// `t beta`, the norm of the cloud blocks with their diagonal filled in.
    pub cloud_norm: f64,
    /// `gamma t max |lambda(A_G)|`.
    pub coupling_norm: f64,
    /// `1 + 8 t^(-1/2 + 2 delta)` when `delta` is known.
    pub reference_bound: Option<f64>,
}

impl SpectrumReport {
    /// The full multiset of `N` eigenvalues, sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .groups
            .iter()
            .flat_map(|g| std::iter::repeat(g.value).take(g.multiplicity))
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn count(&self) -> usize {
        self.groups.iter().map(|g| g.multiplicity).sum()
    }
}

pub fn structured_spectrum(inst: &IsingInstance) -> Result<SpectrumReport, SpectralError> {
    let adj = jacobi_eigenvalues(&inst.base.adjacency_matrix())?;
    let t = inst.t as f64;
    let mut groups: Vec<EigenGroup> = adj
        .iter()
        .map(|&l| EigenGroup {
            value: inst.beta * (t - 1.0) - inst.gamma * t * l,
            multiplicity: 1,
        })
        .collect();
    let free = inst.n() * (inst.t - 1);
    if free > 0 {
        groups.push(EigenGroup { value: -inst.beta, multiplicity: free });
    }
    let lambda_min = groups.iter().map(|g| g.value).fold(f64::INFINITY, f64::min);
    let lambda_max = groups.iter().map(|g| g.value).fold(f64::NEG_INFINITY, f64::max);
    let adj_norm = adj.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    Ok(SpectrumReport {
        groups,
        lambda_min,
        lambda_max,
        diameter: lambda_max - lambda_min,
        cloud_norm: t * inst.beta,
        coupling_norm: inst.gamma * t * adj_norm,
        reference_bound: None,
    })
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_eigenvalues(j: &DMatrix<f64>) -> Result<Vec<f64>, SpectralError> {
    let n = j.nrows();
    if n > DENSE_EIGEN_CAP {
        return Err(SpectralError::TooLarge { n, cap: DENSE_EIGEN_CAP });
    }
    check_symmetric(j)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(j.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `(lambda_min, lambda_max)` of a dense symmetric matrix.
pub fn dense_spectral_diameter(j: &DMatrix<f64>) -> Result<(f64, f64), SpectralError> {
    let ev = dense_eigenvalues(j)?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Ok((0.0, 0.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterCheck {
    pub actual: f64,
    /// `t beta + 2 max_degree t gamma`.
    pub bound: f64,
    pub within_bound: bool,
    /// `1 + N^(-1/2 + epsilon)`, asserted only for the asymptotic schedule.
    pub window_bound: Option<f64>,
    pub within_window: Option<bool>,
}

pub fn diameter_bound_check(g: &Graph, p: &GadgetParams) -> Result<DiameterCheck, SpectralError> {
    let inst = build_instance(g, p)?;
    let report = structured_spectrum(&inst)?;
    let t = p.t as f64;
    let bound = t * p.beta + 2.0 * p.max_degree as f64 * t * p.gamma;
    let window_bound = match (p.mode, p.epsilon) {
        (ParamMode::Paper, Some(eps)) => Some(1.0 + (inst.total_spins() as f64).powf(-0.5 + eps)),
        _ => None,
    };
    Ok(DiameterCheck {
        actual: report.diameter,
        bound,
        within_bound: report.diameter <= bound * (1.0 + 1e-12),
        window_bound,
        within_window: window_bound.map(|w| report.diameter <= w),
    })
}

/// Shift making `J - lambda_min I` positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdShift {
    pub lambda_min: f64,
    /// `ln K_shift = -lambda_min N / 2`; `ln Z` of the shifted matrix is
    /// `ln K_shift + ln Z_J`.
    pub ln_k_shift: f64,
    /// Spectral norm of the shifted matrix, equal to the diameter of `J`.
    pub shifted_norm: f64,
}

pub fn psd_shift(report: &SpectrumReport) -> PsdShift {
    let n = report.count() as f64;
    PsdShift {
        lambda_min: report.lambda_min,
        ln_k_shift: -0.5 * report.lambda_min * n,
        shifted_norm: report.diameter,
    }
}

/// Convenience: structured spectrum and shift for a built instance.
pub fn instance_psd_shift(inst: &IsingInstance) -> Result<PsdShift, SpectralError> {
    Ok(psd_shift(&structured_spectrum(inst)?))
}

pub fn reference_bound(t: u64, delta: f64) -> f64 {
    1.0 + 8.0 * (t as f64).powf(-0.5 + 2.0 * delta)
}
