//! Acceptance suite. Each test is one criterion; libtest's `ok`/`FAILED` line
//! is the verdict. Each test also writes a `criterion N: PASS|FAIL` line with
//! the measured quantities straight to stderr, past libtest's capture.
//!
//! Tolerances are pinned as constants next to each test.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ising_gap::dynamics::{curie_weiss_mean_abs_m, magnetization_exponent, ExponentSettings};
use ising_gap::gadget::{build_instance, materialize_dense, GadgetParams, IsingInstance, LabSpec, DENSE_CAP};
use ising_gap::graph::{max_cut_exact, random_regular, CutAssignment, Graph};
use ising_gap::landscape::{
    binomial_entropy_gap, maximize_phi_orthant, phi, phi_gradient, q_maximizer_scan, qb_expansion_check,
    AscentOptions, RealBiasVector,
};
use ising_gap::partition::{brute_force_log_z, magnetization_energy, magnetization_log_z, MagVector, DEFAULT_BUDGET};
use ising_gap::reduction::{
    build_certificate, compute_t1, compute_t2, decide_gap, gap_lower_bound, CertMode, GapDecision,
};
use ising_gap::spectral::{dense_eigenvalues, diameter_bound_check, instance_psd_shift, structured_spectrum};

fn report(id: u32, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2}: {verdict} {}", detail.as_ref());
}

/// Graph on `n` vertices with each pair joined independently with probability 1/2.
fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|_| rng.gen::<bool>())
        .collect();
    Graph::from_edges(n, edges).unwrap()
}

fn random_spins(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

const PARTITION_REL_TOL: f64 = 1e-10;

#[test]
fn c01_partition_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 60 {
        let n = rng.gen_range(1..=6);
        let tmax = (20 / n) / 2 * 2;
        if tmax < 2 {
            continue;
        }
        let t = 2 * rng.gen_range(1..=tmax / 2);
        let g = random_graph(n, &mut rng);
        let inst = IsingInstance::new(g, t, rng.gen_range(0.0..0.8), rng.gen_range(0.0..0.4)).unwrap();
        let brute = brute_force_log_z(&materialize_dense(&inst, DENSE_CAP).unwrap()).unwrap().log_z.ln();
        let mag = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
        worst = worst.max((brute - mag).abs() / brute.abs().max(1.0));
        count += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= PARTITION_REL_TOL && secs < 60.0;
    report(1, pass, format!("{count} instances, worst scaled error {worst:.3e}, {secs:.1}s"));
    assert!(pass);
}

const ENERGY_ABS_TOL: f64 = 1e-10;

#[test]
fn c02_energy_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let n = 2 * rng.gen_range(2..=5);
        let t = 2 * rng.gen_range(1..=4);
        let g = random_regular(n, 3, k).unwrap();
        let inst = IsingInstance::new(g, t, rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5)).unwrap();
        let j = materialize_dense(&inst, DENSE_CAP).unwrap();
        for _ in 0..100 {
            let sigma = random_spins(inst.total_spins(), &mut rng);
            let s = DVector::from_vec(sigma.clone());
            let dense = 0.5 * s.dot(&(&j * &s));
            let formula = magnetization_energy(&inst, &MagVector::from_spins(&inst, &sigma));
            worst = worst.max((dense - formula).abs());
        }
    }
    let pass = worst <= ENERGY_ABS_TOL;
    report(2, pass, format!("1000 configurations, worst |difference| {worst:.3e}"));
    assert!(pass);
}

const MAXIMIZER_REL_TOL: f64 = 1e-8;

#[test]
fn c03_cloud_profile_maximizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut all_unique = true;
    for k in 0..50 {
        let t = 1u64 << (3 + k % 14);
        let tf = t as f64;
        let bhat = rng.gen_range(0.02..0.48) * tf;
        let beta = ising_gap::gadget::beta_from_bhat(t, bhat).unwrap();
        let scan = q_maximizer_scan(t, beta, tf / 4096.0).unwrap();
        worst = worst.max((scan.argmax - bhat).abs() / tf);
        all_unique &= scan.sign_changes == 1 && !scan.on_boundary;
    }
    let pass = worst <= MAXIMIZER_REL_TOL && all_unique;
    report(3, pass, format!("50 pairs, worst |argmax - bhat| / t = {worst:.3e}, unique = {all_unique}"));
    assert!(pass);
}

#[test]
fn c04_maximizers_stay_below_uhat() {
    let start = Instant::now();
    let spec = LabSpec { t: 1 << 16, delta: Some(0.05), delta_prime: Some(0.025), max_degree: 3, ..Default::default() };
    let p = GadgetParams::lab(&spec, 1.1).unwrap();
    let opts = AscentOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut orthants, mut unconverged, mut violations) = (0usize, 0usize, 0usize);
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..20u64 {
        let n = [4, 6, 8, 10, 12][k as usize % 5];
        let g = random_regular(n, 3, 1000 + k).unwrap();
        let patterns: Vec<CutAssignment> = if n <= 8 {
            (0..1u64 << n).map(|m| CutAssignment::from_mask(n, m)).collect()
        } else {
            (0..100).map(|_| CutAssignment::from_mask(n, rng.gen_range(0..1u64 << n))).collect()
        };
        for signs in &patterns {
            let r = maximize_phi_orthant(&g, &p, signs, &opts).unwrap();
            orthants += 1;
            for s in r.starts.iter() {
                if !s.converged {
                    unconverged += 1;
                    continue;
                }
                worst_excess = worst_excess.max(s.b.max_abs() - p.uhat);
            }
            if !r.within_uhat {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && worst_excess <= 1e-6 * p.t as f64 && secs < 300.0;
    report(
        4,
        pass,
        format!(
            "{orthants} orthants, max(max|b*| - uhat) = {worst_excess:.3e} (allowed {:.3e}), {unconverged} unconverged starts, {secs:.1}s",
            1e-6 * p.t as f64
        ),
    );
    assert!(pass);
}

const GRADIENT_REL_TOL: f64 = 1e-6;

#[test]
fn c05_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let n = 2 * rng.gen_range(2..=6);
        let g = random_regular(n, 3, k).unwrap();
        let t = 2 * rng.gen_range(50u64..5000);
        let tf = t as f64;
        let bhat = (rng.gen_range(0.05..0.3) * tf).round();
        let uhat = bhat + rng.gen_range(0.02..0.15) * tf;
        let p = GadgetParams::lab(&LabSpec::new(t, bhat, uhat, 3), 1.1).unwrap();
        let inst = build_instance(&g, &p).unwrap();
        let b = RealBiasVector((0..n).map(|_| rng.gen_range(-0.45..0.45) * tf).collect());
        let grad = phi_gradient(&b, &inst).unwrap();
        let h = 1e-5 * tf;
        let fd: Vec<f64> = (0..n)
            .map(|v| {
                let mut up = b.clone();
                let mut down = b.clone();
                up.0[v] += h;
                down.0[v] -= h;
                (phi(&up, &inst).unwrap() - phi(&down, &inst).unwrap()) / (2.0 * h)
            })
            .collect();
        let err = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = grad.iter().map(|a| a.abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    let pass = worst <= GRADIENT_REL_TOL;
    report(5, pass, format!("100 points, worst relative error (sup norm) {worst:.3e}"));
    assert!(pass);
}

#[test]
fn c06_t1_lower_bound() {
    let start = Instant::now();
    let prism =
        Graph::from_edges(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]).unwrap();
    let graphs = vec![
        Graph::complete(4),
        Graph::complete_bipartite(3, 3),
        prism,
        Graph::cycle(6),
        Graph::cycle(5),
        Graph::path(4),
        random_regular(6, 3, 6).unwrap(),
    ];
    let specs = [
        LabSpec::new(4, 1.0, 1.5, 3),
        LabSpec::new(6, 1.0, 2.0, 3),
        LabSpec::new(8, 2.0, 3.0, 3),
        LabSpec::new(8, 3.0, 3.5, 3),
        LabSpec::new(10, 4.0, 4.99, 3),
        LabSpec::new(10, 2.0, 4.0, 3),
    ];
    let (mut checked, mut failures) = (0, 0);
    let mut min_margin = f64::INFINITY;
    for g in &graphs {
        let (max_cut, _) = max_cut_exact(g).unwrap();
        for spec in &specs {
            let p = GadgetParams::lab(spec, 1.1).unwrap();
            let inst = build_instance(g, &p).unwrap();
            let log_z = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
            for a in 0..=max_cut {
                let t1 = compute_t1(g, &p, a).unwrap().ln();
                checked += 1;
                min_margin = min_margin.min(log_z - t1);
                if log_z < t1 {
                    failures += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && secs < 600.0;
    report(6, pass, format!("{checked} (graph, params, A) cases, min ln Z - ln T1 = {min_margin:.4}, {secs:.1}s"));
    assert!(pass);
}

const CHAIN_ABS_TOL: f64 = 1e-9;

#[test]
fn c07_certificate_gap_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = f64::INFINITY;
    let mut draws = 0;
    while draws < 1000 {
        let n = 2 * rng.gen_range(2..=10);
        let g = random_regular(n, 3, rng.gen()).unwrap();
        let t = 1u64 << rng.gen_range(3..=40);
        let tf = t as f64;
        let bhat = (rng.gen_range(0.01..0.4) * tf).round();
        let uhat = bhat + rng.gen_range(1e-3..0.09) * tf;
        let Ok(p) = GadgetParams::lab(&LabSpec::new(t, bhat, uhat, 3), rng.gen_range(1.01..2.0)) else {
            continue;
        };
        let edges = g.edge_count();
        let lo = (p.tau * edges as f64 / 2.0).ceil() as usize;
        if lo > edges {
            continue;
        }
        let a = rng.gen_range(lo..=edges);
        let lhs = compute_t1(&g, &p, a).unwrap().ln() - compute_t2(&g, &p, a).unwrap().ln();
        let rhs = gap_lower_bound(&g, &p, a).unwrap();
        // rounding in ln T1 - ln T2 scales with their magnitude
        let slack = CHAIN_ABS_TOL.max(4.0 * f64::EPSILON * compute_t2(&g, &p, a).unwrap().ln().abs());
        worst = worst.min(lhs - rhs + slack);
        draws += 1;
    }
    let pass = worst >= 0.0;
    report(7, pass, format!("{draws} draws, min (lhs - rhs + tolerance) = {worst:.4e}"));
    assert!(pass);
}

const GAMMA_LIMIT: f64 = 8.0 / 9.0;
const GAMMA_REL_TOL: f64 = 0.05;

#[test]
fn c08_coupling_asymptotics() {
    let epsilon: f64 = 0.48;
    let (delta, delta_prime) = (epsilon / 6.0, epsilon / 12.0);
    let mut beta_ok = true;
    let mut ratios = Vec::new();
    for k in 12..=24 {
        let t = 1u64 << k;
        let tf = t as f64;
        let spec = LabSpec { t, delta: Some(delta), delta_prime: Some(delta_prime), max_degree: 3, ..Default::default() };
        let p = GadgetParams::lab(&spec, 1.1).unwrap();
        beta_ok &= p.beta * tf <= 1.0 + 8.0 * tf.powf(-0.5 + 2.0 * delta);
        ratios.push(p.gamma * tf.powf(1.5 - delta - delta_prime) / GAMMA_LIMIT);
    }
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
    let last = *ratios.last().unwrap();
    let close = (last - 1.0).abs() <= GAMMA_REL_TOL;
    let pass = beta_ok && monotone && close;
    report(
        8,
        pass,
        format!(
            "beta t bound holds = {beta_ok}; gamma t^(3/2-d-d') / (8/9) from t=2^12 to 2^24: {:?}; monotone = {monotone}; at 2^24 = {last:.4} (needs within {GAMMA_REL_TOL})",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

const QB_SLOPE_TOL: f64 = 0.15;

#[test]
fn c09_quartic_expansion_residual() {
    let delta = 0.05;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 10..=24 {
        let tf = (1u64 << k) as f64;
        // at t = 2^10 the bias sits exactly on t/4; keep pow rounding inside
        let r = qb_expansion_check(1 << k, tf.powf(0.75 + delta).min(tf / 4.0)).unwrap();
        xs.push(tf.ln());
        ys.push(r.residual.abs().ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    // bhat^6 / t^5 with bhat = t^(3/4 + delta)
    let theory = 6.0 * (0.75 + delta) - 5.0;
    let pass = (slope - theory).abs() <= QB_SLOPE_TOL;
    report(9, pass, format!("residual slope {slope:.4}, theory {theory:.4}"));
    assert!(pass);
}

const SPECTRUM_ABS_TOL: f64 = 1e-9;

#[test]
fn c10_spectral_checks() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst: f64 = 0.0;
    let mut bound_ok = true;
    let mut instances = 0;
    let mut sizes = Vec::new();
    let mut k = 0u64;
    while instances < 32 {
        k += 1;
        let (n, t) = match instances {
            30 => (20, 60),
            31 => (40, 50),
            _ => (2 * rng.gen_range(2..=10), 2 * rng.gen_range(1..=20)),
        };
        let g = random_regular(n, 3, k).unwrap();
        let tf = t as f64;
        let bhat = (rng.gen_range(0.1..0.3) * tf).round().max(1.0);
        let uhat = bhat + rng.gen_range(0.05..0.15) * tf;
        let Ok(p) = GadgetParams::lab(&LabSpec::new(t, bhat, uhat, 3), 1.1) else {
            continue;
        };
        let inst = build_instance(&g, &p).unwrap();
        let structured = structured_spectrum(&inst).unwrap().eigenvalues();
        let dense = dense_eigenvalues(&materialize_dense(&inst, DENSE_CAP).unwrap()).unwrap();
        for (a, b) in structured.iter().zip(&dense) {
            worst = worst.max((a - b).abs());
        }
        bound_ok &= diameter_bound_check(&g, &p).unwrap().within_bound;
        instances += 1;
        sizes.push(inst.total_spins());
    }

    let mut shift_worst: f64 = 0.0;
    for k in 0..10u64 {
        let (n, t) = [(4usize, 4usize), (2, 8), (4, 2), (3, 4), (2, 6)][k as usize % 5];
        let g = random_graph(n, &mut rng);
        let inst = IsingInstance::new(g, t, rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.3)).unwrap();
        let j = materialize_dense(&inst, DENSE_CAP).unwrap();
        let s = instance_psd_shift(&inst).unwrap();
        let shifted = &j - DMatrix::<f64>::identity(j.nrows(), j.nrows()) * s.lambda_min;
        let z = brute_force_log_z(&j).unwrap().log_z.ln();
        let zs = brute_force_log_z(&shifted).unwrap().log_z.ln();
        shift_worst = shift_worst.max((zs - z - s.ln_k_shift).abs() / zs.abs().max(1.0));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= SPECTRUM_ABS_TOL && bound_ok && shift_worst <= 1e-12 && instances >= 30 && secs < 120.0;
    report(
        10,
        pass,
        format!(
            "{instances} instances (N up to {}), worst eigenvalue gap {worst:.3e}, diameter bound holds = {bound_ok}, psd shift identity error {shift_worst:.3e}, {secs:.1}s",
            sizes.iter().max().unwrap()
        ),
    );
    assert!(pass);
}

#[test]
fn c11_binomial_entropy_bounds() {
    let mut checked = 0u64;
    let mut ok = true;
    for t in (2..=4096u64).step_by(2) {
        for b in -(t as i64 / 2)..=(t as i64 / 2) {
            ok &= binomial_entropy_gap(t, b).unwrap().holds();
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for k in 13..=20 {
        let t = 1u64 << k;
        let half = t as i64 / 2;
        for _ in 0..2000 {
            ok &= binomial_entropy_gap(t, rng.gen_range(-half..=half)).unwrap().holds();
            checked += 1;
        }
        ok &= binomial_entropy_gap(t, half).unwrap().holds() && binomial_entropy_gap(t, 0).unwrap().holds();
    }
    report(11, ok, format!("{checked} (t, b) pairs"));
    assert!(ok);
}

const EXPONENT_TOL: f64 = 0.07;
const ORDERED_FRACTION_FLOOR: f64 = 0.75;

#[test]
fn c12_critical_magnetization_scaling() {
    let start = Instant::now();
    let settings = ExponentSettings {
        sizes: vec![256, 512, 1024, 2048, 4096],
        replicas: 32,
        seed: 12,
        sweeps: 60.0,
        burn_in_sweeps: Some(10.0),
    };
    let sub = magnetization_exponent(0.5, &settings).unwrap();
    let crit = magnetization_exponent(1.0, &settings).unwrap();
    let sup = magnetization_exponent(1.5, &settings).unwrap();
    let fractions: Vec<f64> = sup.points.iter().map(|p| p.mean_abs_m / p.spins as f64).collect();
    let exact_fractions: Vec<f64> = sup.points.iter().map(|p| curie_weiss_mean_abs_m(p.spins, 1.5) / p.spins as f64).collect();
    let sub_ok = (sub.alpha - 0.5).abs() <= EXPONENT_TOL;
    let crit_ok = (crit.alpha - 0.75).abs() <= EXPONENT_TOL;
    let sup_ok = fractions.iter().all(|&f| f >= ORDERED_FRACTION_FLOOR);
    let secs = start.elapsed().as_secs_f64();
    let pass = sub_ok && crit_ok && sup_ok && secs < 1800.0;
    report(
        12,
        pass,
        format!(
            "alpha(0.5) = {:.4} +- {:.4}, alpha(1.0) = {:.4} +- {:.4}, alpha(1.5) = {:.4}; E|m|/N at 1.5: {:?} (exact {:?}); {secs:.0}s",
            sub.alpha,
            sub.alpha_std_err,
            crit.alpha,
            crit.alpha_std_err,
            sup.alpha,
            fractions.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
            exact_fractions.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
        ),
    );
    assert!(pass);
}

#[test]
fn c13_end_to_end_decisions() {
    let start = Instant::now();
    let spec = LabSpec::new(10, 4.0, 4.99, 3);
    // the two cubic graphs on six vertices have max cuts 9 and 7; take the
    // first seed producing each so both appear
    let cubic = |cut: usize| {
        (0u64..)
            .map(|s| random_regular(6, 3, s).unwrap())
            .find(|g| max_cut_exact(g).unwrap().0 == cut)
            .unwrap()
    };
    let graphs = [("K4", Graph::complete(4)), ("random cubic #1", cubic(9)), ("random cubic #2", cubic(7))];
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, g) in &graphs {
        let (max_cut, _) = max_cut_exact(g).unwrap();
        let edges = g.edge_count();
        // a yes-instance at A = max cut, and a no-instance with A / tau above the max cut when possible
        let mut queries = vec![(max_cut, (2.0 * max_cut as f64 / edges as f64).min(1.0 + 1.0 / 3.0))];
        if max_cut < edges {
            queries.push((edges, 1.2));
        }
        for (a, tau) in queries {
            let cert = build_certificate(g, tau, a, &CertMode::Lab(spec.clone())).unwrap();
            let inst = build_instance(g, &cert.params).unwrap();
            let log_z = magnetization_log_z(&inst, DEFAULT_BUDGET).unwrap().log_z.ln();
            let decision = decide_gap(log_z + cert.ln_k_shift, 0.0, &cert);
            let correct = match decision {
                GapDecision::MaxcutAtLeastA => max_cut >= a,
                GapDecision::AllCutsBelowAOverTau => (max_cut as f64) < a as f64 / tau,
                GapDecision::Indeterminate => false,
            };
            pass &= correct;
            lines.push(format!("{name} (max cut {max_cut}) A={a} tau={tau:.3}: {decision:?}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    report(13, pass, format!("{}; {secs:.1}s", lines.join("; ")));
    assert!(pass);
}
