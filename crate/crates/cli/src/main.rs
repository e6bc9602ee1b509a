//! `ising-gap` command-line front end.
//!
//! Exit status: 0 on success, 1 when the library rejects the input (bad
//! graph, infeasible parameters, budget exceeded, ...), 2 on usage errors.

mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ising_gap::dynamics::{
    default_burn_in, glauber_replicas, integrated_autocorrelation, RunSettings, Trajectory,
};
use ising_gap::gadget::{build_instance, materialize_dense, GadgetParams, IsingInstance, LabSpec, DENSE_CAP};
use ising_gap::graph::{cut_size, max_cut_exact, parse_graph, CutAssignment, Graph};
use ising_gap::landscape::{
    binomial_entropy_gap, maximize_phi_orthant, q_maximizer_scan, qb_expansion_check, AscentOptions,
};
use ising_gap::partition::{brute_force_log_z, magnetization_log_z, orthant_log_z, DEFAULT_BUDGET};
use ising_gap::reduction::{build_certificate, decide_gap, verify_small, CertMode, ReductionCertificate};
use ising_gap::spectral::{psd_shift, structured_spectrum, EigenGroup, PsdShift};

use output::{emit_json, float, open, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "ising-gap", version, about = "MAX-CUT to dense Ising reduction toolkit")]
struct Cli {
    /// Seed for every random choice; runs are reproducible given the flags.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for enumeration and replicas.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Write the JSON (or CSV) result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact maximum cut by enumeration (n <= 30).
    Maxcut {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Log partition function of a cloud instance.
    Partition(PartitionArgs),
    /// Build the T1/T2 certificate for a graph.
    Reduce(ReduceArgs),
    /// Decide the MAX-CUT question from a certificate and an estimate of ln Z.
    Decide {
        #[arg(long)]
        certificate: PathBuf,
        /// Estimate of ln Z for the shifted (positive semidefinite) matrix.
        #[arg(long, allow_negative_numbers = true)]
        log_zhat: f64,
        /// Log of the approximation factor R.
        #[arg(long, default_value_t = 0.0)]
        ln_r: f64,
    },
    /// Cloud profile and aggregate potential tools.
    #[command(subcommand)]
    Landscape(LandscapeCommand),
    /// Spectrum of the gadget coupling matrix.
    Spectrum(SpectrumArgs),
    /// Heat-bath dynamics on the Curie-Weiss model.
    Glauber(GlauberArgs),
    /// Exact check of the certificates on a small instance.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        tau: f64,
        #[command(flatten)]
        lab: LabArgs,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
}

#[derive(Args, Clone)]
struct LabArgs {
    /// Cloud size (even).
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    bhat: Option<f64>,
    #[arg(long)]
    uhat: Option<f64>,
    /// Derive bhat = round(t^(3/4 + delta)) when --bhat is absent.
    #[arg(long)]
    delta: Option<f64>,
    /// Derive uhat = bhat + t^(3/4 + delta') when --uhat is absent.
    #[arg(long)]
    delta_prime: Option<f64>,
    #[arg(long, default_value_t = 3)]
    max_degree: usize,
}

impl LabArgs {
    fn spec(&self, epsilon: Option<f64>) -> Result<LabSpec> {
        let Some(t) = self.t else { bail!("lab parameters need --t") };
        Ok(LabSpec {
            t,
            bhat: self.bhat,
            uhat: self.uhat,
            delta: self.delta,
            delta_prime: self.delta_prime,
            epsilon,
            max_degree: self.max_degree,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Brute,
    #[value(alias = "mag")]
    Magnetization,
    Orthant,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Magnetization)]
    method: Method,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    gamma: f64,
    /// Sign pattern such as `+-+-`, for `--method orthant`.
    #[arg(long)]
    signs: Option<CutAssignment>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Lab,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Defaults to `lab` when `--t` is given and `paper` otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Claimed cut size A.
    #[arg(long)]
    a: usize,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    lab: LabArgs,
}

#[derive(Subcommand)]
enum LandscapeCommand {
    /// Locate the maximizer of the cloud profile Q on [0, t/2].
    #[command(long_flag = "scan-q")]
    Scan {
        #[arg(long)]
        t: u64,
        /// Calibrate beta so that this bias is the maximizer.
        #[arg(long, conflicts_with = "beta")]
        bhat: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Grid spacing; defaults to t / 4096.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Maximize the aggregate potential on one sign orthant.
    #[command(long_flag = "maximize")]
    Orthant {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        signs: CutAssignment,
        #[arg(long, default_value_t = 1.1)]
        tau: f64,
        #[command(flatten)]
        lab: LabArgs,
    },
    /// Binomial coefficient against its entropy bounds.
    Binomial {
        #[arg(long)]
        t: u64,
        #[arg(long, allow_negative_numbers = true)]
        b: i64,
    },
    /// Rise of Q from 0 to bhat against its quartic approximation.
    Qb {
        #[arg(long)]
        t: u64,
        #[arg(long)]
        bhat: f64,
    },
    /// CSV of the quartic check over t = 2^from ..= 2^to, bhat = t^(3/4 + delta).
    QbSweep {
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        from: u32,
        #[arg(long, default_value_t = 24)]
        to: u32,
    },
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Explicit couplings; otherwise lab parameters are calibrated.
    #[arg(long, requires = "gamma")]
    beta: Option<f64>,
    #[arg(long, requires = "beta")]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1.1)]
    tau: f64,
    #[command(flatten)]
    lab: LabArgs,
}

#[derive(Args)]
struct GlauberArgs {
    #[arg(long)]
    beta: f64,
    /// Number of spins.
    #[arg(long = "N", alias = "spins")]
    n: usize,
    /// Recorded steps per replica, after burn-in.
    #[arg(long)]
    steps: u64,
    /// Sampling stride; defaults to N.
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    /// Burn-in steps; defaults to 10 N ln N.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Also write the trajectories as CSV (`replica,step,m`).
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_graph(&text).with_context(|| format!("in {}", path.display()))
}

#[derive(Serialize)]
struct MaxcutOut {
    n: usize,
    edges: usize,
    size: usize,
    witness: CutAssignment,
}

#[derive(Serialize)]
struct PartitionOut {
    method: &'static str,
    n: usize,
    t: usize,
    beta: f64,
    gamma: f64,
    total_spins: usize,
    #[serde(rename = "logZ")]
    log_z: f64,
    terms: u64,
    signs: Option<CutAssignment>,
    /// Wall-clock time; the only field that varies between identical runs.
    seconds: f64,
}

#[derive(Serialize)]
struct DecideOut {
    decision: ising_gap::reduction::GapDecision,
    log_zhat: f64,
    ln_r: f64,
    log_t1: f64,
    log_t2: f64,
    ln_k_shift: f64,
    a: usize,
    tau: f64,
}

#[derive(Serialize)]
struct SpectrumOut {
    eigenvalues: Vec<EigenGroup>,
    lambda_min: f64,
    lambda_max: f64,
    diameter: f64,
    bound: f64,
    cloud_norm: f64,
    coupling_norm: f64,
    psd_shift: PsdShift,
}

#[derive(Serialize)]
struct GlauberOut {
    beta: f64,
    spins: usize,
    steps: u64,
    stride: u64,
    burn_in: u64,
    replicas: u64,
    seed: u64,
    samples_per_replica: usize,
    mean_abs_m: f64,
    std_err_abs_m: f64,
    mean_m2: f64,
    /// Mean over replicas of the integrated autocorrelation time of `m`, in
    /// samples. Informational.
    autocorrelation_time: f64,
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.output.as_deref();
    match cli.command {
        Command::Maxcut { graph } => {
            let g = read_graph(&graph)?;
            let (size, witness) = max_cut_exact(&g)?;
            emit_json(out, "maxcut", &MaxcutOut { n: g.n(), edges: g.edge_count(), size, witness })
        }
        Command::Partition(args) => {
            let g = read_graph(&args.graph)?;
            let inst = IsingInstance::new(g, args.t, args.beta, args.gamma)?;
            let start = Instant::now();
            let (method, value) = match args.method {
                Method::Brute => ("brute", brute_force_log_z(&materialize_dense(&inst, DENSE_CAP)?)?),
                Method::Magnetization => ("magnetization", magnetization_log_z(&inst, args.budget)?),
                Method::Orthant => {
                    let Some(signs) = &args.signs else { bail!("--method orthant needs --signs") };
                    ("orthant", orthant_log_z(&inst, signs, args.budget)?)
                }
            };
            emit_json(
                out,
                "partition",
                &PartitionOut {
                    method,
                    n: inst.n(),
                    t: inst.t,
                    beta: inst.beta,
                    gamma: inst.gamma,
                    total_spins: inst.total_spins(),
                    log_z: value.log_z.ln(),
                    terms: value.terms,
                    signs: args.signs,
                    seconds: start.elapsed().as_secs_f64(),
                },
            )
        }
        Command::Reduce(args) => {
            let g = read_graph(&args.graph)?;
            let mode_arg = args.mode.unwrap_or(if args.lab.t.is_some() { ModeArg::Lab } else { ModeArg::Paper });
            let mode = match mode_arg {
                ModeArg::Paper => {
                    let Some(epsilon) = args.epsilon else { bail!("--mode paper needs --epsilon") };
                    CertMode::Paper { epsilon }
                }
                ModeArg::Lab => CertMode::Lab(args.lab.spec(args.epsilon)?),
            };
            let cert = build_certificate(&g, args.tau, args.a, &mode)?;
            emit_json(out, "reduce", &cert)
        }
        Command::Decide { certificate, log_zhat, ln_r } => {
            let text = fs::read_to_string(&certificate)
                .with_context(|| format!("cannot read {}", certificate.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("schema_version").and_then(|v| v.as_u64()) != Some(SCHEMA_VERSION as u64) {
                bail!("{} is not a schema version {SCHEMA_VERSION} certificate", certificate.display());
            }
            let cert: ReductionCertificate = serde_json::from_value(value)?;
            cert.params.validate()?;
            let decision = decide_gap(log_zhat, ln_r, &cert);
            emit_json(
                out,
                "decide",
                &DecideOut {
                    decision,
                    log_zhat,
                    ln_r,
                    log_t1: cert.log_t1.ln(),
                    log_t2: cert.log_t2.ln(),
                    ln_k_shift: cert.ln_k_shift,
                    a: cert.a,
                    tau: cert.params.tau,
                },
            )
        }
        Command::Landscape(cmd) => landscape(cmd, out),
        Command::Spectrum(args) => {
            let g = read_graph(&args.graph)?;
            let inst = match (args.beta, args.gamma) {
                (Some(beta), Some(gamma)) => {
                    let Some(t) = args.lab.t else { bail!("--beta/--gamma need --t") };
                    IsingInstance::new(g, usize::try_from(t)?, beta, gamma)?
                }
                _ => build_instance(&g, &GadgetParams::lab(&args.lab.spec(None)?, args.tau)?)?,
            };
            let report = structured_spectrum(&inst)?;
            let t = inst.t as f64;
            let bound = t * inst.beta + 2.0 * inst.base.max_degree() as f64 * t * inst.gamma;
            emit_json(
                out,
                "spectrum",
                &SpectrumOut {
                    lambda_min: report.lambda_min,
                    lambda_max: report.lambda_max,
                    diameter: report.diameter,
                    bound,
                    cloud_norm: report.cloud_norm,
                    coupling_norm: report.coupling_norm,
                    psd_shift: psd_shift(&report),
                    eigenvalues: report.groups,
                },
            )
        }
        Command::Glauber(args) => glauber(args, cli.seed, out),
        Command::Verify { graph, a, tau, lab, budget } => {
            let g = read_graph(&graph)?;
            let p = GadgetParams::lab(&lab.spec(None)?, tau)?;
            let report = verify_small(&g, &p, a, budget)?;
            emit_json(out, "verify", &report)
        }
    }
}

fn landscape(cmd: LandscapeCommand, out: Option<&Path>) -> Result<()> {
    match cmd {
        LandscapeCommand::Scan { t, bhat, beta, step } => {
            let beta = match (bhat, beta) {
                (Some(b), _) => ising_gap::gadget::beta_from_bhat(t, b)?,
                (None, Some(beta)) => beta,
                (None, None) => bail!("give --bhat or --beta"),
            };
            let scan = q_maximizer_scan(t, beta, step.unwrap_or(t as f64 / 4096.0))?;
            emit_json(out, "landscape-scan", &scan)
        }
        LandscapeCommand::Orthant { graph, signs, tau, lab } => {
            let g = read_graph(&graph)?;
            let p = GadgetParams::lab(&lab.spec(None)?, tau)?;
            cut_size(&g, &signs)?;
            let r = maximize_phi_orthant(&g, &p, &signs, &AscentOptions::default())?;
            emit_json(out, "landscape-orthant", &r)
        }
        LandscapeCommand::Binomial { t, b } => emit_json(out, "landscape-binomial", &binomial_entropy_gap(t, b)?),
        LandscapeCommand::Qb { t, bhat } => emit_json(out, "landscape-qb", &qb_expansion_check(t, bhat)?),
        LandscapeCommand::QbSweep { delta, from, to } => {
            if from > to || to > 52 {
                bail!("need from <= to <= 52");
            }
            let mut w = csv::Writer::from_writer(open(out)?);
            w.write_record(["t", "bhat", "exact_gap", "leading", "residual"])?;
            for k in from..=to {
                let t = 1u64 << k;
                let tf = t as f64;
                let bhat = tf.powf(0.75 + delta).min(tf / 4.0);
                let r = qb_expansion_check(t, bhat)?;
                w.write_record([t.to_string(), float(bhat), float(r.exact_gap), float(r.leading), float(r.residual)])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn glauber(args: GlauberArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    if args.n == 0 || args.replicas == 0 {
        bail!("--N and --replicas must be positive");
    }
    let inst = IsingInstance::complete_graph(args.n, args.beta)?;
    let settings = RunSettings {
        steps: args.steps,
        stride: args.stride.unwrap_or(args.n as u64),
        burn_in: args.burn_in.unwrap_or_else(|| default_burn_in(args.n)),
        seed,
        record_clouds: false,
    };
    let trajs = glauber_replicas(&inst, &settings, args.replicas)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_writer(open(Some(path))?);
        w.write_record(["replica", "step", "m"])?;
        for tr in &trajs {
            for (step, m) in tr.step.iter().zip(&tr.m) {
                w.write_record([tr.replica.to_string(), step.to_string(), m.to_string()])?;
            }
        }
        w.flush()?;
    }
    let means: Vec<f64> = trajs.iter().map(Trajectory::mean_abs_m).collect();
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    let std_err = if means.len() > 1 {
        (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
    } else {
        f64::NAN
    };
    let samples: usize = trajs.iter().map(|t| t.m.len()).sum();
    let mean_m2 = trajs.iter().flat_map(|t| &t.m).map(|&m| (m * m) as f64).sum::<f64>() / samples.max(1) as f64;
    let tau = trajs
        .iter()
        .map(|t| integrated_autocorrelation(&t.m.iter().map(|&m| m as f64).collect::<Vec<_>>()))
        .sum::<f64>()
        / r;
    emit_json(
        out,
        "glauber",
        &GlauberOut {
            beta: args.beta,
            spins: args.n,
            steps: settings.steps,
            stride: settings.stride,
            burn_in: settings.burn_in,
            replicas: args.replicas,
            seed,
            samples_per_replica: trajs.first().map_or(0, |t| t.m.len()),
            mean_abs_m: mean,
            std_err_abs_m: std_err,
            mean_m2,
            autocorrelation_time: tau,
        },
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let _ = std::io::stderr().flush();
            ExitCode::from(1)
        }
    }
}
