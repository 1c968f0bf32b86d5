//! Command-line front end. Settings resolve as defaults < `--config` file
//! (flat `key=value`) < `FLSLAB_SEED` (master seed only) < flags, and the
//! effective settings are echoed into every output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{self, BoundInputs};
use crate::cones;
use crate::error::{Error, Result};
use crate::flow::{self, FlowSpec, Integrator, TimeScale};
use crate::io::{self, format_key_values, join_floats, parse_key_values};
use crate::mixture::{self, MixtureSpec};
use crate::network::{init_balanced, InitSpec, Reference};
use crate::numeric::{derive_seed, fmt17, logspace};
use crate::sweep::{self, SweepSpec};
use crate::verify::{self, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SAMPLING: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

pub const SEED_ENV: &str = "FLSLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "flslab", version, about = "Gradient-flow laboratory for two-layer ReLU networks on Gaussian mixtures")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset and report its separability and class-mean geometry.
    Generate,
    /// Integrate the flow from one initialization and analyse the cones.
    Train {
        /// Train on this dataset CSV instead of sampling one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run an α × η × seed grid.
    Sweep,
    /// Evaluate the closed-form bounds from a key=value stats file.
    Bounds {
        #[arg(long)]
        stats: PathBuf,
    },
    /// Run the self-check suites; exit 1 if any fails.
    Verify {
        /// Run only these suites (repeatable).
        #[arg(long = "suite")]
        suites: Vec<Suite>,
    },
}

/// Every setting as an optional flag. Unset flags fall back to the config
/// file and then to the defaults.
#[derive(Debug, Default, Args)]
struct Overrides {
    /// Flat key=value file; keys are the flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all available).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    balance: Option<f64>,
    /// Rejection-sample until the separability margin reaches this value.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda_min: Option<f64>,
    #[arg(long, global = true)]
    max_tries: Option<usize>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    h: Option<usize>,
    /// Initialization scale (`train`), or the equivalence scale (`verify`).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// standard-normal | normalized-columns
    #[arg(long, global = true)]
    reference: Option<Reference>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    max_time: Option<f64>,
    #[arg(long, global = true)]
    record_every: Option<usize>,
    /// Comma-separated stopping levels.
    #[arg(long, global = true)]
    etas: Option<String>,
    /// euler | heun
    #[arg(long, global = true)]
    integrator: Option<Integrator>,
    /// unit-slope | mean-risk
    #[arg(long, global = true)]
    time_scale: Option<TimeScale>,
    #[arg(long, global = true)]
    drop_ratio: Option<f64>,
    #[arg(long, global = true)]
    trap_window: Option<usize>,
    /// Comma-separated α grid for sweeps.
    #[arg(long, global = true)]
    alphas: Option<String>,
    /// Comma-separated seeds for sweeps.
    #[arg(long, global = true)]
    seeds: Option<String>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    #[arg(long, global = true)]
    c_complexity: Option<f64>,
    /// Fresh dataset for every α in a sweep.
    #[arg(long, global = true)]
    resample: Option<bool>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub mixture: MixtureSpec,
    pub lambda_min: f64,
    pub max_tries: usize,
    pub delta: f64,
    pub h: usize,
    pub alpha: f64,
    pub reference: Reference,
    pub flow: FlowSpec,
    pub etas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mc_samples: usize,
    pub c_complexity: f64,
    pub resample: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            mixture: MixtureSpec::new(128, 1.5, 1.0, 50, 0),
            lambda_min: 0.0,
            max_tries: 1000,
            delta: 0.1,
            h: 64,
            alpha: 1e-3,
            reference: Reference::StandardNormal,
            flow: FlowSpec::default(),
            etas: vec![0.05],
            alphas: logspace(1e-5, 1e-1, 9),
            seeds: vec![1, 2, 3],
            mc_samples: 100_000,
            c_complexity: 1.0,
            resample: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Configuration(format!("bad entry `{t}` in `{key}`"))))
        .collect()
}

struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: std::str::FromStr + Clone>(&self, key: &str, flag: &Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v.clone());
        }
        match self.file.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Configuration(format!("bad value `{s}` for `{key}` in config file"))),
            None => Ok(default),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, flag: &Option<String>, default: Vec<T>) -> Result<Vec<T>> {
        match flag.as_deref().or(self.file.get(key).map(String::as_str)) {
            Some(s) => parse_list(s, key),
            None => Ok(default),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "seed", "out", "jobs", "d", "kappa", "sigma", "n", "balance", "lambda_min", "max_tries", "delta", "h",
    "alpha", "reference", "step", "max_time", "record_every", "etas", "integrator", "time_scale",
    "drop_ratio", "trap_window", "alphas", "seeds", "mc_samples", "c_complexity", "resample",
];

impl RunConfig {
    fn resolve(flags: &Overrides, env_seed: Option<String>) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => {
                let raw = parse_key_values(&fs::read_to_string(p)?)?;
                let mut kv = BTreeMap::new();
                for (k, v) in raw {
                    let k = k.replace('-', "_");
                    if !KNOWN_KEYS.contains(&k.as_str()) {
                        return Err(Error::Configuration(format!("unknown config key `{k}`")));
                    }
                    kv.insert(k, v);
                }
                kv
            }
            None => BTreeMap::new(),
        };
        let r = Resolver { file };
        let def = RunConfig::default();
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Configuration(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))
            })
            .transpose()?;
        let master_seed = match (flags.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(s)) => s,
            (None, None) => r.get("seed", &None, def.master_seed)?,
        };
        let d = r.get("d", &flags.d, def.mixture.d)?;
        let mut mixture = MixtureSpec::new(
            d,
            r.get("kappa", &flags.kappa, def.mixture.kappa)?,
            r.get("sigma", &flags.sigma, def.mixture.sigma)?,
            r.get("n", &flags.n, def.mixture.n)?,
            master_seed,
        );
        mixture.balance = r.get("balance", &flags.balance, def.mixture.balance)?;
        let fd = &def.flow;
        let etas = r.list("etas", &flags.etas, def.etas.clone())?;
        let flow = FlowSpec {
            step: r.get("step", &flags.step, fd.step)?,
            max_time: r.get("max_time", &flags.max_time, fd.max_time)?,
            record_every: r.get("record_every", &flags.record_every, fd.record_every)?,
            eta_stop: etas.iter().copied().fold(f64::NAN, f64::min),
            integrator: r.get("integrator", &flags.integrator, fd.integrator)?,
            time_scale: r.get("time_scale", &flags.time_scale, fd.time_scale)?,
            drop_ratio: r.get("drop_ratio", &flags.drop_ratio, fd.drop_ratio)?,
            trap_window: r.get("trap_window", &flags.trap_window, fd.trap_window)?,
        };
        let cfg = RunConfig {
            master_seed,
            out: r.get("out", &flags.out, def.out.clone())?,
            jobs: r.get("jobs", &flags.jobs, def.jobs)?,
            mixture,
            lambda_min: r.get("lambda_min", &flags.lambda_min, def.lambda_min)?,
            max_tries: r.get("max_tries", &flags.max_tries, def.max_tries)?,
            delta: r.get("delta", &flags.delta, def.delta)?,
            h: r.get("h", &flags.h, def.h)?,
            alpha: r.get("alpha", &flags.alpha, def.alpha)?,
            reference: r.get("reference", &flags.reference, def.reference)?,
            flow,
            etas,
            alphas: r.list("alphas", &flags.alphas, def.alphas.clone())?,
            seeds: r.list("seeds", &flags.seeds, def.seeds.clone())?,
            mc_samples: r.get("mc_samples", &flags.mc_samples, def.mc_samples)?,
            c_complexity: r.get("c_complexity", &flags.c_complexity, def.c_complexity)?,
            resample: r.get("resample", &flags.resample, def.resample)?,
        };
        if cfg.etas.is_empty() {
            return Err(Error::Configuration("`etas` is empty".into()));
        }
        Ok(cfg)
    }

    /// The effective settings, in the config-file format.
    pub fn to_key_values(&self) -> String {
        let m = &self.mixture;
        let f = &self.flow;
        format_key_values([
            ("seed", self.master_seed.to_string()),
            ("out", self.out.display().to_string()),
            ("jobs", self.jobs.to_string()),
            ("d", m.d.to_string()),
            ("kappa", fmt17(m.kappa)),
            ("sigma", fmt17(m.sigma)),
            ("n", m.n.to_string()),
            ("balance", fmt17(m.balance)),
            ("lambda_min", fmt17(self.lambda_min)),
            ("max_tries", self.max_tries.to_string()),
            ("delta", fmt17(self.delta)),
            ("h", self.h.to_string()),
            ("alpha", fmt17(self.alpha)),
            ("reference", self.reference.to_string()),
            ("step", fmt17(f.step)),
            ("max_time", fmt17(f.max_time)),
            ("record_every", f.record_every.to_string()),
            ("etas", join_floats(&self.etas)),
            ("integrator", f.integrator.to_string()),
            ("time_scale", f.time_scale.to_string()),
            ("drop_ratio", fmt17(f.drop_ratio)),
            ("trap_window", f.trap_window.to_string()),
            ("alphas", join_floats(&self.alphas)),
            (
                "seeds",
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("mc_samples", self.mc_samples.to_string()),
            ("c_complexity", fmt17(self.c_complexity)),
            ("resample", self.resample.to_string()),
        ])
    }

    fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            alpha_grid: self.alphas.clone(),
            eta_list: self.etas.clone(),
            seeds: self.seeds.clone(),
            mixture: self.mixture.clone(),
            init: InitSpec {
                reference: self.reference,
                ..InitSpec::new(self.h, 1.0, 0)
            },
            flow: self.flow.clone(),
            mc_samples: self.mc_samples,
            delta: self.delta,
            master_seed: self.master_seed,
            resample_per_alpha: self.resample,
            lambda_min: self.lambda_min,
            max_tries: self.max_tries,
            c_complexity: self.c_complexity,
            jobs: self.jobs,
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SamplingFailure { .. } => EXIT_SAMPLING,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Parameter(_) | Error::Configuration(_) | Error::Parse(_) | Error::Shape { .. } | Error::Data(_) => {
            EXIT_CONFIG
        }
        Error::Io(_) | Error::Degenerate(_) | Error::Inapplicable(_) | Error::Ordering(_) => EXIT_VERIFY_FAILED,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let cfg = RunConfig::resolve(&cli.opts, std::env::var(SEED_ENV).ok())?;
    match cli.cmd {
        Command::Generate => cmd_generate(&cfg),
        Command::Train { data } => cmd_train(&cfg, data.as_deref()),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Bounds { stats } => cmd_bounds(&cfg, &stats),
        Command::Verify { suites } => cmd_verify(&cfg, &suites, cli.opts.alpha),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    write(&cfg.out, "config.txt", &cfg.to_key_values())?;
    Ok(&cfg.out)
}

fn cmd_generate(cfg: &RunConfig) -> Result<i32> {
    cfg.mixture.validate()?;
    let draw = mixture::rejection_sample_separable(&cfg.mixture, cfg.lambda_min, cfg.max_tries)?;
    let geo = mixture::geometry(&draw.data, &cfg.mixture, cfg.delta)?;
    let out = prepare_out(cfg)?;
    write(out, "dataset.csv", &io::dataset_to_csv(&draw.data))?;
    write(out, "dataset.spec", &io::mixture_to_key_values(&cfg.mixture))?;
    let rep = &draw.report;
    write(
        out,
        "separability.txt",
        &format_key_values([
            ("lambda_hat", fmt17(rep.lambda_hat)),
            ("argmin_i", rep.argmin.0.to_string()),
            ("argmin_j", rep.argmin.1.to_string()),
            ("requested", fmt17(rep.requested)),
            ("satisfied", rep.satisfied.to_string()),
            ("attempts", draw.attempts.to_string()),
        ]),
    )?;
    write(
        out,
        "geometry.txt",
        &format_key_values([
            ("phi", fmt17(geo.phi)),
            ("phi_lower", fmt17(geo.phi_lower)),
            ("phi_upper", fmt17(geo.phi_upper)),
            ("upper_valid", geo.upper_valid.to_string()),
            ("a_term", fmt17(geo.a_term)),
            ("b_term", fmt17(geo.b_term)),
            ("delta", fmt17(cfg.delta)),
        ]),
    )?;
    println!("lambda_hat={} attempts={} phi={}", fmt17(rep.lambda_hat), draw.attempts, fmt17(geo.phi));
    Ok(EXIT_OK)
}

fn stop_block(stops: &[flow::StopRecord]) -> String {
    let mut out = String::new();
    for (k, s) in stops.iter().enumerate() {
        out.push_str(&format_key_values([
            ("stop", k.to_string()),
            ("eta", fmt17(s.eta)),
            ("reached", s.reached.to_string()),
            ("t_eta", fmt17(s.t_eta)),
            ("t_alpha", fmt17(s.t_alpha)),
            ("t1_detected", fmt17(s.t1_detected)),
            ("t1_stabilized", s.t1_stabilized.to_string()),
            ("t2", fmt17(s.t2)),
            ("t2_reached", s.t2_reached.to_string()),
            ("risk_plus", fmt17(s.risk_plus)),
            ("risk_all", fmt17(s.risk_all)),
        ]));
    }
    out
}

fn cmd_train(cfg: &RunConfig, data_path: Option<&Path>) -> Result<i32> {
    let data = match data_path {
        Some(p) => io::dataset_from_csv(&fs::read_to_string(p)?)?,
        None => mixture::rejection_sample_separable(&cfg.mixture, cfg.lambda_min, cfg.max_tries)?.data,
    };
    let init = init_balanced(
        &InitSpec {
            h: cfg.h,
            alpha: cfg.alpha,
            reference: cfg.reference,
            seed: derive_seed(cfg.master_seed, &[0x1417]),
        },
        data.d(),
    )?;
    cfg.flow.validate()?;
    let out = prepare_out(cfg)?;
    let traj = match flow::integrate_multi(&init, &data, &cfg.flow, &cfg.etas) {
        Ok(t) => t,
        Err(Error::Divergence { time, partial }) => {
            write(out, "trajectory.csv", &partial.to_csv())?;
            return Err(Error::Divergence { time, partial });
        }
        Err(e) => return Err(e),
    };
    write(out, "trajectory.csv", &traj.to_csv())?;
    let t_end = traj.records.last().map_or(0.0, |r| r.t);
    let part = cones::partition(&traj.final_state, &data, t_end);
    write(out, "membership.csv", &cones::membership_csv(&traj.final_state, &part, &data))?;
    write(out, "stop.txt", &stop_block(&traj.stops))?;
    write(out, "checkpoint.txt", &traj.final_state.to_checkpoint())?;
    for s in &traj.stops {
        println!(
            "eta={} reached={} t_eta={} t_alpha={}",
            fmt17(s.eta),
            s.reached,
            fmt17(s.t_eta),
            fmt17(s.t_alpha)
        );
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let spec = cfg.sweep_spec();
    spec.validate()?;
    let start = Instant::now();
    let rows = sweep::run_sweep(&spec)?;
    let wall = start.elapsed().as_secs_f64();
    let out = prepare_out(cfg)?;
    write(out, "sweep.csv", &sweep::rows_to_csv(&rows))?;
    write(out, "bounds.csv", &sweep::bounds_csv(&rows))?;
    write(out, "plot.csv", &sweep::plot_long_csv(&rows))?;
    write(out, "timing.csv", &sweep::timing_csv(&rows))?;
    write(out, "meta.txt", &sweep::meta_block(&spec, wall))?;
    let mut report = String::new();
    for &eta in &spec.eta_list {
        if spec.alpha_grid.len() >= 5 {
            let u = sweep::u_shape_report(&rows, eta)?;
            report.push_str(&format_key_values([
                ("eta", fmt17(eta)),
                ("mean_excess", join_floats(&u.mean)),
                ("argmin_alpha", fmt17(u.argmin_alpha)),
                ("interior", u.interior.to_string()),
                ("margin_left", fmt17(u.margin_left)),
                ("margin_right", fmt17(u.margin_right)),
            ]));
        }
        let p = sweep::psi_stability_report(&rows, eta);
        report.push_str(&format_key_values([
            ("psi_eta", fmt17(eta)),
            ("psi_max_gap", join_floats(&p.max_gap)),
            ("psi_mean_stop", join_floats(&p.mean_psi_stop)),
            ("spearman", p.spearman.map_or("undefined".into(), fmt17)),
        ]));
    }
    write(out, "report.txt", &report)?;
    print!("{report}");
    Ok(EXIT_OK)
}

fn field(kv: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    kv.get(key)
        .ok_or_else(|| Error::Configuration(format!("stats file lacks `{key}`")))?
        .parse()
        .map_err(|_| Error::Configuration(format!("bad number for `{key}`")))
}

fn count(kv: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    kv.get(key)
        .ok_or_else(|| Error::Configuration(format!("stats file lacks `{key}`")))?
        .parse()
        .map_err(|_| Error::Configuration(format!("bad count for `{key}`")))
}

/// Reads bound inputs from a stats file. `kappa`, `sigma`, `d`, `delta` and
/// `c_complexity` fall back to the run configuration.
pub fn bound_inputs_from_stats(kv: &BTreeMap<String, String>, cfg: &RunConfig) -> Result<BoundInputs> {
    let or = |k: &str, dflt: f64| if kv.contains_key(k) { field(kv, k) } else { Ok(dflt) };
    Ok(BoundInputs {
        alpha: field(kv, "alpha")?,
        n_plus: count(kv, "n_plus")?,
        h: count(kv, "h")?,
        x_max: field(kv, "x_max")?,
        x_min: field(kv, "x_min")?,
        w_ref_max: field(kv, "w_ref_max")?,
        lambda: field(kv, "lambda")?,
        x_plus_norm: field(kv, "x_plus_norm")?,
        t1: field(kv, "t1")?,
        t_alpha: field(kv, "t_alpha")?,
        t2: field(kv, "t2")?,
        risk_at_t_alpha: field(kv, "risk_at_t_alpha")?,
        risk_at_t2: field(kv, "risk_at_t2")?,
        eta: field(kv, "eta")?,
        sigma: or("sigma", cfg.mixture.sigma)?,
        kappa: or("kappa", cfg.mixture.kappa)?,
        d: if kv.contains_key("d") { count(kv, "d")? } else { cfg.mixture.d },
        phi: field(kv, "phi")?,
        psi_at_stop: field(kv, "psi_at_stop")?,
        delta: or("delta", cfg.delta)?,
        c_complexity: or("c_complexity", cfg.c_complexity)?,
    })
}

fn cmd_bounds(cfg: &RunConfig, stats: &Path) -> Result<i32> {
    let kv = parse_key_values(&fs::read_to_string(stats)?)?;
    let inp = bound_inputs_from_stats(&kv, cfg)?;
    let psi_ta = if kv.contains_key("psi_at_t_alpha") {
        field(&kv, "psi_at_t_alpha")?
    } else {
        inp.psi_at_stop
    };
    // x₊ and s₊ only enter through their angle, so a planar pair suffices
    let xp = [1.0, 0.0];
    let sp = [inp.phi.cos(), inp.phi.sin()];
    let p1 = bounds::phase1_lower(&inp);
    let angle = bounds::phase1_angle_upper(&inp);
    let mut pairs = vec![
        ("zeta", fmt17(bounds::zeta(&inp))),
        ("phase1_lb", fmt17(p1.value)),
        ("phase1_vacuous", p1.vacuous.to_string()),
        ("phase1_angle_upper", fmt17(angle.value)),
        ("phase1_angle_vacuous", angle.vacuous.to_string()),
        ("phase1_angle_precondition", angle.precondition.to_string()),
    ];
    match bounds::phase2_lower(&inp, psi_ta) {
        Ok(p2) => pairs.extend([
            ("phase2_lb", fmt17(p2.value)),
            ("beta", fmt17(p2.beta)),
            ("m", fmt17(p2.m)),
            ("g_flow", fmt17(p2.g_flow)),
        ]),
        Err(e) => pairs.push(("phase2_status", e.to_string().replace('\n', " "))),
    }
    let bayes = bounds::bayes_error(inp.kappa, inp.sigma);
    pairs.extend([
        ("bayes", fmt17(bayes)),
        ("g_geom", fmt17(bounds::g_geom(inp.psi_at_stop, inp.phi, inp.sigma, inp.d))),
        ("g_geom_critical", fmt17(bounds::g_geom_critical(inp.phi, inp.sigma, inp.d))),
        ("of_bound", fmt17(bounds::of_bound(&inp)?)),
        ("oa_measured_psi", fmt17(bounds::oa_term(inp.psi_at_stop, inp.kappa, inp.sigma, &xp, &sp)?)),
    ]);
    if !p1.vacuous {
        pairs.push((
            "oa_lower_bound_psi",
            fmt17(bounds::oa_term(p1.value.clamp(-1.0, 1.0), inp.kappa, inp.sigma, &xp, &sp)?),
        ));
    }
    let text = format_key_values(pairs);
    if let Some(dir) = &cli_out_if_set(cfg) {
        fs::create_dir_all(dir)?;
        write(dir, "bounds.txt", &text)?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

/// `bounds` prints to stdout and only writes a file when an output
/// directory other than the default was requested.
fn cli_out_if_set(cfg: &RunConfig) -> Option<PathBuf> {
    (cfg.out != RunConfig::default().out).then(|| cfg.out.clone())
}

fn cmd_verify(cfg: &RunConfig, suites: &[Suite], alpha: Option<f64>) -> Result<i32> {
    let selected: Vec<Suite> = if suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        let mut s = suites.to_vec();
        s.sort();
        s.dedup();
        s
    };
    let opts = VerifyOptions {
        master_seed: cfg.master_seed,
        alpha,
        jobs: cfg.jobs,
    };
    let mut outcomes = Vec::new();
    for s in selected {
        let o = verify::run_suite(s, &opts);
        println!(
            "{} {} ({:.1}s){}",
            if o.passed() { "PASS" } else { "FAIL" },
            o.suite,
            o.seconds,
            o.error.as_ref().map_or(String::new(), |e| format!(": {e}"))
        );
        outcomes.push(o);
    }
    let out = prepare_out(cfg)?;
    write(out, "verify.csv", &verify::summary_csv(&outcomes))?;
    Ok(if outcomes.iter().all(|o| o.passed()) {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
