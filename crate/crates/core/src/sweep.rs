//! α × η × seed experiment grids. Each grid point runs one trajectory that
//! serves every stopping level, then feeds its stop records to the bounds
//! and the error decomposition.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bounds::{self, BoundInputs, BoundRow};
use crate::cones;
use crate::error::{Error, Result};
use crate::flow::{self, FlowSpec, Trajectory};
use crate::io::{format_key_values, join_floats, mixture_to_key_values};
use crate::mixture::{self, Dataset, MixtureSpec};
use crate::network::{init_balanced, InitSpec, NetworkState};
use crate::numeric::{cosine, derive_seed, fmt17, rng, spearman};

const KEY_DATA: u64 = 0xDA7A;
const KEY_INIT: u64 = 0x1417;
const KEY_MC: u64 = 0x3C3C;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub alpha_grid: Vec<f64>,
    pub eta_list: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Its own `seed` is ignored; datasets are seeded from `master_seed`.
    pub mixture: MixtureSpec,
    /// Template; `alpha` and `seed` are filled in per grid point.
    pub init: InitSpec,
    pub flow: FlowSpec,
    /// Monte-Carlo draws per row for the error oracle; 0 disables it.
    pub mc_samples: usize,
    pub delta: f64,
    pub master_seed: u64,
    /// Draw a fresh dataset for every α instead of one per seed.
    pub resample_per_alpha: bool,
    /// Rejection-sample datasets to `λ̂ ≥ lambda_min`; `≤ 0` disables.
    pub lambda_min: f64,
    pub max_tries: usize,
    pub c_complexity: f64,
    /// Worker threads; 0 means all available.
    pub jobs: usize,
}

impl SweepSpec {
    /// 50 samples in 128 dimensions at κ = 1.5, σ = 1, width 64, η = 0.05.
    pub fn template() -> Self {
        Self {
            alpha_grid: crate::numeric::logspace(1e-5, 1e-1, 9),
            eta_list: vec![0.05],
            seeds: vec![1, 2, 3],
            mixture: MixtureSpec::new(128, 1.5, 1.0, 50, 0),
            init: InitSpec::new(64, 1.0, 0),
            flow: FlowSpec::default(),
            mc_samples: 100_000,
            delta: 0.1,
            master_seed: 0,
            resample_per_alpha: false,
            lambda_min: 0.0,
            max_tries: 1000,
            c_complexity: 1.0,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::Configuration("alpha grid is empty".into()));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Configuration("alpha grid must be positive".into()));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Configuration("alpha grid must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Configuration("at least one seed is required".into()));
        }
        if self.eta_list.is_empty() {
            return Err(Error::Configuration("at least one eta is required".into()));
        }
        if self.mc_samples != 0 && self.mc_samples < 10_000 {
            return Err(Error::Configuration(format!(
                "mc_samples must be 0 or >= 10000, got {}",
                self.mc_samples
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Configuration(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.c_complexity > 0.0) {
            return Err(Error::Configuration("c_complexity must be > 0".into()));
        }
        self.mixture.validate()?;
        self.flow.validate()?;
        InitSpec {
            alpha: self.alpha_grid[0],
            ..self.init
        }
        .validate()?;
        Ok(())
    }

    fn data_seed(&self, seed: u64, alpha: f64) -> u64 {
        if self.resample_per_alpha {
            derive_seed(self.master_seed, &[KEY_DATA, seed, alpha.to_bits()])
        } else {
            derive_seed(self.master_seed, &[KEY_DATA, seed])
        }
    }

    /// The reference matrix depends on the seed only, so every α scales the
    /// same draw.
    pub fn init_seed(&self, seed: u64) -> u64 {
        derive_seed(self.master_seed, &[KEY_INIT, seed])
    }

    pub fn dataset(&self, seed: u64, alpha: f64) -> Result<Dataset> {
        let spec = self.mixture.with_seed(self.data_seed(seed, alpha));
        if self.lambda_min > 0.0 {
            Ok(mixture::rejection_sample_separable(&spec, self.lambda_min, self.max_tries)?.data)
        } else {
            mixture::sample_dataset(&spec)
        }
    }

    pub fn to_key_values(&self) -> String {
        let mut out = format_key_values([
            ("alpha_grid", join_floats(&self.alpha_grid)),
            ("eta_list", join_floats(&self.eta_list)),
            (
                "seeds",
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("h", self.init.h.to_string()),
            ("reference", self.init.reference.to_string()),
            ("step", fmt17(self.flow.step)),
            ("max_time", fmt17(self.flow.max_time)),
            ("record_every", self.flow.record_every.to_string()),
            ("integrator", self.flow.integrator.to_string()),
            ("time_scale", self.flow.time_scale.to_string()),
            ("drop_ratio", fmt17(self.flow.drop_ratio)),
            ("trap_window", self.flow.trap_window.to_string()),
            ("mc_samples", self.mc_samples.to_string()),
            ("delta", fmt17(self.delta)),
            ("master_seed", self.master_seed.to_string()),
            ("resample_per_alpha", self.resample_per_alpha.to_string()),
            ("lambda_min", fmt17(self.lambda_min)),
            ("max_tries", self.max_tries.to_string()),
            ("c_complexity", fmt17(self.c_complexity)),
        ]);
        for line in mixture_to_key_values(&self.mixture).lines() {
            if !line.starts_with("seed=") {
                out.push_str("mixture.");
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// The flow blew up; every measured field is NaN.
    Diverged,
    /// No neuron feeds the positive class at the stop.
    Degenerate,
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ok => "ok",
            Self::Diverged => "diverged",
            Self::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub seed: u64,
    pub eta: f64,
    pub status: RowStatus,
    pub reached: bool,
    pub t1_detected: f64,
    pub t1_stabilized: bool,
    pub t_alpha: f64,
    pub t2: f64,
    pub t_eta: f64,
    pub psi_at_t_alpha: f64,
    pub psi_at_stop: f64,
    pub predictor_norm_at_stop: f64,
    pub norm_ok: bool,
    pub margins_ok: bool,
    pub lambda_hat: f64,
    pub phi: f64,
    pub zeta: f64,
    pub phase1_lb: f64,
    /// NaN when inapplicable (`λ̂ ≤ 0`) or out of order.
    pub phase2_lb: f64,
    pub oa: f64,
    pub of_exact: f64,
    pub of_bound: f64,
    pub excess: f64,
    pub g_geom: f64,
    pub g_flow: f64,
    pub bayes: f64,
    pub mc_error: f64,
    pub mc_stderr: f64,
    /// Wall time of the grid point in seconds. Kept out of the main CSV so
    /// that reruns stay byte-identical.
    pub runtime: f64,
}

pub const ROW_CSV_HEADER: &str = "alpha,seed,eta,status,reached,t1_detected,t1_stabilized,t_alpha,t2,t_eta,\
psi_at_t_alpha,psi_at_stop,predictor_norm_at_stop,norm_ok,margins_ok,lambda_hat,phi,zeta,phase1_lb,phase2_lb,\
OA,OF_exact,OF_bound,excess,g_geom,g_flow,bayes,mc_error,mc_stderr";

impl SweepRow {
    fn empty(alpha: f64, seed: u64, eta: f64, status: RowStatus) -> Self {
        let nan = f64::NAN;
        Self {
            alpha,
            seed,
            eta,
            status,
            reached: false,
            t1_detected: nan,
            t1_stabilized: false,
            t_alpha: nan,
            t2: nan,
            t_eta: nan,
            psi_at_t_alpha: nan,
            psi_at_stop: nan,
            predictor_norm_at_stop: nan,
            norm_ok: false,
            margins_ok: false,
            lambda_hat: nan,
            phi: nan,
            zeta: nan,
            phase1_lb: nan,
            phase2_lb: nan,
            oa: nan,
            of_exact: nan,
            of_bound: nan,
            excess: nan,
            g_geom: nan,
            g_flow: nan,
            bayes: nan,
            mc_error: nan,
            mc_stderr: nan,
            runtime: 0.0,
        }
    }

    pub fn csv_line(&self) -> String {
        let f = |x: f64| fmt17(x);
        [
            f(self.alpha),
            self.seed.to_string(),
            f(self.eta),
            self.status.to_string(),
            self.reached.to_string(),
            f(self.t1_detected),
            self.t1_stabilized.to_string(),
            f(self.t_alpha),
            f(self.t2),
            f(self.t_eta),
            f(self.psi_at_t_alpha),
            f(self.psi_at_stop),
            f(self.predictor_norm_at_stop),
            self.norm_ok.to_string(),
            self.margins_ok.to_string(),
            f(self.lambda_hat),
            f(self.phi),
            f(self.zeta),
            f(self.phase1_lb),
            f(self.phase2_lb),
            f(self.oa),
            f(self.of_exact),
            f(self.of_bound),
            f(self.excess),
            f(self.g_geom),
            f(self.g_flow),
            f(self.bayes),
            f(self.mc_error),
            f(self.mc_stderr),
        ]
        .join(",")
    }

    pub fn bound_row(&self) -> BoundRow {
        BoundRow {
            alpha: self.alpha,
            eta: self.eta,
            psi_stop: self.psi_at_stop,
            phi: self.phi,
            zeta: self.zeta,
            phase1_lb: self.phase1_lb,
            phase2_lb: self.phase2_lb,
            oa: self.oa,
            of_exact: self.of_exact,
            of_bound: self.of_bound,
            excess: self.excess,
            g_geom: self.g_geom,
            g_flow: self.g_flow,
            bayes: self.bayes,
        }
    }
}

/// Misclassification rate of `x ↦ sign⟨w, x⟩` on fresh mixture draws, with
/// its binomial standard error. Ties count as errors.
pub fn mc_error(w: &[f64], mixture: &MixtureSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    Ok(mc_error_batch(&[w.to_vec()], mixture, samples, seed)?[0])
}

const MC_CHUNK: usize = 8192;

/// [`mc_error`] for several predictors on one shared sample. Chunks carry
/// their own derived seeds, so the result does not depend on the thread
/// count.
pub fn mc_error_batch(
    ws: &[Vec<f64>],
    mixture: &MixtureSpec,
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    mixture.validate()?;
    if samples < 10_000 {
        return Err(Error::Parameter(format!("need at least 10000 samples, got {samples}")));
    }
    if let Some(w) = ws.iter().find(|w| w.len() != mixture.d) {
        return Err(Error::Shape {
            expected: mixture.d,
            got: w.len(),
        });
    }
    let d = mixture.d;
    let chunks = samples.div_ceil(MC_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut r = rng(derive_seed(seed, &[KEY_MC, c as u64]));
            let mut x = vec![0.0; d];
            let mut errs = vec![0u64; ws.len()];
            for _ in 0..len {
                let y = if r.random::<f64>() < mixture.balance { 1.0 } else { -1.0 };
                for (k, xk) in x.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut r);
                    *xk = mixture.kappa * y * mixture.s_plus[k] + mixture.sigma * z;
                }
                for (e, w) in errs.iter_mut().zip(ws) {
                    let s: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
                    if !(y * s > 0.0) {
                        *e += 1;
                    }
                }
            }
            errs
        })
        .reduce(
            || vec![0u64; ws.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = samples as f64;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            (p, (p * (1.0 - p) / n).sqrt())
        })
        .collect())
}

fn record_risk_at(traj: &Trajectory, t: f64) -> f64 {
    traj.records
        .iter()
        .find(|r| r.t >= t)
        .or(traj.records.last())
        .map_or(f64::NAN, |r| r.risk_plus)
}

fn point_rows(spec: &SweepSpec, alpha: f64, seed: u64, data: &Dataset) -> Result<Vec<SweepRow>> {
    let init = init_balanced(
        &InitSpec {
            alpha,
            seed: spec.init_seed(seed),
            ..spec.init
        },
        data.d(),
    )?;
    let sep = mixture::measure_separability(data, spec.lambda_min)?;
    let geo = mixture::geometry(data, &spec.mixture, spec.delta)?;
    let traj = match flow::integrate_multi(&init, data, &spec.flow, &spec.eta_list) {
        Ok(t) => t,
        Err(Error::Divergence { .. }) => {
            return Ok(spec
                .eta_list
                .iter()
                .map(|&eta| SweepRow::empty(alpha, seed, eta, RowStatus::Diverged))
                .collect())
        }
        Err(e) => return Err(e),
    };
    let psi_ta = traj.record_at_t_alpha().map_or(f64::NAN, |r| r.psi);
    let xp = data.x_plus().to_vec();
    let s_plus = &spec.mixture.s_plus;
    let mut rows = Vec::with_capacity(traj.stops.len());
    for (k, stop) in traj.stops.iter().enumerate() {
        let mut row = SweepRow::empty(alpha, seed, stop.eta, RowStatus::Ok);
        row.reached = stop.reached;
        row.t1_detected = stop.t1_detected;
        row.t1_stabilized = stop.t1_stabilized;
        row.t_alpha = stop.t_alpha;
        row.t2 = stop.t2;
        row.t_eta = stop.t_eta;
        row.psi_at_t_alpha = psi_ta;
        row.lambda_hat = sep.lambda_hat;
        row.phi = geo.phi;
        row.bayes = bounds::bayes_error(spec.mixture.kappa, spec.mixture.sigma);

        let w_hat = match cones::live_predictor(&stop.state, data) {
            Ok(w) => w.to_vec(),
            Err(_) => {
                row.status = RowStatus::Degenerate;
                rows.push(row);
                continue;
            }
        };
        let psi = cosine(&w_hat, &xp);
        row.psi_at_stop = psi;
        row.predictor_norm_at_stop = crate::numeric::norm(&w_hat);
        let inp = bound_inputs(&init, data, &traj, stop, sep.lambda_hat, geo.phi, psi, spec);
        row.zeta = bounds::zeta(&inp);
        row.phase1_lb = bounds::phase1_lower(&inp).value;
        if let Ok(p2) = bounds::phase2_lower(&inp, psi_ta) {
            row.phase2_lb = p2.value;
            row.g_flow = p2.g_flow;
        }
        let dec = bounds::decompose(&w_hat, psi, &inp, data, s_plus)?;
        row.oa = dec.oa_exact;
        row.of_exact = dec.of_exact;
        row.of_bound = dec.of_bound_term;
        row.excess = dec.excess_exact;
        row.g_geom = dec.g_geom;
        row.norm_ok = dec.norm_ok;
        row.margins_ok = dec.margins_ok;
        if spec.mc_samples > 0 {
            let mc_seed = derive_seed(spec.master_seed, &[KEY_MC, seed, alpha.to_bits(), k as u64]);
            (row.mc_error, row.mc_stderr) = mc_error(&w_hat, &spec.mixture, spec.mc_samples, mc_seed)?;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn bound_inputs(
    init: &NetworkState,
    data: &Dataset,
    traj: &Trajectory,
    stop: &flow::StopRecord,
    lambda: f64,
    phi: f64,
    psi: f64,
    spec: &SweepSpec,
) -> BoundInputs {
    let xp = data.x_plus();
    BoundInputs {
        alpha: init.alpha,
        n_plus: data.n_plus(),
        h: init.h(),
        x_max: data.x_max(),
        x_min: data.x_min(),
        w_ref_max: init.w_ref_max,
        lambda,
        x_plus_norm: xp.dot(xp).sqrt(),
        t1: stop.t1_detected,
        t_alpha: stop.t_alpha,
        t2: stop.t2,
        risk_at_t_alpha: record_risk_at(traj, stop.t_alpha),
        risk_at_t2: record_risk_at(traj, stop.t2),
        eta: stop.eta,
        sigma: spec.mixture.sigma,
        kappa: spec.mixture.kappa,
        d: data.d(),
        phi,
        psi_at_stop: psi,
        delta: spec.delta,
        c_complexity: spec.c_complexity,
    }
}

/// Runs every (α, seed) point, in parallel over `spec.jobs` threads. Rows are
/// sorted by (α, η, seed); a diverged point yields rows with `reached =
/// false` rather than an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let shared: Vec<Option<Dataset>> = if spec.resample_per_alpha {
        vec![None; spec.seeds.len()]
    } else {
        spec.seeds
            .iter()
            .map(|&s| spec.dataset(s, 0.0).map(Some))
            .collect::<Result<_>>()?
    };
    let points: Vec<(usize, f64)> = (0..spec.seeds.len())
        .flat_map(|si| spec.alpha_grid.iter().map(move |&a| (si, a)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    let chunks: Vec<Vec<SweepRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(si, alpha)| {
                let start = Instant::now();
                let seed = spec.seeds[si];
                let owned;
                let data = match &shared[si] {
                    Some(d) => d,
                    None => {
                        owned = spec.dataset(seed, alpha)?;
                        &owned
                    }
                };
                let mut rows = point_rows(spec, alpha, seed, data)?;
                let secs = start.elapsed().as_secs_f64();
                rows.iter_mut().for_each(|r| r.runtime = secs);
                Ok(rows)
            })
            .collect::<Result<_>>()
    })?;
    let mut rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.eta.total_cmp(&b.eta))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{ROW_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn bounds_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{}\n", bounds::BOUND_CSV_HEADER);
    for r in rows {
        out.push_str(&r.bound_row().csv_line());
        out.push('\n');
    }
    out
}

pub fn timing_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,eta,seed,runtime_s\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6}\n", fmt17(r.alpha), fmt17(r.eta), r.seed, r.runtime));
    }
    out
}

fn etas_of(rows: &[SweepRow]) -> Vec<f64> {
    let mut etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    etas
}

fn alphas_of<'a>(rows: impl Iterator<Item = &'a SweepRow>) -> Vec<f64> {
    let mut a: Vec<f64> = rows.map(|r| r.alpha).collect();
    a.sort_by(f64::total_cmp);
    a.dedup();
    a
}

fn seed_mean(rows: &[&SweepRow], alpha: f64, get: impl Fn(&SweepRow) -> f64) -> f64 {
    let vals: Vec<f64> = rows.iter().filter(|r| r.alpha == alpha).map(|r| get(r)).collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Long-format plot data `alpha,series,value` of seed-averaged curves. With
/// several stopping levels the series name carries `@eta`.
pub fn plot_long_csv(rows: &[SweepRow]) -> String {
    let etas = etas_of(rows);
    let series: [(&str, fn(&SweepRow) -> f64); 5] = [
        ("OA", |r| r.oa),
        ("OF", |r| r.of_exact),
        ("excess", |r| r.excess),
        ("psi", |r| r.psi_at_stop),
        ("g_geom", |r| r.g_geom),
    ];
    let mut out = String::from("alpha,series,value\n");
    for &eta in &etas {
        let sub: Vec<&SweepRow> = rows.iter().filter(|r| r.eta == eta).collect();
        for alpha in alphas_of(sub.iter().copied()) {
            for (name, get) in series {
                let label = if etas.len() > 1 {
                    format!("{name}@{}", fmt17(eta))
                } else {
                    name.to_string()
                };
                out.push_str(&format!("{},{label},{}\n", fmt17(alpha), fmt17(seed_mean(&sub, alpha, get))));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct UShapeReport {
    pub eta: f64,
    pub alphas: Vec<f64>,
    /// `(seed, excess per α)`.
    pub per_seed: Vec<(u64, Vec<f64>)>,
    pub mean: Vec<f64>,
    pub argmin_index: usize,
    pub argmin_alpha: f64,
    /// The argmin is neither endpoint.
    pub interior: bool,
    /// `excess(α_first) − min`.
    pub margin_left: f64,
    /// `excess(α_last) − min`.
    pub margin_right: f64,
}

/// Locates the minimum of the seed-averaged excess-vs-α curve at `eta`.
pub fn u_shape_report(rows: &[SweepRow], eta: f64) -> Result<UShapeReport> {
    let sub: Vec<&SweepRow> = rows.iter().filter(|r| r.eta == eta).collect();
    let alphas = alphas_of(sub.iter().copied());
    if alphas.len() < 5 {
        return Err(Error::Configuration(format!(
            "U-shape analysis needs >= 5 alpha points at eta = {eta}, got {}",
            alphas.len()
        )));
    }
    let mut seeds: Vec<u64> = sub.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let per_seed = seeds
        .iter()
        .map(|&s| {
            let series = alphas
                .iter()
                .map(|&a| {
                    sub.iter()
                        .find(|r| r.seed == s && r.alpha == a)
                        .map_or(f64::NAN, |r| r.excess)
                })
                .collect();
            (s, series)
        })
        .collect();
    let mean: Vec<f64> = alphas.iter().map(|&a| seed_mean(&sub, a, |r| r.excess)).collect();
    let (argmin_index, &min) = mean
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Degenerate("no finite excess values".into()))?;
    let last = mean.len() - 1;
    Ok(UShapeReport {
        eta,
        argmin_alpha: alphas[argmin_index],
        interior: argmin_index != 0 && argmin_index != last,
        margin_left: mean[0] - min,
        margin_right: mean[last] - min,
        alphas,
        per_seed,
        mean,
        argmin_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiStability {
    pub eta: f64,
    pub alphas: Vec<f64>,
    /// Largest `|Ψ(t_η) − Ψ(t_α)|` over seeds, per α.
    pub max_gap: Vec<f64>,
    /// Seed-averaged `Ψ(t_η)` per α.
    pub mean_psi_stop: Vec<f64>,
    /// Rank correlation of `mean_psi_stop` with α; `None` on all ties.
    pub spearman: Option<f64>,
}

/// Gaps between the alignment at `t_α` and at the stop, and the rank trend
/// of the stopped alignment in α.
pub fn psi_stability_report(rows: &[SweepRow], eta: f64) -> PsiStability {
    let sub: Vec<&SweepRow> = rows.iter().filter(|r| r.eta == eta).collect();
    let alphas = alphas_of(sub.iter().copied());
    let max_gap = alphas
        .iter()
        .map(|&a| {
            sub.iter()
                .filter(|r| r.alpha == a)
                .map(|r| (r.psi_at_stop - r.psi_at_t_alpha).abs())
                .fold(0.0, |m: f64, g| if g.is_nan() { f64::NAN } else { m.max(g) })
        })
        .collect();
    let mean_psi_stop: Vec<f64> = alphas.iter().map(|&a| seed_mean(&sub, a, |r| r.psi_at_stop)).collect();
    let spearman = spearman(&mean_psi_stop, &alphas);
    PsiStability {
        eta,
        alphas,
        max_gap,
        mean_psi_stop,
        spearman,
    }
}

/// `meta` block: configuration echo, software version and wall time.
pub fn meta_block(spec: &SweepSpec, wall_seconds: f64) -> String {
    let mut out = format!("version={}\n", env!("CARGO_PKG_VERSION"));
    out.push_str(&spec.to_key_values());
    out.push_str(&format!("wall_time_s={wall_seconds:.3}\n"));
    out
}
