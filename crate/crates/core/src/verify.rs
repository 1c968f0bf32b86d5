//! Self-checks run by `flslab verify`: each suite measures one property on
//! seeded problems and reports named checks with their values and limits.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{self, BoundInputs};
use crate::cones;
use crate::error::{Error, Result};
use crate::flow::{self, FlowSpec};
use crate::mixture::{self, Dataset, MixtureSpec};
use crate::network::{gradient, init_balanced, training_risk, ClassFilter, InitSpec, NetworkState};
use crate::numeric::{derive_seed, dot, fmt17, norm, rng};
use crate::sweep::{self, RowStatus, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Equivalence,
    MonteCarlo,
    Decomposition,
    UShape,
    Phase1,
    PsiStability,
    Gradient,
    Conservation,
    Concentration,
    Shapes,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Equivalence,
        Suite::MonteCarlo,
        Suite::Decomposition,
        Suite::UShape,
        Suite::Phase1,
        Suite::PsiStability,
        Suite::Gradient,
        Suite::Conservation,
        Suite::Concentration,
        Suite::Shapes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::MonteCarlo => "monte-carlo",
            Suite::Decomposition => "decomposition",
            Suite::UShape => "u-shape",
            Suite::Phase1 => "phase1",
            Suite::PsiStability => "psi-stability",
            Suite::Gradient => "gradient",
            Suite::Conservation => "conservation",
            Suite::Concentration => "concentration",
            Suite::Shapes => "shapes",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite `{s}`")))
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        passed: value <= threshold,
        value,
        threshold,
    }
}

fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        passed: value >= threshold,
        value,
        threshold,
    }
}

fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> [Check; 2] {
    let name = name.into();
    [
        at_least(format!("{name}>=lo"), value, lo),
        at_most(format!("{name}<=hi"), value, hi),
    ]
}

fn holds(name: impl Into<String>, ok: bool) -> Check {
    Check {
        name: name.into(),
        passed: ok,
        value: if ok { 1.0 } else { 0.0 },
        threshold: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub seconds: f64,
    /// Set when the suite could not run to completion.
    pub error: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyOptions {
    pub master_seed: u64,
    /// Restricts the equivalence suite to this scale.
    pub alpha: Option<f64>,
    /// Worker threads for the sweep-based suites; 0 means all available.
    pub jobs: usize,
}

pub fn run(suites: &[Suite], opts: &VerifyOptions) -> Vec<SuiteOutcome> {
    suites.iter().map(|&s| run_suite(s, opts)).collect()
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> SuiteOutcome {
    let start = Instant::now();
    let result = match suite {
        Suite::Equivalence => equivalence(opts),
        Suite::MonteCarlo => monte_carlo(opts),
        Suite::Decomposition => decomposition(opts),
        Suite::UShape => u_shape(opts),
        Suite::Phase1 => phase1(opts),
        Suite::PsiStability => psi_stability(opts),
        Suite::Gradient => gradient_suite(opts),
        Suite::Conservation => conservation(opts),
        Suite::Concentration => concentration(opts),
        Suite::Shapes => shapes(opts),
    };
    let (checks, error) = match result {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    SuiteOutcome {
        suite,
        checks,
        seconds: start.elapsed().as_secs_f64(),
        error,
    }
}

pub const SUMMARY_CSV_HEADER: &str = "suite,check,passed,value,threshold";

pub fn summary_csv(outcomes: &[SuiteOutcome]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for o in outcomes {
        if let Some(e) = &o.error {
            out.push_str(&format!("{},error: {},false,NaN,NaN\n", o.suite, e.replace(',', ";")));
        }
        for c in &o.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                o.suite,
                c.name,
                c.passed,
                fmt17(c.value),
                fmt17(c.threshold)
            ));
        }
    }
    out
}

fn template_data(opts: &VerifyOptions, key: u64) -> Result<Dataset> {
    let seed = derive_seed(opts.master_seed, &[0x7E, key]);
    mixture::sample_dataset(&MixtureSpec::new(128, 1.5, 1.0, 50, seed))
}

fn equivalence(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let data = template_data(opts, 1)?;
    let state = init_balanced(&InitSpec::new(64, 1.0, derive_seed(opts.master_seed, &[0xE0])), 128)?;
    let alphas = opts.alpha.map_or_else(|| vec![0.25, 1.0, 4.0], |a| vec![a]);
    alphas
        .into_iter()
        .map(|a| {
            let dev = flow::equivalence_twin(&state, &data, a, 0.01, 1000)?;
            Ok(at_most(format!("max_output_gap@alpha={a}"), dev, 1e-9))
        })
        .collect()
}

/// Unit vector at angle `θ` from `e₀`, rotated towards a random direction.
fn unit_at_angle(theta: f64, d: usize, r: &mut crate::numeric::Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(r)).collect();
    u[0] = 0.0;
    let nu = norm(&u);
    let mut w: Vec<f64> = u.iter().map(|x| theta.sin() * x / nu).collect();
    w[0] = theta.cos();
    w
}

fn monte_carlo(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let m = MixtureSpec::new(128, 1.5, 1.0, 2, 0);
    let mut r = rng(derive_seed(opts.master_seed, &[0x3C]));
    let ws: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            let theta = r.random::<f64>() * std::f64::consts::PI;
            unit_at_angle(theta, 128, &mut r)
        })
        .collect();
    let est = sweep::mc_error_batch(&ws, &m, 1_000_000, derive_seed(opts.master_seed, &[0x3D]))?;
    let mut worst = 0.0f64;
    let mut inside = 0;
    for (w, (p, se)) in ws.iter().zip(&est) {
        let closed = bounds::zero_one_error(w, m.kappa, m.sigma, &m.s_plus)?;
        let z = (p - closed).abs() / se.max(f64::MIN_POSITIVE);
        worst = worst.max(z);
        if (p - closed).abs() <= 3.0 * se {
            inside += 1;
        }
    }
    Ok(vec![
        at_least("predictors_within_3_stderr", inside as f64, 19.0),
        // informational bound on the worst standardized gap
        at_most("worst_standardized_gap", worst, 5.0),
    ])
}

fn identity_gap(rows: &[sweep::SweepRow]) -> f64 {
    rows.iter()
        .map(|r| (r.oa + r.of_exact - r.excess).abs())
        .fold(0.0, |m: f64, g| if g.is_nan() { f64::INFINITY } else { m.max(g) })
}

fn decomposition(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let spec = SweepSpec {
        alpha_grid: vec![1e-4, 1e-2, 1e-1],
        eta_list: vec![0.3, 0.05],
        seeds: vec![1],
        mc_samples: 100_000,
        master_seed: opts.master_seed,
        jobs: opts.jobs,
        ..SweepSpec::template()
    };
    let rows = sweep::run_sweep(&spec)?;
    let ok = rows.iter().filter(|r| r.status == RowStatus::Ok).count();
    let oracle = rows
        .iter()
        .filter(|r| (r.mc_error - (r.excess + r.bayes)).abs() <= 4.0 * r.mc_stderr)
        .count();
    Ok(vec![
        at_least("rows_ok", ok as f64, rows.len() as f64),
        at_most("max_identity_gap", identity_gap(&rows), 1e-12),
        at_least("rows_mc_within_4_stderr", oracle as f64, rows.len() as f64),
        at_least("min_OA", rows.iter().map(|r| r.oa).fold(f64::INFINITY, f64::min), 0.0),
    ])
}

fn u_shape(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let spec = SweepSpec {
        mc_samples: 0,
        master_seed: opts.master_seed,
        jobs: opts.jobs,
        ..SweepSpec::template()
    };
    let rows = sweep::run_sweep(&spec)?;
    let rep = sweep::u_shape_report(&rows, 0.05)?;
    let decades = (spec.alpha_grid[spec.alpha_grid.len() - 1] / spec.alpha_grid[0]).log10();
    Ok(vec![
        at_least("grid_points", rep.alphas.len() as f64, 7.0),
        at_least("grid_decades", decades + 1e-9, 4.0),
        at_least("seeds", spec.seeds.len() as f64, 3.0),
        at_least("rows_reached", rows.iter().filter(|r| r.reached).count() as f64, rows.len() as f64),
        holds("interior_argmin", rep.interior),
        at_least("margin_left", rep.margin_left, 0.005),
        at_least("margin_right", rep.margin_right, 0.005),
        at_most("max_identity_gap", identity_gap(&rows), 1e-12),
    ])
}

/// Rejection-sampled, orthogonally separable problem used by the phase-1 and
/// conservation suites.
fn separable_problem(opts: &VerifyOptions, k: u64) -> Result<(Dataset, f64)> {
    let seed = derive_seed(opts.master_seed, &[0x5E, k]);
    let draw = mixture::rejection_sample_separable(&MixtureSpec::new(16, 2.0, 0.4, 20, seed), 0.05, 5000)?;
    Ok((draw.data, draw.report.lambda_hat))
}

fn separable_init(opts: &VerifyOptions, k: u64, alpha: f64) -> Result<NetworkState> {
    init_balanced(&InitSpec::new(64, alpha, derive_seed(opts.master_seed, &[0x5F, k])), 16)
}

const PHASE1_ALPHA: f64 = 1e-6;

fn phase1(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for k in 1..=3u64 {
        let (data, lambda) = separable_problem(opts, k)?;
        let state = separable_init(opts, k, PHASE1_ALPHA)?;
        let amax = flow::admissible_alpha_max(state.h(), data.x_max(), state.w_ref_max);
        let ta = flow::t_alpha(PHASE1_ALPHA, data.n_plus(), data.x_max(), state.h());
        let spec = FlowSpec {
            step: 1e-5,
            record_every: 1,
            max_time: ta.value,
            ..FlowSpec::default()
        };
        let traj = flow::integrate(&state, &data, &spec)?;
        let trap = cones::detect_trapping_time(&traj, spec.trap_window);
        let at = traj
            .alpha_state
            .as_ref()
            .ok_or_else(|| Error::Degenerate("no state at t_alpha".into()))?;
        let part = cones::partition(at, &data, ta.value);
        let al = cones::alignment(at, &part, &data)?;
        let xp = data.x_plus();
        let inp = BoundInputs {
            alpha: PHASE1_ALPHA,
            n_plus: data.n_plus(),
            h: state.h(),
            x_max: data.x_max(),
            x_min: data.x_min(),
            w_ref_max: state.w_ref_max,
            lambda,
            x_plus_norm: xp.dot(xp).sqrt(),
            t1: trap.time,
            t_alpha: ta.value,
            t2: ta.value,
            risk_at_t_alpha: f64::NAN,
            risk_at_t2: f64::NAN,
            eta: spec.eta_stop,
            sigma: 0.4,
            kappa: 2.0,
            d: 16,
            phi: 0.0,
            psi_at_stop: al.psi,
            delta: 0.1,
            c_complexity: 1.0,
        };
        let lb = bounds::phase1_lower(&inp);
        let slack = al
            .psi_j
            .iter()
            .map(|&(_, p)| p - lb.value)
            .fold(f64::INFINITY, f64::min);
        checks.push(at_least(format!("seed{k}:lambda_hat"), lambda, 0.05));
        checks.push(at_most(format!("seed{k}:alpha_over_admissible"), PHASE1_ALPHA / amax, 1.0));
        checks.push(holds(format!("seed{k}:trapped_before_t_alpha"), trap.stabilized));
        checks.push(at_least(format!("seed{k}:n_Vplus"), part.v_plus.len() as f64, 1.0));
        checks.push(holds(format!("seed{k}:bound_informative"), !lb.vacuous && lb.value > 0.0));
        checks.push(at_least(format!("seed{k}:min_psi_j_minus_bound"), slack, -1e-6));
        checks.push(at_least(format!("seed{k}:psi_minus_bound"), al.psi - lb.value, -1e-6));
    }
    Ok(checks)
}

fn psi_stability(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let spec = SweepSpec {
        alpha_grid: vec![1e-8, 1e-7, 1e-6, 3e-6, 1e-5],
        mixture: MixtureSpec::new(128, 2.0, 1.0, 300, 0),
        mc_samples: 0,
        master_seed: opts.master_seed,
        jobs: opts.jobs,
        ..SweepSpec::template()
    };
    let rows = sweep::run_sweep(&spec)?;
    let mut worst_ratio = 0.0f64;
    for &s in &spec.seeds {
        let data = spec.dataset(s, 0.0)?;
        let st = init_balanced(&InitSpec::new(spec.init.h, 1.0, spec.init_seed(s)), data.d())?;
        let amax = flow::admissible_alpha_max(spec.init.h, data.x_max(), st.w_ref_max);
        worst_ratio = worst_ratio.max(spec.alpha_grid[spec.alpha_grid.len() - 1] / amax);
    }
    let rep = sweep::psi_stability_report(&rows, 0.05);
    let max_gap = rep.max_gap.iter().fold(0.0, |m: f64, &g| if g.is_nan() { f64::INFINITY } else { m.max(g) });
    Ok(vec![
        at_most("grid_over_admissible", worst_ratio, 1.0),
        at_least("rows_reached", rows.iter().filter(|r| r.reached).count() as f64, rows.len() as f64),
        at_most("max_psi_gap", max_gap, 0.15),
        at_most("spearman_psi_vs_alpha", rep.spearman.unwrap_or(f64::NAN), -f64::MIN_POSITIVE),
    ])
}

fn kink_gap(s: &NetworkState, data: &Dataset) -> f64 {
    let pre = data.x().dot(&s.w);
    let mut gap = f64::INFINITY;
    for ((i, j), p) in pre.indexed_iter() {
        let c = s.w.column(j);
        let scale = data.row(i).dot(&data.row(i)).sqrt() * c.dot(&c).sqrt();
        gap = gap.min(p.abs() / scale);
    }
    gap
}

fn gradient_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    const EPS: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut probes = 0;
    let mut attempt = 0u64;
    while probes < 100 {
        attempt += 1;
        if attempt > 10_000 {
            return Err(Error::Degenerate("could not find kink-free probes".into()));
        }
        let seed = derive_seed(opts.master_seed, &[0x6A, attempt]);
        let mut r = rng(seed);
        let data = mixture::sample_dataset(&MixtureSpec::new(6, 1.0, 1.0, 12, seed))?;
        let alpha = 0.3 + 1.2 * r.random::<f64>();
        let s = init_balanced(&InitSpec::new(8, alpha, seed ^ 1), 6)?;
        if kink_gap(&s, &data) < 1e-3 {
            continue;
        }
        let dir_w = Array2::from_shape_fn(s.w.dim(), |_| StandardNormal.sample(&mut r));
        let dir_v = Array1::from_shape_fn(s.h(), |_| StandardNormal.sample(&mut r));
        let (dw, dv) = gradient(&s, &data)?;
        let analytic = (&dw * &dir_w).sum() + dv.dot(&dir_v);
        let shifted = |sign: f64| -> Result<f64> {
            let mut t = s.clone();
            t.w.scaled_add(sign * EPS, &dir_w);
            t.v.scaled_add(sign * EPS, &dir_v);
            training_risk(&t, &data, ClassFilter::All)
        };
        let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * EPS);
        let rel = (fd - analytic).abs() / analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
        probes += 1;
    }
    // exact kink: a zero hidden column with a live output weight must get
    // a zero subgradient
    let data = mixture::sample_dataset(&MixtureSpec::new(6, 1.0, 1.0, 12, opts.master_seed))?;
    let mut s = init_balanced(&InitSpec::new(4, 1.0, opts.master_seed), 6)?;
    s.w.column_mut(0).fill(0.0);
    s.v[0] = 1.0;
    let (dw, _) = gradient(&s, &data)?;
    let at_kink = dw.column(0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(vec![
        at_least("probes", probes as f64, 100.0),
        at_most("max_relative_error", worst, 1e-5),
        at_most("zero_neuron_subgradient", at_kink, 0.0),
    ])
}

fn max_drift(traj: &flow::Trajectory) -> f64 {
    traj.records.iter().map(|r| r.drift).fold(0.0, f64::max)
}

fn conservation(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    // largest scale of the U-shape grid drifts the most
    let data = template_data(opts, 2)?;
    let state = init_balanced(&InitSpec::new(64, 0.1, derive_seed(opts.master_seed, &[0xC0])), 128)?;
    let base = FlowSpec::default();
    let full = flow::integrate(&state, &data, &base)?;
    let half = flow::integrate(
        &state,
        &data,
        &FlowSpec {
            step: base.step / 2.0,
            record_every: base.record_every * 2,
            ..base.clone()
        },
    )?;
    let (d_full, d_half) = (max_drift(&full), max_drift(&half));
    checks.push(at_most("template:max_drift", d_full, 1e-3));
    checks.extend(within("template:drift_ratio_half_step", d_half / d_full, 0.4, 0.6));

    for k in 1..=3u64 {
        let (data, _) = separable_problem(opts, k)?;
        let state = separable_init(opts, k, PHASE1_ALPHA)?;
        let traj = flow::integrate(&state, &data, &base)?;
        checks.push(at_most(format!("separable{k}:max_drift"), max_drift(&traj), 1e-3));
        checks.push(holds(format!("separable{k}:reached"), traj.stops[0].reached));
        let signs = &traj.records[0].v_signs;
        checks.push(holds(
            format!("separable{k}:signs_constant"),
            traj.records.iter().all(|r| &r.v_signs == signs),
        ));
        let stop = &traj.stops[0];
        let after: Vec<&cones::ConePartition> = traj
            .records
            .iter()
            .filter(|r| r.t >= stop.t1_detected)
            .map(|r| &r.partition)
            .collect();
        checks.push(holds(format!("separable{k}:t1_stabilized"), stop.t1_stabilized));
        checks.push(holds(
            format!("separable{k}:partition_constant_after_t1"),
            !after.is_empty() && after.iter().all(|p| p.same_sets(after[0])),
        ));
    }
    Ok(checks)
}

fn concentration(opts: &VerifyOptions) -> Result<Vec<Check>> {
    const DELTA: f64 = 0.1;
    const TRIALS: usize = 2000;
    let mut checks = Vec::new();
    for (n, d) in [(200usize, 32usize), (50, 128)] {
        let c = mixture::concentration_check(d, n, DELTA, TRIALS, derive_seed(opts.master_seed, &[0xCC, n as u64, d as u64]))?;
        checks.push(at_most(format!("n{n}_d{d}:mean_norm_violation"), c.mean_norm_violation, DELTA + 0.03));
        checks.push(at_most(format!("n{n}_d{d}:ortho_norm_violation"), c.ortho_norm_violation, DELTA + 0.03));
        let mut inside = 0;
        for t in 0..TRIALS {
            let spec = MixtureSpec::new(d, 1.5, 1.0, n, derive_seed(opts.master_seed, &[0xCD, n as u64, d as u64, t as u64]));
            let data = mixture::sample_dataset(&spec)?;
            let g = mixture::geometry(&data, &spec, DELTA)?;
            if g.phi >= g.phi_lower && g.phi <= g.phi_upper {
                inside += 1;
            }
        }
        checks.push(at_least(
            format!("n{n}_d{d}:phi_bracket_frequency"),
            inside as f64 / TRIALS as f64,
            1.0 - DELTA - 0.03,
        ));
    }
    Ok(checks)
}

/// Golden-section maximum of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn shapes(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let data = template_data(opts, 3)?;
    let xp = data.x_plus().to_vec();
    let mut s_plus = vec![0.0; data.d()];
    s_plus[0] = 1.0;
    let (kappa, sigma) = (1.5, 1.0);
    let cos_phi = dot(&xp, &s_plus) / norm(&xp);
    let phi = cos_phi.acos();

    let grid: Vec<f64> = (0..=400).map(|i| cos_phi + (1.0 - cos_phi) * i as f64 / 400.0).collect();
    let oa: Vec<f64> = grid
        .iter()
        .map(|&p| bounds::oa_term(p, kappa, sigma, &xp, &s_plus))
        .collect::<Result<_>>()?;
    let worst_drop = oa.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);

    let mut crit_err = 0.0f64;
    for &(ph, sg, d) in &[(phi, sigma, data.d()), (0.3, 0.5, 16), (1.2, 2.0, 64), (0.05, 0.1, 512)] {
        let h = 1e-7;
        let slope = |p: f64| bounds::g_geom(p + h, ph, sg, d) - bounds::g_geom(p - h, ph, sg, d);
        let (mut lo, mut hi) = (h, 1.0 - h);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crit_err = crit_err.max((0.5 * (lo + hi) - bounds::g_geom_critical(ph, sg, d)).abs());
    }

    // best point of the cap by search in the plane spanned by x̄₊ and s₊
    let xb: Vec<f64> = xp.iter().map(|x| x / norm(&xp)).collect();
    let mut u: Vec<f64> = s_plus.iter().zip(&xb).map(|(s, x)| s - cos_phi * x).collect();
    let nu = norm(&u);
    u.iter_mut().for_each(|x| *x /= nu);
    let mut opt_err = 0.0f64;
    let mut feas_err = 0.0f64;
    let mut r = rng(derive_seed(opts.master_seed, &[0x5A]));
    for i in 0..=20 {
        let psi = cos_phi + (1.0 - cos_phi) * i as f64 / 20.0;
        let vs = bounds::v_star(psi, &xp, &s_plus)?;
        let best = dot(&vs.v, &s_plus);
        let half = psi.clamp(-1.0, 1.0).acos();
        let (_, oracle) = golden_max(|th| th.cos() * cos_phi + th.sin() * nu, -half, half);
        opt_err = opt_err.max((best - oracle).abs());
        feas_err = feas_err.max((psi - dot(&vs.v, &xb)).max(0.0)).max((norm(&vs.v) - 1.0).abs());
        // random feasible points never beat v*
        for _ in 0..50 {
            let z: Vec<f64> = (0..xp.len()).map(|_| StandardNormal.sample(&mut r)).collect();
            let zx = dot(&z, &xb);
            let mut perp: Vec<f64> = z.iter().zip(&xb).map(|(a, b)| a - zx * b).collect();
            let np = norm(&perp);
            perp.iter_mut().for_each(|x| *x /= np);
            let c = psi + (1.0 - psi) * r.random::<f64>();
            let v: Vec<f64> = xb.iter().zip(&perp).map(|(a, b)| c * a + (1.0 - c * c).sqrt() * b).collect();
            opt_err = opt_err.max(dot(&v, &s_plus) - best);
        }
    }
    Ok(vec![
        at_most("oa_largest_decrease", worst_drop, 0.0),
        at_most("g_geom_critical_point_error", crit_err, 1e-6),
        at_most("v_star_optimality_gap", opt_err, 1e-6),
        at_most("v_star_feasibility", feas_err, 1e-10),
    ])
}
