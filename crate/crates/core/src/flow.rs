//! Time-discretized gradient flow on `(W, v)`, the characteristic times of
//! the two training phases, and the output-scale / learning-rate twin run.

use ndarray::{Array1, Array2};

use crate::cones::{self, ConePartition};
use crate::error::{Error, Result};
use crate::mixture::Dataset;
use crate::network::{evaluate, gradient_with_multiplier, mean_logistic_risk, ClassFilter, NetworkState, RISK_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Heun,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "heun" => Ok(Self::Heun),
            _ => Err(Error::Parse(format!("unknown integrator `{s}`"))),
        }
    }
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Euler => "euler",
            Self::Heun => "heun",
        })
    }
}

/// Which objective the clock is measured against.
///
/// `UnitSlope` follows the flow of `Σ_i 2ℓ(y_i f(x_i))`, i.e. the mean risk
/// sped up by `2n`. The loss then has unit slope at zero margin, which is the
/// clock under which the phase-1 horizon and the alignment rate `‖x₊‖` are
/// stated. `MeanRisk` follows the plain mean-risk flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScale {
    UnitSlope,
    MeanRisk,
}

impl TimeScale {
    pub fn factor(self, n: usize) -> f64 {
        match self {
            Self::UnitSlope => 2.0 * n as f64,
            Self::MeanRisk => 1.0,
        }
    }
}

impl std::str::FromStr for TimeScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-slope" => Ok(Self::UnitSlope),
            "mean-risk" => Ok(Self::MeanRisk),
            _ => Err(Error::Parse(format!("unknown time scale `{s}`"))),
        }
    }
}

impl std::fmt::Display for TimeScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UnitSlope => "unit-slope",
            Self::MeanRisk => "mean-risk",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub step: f64,
    pub max_time: f64,
    /// Record every this many steps (plus at `t_α` and at every stop).
    pub record_every: usize,
    pub eta_stop: f64,
    pub integrator: Integrator,
    pub time_scale: TimeScale,
    /// Relative risk drop that marks the onset of phase 2.
    pub drop_ratio: f64,
    /// Consecutive stable records required for trapping.
    pub trap_window: usize,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            step: 5e-5,
            max_time: 50.0,
            record_every: 10,
            eta_stop: 0.05,
            integrator: Integrator::Euler,
            time_scale: TimeScale::UnitSlope,
            drop_ratio: 0.9,
            trap_window: 5,
        }
    }
}

impl FlowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Parameter(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::Parameter(format!("max_time must be > 0, got {}", self.max_time)));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be >= 1".into()));
        }
        check_eta(self.eta_stop)?;
        if !(self.drop_ratio > 0.0 && self.drop_ratio <= 1.0) {
            return Err(Error::Parameter(format!(
                "drop_ratio must lie in (0,1], got {}",
                self.drop_ratio
            )));
        }
        if self.trap_window < 2 {
            return Err(Error::Parameter("trap_window must be >= 2".into()));
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < std::f64::consts::LN_2 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("eta must lie in (0, log 2), got {eta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TAlpha {
    pub value: f64,
    /// False when `α√h ≥ 1`, in which case `value` is 0.
    pub valid: bool,
}

/// Phase-1 horizon `log(1/(√h α)) / (4 n₊ x_max)`.
pub fn t_alpha(alpha: f64, n_plus: usize, x_max: f64, h: usize) -> TAlpha {
    let s = (h as f64).sqrt() * alpha;
    if s < 1.0 && alpha > 0.0 {
        TAlpha {
            value: (1.0 / s).ln() / (4.0 * n_plus as f64 * x_max),
            valid: true,
        }
    } else {
        TAlpha {
            value: 0.0,
            valid: false,
        }
    }
}

/// Largest scale for which the small-initialization analysis applies:
/// `1 / (4√h x_max W²_max)`.
pub fn admissible_alpha_max(h: usize, x_max: f64, w_ref_max: f64) -> f64 {
    1.0 / (4.0 * (h as f64).sqrt() * x_max * w_ref_max * w_ref_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub risk_all: f64,
    pub risk_plus: f64,
    /// Alignment of the positive-live predictor with `x₊`; NaN if it is zero.
    pub psi: f64,
    pub predictor_norm: f64,
    pub drift: f64,
    pub partition: ConePartition,
    /// Signs of the output weights (used for sign-preservation checks).
    pub v_signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRecord {
    pub eta: f64,
    pub reached: bool,
    /// First time at or after `t_α` with positive-class risk `≤ η`; NaN if
    /// not reached.
    pub t_eta: f64,
    pub t_alpha: f64,
    pub t2: f64,
    pub t2_reached: bool,
    pub t1_detected: f64,
    pub t1_stabilized: bool,
    pub risk_plus: f64,
    pub risk_all: f64,
    /// Network at the stopping time (final state when not reached).
    pub state: NetworkState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub final_state: NetworkState,
    pub t_alpha: TAlpha,
    /// Network at `t_α` (the initial state when the horizon is not valid).
    pub alpha_state: Option<NetworkState>,
    pub stops: Vec<StopRecord>,
    pub steps: usize,
}

impl Trajectory {
    /// Record at (or first after) `t_α`.
    pub fn record_at_t_alpha(&self) -> Option<&Record> {
        self.records.iter().find(|r| r.t >= self.t_alpha.value)
    }

    pub fn to_csv(&self) -> String {
        use crate::numeric::fmt17;
        let mut out = String::from("t,risk_all,risk_plus,psi,predictor_norm,drift,n_Vplus,n_Vminus,n_Vdead\n");
        for r in &self.records {
            let (p, m, d, _) = r.partition.counts();
            out.push_str(&format!(
                "{},{},{},{},{},{},{p},{m},{d}\n",
                fmt17(r.t),
                fmt17(r.risk_all),
                fmt17(r.risk_plus),
                fmt17(r.psi),
                fmt17(r.predictor_norm),
                fmt17(r.drift),
            ));
        }
        out
    }
}

fn observe(state: &NetworkState, data: &Dataset, t: f64, risk_all: f64, risk_plus: f64) -> Record {
    let (psi, predictor_norm) = match cones::live_predictor(state, data) {
        Ok(w) => {
            let nw = w.dot(&w).sqrt();
            let xp = data.x_plus();
            ((w.dot(xp) / (nw * xp.dot(xp).sqrt())).clamp(-1.0, 1.0), nw)
        }
        Err(_) => (f64::NAN, 0.0),
    };
    Record {
        t,
        risk_all,
        risk_plus,
        psi,
        predictor_norm,
        drift: state.balancedness_drift(),
        partition: cones::partition(state, data, t),
        v_signs: state.v.iter().map(|v| v.signum() as i8 * (*v != 0.0) as i8).collect(),
    }
}

fn floor(r: f64) -> f64 {
    if r < RISK_FLOOR {
        0.0
    } else {
        r
    }
}

fn finite(state: &NetworkState) -> bool {
    state.w.iter().all(|x| x.is_finite()) && state.v.iter().all(|x| x.is_finite())
}

fn advance(state: &NetworkState, dw: &Array2<f64>, dv: &Array1<f64>, scale: f64) -> NetworkState {
    let mut next = state.clone();
    next.w.scaled_add(-scale, dw);
    next.v.scaled_add(-scale, dv);
    next
}

/// Integrates with the single stopping level `spec.eta_stop`.
pub fn integrate(state: &NetworkState, data: &Dataset, spec: &FlowSpec) -> Result<Trajectory> {
    integrate_multi(state, data, spec, &[spec.eta_stop])
}

/// Integrates once and reads off a stopping time for every level in `etas`.
/// The run ends when the smallest level is reached or at `max_time`.
pub fn integrate_multi(
    state: &NetworkState,
    data: &Dataset,
    spec: &FlowSpec,
    etas: &[f64],
) -> Result<Trajectory> {
    spec.validate()?;
    if etas.is_empty() {
        return Err(Error::Parameter("at least one stopping level is required".into()));
    }
    for &e in etas {
        check_eta(e)?;
    }
    if data.d() != state.d() {
        return Err(Error::Shape {
            expected: state.d(),
            got: data.d(),
        });
    }
    let ta = t_alpha(state.alpha, data.n_plus(), data.x_max(), state.h());
    let speed = spec.time_scale.factor(data.n());

    let mut cur = state.clone();
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut records = Vec::new();
    let mut alpha_state = (!ta.valid).then(|| state.clone());
    let mut hits: Vec<Option<(f64, f64, f64, NetworkState)>> = vec![None; etas.len()];

    loop {
        let ev = evaluate(&cur, data, 1.0)?;
        let risk_plus = floor(mean_logistic_risk(&ev.margins(data, ClassFilter::Positive)));
        let risk_all = floor(mean_logistic_risk(&ev.margins(data, ClassFilter::All)));

        let on_record = steps.is_multiple_of(spec.record_every) || (ta.valid && t == ta.value);
        let mut stopped_now = false;
        if t >= ta.value {
            for (k, &eta) in etas.iter().enumerate() {
                if hits[k].is_none() && risk_plus <= eta {
                    hits[k] = Some((t, risk_plus, risk_all, cur.clone()));
                    stopped_now = true;
                }
            }
        }
        if ta.valid && t == ta.value && alpha_state.is_none() {
            alpha_state = Some(cur.clone());
        }
        let done = hits.iter().all(Option::is_some) || t >= spec.max_time;
        if on_record || stopped_now || done {
            records.push(observe(&cur, data, t, risk_all, risk_plus));
        }
        if done {
            break;
        }

        let mut dt = spec.step.min(spec.max_time - t);
        let mut land_on_ta = false;
        if ta.valid && t < ta.value && t + dt >= ta.value {
            dt = ta.value - t;
            land_on_ta = true;
        }
        let (dw, dv) = ev.gradient(&cur, data);
        let next = match spec.integrator {
            Integrator::Euler => advance(&cur, &dw, &dv, dt * speed),
            Integrator::Heun => {
                let trial = advance(&cur, &dw, &dv, dt * speed);
                if finite(&trial) {
                    let (dw2, dv2) = gradient_with_multiplier(&trial, data, 1.0)?;
                    advance(&cur, &(&dw + &dw2), &(&dv + &dv2), 0.5 * dt * speed)
                } else {
                    trial
                }
            }
        };
        steps += 1;
        let t_next = if land_on_ta { ta.value } else { t + dt };
        if !finite(&next) {
            let partial = Trajectory {
                records,
                final_state: cur,
                t_alpha: ta,
                alpha_state,
                stops: Vec::new(),
                steps,
                };
            return Err(Error::Divergence {
                time: t_next,
                partial: Box::new(partial),
            });
        }
        cur = next;
        t = t_next;
    }

    let mut traj = Trajectory {
        records,
        final_state: cur,
        t_alpha: ta,
        alpha_state,
        stops: Vec::new(),
        steps,
    };
    let (t2, t2_reached) = detect_t2(&traj, spec.drop_ratio);
    let trap = cones::detect_trapping_time(&traj, spec.trap_window);
    traj.stops = etas
        .iter()
        .zip(hits)
        .map(|(&eta, hit)| {
            let (reached, t_eta, rp, ra, st) = match hit {
                Some((t, rp, ra, st)) => (true, t, rp, ra, st),
                None => {
                    let last = traj.records.last().expect("at least one record");
                    (false, f64::NAN, last.risk_plus, last.risk_all, traj.final_state.clone())
                }
            };
            StopRecord {
                eta,
                reached,
                t_eta,
                t_alpha: ta.value,
                t2,
                t2_reached,
                t1_detected: trap.time,
                t1_stabilized: trap.stabilized,
                risk_plus: rp,
                risk_all: ra,
                state: st,
            }
        })
        .collect();
    Ok(traj)
}

/// First recorded time at or after `t_α` where the positive-class risk has
/// fallen to `drop_ratio` times its value at `t_α`. Returns the last record
/// time and `false` when that never happens.
pub fn detect_t2(traj: &Trajectory, drop_ratio: f64) -> (f64, bool) {
    let Some(base) = traj.record_at_t_alpha() else {
        return (traj.records.last().map_or(0.0, |r| r.t), false);
    };
    let target = drop_ratio * base.risk_plus;
    traj.records
        .iter()
        .filter(|r| r.t >= base.t)
        .find(|r| r.risk_plus <= target)
        .map_or((traj.records.last().map_or(0.0, |r| r.t), false), |r| (r.t, true))
}

/// Runs two discrete gradient-descent twins for `steps` updates:
/// A from `(W, v)` with output multiplier `α²` and learning rate `lr`, and
/// B from `(αW, αv)` with multiplier 1 and learning rate `lr·α²`. Returns the
/// largest output gap over all steps and samples.
pub fn equivalence_twin(
    state: &NetworkState,
    data: &Dataset,
    alpha: f64,
    lr: f64,
    steps: usize,
) -> Result<f64> {
    if !(alpha > 0.0) || !(lr > 0.0) {
        return Err(Error::Parameter("alpha and lr must be positive".into()));
    }
    let gamma = alpha * alpha;
    let mut a = state.clone();
    let mut b = state.clone();
    b.w *= alpha;
    b.v *= alpha;
    let mut worst = 0.0f64;
    for k in 0..=steps {
        let ea = evaluate(&a, data, gamma)?;
        let eb = evaluate(&b, data, 1.0)?;
        for (fa, fb) in ea.f.iter().zip(eb.f.iter()) {
            worst = worst.max((fa - fb).abs());
        }
        if k == steps {
            break;
        }
        let (dwa, dva) = ea.gradient(&a, data);
        let (dwb, dvb) = eb.gradient(&b, data);
        a.w.scaled_add(-lr, &dwa);
        a.v.scaled_add(-lr, &dva);
        b.w.scaled_add(-lr * gamma, &dwb);
        b.v.scaled_add(-lr * gamma, &dvb);
    }
    Ok(worst)
}
