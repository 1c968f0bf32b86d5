//! Bias-free two-layer ReLU network `f(x) = Σ_j v_j·relu(⟨w_j, x⟩)` with a
//! balanced scaled initialization, logistic training risk, and Clarke
//! subgradients under the `relu'(0) = 0` selection.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mixture::Dataset;
use crate::numeric::{fmt17, logistic_loss, logistic_slope, pairwise_sum, rng};

/// Risks below this are reported as exactly zero.
pub const RISK_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// i.i.d. standard normal entries.
    StandardNormal,
    /// Standard normal columns rescaled to unit norm, so `W_ref_max = 1`.
    NormalizedColumns,
}

impl std::str::FromStr for Reference {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-normal" => Ok(Self::StandardNormal),
            "normalized-columns" => Ok(Self::NormalizedColumns),
            _ => Err(Error::Parse(format!("unknown reference distribution `{s}`"))),
        }
    }
}

impl std::fmt::Display for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::StandardNormal => "standard-normal",
            Self::NormalizedColumns => "normalized-columns",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub h: usize,
    pub alpha: f64,
    pub reference: Reference,
    pub seed: u64,
}

impl InitSpec {
    pub fn new(h: usize, alpha: f64, seed: u64) -> Self {
        Self {
            h,
            alpha,
            reference: Reference::StandardNormal,
            seed,
        }
    }

    /// `α = 0` is accepted (it yields the degenerate zero network) so the
    /// scale-zero limit can be inspected; negative or non-finite scales are not.
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::Parameter("h must be >= 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// First layer, one column per hidden unit (d×h).
    pub w: Array2<f64>,
    pub v: Array1<f64>,
    pub alpha: f64,
    /// Largest column norm of the unscaled reference matrix.
    pub w_ref_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    Positive,
    Negative,
}

/// Draws the reference matrix, scales it by `α`, and pairs every column with
/// an output weight of equal magnitude and a fair random sign.
pub fn init_balanced(spec: &InitSpec, d: usize) -> Result<NetworkState> {
    spec.validate()?;
    if d == 0 {
        return Err(Error::Parameter("d must be >= 1".into()));
    }
    let mut r = rng(spec.seed);
    let mut reference = Array2::<f64>::zeros((d, spec.h));
    reference.mapv_inplace(|_| StandardNormal.sample(&mut r));
    if spec.reference == Reference::NormalizedColumns {
        for mut col in reference.columns_mut() {
            let nrm = col.dot(&col).sqrt();
            col /= nrm;
        }
    }
    let w_ref_max = reference
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max);
    let w = reference * spec.alpha;
    let v = w
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.dot(&c).sqrt();
            if r.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Ok(NetworkState {
        w,
        v,
        alpha: spec.alpha,
        w_ref_max,
        seed: spec.seed,
    })
}

impl NetworkState {
    pub fn d(&self) -> usize {
        self.w.nrows()
    }
    pub fn h(&self) -> usize {
        self.w.ncols()
    }

    /// True for the scale-zero network.
    pub fn is_degenerate(&self) -> bool {
        self.alpha == 0.0
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.d() {
            return Err(Error::Shape {
                expected: self.d(),
                got: x.len(),
            });
        }
        let pre = x.dot(&self.w);
        Ok(pre.iter().zip(&self.v).map(|(p, v)| v * p.max(0.0)).sum())
    }

    /// Outputs on every row of `x` (n×d).
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.d() {
            return Err(Error::Shape {
                expected: self.d(),
                got: x.ncols(),
            });
        }
        Ok(x.dot(&self.w).mapv(|p| p.max(0.0)).dot(&self.v))
    }

    pub fn balancedness_drift(&self) -> f64 {
        self.w
            .columns()
            .into_iter()
            .zip(&self.v)
            // (|v| − ‖w‖)(|v| + ‖w‖) avoids cancellation in v² − ‖w‖²
            .map(|(c, v)| {
                let nw = c.dot(&c).sqrt();
                (v.abs() - nw).abs() * (v.abs() + nw)
            })
            .fold(0.0, f64::max)
    }

    /// Flat text checkpoint; `W` is stored column-major. Round-trips exactly.
    pub fn to_checkpoint(&self) -> String {
        let join = |it: &mut dyn Iterator<Item = f64>| {
            it.map(fmt17).collect::<Vec<_>>().join(",")
        };
        let w_colmajor = join(&mut self.w.t().iter().copied());
        format!(
            "d={}\nh={}\nalpha={}\nw_ref_max={}\nseed={}\nv={}\nW={}\n",
            self.d(),
            self.h(),
            fmt17(self.alpha),
            fmt17(self.w_ref_max),
            self.seed,
            join(&mut self.v.iter().copied()),
            w_colmajor
        )
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let kv = crate::io::parse_key_values(text)?;
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::Parse(format!("checkpoint missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad number for `{k}`")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer for `{k}`")))
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            let s = get(k)?;
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad entry in `{k}`: {t}")))
                })
                .collect()
        };
        let (d, h) = (int("d")? as usize, int("h")? as usize);
        let v = list("v")?;
        let w = list("W")?;
        if v.len() != h {
            return Err(Error::Shape { expected: h, got: v.len() });
        }
        if w.len() != d * h {
            return Err(Error::Shape {
                expected: d * h,
                got: w.len(),
            });
        }
        let w = Array2::from_shape_vec((h, d), w)
            .map_err(|e| Error::Parse(e.to_string()))?
            .reversed_axes()
            .as_standard_layout()
            .into_owned();
        Ok(Self {
            w,
            v: Array1::from(v),
            alpha: num("alpha")?,
            w_ref_max: num("w_ref_max")?,
            seed: int("seed")?,
        })
    }
}

fn filter_indices(data: &Dataset, filter: ClassFilter) -> Vec<usize> {
    (0..data.n())
        .filter(|&i| match filter {
            ClassFilter::All => true,
            ClassFilter::Positive => data.y()[i] > 0.0,
            ClassFilter::Negative => data.y()[i] < 0.0,
        })
        .collect()
}

/// Mean logistic loss of a list of margins, summed pairwise.
pub fn mean_logistic_risk(margins: &[f64]) -> f64 {
    let losses: Vec<f64> = margins.iter().map(|&m| logistic_loss(m)).collect();
    pairwise_sum(&losses) / margins.len() as f64
}

/// Mean logistic risk over the filtered samples and whether it was floored
/// to zero.
pub fn training_risk_flagged(
    state: &NetworkState,
    data: &Dataset,
    filter: ClassFilter,
) -> Result<(f64, bool)> {
    let idx = filter_indices(data, filter);
    if idx.is_empty() {
        return Err(Error::Configuration(format!("{filter:?} subset is empty")));
    }
    let f = state.forward_batch(data.x())?;
    let margins: Vec<f64> = idx.iter().map(|&i| data.y()[i] * f[i]).collect();
    let risk = mean_logistic_risk(&margins);
    Ok(if risk < RISK_FLOOR { (0.0, true) } else { (risk, false) })
}

pub fn training_risk(state: &NetworkState, data: &Dataset, filter: ClassFilter) -> Result<f64> {
    training_risk_flagged(state, data, filter).map(|(r, _)| r)
}

/// Per-class risks from a single forward pass: `(all, positive, negative)`.
pub fn class_risks(state: &NetworkState, data: &Dataset) -> Result<(f64, f64, f64)> {
    let f = state.forward_batch(data.x())?;
    let (mut all, mut pos, mut neg) = (Vec::new(), Vec::new(), Vec::new());
    for (i, fi) in f.iter().enumerate() {
        let m = data.y()[i] * fi;
        all.push(m);
        if data.y()[i] > 0.0 {
            pos.push(m);
        } else {
            neg.push(m);
        }
    }
    let floor = |r: f64| if r < RISK_FLOOR { 0.0 } else { r };
    Ok((
        floor(mean_logistic_risk(&all)),
        floor(mean_logistic_risk(&pos)),
        floor(mean_logistic_risk(&neg)),
    ))
}

#[inline]
fn relu_prime(p: f64) -> f64 {
    if cfg!(feature = "relu-prime-at-zero-one") {
        if p >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else if p > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// One forward pass over a dataset: pre-activations, activations and outputs.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub pre: Array2<f64>,
    pub act: Array2<f64>,
    /// Outputs including the multiplier.
    pub f: Array1<f64>,
    pub gamma: f64,
}

pub fn evaluate(state: &NetworkState, data: &Dataset, gamma: f64) -> Result<Evaluation> {
    if data.d() != state.d() {
        return Err(Error::Shape {
            expected: state.d(),
            got: data.d(),
        });
    }
    let pre = data.x().dot(&state.w);
    let act = pre.mapv(|p| p.max(0.0));
    let f = act.dot(&state.v) * gamma;
    Ok(Evaluation { pre, act, f, gamma })
}

impl Evaluation {
    /// Margins `y_i f_i` restricted to a class.
    pub fn margins(&self, data: &Dataset, filter: ClassFilter) -> Vec<f64> {
        filter_indices(data, filter)
            .into_iter()
            .map(|i| data.y()[i] * self.f[i])
            .collect()
    }

    /// Subgradient of the mean risk at the evaluated point.
    pub fn gradient(&self, state: &NetworkState, data: &Dataset) -> (Array2<f64>, Array1<f64>) {
        let n = data.n() as f64;
        // dL/df_i
        let c: Array1<f64> = self
            .f
            .iter()
            .zip(data.y())
            .map(|(fi, yi)| -yi * logistic_slope(yi * fi) / n)
            .collect();
        let dv = self.act.t().dot(&c) * self.gamma;
        let mut gate = self.pre.mapv(relu_prime);
        gate *= &c.view().insert_axis(Axis(1));
        gate *= &(&state.v * self.gamma).view().insert_axis(Axis(0));
        let dw = data.x().t().dot(&gate);
        (dw, dv)
    }
}

/// Subgradient of the mean risk of `γ·f`, where `γ` is an output multiplier.
pub fn gradient_with_multiplier(
    state: &NetworkState,
    data: &Dataset,
    gamma: f64,
) -> Result<(Array2<f64>, Array1<f64>)> {
    Ok(evaluate(state, data, gamma)?.gradient(state, data))
}

/// Subgradient `(∂W, ∂v)` of the mean training risk over all samples.
pub fn gradient(state: &NetworkState, data: &Dataset) -> Result<(Array2<f64>, Array1<f64>)> {
    gradient_with_multiplier(state, data, 1.0)
}
