//! Data-dependent activation cones, the trapping-time detector, effective
//! linear predictors and their alignment with the positive class sum.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::mixture::Dataset;
use crate::network::NetworkState;

/// Activations below this fraction of `‖w‖‖x‖` count as zero.
pub const ACTIVATION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    /// Activates exactly the positive samples.
    Plus,
    /// Activates exactly the negative samples.
    Minus,
    /// Activates nothing.
    Dead,
    Unresolved,
}

impl std::fmt::Display for Membership {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Plus => "plus",
            Self::Minus => "minus",
            Self::Dead => "dead",
            Self::Unresolved => "unresolved",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConePartition {
    pub v_plus: Vec<usize>,
    pub v_minus: Vec<usize>,
    pub v_dead: Vec<usize>,
    pub unresolved: Vec<usize>,
    pub t_observed: f64,
}

impl ConePartition {
    /// Same index sets, ignoring the observation time.
    pub fn same_sets(&self, other: &Self) -> bool {
        self.v_plus == other.v_plus
            && self.v_minus == other.v_minus
            && self.v_dead == other.v_dead
            && self.unresolved == other.unresolved
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (
            self.v_plus.len(),
            self.v_minus.len(),
            self.v_dead.len(),
            self.unresolved.len(),
        )
    }

    pub fn membership_of(&self, j: usize) -> Membership {
        if self.v_plus.contains(&j) {
            Membership::Plus
        } else if self.v_minus.contains(&j) {
            Membership::Minus
        } else if self.v_dead.contains(&j) {
            Membership::Dead
        } else {
            Membership::Unresolved
        }
    }
}

fn classify(active: impl Iterator<Item = (bool, bool)>) -> Membership {
    // (is_active, is_positive) per sample
    let (mut plus_ok, mut minus_ok, mut dead) = (true, true, true);
    for (a, pos) in active {
        plus_ok &= a == pos;
        minus_ok &= a == !pos;
        dead &= !a;
    }
    if dead {
        Membership::Dead
    } else if plus_ok {
        Membership::Plus
    } else if minus_ok {
        Membership::Minus
    } else {
        Membership::Unresolved
    }
}

fn is_active(p: f64, w_norm: f64, x_norm: f64) -> bool {
    p > 0.0 && p >= ACTIVATION_TOL * w_norm * x_norm
}

fn row_norms(data: &Dataset) -> Vec<f64> {
    data.x()
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect()
}

pub fn cone_membership(w: ArrayView1<'_, f64>, data: &Dataset) -> Membership {
    let w_norm = w.dot(&w).sqrt();
    if w_norm == 0.0 {
        return Membership::Dead;
    }
    let norms = row_norms(data);
    classify((0..data.n()).map(|i| {
        let p = data.row(i).dot(&w);
        (is_active(p, w_norm, norms[i]), data.y()[i] > 0.0)
    }))
}

pub fn partition(state: &NetworkState, data: &Dataset, t: f64) -> ConePartition {
    let pre = data.x().dot(&state.w);
    let norms = row_norms(data);
    let mut part = ConePartition {
        v_plus: Vec::new(),
        v_minus: Vec::new(),
        v_dead: Vec::new(),
        unresolved: Vec::new(),
        t_observed: t,
    };
    for j in 0..state.h() {
        let col = state.w.column(j);
        let w_norm = col.dot(&col).sqrt();
        let m = if w_norm == 0.0 {
            Membership::Dead
        } else {
            classify((0..data.n()).map(|i| {
                (is_active(pre[[i, j]], w_norm, norms[i]), data.y()[i] > 0.0)
            }))
        };
        match m {
            Membership::Plus => part.v_plus.push(j),
            Membership::Minus => part.v_minus.push(j),
            Membership::Dead => part.v_dead.push(j),
            Membership::Unresolved => part.unresolved.push(j),
        }
    }
    part
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingTime {
    pub time: f64,
    /// False when no stable, fully resolved stretch was found before the
    /// horizon; `time` is then the horizon.
    pub stabilized: bool,
}

/// Earliest time from which the partition is fully resolved and unchanged
/// through the last observation at or before `horizon`, spanning at least
/// `window` observations.
pub fn trapping_time_of(series: &[&ConePartition], horizon: f64, window: usize) -> TrappingTime {
    let not_found = TrappingTime {
        time: horizon,
        stabilized: false,
    };
    let upto: Vec<&ConePartition> = series
        .iter()
        .copied()
        .filter(|p| p.t_observed <= horizon)
        .collect();
    let Some(last) = upto.last() else {
        return not_found;
    };
    if !last.unresolved.is_empty() {
        return not_found;
    }
    let mut start = upto.len() - 1;
    while start > 0 && upto[start - 1].same_sets(last) {
        start -= 1;
    }
    if upto.len() - start >= window.max(2) {
        TrappingTime {
            time: upto[start].t_observed,
            stabilized: true,
        }
    } else {
        not_found
    }
}

/// Trapping time of an integrated trajectory, with the phase-1 horizon as
/// the observation cut-off.
pub fn detect_trapping_time(traj: &Trajectory, window: usize) -> TrappingTime {
    let series: Vec<&ConePartition> = traj.records.iter().map(|r| &r.partition).collect();
    let horizon = if traj.t_alpha.valid {
        traj.t_alpha.value
    } else {
        traj.records.last().map_or(0.0, |r| r.t)
    };
    trapping_time_of(&series, horizon, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorClass {
    Positive,
    Negative,
}

/// `Σ_j v_j w_j` over an index set.
pub fn predictor_over(state: &NetworkState, idx: &[usize]) -> Array1<f64> {
    let mut out = Array1::zeros(state.d());
    for &j in idx {
        out.scaled_add(state.v[j], &state.w.column(j));
    }
    out
}

pub fn effective_predictor(
    state: &NetworkState,
    part: &ConePartition,
    class: PredictorClass,
) -> Result<Array1<f64>> {
    let idx = match class {
        PredictorClass::Positive => &part.v_plus,
        PredictorClass::Negative => &part.v_minus,
    };
    if idx.is_empty() {
        return Err(Error::Degenerate(format!("{class:?} cone is empty")));
    }
    Ok(predictor_over(state, idx))
}

/// Neurons with a positive output weight that fire on at least one positive
/// sample. On orthogonally separable data after trapping this contains the
/// positive cone; on overlapping classes, where the strict cone is typically
/// empty, it is the set whose sum acts on positive inputs.
pub fn positive_live_set(state: &NetworkState, data: &Dataset) -> Vec<usize> {
    let pre = data.x().dot(&state.w);
    let pos = data.positive_indices();
    (0..state.h())
        .filter(|&j| state.v[j] > 0.0 && pos.iter().any(|&i| pre[[i, j]] > 0.0))
        .collect()
}

pub fn live_predictor(state: &NetworkState, data: &Dataset) -> Result<Array1<f64>> {
    let idx = positive_live_set(state, data);
    if idx.is_empty() {
        return Err(Error::Degenerate("no live positive neurons".into()));
    }
    Ok(predictor_over(state, &idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRecord {
    /// `(j, ψ_j)` for every neuron in the set.
    pub psi_j: Vec<(usize, f64)>,
    /// Alignment of the summed predictor.
    pub psi: f64,
    /// Unit reference direction `x₊/‖x₊‖`.
    pub reference: Array1<f64>,
}

fn unit_cosine(a: ArrayView1<'_, f64>, r: &Array1<f64>) -> Option<f64> {
    let n = a.dot(&a).sqrt();
    (n > 0.0).then(|| (a.dot(r) / n).clamp(-1.0, 1.0))
}

/// Alignment of the neurons in `idx` and of their predictor with `x₊`.
pub fn alignment_over(state: &NetworkState, idx: &[usize], data: &Dataset) -> Result<AlignmentRecord> {
    let xp = data.x_plus();
    let xn = xp.dot(xp).sqrt();
    if xn == 0.0 {
        return Err(Error::Degenerate("positive class sum is zero".into()));
    }
    let reference = xp / xn;
    let w_hat = predictor_over(state, idx);
    let psi = unit_cosine(w_hat.view(), &reference)
        .ok_or_else(|| Error::Degenerate("effective predictor is zero".into()))?;
    let psi_j = idx
        .iter()
        .filter_map(|&j| unit_cosine(state.w.column(j), &reference).map(|c| (j, c)))
        .collect();
    Ok(AlignmentRecord {
        psi_j,
        psi,
        reference,
    })
}

pub fn alignment(state: &NetworkState, part: &ConePartition, data: &Dataset) -> Result<AlignmentRecord> {
    alignment_over(state, &part.v_plus, data)
}

/// Per-neuron dump `j,member,psi_j`; `psi_j` is the cosine with `x₊` for
/// every nonzero neuron.
pub fn membership_csv(state: &NetworkState, part: &ConePartition, data: &Dataset) -> String {
    let xp = data.x_plus();
    let r = xp / xp.dot(xp).sqrt();
    let mut out = String::from("j,member,psi_j\n");
    for j in 0..state.h() {
        let psi = unit_cosine(state.w.column(j), &r).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{j},{},{}\n",
            part.membership_of(j),
            crate::numeric::fmt17(psi)
        ));
    }
    out
}
