//! Two-class isotropic Gaussian mixture `x = κ·y·s_y + σ·z` with `s₋ = −s₊`,
//! orthogonal-separability measurement, and the class-mean geometry
//! (angle to the signal and its concentration bracket).

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub d: usize,
    pub kappa: f64,
    pub sigma: f64,
    /// Unit signal direction of the positive class.
    pub s_plus: Vec<f64>,
    pub n: usize,
    /// Fraction of positive labels.
    pub balance: f64,
    pub seed: u64,
}

impl MixtureSpec {
    /// Spec with `s₊ = e₀` and balanced classes.
    pub fn new(d: usize, kappa: f64, sigma: f64, n: usize, seed: u64) -> Self {
        let mut s_plus = vec![0.0; d];
        if d > 0 {
            s_plus[0] = 1.0;
        }
        Self {
            d,
            kappa,
            sigma,
            s_plus,
            n,
            balance: 0.5,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Parameter(format!("d must be >= 2, got {}", self.d)));
        }
        if self.n < 2 {
            return Err(Error::Parameter(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.s_plus.len() != self.d {
            return Err(Error::Shape {
                expected: self.d,
                got: self.s_plus.len(),
            });
        }
        let s_norm = crate::numeric::norm(&self.s_plus);
        if (s_norm - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("|s_plus| must be 1, got {s_norm}")));
        }
        if !(self.balance > 0.0 && self.balance < 1.0) {
            return Err(Error::Parameter(format!(
                "balance must lie in (0,1), got {}",
                self.balance
            )));
        }
        Ok(())
    }

    /// Number of positive labels, `⌈balance·n⌉`.
    pub fn n_plus(&self) -> usize {
        (self.balance * self.n as f64).ceil() as usize
    }
}

/// A realized labeled sample together with cached geometry statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    x_max: f64,
    x_min: f64,
    n_plus: usize,
    x_plus: Array1<f64>,
    x_minus: Array1<f64>,
}

impl Dataset {
    /// Builds a dataset from rows `x` (n×d) and labels in {−1, +1}.
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if y.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::Data(format!("labels must be +1 or -1, found {bad}")));
        }
        let n_plus = y.iter().filter(|&&l| l > 0.0).count();
        if n_plus == 0 || n_plus == n {
            return Err(Error::Configuration(
                "both classes must be nonempty".into(),
            ));
        }
        let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let x_max = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x_min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut x_plus = Array1::zeros(d);
        let mut x_minus = Array1::zeros(d);
        for (row, &label) in x.rows().into_iter().zip(y.iter()) {
            if label > 0.0 {
                x_plus += &row;
            } else {
                x_minus += &row;
            }
        }
        Ok(Self {
            x,
            y,
            x_max,
            x_min,
            n_plus,
            x_plus,
            x_minus,
        })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }
    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
    pub fn d(&self) -> usize {
        self.x.ncols()
    }
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn n_plus(&self) -> usize {
        self.n_plus
    }
    pub fn n_minus(&self) -> usize {
        self.n() - self.n_plus
    }
    /// Sum of positive-class rows.
    pub fn x_plus(&self) -> &Array1<f64> {
        &self.x_plus
    }
    /// Sum of negative-class rows.
    pub fn x_minus(&self) -> &Array1<f64> {
        &self.x_minus
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y[i] > 0.0).collect()
    }

    /// Multiplies every row by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.x * c, self.y.clone())
    }

    /// Same rows with every label negated.
    pub fn label_flipped(&self) -> Result<Self> {
        Self::new(self.x.clone(), -&self.y)
    }

    /// Rows and labels reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), perm);
        let y = perm.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y)
    }
}

/// Draws `n` labeled samples. The first `⌈balance·n⌉` labels are positive;
/// the label order is then shuffled and each row's noise drawn in order from
/// the same seeded stream.
pub fn sample_dataset(spec: &MixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let n_plus = spec.n_plus();
    if n_plus == 0 || n_plus >= spec.n {
        return Err(Error::Configuration(format!(
            "balance {} with n = {} leaves a class empty",
            spec.balance, spec.n
        )));
    }
    let mut r = rng(spec.seed);
    let mut y: Vec<f64> = (0..spec.n)
        .map(|i| if i < n_plus { 1.0 } else { -1.0 })
        .collect();
    y.shuffle(&mut r);
    let mut x = Array2::zeros((spec.n, spec.d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut r);
            *v = spec.kappa * y[i] * spec.s_plus[k] + spec.sigma * z;
        }
    }
    Dataset::new(x, Array1::from(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparabilityReport {
    /// Minimum over distinct pairs of `y ỹ ⟨x, x̃⟩ / (‖x‖‖x̃‖)`.
    pub lambda_hat: f64,
    pub argmin: (usize, usize),
    pub requested: f64,
    pub satisfied: bool,
}

/// Exact O(n²d) scan of all label-signed pairwise cosines.
pub fn measure_separability(data: &Dataset, requested: f64) -> Result<SeparabilityReport> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Data("need at least two samples".into()));
    }
    let mut units = data.x().clone();
    for (i, mut row) in units.rows_mut().into_iter().enumerate() {
        let nrm = row.dot(&row).sqrt();
        if nrm == 0.0 {
            return Err(Error::Data(format!("row {i} has zero norm")));
        }
        row *= data.y()[i] / nrm;
    }
    let gram = units.dot(&units.t());
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..n {
        for j in (i + 1)..n {
            let c = gram[[i, j]].clamp(-1.0, 1.0);
            if c < best.0 {
                best = (c, (i, j));
            }
        }
    }
    Ok(SeparabilityReport {
        lambda_hat: best.0,
        argmin: best.1,
        requested,
        satisfied: best.0 >= requested,
    })
}

#[derive(Debug, Clone)]
pub struct SeparableDraw {
    pub data: Dataset,
    pub report: SeparabilityReport,
    pub attempts: usize,
}

/// Redraws until the realized `λ̂ ≥ lambda_min`. Attempt `k` uses seed
/// `spec.seed` for `k = 0` and a derived seed afterwards. A non-positive
/// threshold accepts the first draw.
pub fn rejection_sample_separable(
    spec: &MixtureSpec,
    lambda_min: f64,
    max_tries: usize,
) -> Result<SeparableDraw> {
    if !(lambda_min < 1.0) {
        return Err(Error::Parameter(format!(
            "lambda_min must be < 1, got {lambda_min}"
        )));
    }
    if max_tries == 0 {
        return Err(Error::Parameter("max_tries must be >= 1".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..max_tries {
        let seed = if k == 0 {
            spec.seed
        } else {
            derive_seed(spec.seed, &[0x5EBA_u64, k as u64])
        };
        let data = sample_dataset(&spec.with_seed(seed))?;
        let report = measure_separability(&data, lambda_min)?;
        if lambda_min <= 0.0 || report.satisfied {
            return Ok(SeparableDraw {
                data,
                report,
                attempts: k + 1,
            });
        }
        best = best.max(report.lambda_hat);
    }
    Err(Error::SamplingFailure {
        tries: max_tries,
        best_lambda: best,
    })
}

/// `A_{n,δ} = √(max{0, (d−1) − 2√((d−1) log(1/δ))} / n)`.
pub fn ortho_lower_radius(d: usize, n: usize, delta: f64) -> f64 {
    let dm1 = d as f64 - 1.0;
    let inner = dm1 - 2.0 * (dm1 * (1.0 / delta).ln()).sqrt();
    (inner.max(0.0) / n as f64).sqrt()
}

/// `B_{n,δ} = (√d + √(2 log(1/δ))) / √n`.
pub fn mean_upper_radius(d: usize, n: usize, delta: f64) -> f64 {
    ((d as f64).sqrt() + (2.0 * (1.0 / delta).ln()).sqrt()) / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryReport {
    /// Angle between the positive class sum and `s₊`, radians.
    pub phi: f64,
    pub phi_lower: f64,
    /// Capped at π/2 when the signal-dominance condition fails; see `upper_valid`.
    pub phi_upper: f64,
    pub upper_valid: bool,
    /// `A_{n₊,δ}`.
    pub a_term: f64,
    /// `B_{n₊,δ}`.
    pub b_term: f64,
}

/// Class-mean angle and its `1−δ` bracket. Concentration radii use the
/// positive-class count; the bracket splits δ evenly over the two tails.
pub fn geometry(data: &Dataset, spec: &MixtureSpec, delta: f64) -> Result<GeometryReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if spec.s_plus.len() != data.d() {
        return Err(Error::Shape {
            expected: data.d(),
            got: spec.s_plus.len(),
        });
    }
    let xp = data.x_plus();
    let xp_norm = xp.dot(xp).sqrt();
    if xp_norm == 0.0 {
        return Err(Error::Degenerate("positive class sum is zero".into()));
    }
    let s = ArrayView1::from(&spec.s_plus[..]);
    let phi = (xp.dot(&s) / xp_norm).clamp(-1.0, 1.0).acos();

    let (d, n) = (data.d(), data.n_plus());
    let (k, sg) = (spec.kappa, spec.sigma);
    let a_half = ortho_lower_radius(d, n, delta / 2.0);
    let b_half = mean_upper_radius(d, n, delta / 2.0);
    let phi_lower = (sg * a_half / (k + sg * b_half)).min(1.0).asin();
    let (phi_upper, upper_valid) = if k > sg * b_half {
        ((sg * b_half / (k - sg * b_half)).min(1.0).asin(), true)
    } else {
        (std::f64::consts::FRAC_PI_2, false)
    };
    Ok(GeometryReport {
        phi,
        phi_lower,
        phi_upper,
        upper_valid,
        a_term: ortho_lower_radius(d, n, delta),
        b_term: mean_upper_radius(d, n, delta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationOutcome {
    /// Fraction of trials with `‖z̄‖ > B_{n,δ}`.
    pub mean_norm_violation: f64,
    /// Fraction of trials with `‖Π⊥ z̄‖ < A_{n,δ}`.
    pub ortho_norm_violation: f64,
}

/// Monte-Carlo frequency of the two Gaussian-mean tail events. Each trial
/// averages `n` fresh standard normal vectors; `Π⊥` projects out `e₀`.
pub fn concentration_check(
    d: usize,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationOutcome> {
    if d == 0 || n == 0 {
        return Err(Error::Parameter("d and n must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let upper = mean_upper_radius(d, n, delta);
    let lower = ortho_lower_radius(d, n, delta);
    let mut r = rng(seed);
    let mut mean = vec![0.0; d];
    let (mut v_norm, mut v_ortho) = (0usize, 0usize);
    for _ in 0..trials {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for _ in 0..n {
            for m in mean.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *m += z;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let sq: f64 = mean.iter().map(|m| m * m).sum();
        if sq.sqrt() > upper {
            v_norm += 1;
        }
        if (sq - mean[0] * mean[0]).max(0.0).sqrt() < lower {
            v_ortho += 1;
        }
    }
    Ok(ConcentrationOutcome {
        mean_norm_violation: v_norm as f64 / trials as f64,
        ortho_norm_violation: v_ortho as f64 / trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_point(x: Array2<f64>, y: Array1<f64>) -> Dataset {
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn template_shape() {
        let data = sample_dataset(&MixtureSpec::new(128, 1.5, 1.0, 50, 1)).unwrap();
        assert_eq!(data.x().dim(), (50, 128));
        assert_eq!(data.n_plus(), 25);
    }

    #[test]
    fn vanishing_noise_gives_pure_signal_rows() {
        let spec = MixtureSpec::new(6, 2.0, 1e-300, 10, 4);
        let data = sample_dataset(&spec).unwrap();
        for i in 0..data.n() {
            let expect = 2.0 * data.y()[i];
            assert_eq!(data.row(i)[0], expect);
            assert!(data.row(i).iter().skip(1).all(|&v| v.abs() < 1e-299));
        }
    }

    #[test]
    fn signed_mean_near_signal() {
        let spec = MixtureSpec::new(4, 2.0, 0.1, 20, 7);
        let data = sample_dataset(&spec).unwrap();
        // direct averaging of y_i x_i
        let mut m = [0.0; 4];
        for i in 0..data.n() {
            for k in 0..4 {
                m[k] += data.y()[i] * data.row(i)[k] / 20.0;
            }
        }
        let tol = 3.0 * 0.1 / (20f64).sqrt();
        for k in 0..4 {
            let target = 2.0 * spec.s_plus[k];
            assert!((m[k] - target).abs() <= tol, "coord {k}: {} vs {}", m[k], target);
        }
    }

    #[test]
    fn cached_stats_match_recomputation() {
        let data = sample_dataset(&MixtureSpec::new(9, 1.0, 0.7, 13, 3)).unwrap();
        let mut xp = Array1::<f64>::zeros(9);
        let mut xmax: f64 = 0.0;
        for i in 0..data.n() {
            xmax = xmax.max(data.row(i).dot(&data.row(i)).sqrt());
            if data.y()[i] > 0.0 {
                xp += &data.row(i);
            }
        }
        assert!((data.x_max() - xmax).abs() <= 1e-10 * xmax);
        for k in 0..9 {
            assert!((data.x_plus()[k] - xp[k]).abs() <= 1e-10 * (1.0 + xp[k].abs()));
        }
        assert_eq!(data.n_plus() + data.n_minus(), 13);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = MixtureSpec::new(4, 1.0, 1.0, 10, 0);
        s.sigma = 0.0;
        assert!(matches!(sample_dataset(&s), Err(Error::Parameter(_))));
        let mut s = MixtureSpec::new(4, 1.0, 1.0, 10, 0);
        s.s_plus = vec![1.0, 1.0, 0.0, 0.0];
        assert!(matches!(sample_dataset(&s), Err(Error::Parameter(_))));
        let mut s = MixtureSpec::new(4, 1.0, 1.0, 2, 0);
        s.balance = 0.9;
        assert!(matches!(sample_dataset(&s), Err(Error::Configuration(_))));
    }

    #[test]
    fn separability_trivial_pairs() {
        let anti = two_point(array![[1.0, 0.0], [-1.0, 0.0]], array![1.0, -1.0]);
        let rep = measure_separability(&anti, 0.0).unwrap();
        assert!((rep.lambda_hat - 1.0).abs() < 1e-15);

        let ortho = two_point(
            array![[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]],
            array![1.0, 1.0, -1.0],
        );
        let rep = measure_separability(&ortho, 0.0).unwrap();
        assert_eq!(rep.argmin, (0, 1));
        assert!(rep.lambda_hat.abs() < 1e-15);
    }

    #[test]
    fn separability_rejects_zero_rows() {
        let d = two_point(array![[0.0, 0.0], [1.0, 0.0]], array![1.0, -1.0]);
        assert!(matches!(measure_separability(&d, 0.0), Err(Error::Data(_))));
    }

    #[test]
    fn separability_matches_pair_scan_on_template() {
        let data = sample_dataset(&MixtureSpec::new(128, 1.5, 1.0, 50, 11)).unwrap();
        let rep = measure_separability(&data, 0.05).unwrap();
        // independent scalar pair loop
        let mut best = f64::INFINITY;
        for i in 0..data.n() {
            for j in 0..data.n() {
                if i == j {
                    continue;
                }
                let (a, b) = (data.row(i), data.row(j));
                let c = data.y()[i] * data.y()[j] * a.dot(&b)
                    / (a.dot(&a).sqrt() * b.dot(&b).sqrt());
                best = best.min(c);
            }
        }
        assert!((rep.lambda_hat - best).abs() < 1e-12);
        assert!(rep.lambda_hat < 0.0);
        assert!(!rep.satisfied);
        let (i, j) = rep.argmin;
        let (a, b) = (data.row(i), data.row(j));
        let at = data.y()[i] * data.y()[j] * a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt());
        assert!((at - rep.lambda_hat).abs() < 1e-12);
    }

    #[test]
    fn rejection_sampling_paths() {
        let easy = MixtureSpec::new(8, 5.0, 0.2, 10, 21);
        let got = rejection_sample_separable(&easy, 0.05, 20).unwrap();
        assert!(got.report.lambda_hat >= 0.05);
        assert!(got.attempts <= 5);

        let hard = MixtureSpec::new(8, 1.0, 1.0, 10, 21);
        match rejection_sample_separable(&hard, 0.99, 5) {
            Err(Error::SamplingFailure { tries, best_lambda }) => {
                assert_eq!(tries, 5);
                assert!(best_lambda < 0.99);
            }
            other => panic!("expected sampling failure, got {other:?}"),
        }

        let first = rejection_sample_separable(&hard, 0.0, 1).unwrap();
        assert_eq!(first.attempts, 1);
        assert_eq!(first.data, sample_dataset(&hard).unwrap());
    }

    #[test]
    fn geometry_noise_free_limit() {
        let spec = MixtureSpec::new(5, 1.0, 1e-300, 12, 2);
        let data = sample_dataset(&spec).unwrap();
        let g = geometry(&data, &spec, 0.1).unwrap();
        assert_eq!(g.phi, 0.0);
        assert!(g.phi_lower < 1e-250);
        assert!(g.upper_valid);
    }

    #[test]
    fn geometry_consistency_identity() {
        let spec = MixtureSpec::new(32, 1.0, 1.0, 40, 5);
        let data = sample_dataset(&spec).unwrap();
        let g = geometry(&data, &spec, 0.1).unwrap();
        let xp = data.x_plus();
        let lhs = g.phi.cos() * xp.dot(xp).sqrt();
        let rhs = xp[0];
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        assert!(g.phi_lower <= g.phi_upper);
    }

    #[test]
    fn phi_lower_trends_to_right_angle_with_dimension() {
        let lows: Vec<f64> = [16usize, 256, 4096]
            .iter()
            .map(|&d| {
                let spec = MixtureSpec::new(d, 1.0, 1.0, 40, 9);
                let data = sample_dataset(&spec).unwrap();
                geometry(&data, &spec, 0.1).unwrap().phi_lower
            })
            .collect();
        assert!(lows[0] < lows[1] && lows[1] < lows[2]);
        assert!(lows[2] > 1.0, "phi_lower at d=4096 = {}", lows[2]);
    }

    #[test]
    fn concentration_formula_limits() {
        // δ → 1⁻ : radius → √d/√n
        let r = mean_upper_radius(16, 4, 1.0 - 1e-12);
        assert!((r - 2.0).abs() < 1e-5);
        assert!(ortho_lower_radius(16, 4, 1.0 - 1e-12).is_finite());
        // d = 1 : orthogonal bound floors at zero, never violated
        assert_eq!(ortho_lower_radius(1, 10, 0.1), 0.0);
        let out = concentration_check(1, 10, 0.1, 200, 3).unwrap();
        assert_eq!(out.ortho_norm_violation, 0.0);
    }

    #[test]
    fn concentration_frequencies_respect_tail_bounds() {
        for &(d, n) in &[(8usize, 20usize), (32, 5)] {
            let delta = 0.1;
            let trials = 1000;
            let out = concentration_check(d, n, delta, trials, 17).unwrap();
            let slack = 3.0 * (delta / trials as f64).sqrt();
            assert!(out.mean_norm_violation <= delta + slack);
            assert!(out.ortho_norm_violation <= delta + slack);
        }
    }
}
