//! Closed-form quantities: the phase-1 alignment bounds, the phase-2 decay
//! bound, population errors of linear predictors on the mixture, the optimal
//! point `v*` of an alignment cap, and the over-alignment / over-fitting
//! split of the excess error.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::mixture::Dataset;
use crate::numeric::{dot, fmt17, gauss_hermite, logistic_loss, norm, norm_cdf};

/// Scalars feeding every bound. `n_plus` stands in for the sample count
/// throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub alpha: f64,
    pub n_plus: usize,
    pub h: usize,
    pub x_max: f64,
    pub x_min: f64,
    pub w_ref_max: f64,
    pub lambda: f64,
    pub x_plus_norm: f64,
    pub t1: f64,
    pub t_alpha: f64,
    pub t2: f64,
    pub risk_at_t_alpha: f64,
    pub risk_at_t2: f64,
    pub eta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub d: usize,
    pub phi: f64,
    pub psi_at_stop: f64,
    pub delta: f64,
    /// The unspecified constant in `c(σ, d) = C(1 + σ√d)`.
    pub c_complexity: f64,
}

fn nu(inp: &BoundInputs) -> f64 {
    4.0 * inp.n_plus as f64 * (inp.h as f64).sqrt() * inp.x_max.powi(2) * inp.w_ref_max.powi(2)
        / inp.x_plus_norm
}

/// `ζ(α) = 1 − 4 α n₊ √h x_max² W²_max / ‖x₊‖`. Negative values make the
/// phase-1 bound vacuous.
pub fn zeta(inp: &BoundInputs) -> f64 {
    1.0 - inp.alpha * nu(inp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    /// The bound carries no information (clamped or preconditions unmet).
    pub vacuous: bool,
}

/// `√ζ · tanh((t_α − t₁) ‖x₊‖ √ζ)`, a lower bound on every `ψ_j(t_α)`,
/// `j ∈ V₊`, and on `Ψ(t_α)`.
pub fn phase1_lower(inp: &BoundInputs) -> Flagged {
    let z = zeta(inp);
    if z < 0.0 || inp.t_alpha < inp.t1 {
        return Flagged {
            value: 0.0,
            vacuous: true,
        };
    }
    let s = z.sqrt();
    Flagged {
        value: s * ((inp.t_alpha - inp.t1) * inp.x_plus_norm * s).tanh(),
        vacuous: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleBound {
    /// Radians; π/2 when vacuous.
    pub value: f64,
    pub vacuous: bool,
    /// Whether `‖x₊‖/n₊ < 4 x_max` holds.
    pub precondition: bool,
}

/// Upper bound on the angle between each positive-cone neuron and `x₊` at
/// `t_α`:
/// `arcsin √(να + 4(1−να) e^{2t₁‖x₊‖√(1−να)} (hα)^{‖x₊‖√(1−να)/(4n₊x_max)})`.
pub fn phase1_angle_upper(inp: &BoundInputs) -> AngleBound {
    let precondition = inp.x_plus_norm / (inp.n_plus as f64) < 4.0 * inp.x_max;
    let na = nu(inp) * inp.alpha;
    let vacuous = AngleBound {
        value: FRAC_PI_2,
        vacuous: true,
        precondition,
    };
    if !(na < 1.0) {
        return vacuous;
    }
    let r = (1.0 - na).sqrt();
    let expo = inp.x_plus_norm * r / (4.0 * inp.n_plus as f64 * inp.x_max);
    let arg = na
        + 4.0 * (1.0 - na) * (2.0 * inp.t1 * inp.x_plus_norm * r).exp()
            * (inp.h as f64 * inp.alpha).powf(expo);
    if !(arg < 1.0) {
        return vacuous;
    }
    AngleBound {
        value: arg.max(0.0).sqrt().asin(),
        vacuous: false,
        precondition,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Bound {
    pub value: f64,
    pub beta: f64,
    pub m: f64,
    pub g_flow: f64,
}

/// `λ + m e^{−g_flow}` with `β = λ² x_min² / (32 x_max)`, `m = ψ(t_α) − λ`
/// and `g_flow = x_max n₊ ((t₂ − t_α) L(t_α) + β⁻¹ log(L(t₂)/η))`.
pub fn phase2_lower(inp: &BoundInputs, psi_at_t_alpha: f64) -> Result<Phase2Bound> {
    if !(inp.lambda > 0.0) {
        return Err(Error::Inapplicable(format!(
            "phase-2 bound needs lambda > 0, got {}",
            inp.lambda
        )));
    }
    if inp.eta > inp.risk_at_t2 {
        return Err(Error::Ordering(format!(
            "eta = {} exceeds the risk at t2 = {}",
            inp.eta, inp.risk_at_t2
        )));
    }
    let beta = inp.lambda.powi(2) * inp.x_min.powi(2) / (32.0 * inp.x_max);
    let m = psi_at_t_alpha - inp.lambda;
    let g_flow = inp.x_max
        * inp.n_plus as f64
        * ((inp.t2 - inp.t_alpha) * inp.risk_at_t_alpha + (inp.risk_at_t2 / inp.eta).ln() / beta);
    Ok(Phase2Bound {
        value: inp.lambda + m * (-g_flow).exp(),
        beta,
        m,
        g_flow,
    })
}

/// Population 0-1 error of `x ↦ sign⟨w, x⟩`: `Φ(−κ⟨w/‖w‖, s₊⟩/σ)`.
pub fn zero_one_error(w: &[f64], kappa: f64, sigma: f64, s_plus: &[f64]) -> Result<f64> {
    if w.len() != s_plus.len() {
        return Err(Error::Shape {
            expected: s_plus.len(),
            got: w.len(),
        });
    }
    let nw = norm(w);
    if nw == 0.0 {
        return Err(Error::Degenerate("zero predictor".into()));
    }
    Ok(norm_cdf(-kappa * dot(w, s_plus) / nw / sigma))
}

/// `Φ(−κ/σ)`.
pub fn bayes_error(kappa: f64, sigma: f64) -> f64 {
    norm_cdf(-kappa / sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStar {
    pub v: Vec<f64>,
    /// `s₊` already lies in the cap, so `v* = s₊`.
    pub signal_inside: bool,
    /// `x₊ ∥ s₊`; the interpolation is undefined and `x̄₊` is returned.
    pub colinear: bool,
    /// Angle between `x₊` and `s₊`.
    pub phi: f64,
}

/// Unit vector in the cap `{v : ⟨v, x̄₊⟩ ≥ Ψ}` with the largest inner
/// product with `s₊`.
pub fn v_star(psi: f64, x_plus: &[f64], s_plus: &[f64]) -> Result<VStar> {
    if !(-1.0..=1.0).contains(&psi) {
        return Err(Error::Parameter(format!("Psi must lie in [-1,1], got {psi}")));
    }
    if x_plus.len() != s_plus.len() {
        return Err(Error::Shape {
            expected: x_plus.len(),
            got: s_plus.len(),
        });
    }
    let (nx, ns) = (norm(x_plus), norm(s_plus));
    if nx == 0.0 || ns == 0.0 {
        return Err(Error::Degenerate("x_plus and s_plus must be nonzero".into()));
    }
    let xb: Vec<f64> = x_plus.iter().map(|x| x / nx).collect();
    let sb: Vec<f64> = s_plus.iter().map(|s| s / ns).collect();
    let cos_phi = dot(&xb, &sb).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    if psi <= cos_phi {
        return Ok(VStar {
            v: sb,
            signal_inside: true,
            colinear: phi == 0.0,
            phi,
        });
    }
    let sin_phi = phi.sin();
    if phi == 0.0 || phi == PI || sin_phi == 0.0 {
        return Ok(VStar {
            v: xb,
            signal_inside: false,
            colinear: true,
            phi,
        });
    }
    let pb = psi.acos();
    let (a, b) = ((phi - pb).sin() / sin_phi, pb.sin() / sin_phi);
    let v = xb.iter().zip(&sb).map(|(x, s)| a * x + b * s).collect();
    Ok(VStar {
        v,
        signal_inside: false,
        colinear: false,
        phi,
    })
}

/// Over-alignment `Φ(−κ⟨v*, s₊⟩/σ) − Φ(−κ/σ)`.
pub fn oa_term(psi: f64, kappa: f64, sigma: f64, x_plus: &[f64], s_plus: &[f64]) -> Result<f64> {
    let vs = v_star(psi, x_plus, s_plus)?;
    Ok((zero_one_error(&vs.v, kappa, sigma, s_plus)? - bayes_error(kappa, sigma)).max(0.0))
}

/// `Ψ√(cos²φ + σ²) + √(1−Ψ²)√(sin²φ + σ²(d−1))`.
pub fn g_geom(psi: f64, phi: f64, sigma: f64, d: usize) -> f64 {
    let s2 = sigma * sigma;
    psi * (phi.cos().powi(2) + s2).sqrt()
        + (1.0 - psi * psi).max(0.0).sqrt() * (phi.sin().powi(2) + s2 * (d as f64 - 1.0)).sqrt()
}

/// Maximizer of `g_geom` over Ψ: `√((cos²φ + σ²)/(1 + σ²d))`.
pub fn g_geom_critical(phi: f64, sigma: f64, d: usize) -> f64 {
    let s2 = sigma * sigma;
    ((phi.cos().powi(2) + s2) / (1.0 + s2 * d as f64)).sqrt()
}

/// `2(1+e^κ)/(σ√(2π)) · (4 g_geom/√n₊ + η + C(1+σ√d)√(log(2/δ)/n₊))`.
pub fn of_bound(inp: &BoundInputs) -> Result<f64> {
    if inp.n_plus == 0 {
        return Err(Error::Parameter("n_plus must be >= 1".into()));
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0,1), got {}", inp.delta)));
    }
    if !(inp.c_complexity > 0.0) {
        return Err(Error::Parameter("complexity constant must be > 0".into()));
    }
    let n = inp.n_plus as f64;
    let pre = 2.0 * (1.0 + inp.kappa.exp()) / (inp.sigma * (2.0 * PI).sqrt());
    let g = g_geom(inp.psi_at_stop, inp.phi, inp.sigma, inp.d);
    let c = inp.c_complexity * (1.0 + inp.sigma * (inp.d as f64).sqrt());
    Ok(pre * (4.0 / n.sqrt() * g + inp.eta + c * ((2.0 / inp.delta).ln() / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub oa_exact: f64,
    pub of_exact: f64,
    pub excess_exact: f64,
    pub oa_bound_term: f64,
    pub of_bound_term: f64,
    pub g_geom: f64,
    pub v_star: Vec<f64>,
    pub psi_used: f64,
    pub bayes_error: f64,
    pub error_w_hat: f64,
    /// `‖ŵ‖ ≤ 1`.
    pub norm_ok: bool,
    /// `⟨ŵ, x_i⟩ ≥ 0` on every positive training sample.
    pub margins_ok: bool,
}

/// Splits the excess error of `w_hat` at the cap of level `psi`:
/// `E(ŵ) − E* = [E(v*) − E*] + [E(ŵ) − E(v*)]`.
pub fn decompose(
    w_hat: &[f64],
    psi: f64,
    inp: &BoundInputs,
    data: &Dataset,
    s_plus: &[f64],
) -> Result<ErrorDecomposition> {
    let (kappa, sigma) = (inp.kappa, inp.sigma);
    let err_w = zero_one_error(w_hat, kappa, sigma, s_plus)?;
    let x_plus = data.x_plus().to_vec();
    let vs = v_star(psi, &x_plus, s_plus)?;
    let err_v = zero_one_error(&vs.v, kappa, sigma, s_plus)?;
    let bayes = bayes_error(kappa, sigma);
    let oa = err_v - bayes;
    let margins_ok = data
        .positive_indices()
        .iter()
        .all(|&i| data.row(i).iter().zip(w_hat).map(|(a, b)| a * b).sum::<f64>() >= 0.0);
    Ok(ErrorDecomposition {
        oa_exact: oa,
        of_exact: err_w - err_v,
        excess_exact: err_w - bayes,
        oa_bound_term: oa,
        of_bound_term: of_bound(&BoundInputs {
            psi_at_stop: psi,
            ..*inp
        })?,
        g_geom: g_geom(psi, inp.phi, sigma, inp.d),
        v_star: vs.v,
        psi_used: psi,
        bayes_error: bayes,
        error_w_hat: err_w,
        norm_ok: norm(w_hat) <= 1.0,
        margins_ok,
    })
}

/// `E_G[ℓ(κ⟨w, s₊⟩ + σG)]` for unit `w` by Gauss–Hermite quadrature.
pub fn population_logistic_risk(
    w: &[f64],
    kappa: f64,
    sigma: f64,
    s_plus: &[f64],
    nodes: usize,
) -> Result<f64> {
    if nodes < 20 {
        return Err(Error::Parameter(format!("need at least 20 nodes, got {nodes}")));
    }
    if w.len() != s_plus.len() {
        return Err(Error::Shape {
            expected: s_plus.len(),
            got: w.len(),
        });
    }
    if (norm(w) - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter("w must be a unit vector".into()));
    }
    let mu = kappa * dot(w, s_plus);
    let (x, wt) = gauss_hermite(nodes);
    let s: f64 = x
        .iter()
        .zip(&wt)
        .map(|(xi, wi)| wi * logistic_loss(mu + sigma * std::f64::consts::SQRT_2 * xi))
        .sum();
    Ok(s / PI.sqrt())
}

/// One row of the bound report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub alpha: f64,
    pub eta: f64,
    pub psi_stop: f64,
    pub phi: f64,
    pub zeta: f64,
    pub phase1_lb: f64,
    /// NaN when the phase-2 bound is inapplicable.
    pub phase2_lb: f64,
    pub oa: f64,
    pub of_exact: f64,
    pub of_bound: f64,
    pub excess: f64,
    pub g_geom: f64,
    pub g_flow: f64,
    pub bayes: f64,
}

pub const BOUND_CSV_HEADER: &str =
    "alpha,eta,psi_stop,phi,zeta,phase1_lb,phase2_lb,OA,OF_exact,OF_bound,excess,g_geom,g_flow,bayes";

impl BoundRow {
    pub fn csv_line(&self) -> String {
        [
            self.alpha,
            self.eta,
            self.psi_stop,
            self.phi,
            self.zeta,
            self.phase1_lb,
            self.phase2_lb,
            self.oa,
            self.of_exact,
            self.of_bound,
            self.excess,
            self.g_geom,
            self.g_flow,
            self.bayes,
        ]
        .iter()
        .map(|&x| fmt17(x))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn base() -> BoundInputs {
        BoundInputs {
            alpha: 1e-6,
            n_plus: 25,
            h: 64,
            x_max: 12.0,
            x_min: 9.0,
            w_ref_max: 13.0,
            lambda: 0.05,
            x_plus_norm: 60.0,
            t1: 0.0,
            t_alpha: 0.01,
            t2: 0.012,
            risk_at_t_alpha: 0.69,
            risk_at_t2: 0.6,
            eta: 0.05,
            sigma: 1.0,
            kappa: 1.5,
            d: 128,
            phi: 1.2,
            psi_at_stop: 0.8,
            delta: 0.1,
            c_complexity: 1.0,
        }
    }

    fn unit(d: usize, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        e
    }

    #[test]
    fn zeta_endpoints() {
        let mut inp = base();
        inp.alpha = 0.0;
        assert_eq!(zeta(&inp), 1.0);
        inp.alpha = inp.x_plus_norm
            / (4.0 * 25.0 * 8.0 * inp.x_max.powi(2) * inp.w_ref_max.powi(2));
        assert!(zeta(&inp).abs() < 1e-14);
    }

    #[test]
    fn phase1_lower_limits() {
        let mut inp = base();
        inp.t1 = inp.t_alpha;
        let b = phase1_lower(&inp);
        assert_eq!(b.value, 0.0);
        assert!(!b.vacuous);
        inp.alpha = 0.0;
        inp.t1 = 0.0;
        inp.t_alpha = 1e3;
        assert!((phase1_lower(&inp).value - 1.0).abs() < 1e-15);
        inp.alpha = 1.0;
        assert!(phase1_lower(&inp).vacuous);
    }

    #[test]
    fn phase1_lower_non_increasing_on_alpha_grid() {
        let mut prev = f64::INFINITY;
        for a in crate::numeric::logspace(1e-10, 1e-5, 30) {
            let mut inp = base();
            inp.alpha = a;
            // t_α for this α with the same stats
            inp.t_alpha = crate::flow::t_alpha(a, inp.n_plus, inp.x_max, inp.h).value;
            inp.t1 = 0.002;
            let b = phase1_lower(&inp).value;
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn angle_bound_limits_and_clamp() {
        let mut inp = base();
        inp.alpha = 1e-300;
        let tiny = phase1_angle_upper(&inp);
        assert!(tiny.value < 1e-3 && !tiny.vacuous);
        inp.alpha = 1.0 / nu(&inp);
        let at = phase1_angle_upper(&inp);
        assert!(at.vacuous && at.value == FRAC_PI_2);
        assert!(at.precondition);
    }

    /// Log-log slope of a positive function over `[lo, hi]` by least squares.
    fn slope(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let xs = crate::numeric::logspace(lo, hi, 25);
        let pts: Vec<(f64, f64)> = xs.iter().map(|&a| (a.ln(), f(a).ln())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn angle_bound_decay_rate() {
        // Well-conditioned stats so the bound is informative over the range.
        let inp = BoundInputs {
            n_plus: 10,
            h: 1,
            x_max: 2.0,
            w_ref_max: 0.05,
            x_plus_norm: 18.0,
            ..base()
        };
        let rate = (0.5f64).min(inp.x_plus_norm / (8.0 * 10.0 * inp.x_max));
        let at = |a: f64| phase1_angle_upper(&BoundInputs { alpha: a, ..inp });
        assert!(!at(1e-3).vacuous);
        // sin of the bound decays at the stated rate over the stated range
        let s = slope(|a| at(a).value.sin(), 1e-6, 1e-3);
        assert!((s / rate - 1.0).abs() < 0.15, "sine slope {s} vs {rate}");
        // the angle itself follows once arcsin is near-linear
        let s = slope(|a| at(a).value, 1e-30, 1e-24);
        assert!((s / rate - 1.0).abs() < 0.15, "angle slope {s} vs {rate}");
    }

    #[test]
    fn phase2_cases() {
        let mut inp = base();
        inp.t2 = inp.t_alpha;
        inp.eta = inp.risk_at_t2;
        let b = phase2_lower(&inp, 0.7).unwrap();
        assert_eq!(b.g_flow, 0.0);
        assert!((b.value - 0.7).abs() < 1e-15);
        let b = phase2_lower(&base(), base().lambda).unwrap();
        assert_eq!(b.value, base().lambda);
        let mut inp = base();
        inp.lambda = 0.0;
        assert!(matches!(phase2_lower(&inp, 0.7), Err(Error::Inapplicable(_))));
        let mut inp = base();
        inp.eta = 0.65;
        assert!(matches!(phase2_lower(&inp, 0.7), Err(Error::Ordering(_))));
        // β by hand
        let b = phase2_lower(&base(), 0.7).unwrap();
        assert!((b.beta - 0.0025 * 81.0 / (32.0 * 12.0)).abs() < 1e-18);
    }

    #[test]
    fn zero_one_error_reference_values() {
        let s = unit(4, 0);
        assert!((zero_one_error(&s, 1.0, 1.0, &s).unwrap() - 0.158_655_253_931_457).abs() < 1e-12);
        assert_eq!(zero_one_error(&unit(4, 1), 1.0, 1.0, &s).unwrap(), 0.5);
        assert!(matches!(zero_one_error(&[0.0; 4], 1.0, 1.0, &s), Err(Error::Degenerate(_))));
        let w = [0.3, -0.2, 0.9, 0.1];
        let w7: Vec<f64> = w.iter().map(|x| 7.3 * x).collect();
        assert_eq!(
            zero_one_error(&w, 1.5, 0.8, &s).unwrap(),
            zero_one_error(&w7, 1.5, 0.8, &s).unwrap()
        );
    }

    #[test]
    fn bayes_error_is_the_directional_minimum() {
        let (kappa, sigma, d) = (1.5, 1.0, 8);
        let s = unit(d, 0);
        let bayes = bayes_error(kappa, sigma);
        assert!((bayes_error(1.0, 1.0) - 0.158_655_253_931_457).abs() < 1e-12);
        assert!(bayes_error(1.0, 1e-3) < 1e-300);
        assert_eq!(zero_one_error(&s, kappa, sigma, &s).unwrap(), bayes);
        let mut r = rng(7);
        let mut best = f64::INFINITY;
        for _ in 0..10_000 {
            let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
            let e = zero_one_error(&w, kappa, sigma, &s).unwrap();
            assert!(e >= bayes);
            best = best.min(e);
        }
        // the best random direction is within a few hundredths of Bayes
        assert!(best - bayes < 0.05);
    }

    /// Maximizes ⟨v, s₊⟩ over unit vectors in span{x̄₊, s₊} at cosine ≥ Ψ
    /// with x̄₊, by golden-section search on the in-plane angle.
    fn plane_oracle(psi: f64, xb: &[f64], sb: &[f64]) -> f64 {
        let c = dot(xb, sb);
        let u: Vec<f64> = sb.iter().zip(xb).map(|(s, x)| s - c * x).collect();
        let nu = norm(&u);
        let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let val = |th: f64| {
            let v: Vec<f64> = xb.iter().zip(&u).map(|(x, y)| th.cos() * x + th.sin() * y).collect();
            dot(&v, sb)
        };
        let (mut lo, mut hi) = (0.0, psi.acos());
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if val(a) < val(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        val(0.5 * (lo + hi))
    }

    fn random_plane(seed: u64, d: usize, phi: f64) -> (Vec<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let b: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let na = norm(&a);
        let xb: Vec<f64> = a.iter().map(|x| x / na).collect();
        let c = dot(&b, &xb);
        let perp: Vec<f64> = b.iter().zip(&xb).map(|(b, x)| b - c * x).collect();
        let np = norm(&perp);
        let s = xb
            .iter()
            .zip(&perp)
            .map(|(x, p)| phi.cos() * x + phi.sin() * p / np)
            .collect();
        (xb, s)
    }

    #[test]
    fn v_star_cases() {
        let (xb, s) = random_plane(3, 30, 0.7);
        let x3: Vec<f64> = xb.iter().map(|x| 3.0 * x).collect();
        // Ψ = 1: the cap is the ray x̄₊
        let vs = v_star(1.0, &x3, &s).unwrap();
        for (a, b) in vs.v.iter().zip(&xb) {
            assert!((a - b).abs() < 1e-12);
        }
        // signal inside the cap
        let vs = v_star(0.7f64.cos() - 0.01, &x3, &s).unwrap();
        assert!(vs.signal_inside);
        assert_eq!(vs.v, s);
        assert_eq!(oa_term(0.7f64.cos() - 0.01, 1.5, 1.0, &x3, &s).unwrap(), 0.0);
        // generic point
        let vs = v_star(0.9, &x3, &s).unwrap();
        assert!((norm(&vs.v) - 1.0).abs() < 1e-10);
        assert!((dot(&vs.v, &xb) - 0.9).abs() < 1e-10);
        assert!((dot(&vs.v, &s) - plane_oracle(0.9, &xb, &s)).abs() < 1e-6);
        // colinear
        let vs = v_star(0.99, &x3, &xb).unwrap();
        assert!(vs.signal_inside || vs.colinear);
        let neg: Vec<f64> = xb.iter().map(|x| -x).collect();
        assert!(v_star(0.5, &x3, &neg).unwrap().colinear);
    }

    #[test]
    fn oa_apex_value() {
        let (xb, s) = random_plane(4, 10, FRAC_PI_2);
        let oa = oa_term(1.0, 1.5, 1.0, &xb, &s).unwrap();
        assert!((oa - (0.5 - norm_cdf(-1.5))).abs() < 1e-12);
    }

    #[test]
    fn oa_monotone_in_psi() {
        let phi = 1.1;
        let (xb, s) = random_plane(5, 20, phi);
        let mut prev = -1.0;
        for k in 0..=200 {
            let psi = phi.cos() + (1.0 - phi.cos()) * k as f64 / 200.0;
            let oa = oa_term(psi.min(1.0), 2.0, 0.7, &xb, &s).unwrap();
            assert!(oa >= prev - 1e-15);
            prev = oa;
        }
    }

    #[test]
    fn g_geom_endpoints_and_critical_point() {
        let (phi, sigma, d) = (0.9, 0.6, 50);
        assert!((g_geom(1.0, phi, sigma, d) - (phi.cos().powi(2) + 0.36f64).sqrt()).abs() < 1e-15);
        assert!((g_geom(0.0, phi, sigma, d) - (phi.sin().powi(2) + 0.36 * 49.0).sqrt()).abs() < 1e-12);
        let crit = g_geom_critical(phi, sigma, d);
        let deriv = |p: f64| (g_geom(p + 1e-7, phi, sigma, d) - g_geom(p - 1e-7, phi, sigma, d)) / 2e-7;
        assert!(deriv(crit - 1e-3) > 0.0 && deriv(crit + 1e-3) < 0.0);
    }

    #[test]
    fn of_bound_limits_and_prefactor() {
        let mut inp = base();
        let b = of_bound(&inp).unwrap();
        assert!(b.is_finite() && b > 0.0);
        inp.eta = 0.0;
        inp.n_plus = usize::MAX / 4;
        assert!(of_bound(&inp).unwrap() < 1e-6);

        let pre = |k: f64| {
            let i = BoundInputs { kappa: k, ..base() };
            of_bound(&i).unwrap()
        };
        let k = 1.3;
        let ratio = pre(2.0 * k) / pre(k);
        assert!((ratio - (1.0 + (2.0 * k).exp()) / (1.0 + k.exp())).abs() < 1e-12);
    }

    #[test]
    fn of_bound_grows_with_psi_past_critical() {
        // with σ²d small relative to cos²φ the critical point is interior
        let inp = BoundInputs {
            sigma: 0.05,
            d: 16,
            phi: 0.3,
            ..base()
        };
        let crit = g_geom_critical(inp.phi, inp.sigma, inp.d);
        let mut prev = 0.0;
        let mut first = true;
        for k in 0..=50 {
            let psi = crit + (1.0 - crit) * k as f64 / 50.0;
            let b = of_bound(&BoundInputs { psi_at_stop: psi, ..inp }).unwrap();
            if !first {
                // g_geom is decreasing past the critical point
                assert!(b <= prev + 1e-12);
            }
            prev = b;
            first = false;
        }
    }

    #[test]
    fn population_risk_cases() {
        let s = unit(3, 0);
        let r = population_logistic_risk(&s, 1.0, 1e-12, &s, 40).unwrap();
        assert!((r - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-9);
        assert!(population_logistic_risk(&s, 1.0, 1.0, &s, 10).is_err());
        assert!(population_logistic_risk(&[2.0, 0.0, 0.0], 1.0, 1.0, &s, 40).is_err());
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let c = -1.0 + 2.0 * k as f64 / 20.0;
            let w = [c, (1.0 - c * c).sqrt(), 0.0];
            let r = population_logistic_risk(&w, 1.5, 1.0, &s, 60).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn population_risk_matches_monte_carlo() {
        let s = unit(2, 0);
        let w = unit(2, 1);
        let q = population_logistic_risk(&w, 1.0, 1.0, &s, 80).unwrap();
        let mut r = rng(99);
        let m = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..m {
            let g: f64 = StandardNormal.sample(&mut r);
            let l = logistic_loss(g);
            sum += l;
            sq += l * l;
        }
        let mean = sum / m as f64;
        let se = ((sq / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((q - mean).abs() <= 3.0 * se, "quadrature {q} vs mc {mean} ± {se}");
    }

    #[test]
    fn decomposition_trivial_cases() {
        let spec = crate::mixture::MixtureSpec::new(6, 1.5, 1.0, 20, 1);
        let data = crate::mixture::sample_dataset(&spec).unwrap();
        let s = spec.s_plus.clone();
        let xp = data.x_plus().to_vec();
        let cos_phi = dot(&xp, &s) / norm(&xp);
        let inp = BoundInputs {
            phi: cos_phi.acos(),
            d: 6,
            ..base()
        };
        let dec = decompose(&s, cos_phi - 0.01, &inp, &data, &s).unwrap();
        assert_eq!(dec.oa_exact, 0.0);
        assert_eq!(dec.of_exact, 0.0);
        assert_eq!(dec.excess_exact, 0.0);
        let psi = 1.0 - (1.0 - cos_phi) / 4.0;
        let vs = v_star(psi, &xp, &s).unwrap();
        let dec = decompose(&vs.v, psi, &inp, &data, &s).unwrap();
        assert_eq!(dec.of_exact, 0.0);
        assert!(dec.oa_exact > 0.0);
    }

    #[test]
    fn bound_row_has_header_arity() {
        let row = BoundRow {
            alpha: 1.0,
            eta: 0.05,
            psi_stop: 0.9,
            phi: 1.0,
            zeta: 0.5,
            phase1_lb: 0.3,
            phase2_lb: f64::NAN,
            oa: 0.0,
            of_exact: 0.0,
            of_bound: 1.0,
            excess: 0.0,
            g_geom: 1.0,
            g_flow: f64::NAN,
            bayes: 0.1,
        };
        assert_eq!(row.csv_line().split(',').count(), BOUND_CSV_HEADER.split(',').count());
    }

    proptest! {
        #[test]
        fn decomposition_identity_and_signs(seed in 0u64..500, psi in 0.0f64..1.0) {
            let spec = crate::mixture::MixtureSpec::new(12, 1.5, 1.0, 20, seed);
            let data = crate::mixture::sample_dataset(&spec).unwrap();
            let mut r = rng(seed + 1);
            let w: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut r)).collect();
            let inp = BoundInputs { d: 12, ..base() };
            let dec = decompose(&w, psi, &inp, &data, &spec.s_plus).unwrap();
            prop_assert!((dec.oa_exact + dec.of_exact - dec.excess_exact).abs() <= 1e-12);
            prop_assert!(dec.oa_exact >= 0.0);
            for p in [dec.bayes_error, dec.error_w_hat] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            // inside the cap the predictor cannot beat v*
            let xp = data.x_plus().to_vec();
            if dot(&w, &xp) / (norm(&w) * norm(&xp)) >= psi {
                prop_assert!(dec.of_exact >= -1e-15);
            }
        }

        #[test]
        fn v_star_feasible_and_optimal(seed in 0u64..300, phi in 0.05f64..3.0, psi in -0.99f64..1.0) {
            let (xb, s) = random_plane(seed, 7, phi);
            let vs = v_star(psi, &xb, &s).unwrap();
            prop_assert!((norm(&vs.v) - 1.0).abs() < 1e-10);
            prop_assert!(dot(&vs.v, &xb) >= psi - 1e-10);
            if !vs.signal_inside {
                prop_assert!((dot(&vs.v, &s) - plane_oracle(psi, &xb, &s)).abs() < 1e-6);
            }
        }

        #[test]
        fn g_geom_unimodal(phi in 0.0f64..FRAC_PI_2, sigma in 0.05f64..2.0, d in 2usize..200) {
            let crit = g_geom_critical(phi, sigma, d);
            let gc = g_geom(crit, phi, sigma, d);
            for k in 0..=40 {
                let p = k as f64 / 40.0;
                prop_assert!(g_geom(p, phi, sigma, d) <= gc + 1e-12);
            }
        }

        #[test]
        fn phase1_bounds_consistent(a in 1e-12f64..1e-4, t1 in 0.0f64..0.005) {
            let mut inp = base();
            inp.alpha = a;
            inp.t1 = t1;
            inp.t_alpha = crate::flow::t_alpha(a, inp.n_plus, inp.x_max, inp.h).value;
            let lo = phase1_lower(&inp);
            let up = phase1_angle_upper(&inp);
            prop_assert!((0.0..=1.0).contains(&lo.value));
            prop_assert!(up.value.cos() <= 1.0 && up.value >= 0.0 && up.value <= FRAC_PI_2);
        }
    }
}
