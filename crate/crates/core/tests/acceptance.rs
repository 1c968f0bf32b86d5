//! The ten acceptance criteria. Each prints one PASS/FAIL line; every
//! tolerance is restated here as a literal so that loosening a suite's limit
//! cannot silently pass.

use std::time::Instant;

use flslab::sweep::{self, RowStatus, SweepSpec};
use flslab::verify::{run_suite, Check, Suite, SuiteOutcome, VerifyOptions};

struct Line {
    id: usize,
    title: &'static str,
    passed: bool,
    seconds: f64,
    budget: f64,
    detail: String,
}

fn checks<'a>(o: &'a SuiteOutcome, prefix: &str) -> Vec<&'a Check> {
    let v: Vec<&Check> = o.checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    assert!(!v.is_empty(), "{}: no check named {prefix}*", o.suite);
    v
}

/// Every check under `prefix` has limit `limit` and a value at most `limit`.
fn all_at_most(o: &SuiteOutcome, prefix: &str, limit: f64) -> bool {
    checks(o, prefix).iter().all(|c| {
        assert_eq!(c.threshold, limit, "{} limit for {}", o.suite, c.name);
        c.value <= limit
    })
}

fn all_at_least(o: &SuiteOutcome, prefix: &str, limit: f64) -> bool {
    checks(o, prefix).iter().all(|c| {
        assert_eq!(c.threshold, limit, "{} limit for {}", o.suite, c.name);
        c.value >= limit
    })
}

fn all_hold(o: &SuiteOutcome, suffix: &str) -> bool {
    let v: Vec<&Check> = o.checks.iter().filter(|c| c.name.ends_with(suffix)).collect();
    assert!(!v.is_empty(), "{}: no check named *{suffix}", o.suite);
    v.iter().all(|c| c.passed && c.value == 1.0)
}

fn worst(o: &SuiteOutcome, prefix: &str) -> f64 {
    checks(o, prefix).iter().map(|c| c.value).fold(f64::NAN, f64::max)
}

fn suite_line(
    id: usize,
    title: &'static str,
    suite: Suite,
    budget: f64,
    judge: impl Fn(&SuiteOutcome) -> (bool, String),
) -> Line {
    let o = run_suite(suite, &VerifyOptions::default());
    let (ok, detail) = if let Some(e) = &o.error {
        (false, format!("error: {e}"))
    } else {
        judge(&o)
    };
    Line {
        id,
        title,
        passed: ok && o.passed(),
        seconds: o.seconds,
        budget,
        detail,
    }
}

#[test]
fn acceptance_criteria() {
    let mut lines = Vec::new();

    lines.push(suite_line(1, "scaling equivalence", Suite::Equivalence, 10.0, |o| {
        let n = checks(o, "max_output_gap@alpha=").len();
        (
            n == 3 && all_at_most(o, "max_output_gap@alpha=", 1e-9),
            format!("alphas {n}, max gap {:.2e} <= 1e-9", worst(o, "max_output_gap")),
        )
    }));

    lines.push(suite_line(2, "closed form vs Monte-Carlo", Suite::MonteCarlo, 30.0, |o| {
        let c = o.check("predictors_within_3_stderr").unwrap();
        (
            all_at_least(o, "predictors_within_3_stderr", 19.0),
            format!("{}/20 within 3 stderr", c.value),
        )
    }));

    // 3 and 4 share one sweep of the default grid
    let start = Instant::now();
    let spec = SweepSpec {
        mc_samples: 0,
        ..SweepSpec::template()
    };
    let rows = sweep::run_sweep(&spec).expect("template sweep");
    let sweep_secs = start.elapsed().as_secs_f64();
    let deco = run_suite(Suite::Decomposition, &VerifyOptions::default());
    let gap = rows
        .iter()
        .map(|r| (r.oa + r.of_exact - r.excess).abs())
        .fold(0.0f64, |m, g| if g.is_nan() { f64::INFINITY } else { m.max(g) });
    let all_ok = rows.iter().all(|r| r.status == RowStatus::Ok);
    lines.push(Line {
        id: 3,
        title: "decomposition identity",
        passed: all_ok && gap <= 1e-12 && deco.passed() && all_at_most(&deco, "max_identity_gap", 1e-12),
        seconds: deco.seconds + sweep_secs,
        budget: f64::INFINITY,
        detail: format!(
            "{} + {} rows, max |OA+OF-excess| {:.2e} / {:.2e} <= 1e-12",
            rows.len(),
            deco.check("rows_ok").map_or(0.0, |c| c.value),
            gap,
            worst(&deco, "max_identity_gap")
        ),
    });

    let grid = &spec.alpha_grid;
    let decades = (grid[grid.len() - 1] / grid[0]).log10();
    let u = sweep::u_shape_report(&rows, 0.05).expect("u-shape report");
    lines.push(Line {
        id: 4,
        title: "U-shape of excess error",
        passed: grid.len() >= 7
            && decades >= 4.0 - 1e-9
            && spec.seeds.len() == 3
            && (spec.mixture.n, spec.mixture.d, spec.mixture.kappa, spec.mixture.sigma, spec.init.h)
                == (50, 128, 1.5, 1.0, 64)
            && spec.eta_list == [0.05]
            && rows.iter().all(|r| r.reached)
            && u.interior
            && u.margin_left >= 0.005
            && u.margin_right >= 0.005,
        seconds: sweep_secs,
        budget: 600.0,
        detail: format!(
            "argmin alpha {:.1e}, margins {:.4} / {:.4} >= 0.005",
            u.argmin_alpha, u.margin_left, u.margin_right
        ),
    });

    lines.push(suite_line(5, "phase-1 alignment bound", Suite::Phase1, 120.0, |o| {
        let ok = all_at_least(o, "seed1:min_psi_j_minus_bound", -1e-6)
            && all_at_least(o, "seed2:min_psi_j_minus_bound", -1e-6)
            && all_at_least(o, "seed3:min_psi_j_minus_bound", -1e-6)
            && all_at_least(o, "seed1:lambda_hat", 0.05)
            && all_at_least(o, "seed2:lambda_hat", 0.05)
            && all_at_least(o, "seed3:lambda_hat", 0.05)
            && all_at_most(o, "seed1:alpha_over_admissible", 1.0)
            && all_at_most(o, "seed2:alpha_over_admissible", 1.0)
            && all_at_most(o, "seed3:alpha_over_admissible", 1.0)
            && all_hold(o, ":bound_informative");
        let slack = ["seed1", "seed2", "seed3"]
            .iter()
            .map(|s| o.check(&format!("{s}:min_psi_j_minus_bound")).unwrap().value)
            .fold(f64::INFINITY, f64::min);
        (ok, format!("3 seeds, min psi_j - bound {slack:.4} >= -1e-6"))
    }));

    lines.push(suite_line(6, "Psi stability and trend", Suite::PsiStability, 300.0, |o| {
        let rho = o.check("spearman_psi_vs_alpha").unwrap().value;
        (
            all_at_most(o, "max_psi_gap", 0.15)
                && all_at_most(o, "grid_over_admissible", 1.0)
                && rho < 0.0,
            format!("max gap {:.4} <= 0.15, spearman {rho:.2} < 0", worst(o, "max_psi_gap")),
        )
    }));

    lines.push(suite_line(7, "gradient correctness", Suite::Gradient, 5.0, |o| {
        (
            all_at_least(o, "probes", 100.0) && all_at_most(o, "max_relative_error", 1e-5),
            format!("100 probes, max rel err {:.2e} <= 1e-5", worst(o, "max_relative_error")),
        )
    }));

    lines.push(suite_line(8, "conservation properties", Suite::Conservation, 120.0, |o| {
        let ratio = o.check("template:drift_ratio_half_step>=lo").unwrap().value;
        let ok = all_at_most(o, "template:max_drift", 1e-3)
            && all_at_least(o, "template:drift_ratio_half_step>=lo", 0.4)
            && all_at_most(o, "template:drift_ratio_half_step<=hi", 0.6)
            && ["separable1", "separable2", "separable3"]
                .iter()
                .all(|s| all_at_most(o, &format!("{s}:max_drift"), 1e-3))
            && all_hold(o, ":signs_constant")
            && all_hold(o, ":partition_constant_after_t1");
        (
            ok,
            format!(
                "max drift {:.2e} <= 1e-3, half-step ratio {ratio:.3} in [0.4, 0.6]",
                worst(o, "template:max_drift")
            ),
        )
    }));

    lines.push(suite_line(9, "concentration checks", Suite::Concentration, 60.0, |o| {
        let v = ["n200_d32", "n50_d128"];
        let ok = v.iter().all(|p| {
            all_at_most(o, &format!("{p}:mean_norm_violation"), 0.1 + 0.03)
                && all_at_most(o, &format!("{p}:ortho_norm_violation"), 0.1 + 0.03)
                && all_at_least(o, &format!("{p}:phi_bracket_frequency"), 1.0 - 0.1 - 0.03)
        });
        let viol = v
            .iter()
            .flat_map(|p| [format!("{p}:mean_norm_violation"), format!("{p}:ortho_norm_violation")])
            .map(|n| worst(o, &n))
            .fold(0.0, f64::max);
        let freq = v
            .iter()
            .map(|p| worst(o, &format!("{p}:phi_bracket_frequency")))
            .fold(f64::INFINITY, f64::min);
        (ok, format!("worst violation {viol:.3} <= 0.13, phi bracket {freq:.3} >= 0.87"))
    }));

    lines.push(suite_line(10, "bound shapes", Suite::Shapes, 5.0, |o| {
        let ok = all_at_most(o, "oa_largest_decrease", 0.0)
            && all_at_most(o, "g_geom_critical_point_error", 1e-6)
            && all_at_most(o, "v_star_optimality_gap", 1e-6);
        (
            ok,
            format!(
                "critical point err {:.1e}, v* gap {:.1e} <= 1e-6",
                worst(o, "g_geom_critical_point_error"),
                worst(o, "v_star_optimality_gap")
            ),
        )
    }));

    let mut failed = Vec::new();
    for l in &lines {
        let in_budget = l.seconds < l.budget;
        let ok = l.passed && in_budget;
        println!(
            "{} {:>2} {:<28} {:>7.1}s  {}{}",
            if ok { "PASS" } else { "FAIL" },
            l.id,
            l.title,
            l.seconds,
            l.detail,
            if in_budget { String::new() } else { format!(" (over {:.0}s budget)", l.budget) }
        );
        if !ok {
            failed.push(l.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
