use std::collections::HashMap;

use proptest::prelude::*;

use vislab_core::sim::{inject_misclassification, project_probs, simulate, staggered_adoption, SimConfig};
use vislab_core::{
    Arm, Belief, NumericSettings, OutcomeTech, Policy, ReformShift, Scenario, SignalTech, ValueFunction,
    VisibilityKernel,
};

/// Full visibility, uninformative signal and safe arm, linear value: every
/// belief is a tie, which goes to the risky arm.
fn full_visibility(n_authors: usize, seed: u64) -> SimConfig {
    let scenario = Scenario::new(
        Arm::new(0.7, 0.3).unwrap(),
        Arm::uninformative(0.5).unwrap(),
        SignalTech::uninformative(),
        VisibilityKernel::symmetric(1.0).unwrap(),
        VisibilityKernel::symmetric(1.0).unwrap(),
        ValueFunction::identity(),
    )
    .unwrap();
    SimConfig {
        n_authors,
        n_fields: 10,
        periods: 8,
        adoption_times: vec![8; 10],
        scenario_pre: scenario,
        reform: ReformShift::constant(0.0, 0.0),
        type_prior: 0.4,
        projects_per_period: 1,
        type_persistence: 1.0,
        misclassification_rate: 0.0,
        burn_in: 0,
        seed,
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn public_belief_is_an_ensemble_martingale() {
    let cfg = full_visibility(10_000, 17);
    let out = simulate(&cfg).unwrap();
    assert!(out.rows.iter().all(|r| r.risky));
    for t in 0..=cfg.periods {
        let b: Vec<f64> = out.authors.iter().map(|a| a.beliefs[t]).collect();
        let (m, sd) = mean_sd(&b);
        let se = sd / (b.len() as f64).sqrt();
        assert!(
            (m - cfg.type_prior).abs() <= 4.0 * se + 1e-12,
            "t = {t}: mean {m}, se {se}"
        );
    }
}

#[test]
fn high_types_drift_up_and_low_types_down() {
    let cfg = full_visibility(10_000, 18);
    let out = simulate(&cfg).unwrap();
    let terminal = |high: bool| -> Vec<f64> {
        out.authors
            .iter()
            .filter(|a| a.high_type == high)
            .map(|a| *a.beliefs.last().unwrap())
            .collect()
    };
    let (h, l) = (terminal(true), terminal(false));
    let (mh, sh) = mean_sd(&h);
    let (ml, sl) = mean_sd(&l);
    let z = (mh - ml) / (sh * sh / h.len() as f64 + sl * sl / l.len() as f64).sqrt();
    assert!(z > 4.0, "z = {z}");
    assert!(mh > cfg.type_prior && ml < cfg.type_prior);
}

#[test]
fn failure_survival_matches_the_kernel() {
    let cfg = SimConfig::reference(2);
    let out = simulate(&cfg).unwrap();
    for (post, sigma0) in [(false, 0.15), (true, 0.65)] {
        let fails: Vec<bool> = out
            .rows
            .iter()
            .filter(|r| r.post == post && r.risky && !r.success)
            .map(|r| r.survived)
            .collect();
        let n = fails.len() as f64;
        let freq = fails.iter().filter(|&&s| s).count() as f64 / n;
        let se = (sigma0 * (1.0 - sigma0) / n).sqrt();
        assert!(
            (freq - sigma0).abs() < 4.0 * se,
            "post {post}: {freq} vs {sigma0} (n {n})"
        );
    }
}

#[test]
fn uninformative_signal_choice_depends_only_on_public_belief() {
    let mut cfg = SimConfig::reference(9);
    cfg.scenario_pre.signal = SignalTech::uninformative();
    cfg.burn_in = 0;
    let out = simulate(&cfg).unwrap();
    // Same (regime, belief) must give the same choice for either type.
    let mut seen: HashMap<(bool, u64), bool> = HashMap::new();
    for r in &out.rows {
        let b = out.authors[r.author_id as usize].beliefs[r.period as usize];
        let prev = *seen.entry((r.post, b.to_bits())).or_insert(r.risky);
        assert_eq!(prev, r.risky, "belief {b}");
    }
    // In the first period everyone holds the prior, so shares agree exactly.
    let share = |high: bool| {
        let v: Vec<bool> = out
            .rows
            .iter()
            .filter(|r| r.period == 0 && out.authors[r.author_id as usize].high_type == high)
            .map(|r| r.risky)
            .collect();
        v.iter().filter(|&&x| x).count() as f64 / v.len() as f64
    };
    assert_eq!(share(true), share(false));
}

#[test]
fn reform_raises_risk_taking_at_high_reputation() {
    let cfg = SimConfig::reference(1);
    let pre = &cfg.scenario_pre;
    let post = pre.reformed(&cfg.reform).unwrap();
    let s = NumericSettings::default();
    let rank = |sc: &Scenario, x: f64| match sc.cutoff_policy(Belief::interior(x).unwrap(), &s).unwrap().policy {
        Policy::NeverRisky => 0,
        Policy::RiskyIffGood | Policy::RiskyIffBad => 1,
        Policy::AlwaysRisky => 2,
    };
    let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    for &x in &grid {
        assert!(rank(&post, x) >= rank(pre, x), "pi = {x}");
    }
    // Above the median belief the always-risky region is an upper interval.
    let upper: Vec<i32> = grid.iter().filter(|&&x| x >= 0.5).map(|&x| rank(&post, x)).collect();
    assert!(upper.windows(2).all(|w| w[1] >= w[0]), "{upper:?}");
    assert_eq!(rank(&post, 0.9), 2);
    assert_eq!(rank(pre, 0.9), 1);
}

#[test]
fn identical_configs_give_identical_panels_on_any_thread_count() {
    let mut cfg = SimConfig::reference(31);
    cfg.n_authors = 120;
    cfg.n_fields = 6;
    cfg.adoption_times = staggered_adoption(6, 4, 9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, simulate(&cfg).unwrap());
}

#[test]
fn misclassified_rows_are_reproducible() {
    let mut cfg = SimConfig::reference(12);
    cfg.n_authors = 100;
    let clean = simulate(&cfg).unwrap().rows;
    cfg.misclassification_rate = 0.1;
    let noisy = simulate(&cfg).unwrap().rows;
    assert_eq!(noisy, simulate(&cfg).unwrap().rows);
    assert_eq!(noisy, inject_misclassification(clean.clone(), 0.1, cfg.seed).unwrap());
    let flipped: Vec<usize> = noisy
        .iter()
        .zip(&clean)
        .enumerate()
        .filter(|(_, (a, b))| a.risky != b.risky)
        .map(|(i, _)| i)
        .collect();
    assert!(!flipped.is_empty());
    assert!(noisy
        .iter()
        .zip(&clean)
        .all(|(a, b)| a.success == b.success && a.survived == b.survived));
}

#[test]
fn infeasible_project_rates_are_rejected() {
    let tech = OutcomeTech::new(0.95, 0.1).unwrap();
    assert!(project_probs(tech, 0.5, 0.3).is_err());
    assert!(project_probs(tech, 0.0, 0.3).is_err());
    let flat = OutcomeTech::new(0.4, 0.4).unwrap();
    assert_eq!(project_probs(flat, 0.0, 0.3).unwrap(), (0.4, 0.4));

    let mut cfg = SimConfig::reference(1);
    cfg.type_persistence = 0.5;
    assert!(cfg.validate().is_err());
}

#[test]
fn realized_success_rates_match_author_level_arm() {
    // Risky arm always chosen, so success frequencies by author type are the
    // arm's rates even though project types are mixed.
    let mut cfg = full_visibility(4000, 5);
    cfg.type_persistence = 0.8;
    let out = simulate(&cfg).unwrap();
    for (high, p) in [(true, 0.7), (false, 0.3)] {
        let v: Vec<bool> = out
            .rows
            .iter()
            .filter(|r| out.authors[r.author_id as usize].high_type == high)
            .map(|r| r.success)
            .collect();
        let n = v.len() as f64;
        let freq = v.iter().filter(|&&s| s).count() as f64 / n;
        assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt(), "{high}: {freq}");
    }
}

proptest! {
    #[test]
    fn project_rates_mix_back_to_arm_rates(
        p_low in 0.05f64..0.5,
        gap in 0.01f64..0.45,
        rho in 0.3f64..=1.0,
        prior in 0.05f64..0.95,
    ) {
        let tech = OutcomeTech::new(p_low + gap, p_low).unwrap();
        let m = prior * tech.p_high + (1.0 - prior) * tech.p_low;
        match project_probs(tech, rho, prior) {
            Ok((hi, lo)) => {
                prop_assert!((rho * hi + (1.0 - rho) * m - tech.p_high).abs() < 1e-12);
                prop_assert!((rho * lo + (1.0 - rho) * m - tech.p_low).abs() < 1e-12);
                prop_assert!((prior * hi + (1.0 - prior) * lo - m).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&hi) && (0.0..=1.0).contains(&lo));
            }
            Err(_) => {
                let hi = m + (tech.p_high - m) / rho;
                let lo = m + (tech.p_low - m) / rho;
                prop_assert!(!(0.0..=1.0).contains(&hi) || !(0.0..=1.0).contains(&lo));
            }
        }
    }
}
