//! The recourse-implementation loop and its metrics on shipped settings.

use perfrec::analytic::{ex1_conditional, normal_cdf};
use perfrec::config::{ExperimentConfig, NoiseMode};
use perfrec::models::{Backend, Classifier};
use perfrec::perform::{
    merge_reports, mean_std, pre_conditional_table, q1_shift, q2_acceptance_delta, run_experiment, run_seed,
    simulate_post_recourse, ExperimentReport, RecourseCohort, RecourseSpec,
};
use perfrec::recourse::{Method, OptimizerConfig};
use perfrec::rng::stream;
use perfrec::settings::{self, Setting};
use perfrec::Error;

fn setting(name: &str) -> Setting {
    settings::build(name, 12345).unwrap()
}

fn fitted(s: &Setting, rows: usize, seed: u64) -> Classifier {
    Classifier::fit(s.backend, &s.scm.sample(rows, &mut stream(seed, 0)).data, 0.5).unwrap()
}

fn cohort(s: &Setting, clf: &Classifier, method: Method, t_r: f64, n: usize, noise: NoiseMode, seed: u64) -> RecourseCohort {
    let spec = RecourseSpec { method, t_r, samples: 1000, optimizer: OptimizerConfig::new(s.domains.clone()) };
    simulate_post_recourse(&s.scm, clf, &s.cost, &spec, n, noise, seed).unwrap()
}

fn small_config(name: &str, method: Method, seeds: Vec<u64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, method);
    c.seeds = seeds;
    c.train_rows = Some(2000);
    c.cohort_size = Some(200);
    c.resolve().unwrap()
}

#[test]
fn example1_cohort_lands_on_the_cause_intervention() {
    let s = setting("Example1");
    let clf = Classifier::oracle(|x| ex1_conditional([x[0], x[1]]).unwrap_or(0.0), 0.5).unwrap();
    let c = cohort(&s, &clf, Method::IndIcr, 0.15, 2000, NoiseMode::Persistent, 70);
    assert!(c.members.iter().all(|m| m.x_post == [1.0, 1.0]));
    let freq = c.members.iter().map(|m| f64::from(m.label_post)).sum::<f64>() / c.members.len() as f64;
    // P(L=1 | do(D=1), X=(0,0)) = P(U_L = 1 | U_L < 0.55-threshold) = 0.1/0.55.
    assert!((freq - 0.1 / 0.55).abs() <= 0.03, "post label frequency {freq}");
}

#[test]
fn cohort_invariants_under_persistent_noise() {
    for name in ["LAdd", "NLMult", "LCubic"] {
        let s = setting(name);
        let clf = fitted(&s, 2000, 71);
        for method in [Method::Ce, Method::IndCr, Method::SubIcr] {
            let c = cohort(&s, &clf, method, 0.9, 100, NoiseMode::Persistent, 72);
            assert_eq!(c.members.len(), 100);
            assert!(c.draws >= 100);
            for m in &c.members {
                assert_eq!(m.decision_pre, 0);
                assert_eq!(m.decision_pre, clf.decide(&m.x));
                assert_eq!(m.decision_post, clf.decide(&m.x_post));
                let iv = m.action.intervention(&s.scm, &m.x);
                let untouched = s.scm.nondescendants(&iv);
                for (j, &node) in s.scm.features().iter().enumerate() {
                    if untouched[node] && iv.value_of(node).is_none() {
                        assert_eq!(m.x_post[j], m.x[j], "{name} {method}: feature {j} moved without intervention");
                    }
                    if let Some(v) = iv.value_of(node) {
                        assert_eq!(m.x_post[j], v);
                    }
                }
                // Re-running the structural equations on the kept noise reproduces the row.
                let vals = s.scm.evaluate(&m.noise, &iv);
                assert_eq!(s.scm.feature_row(&vals), m.x_post);
                assert_eq!(vals[s.scm.target()], m.y_post);
            }
        }
    }
}

#[test]
fn icr_improves_ladd_applicants() {
    let s = setting("LAdd");
    let clf = fitted(&s, 2000, 73);
    for noise in [NoiseMode::Persistent, NoiseMode::Resampled] {
        let c = cohort(&s, &clf, Method::IndIcr, 0.9, 300, noise, 74);
        let feasible: Vec<_> = c.members.iter().filter(|m| m.action.feasible).collect();
        let rate = feasible.iter().map(|m| f64::from(m.label_post)).sum::<f64>() / feasible.len() as f64;
        assert!(feasible.len() >= 250 && rate >= 0.85, "{noise:?}: {rate} over {}", feasible.len());
        let pre_rate = c.members.iter().map(|m| f64::from(m.label)).sum::<f64>() / c.members.len() as f64;
        assert!(pre_rate < 0.5);
    }
}

#[test]
fn ladd_ind_cr_shifts_the_conditional_down() {
    let mut c = small_config("LAdd", Method::IndCr, vec![40, 41, 42, 43, 44]);
    c.cohort_size = Some(500);
    let r = run_experiment(&c, &c.build_setting().unwrap()).unwrap();
    for p in &r.per_seed {
        let q = p.q1.as_ref().unwrap();
        let w: f64 = q.points.iter().map(|p| p.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((q.weighted_mean - q.points.iter().map(|p| p.weight * p.diff).sum::<f64>()).abs() < 1e-12);
        assert!(q.min <= q.weighted_mean && q.weighted_mean <= q.max);
        let hits: usize = q.points.iter().map(|p| p.hits).sum();
        assert_eq!(hits + q.sparse_rows + q.off_support_rows, 500);
    }
    let m = r.mean("q1_weighted_mean");
    assert!((m + 0.68).abs() <= 0.15, "weighted mean Q1 {m}");
}

#[test]
fn ladd_ind_icr_leaves_the_conditional_alone() {
    let s = setting("LAdd");
    let table = pre_conditional_table(&s, 12345).unwrap();
    let clf = fitted(&s, 2000, 75);
    let c = cohort(&s, &clf, Method::IndIcr, 0.9, 500, NoiseMode::Persistent, 75);
    let r = q1_shift(&table, &c, 20).unwrap();
    assert!(r.weighted_mean.abs() <= 0.02, "{}", r.weighted_mean);
}

/// Refitting on fresh data from an unchanged population does not move the
/// acceptance rate, except at points where the true conditional is a tie and
/// either decision is Bayes-optimal.
#[test]
fn stationary_refit_keeps_acceptance() {
    for name in ["LAdd", "NLAdd", "Example2"] {
        let s = setting(name);
        let original = fitted(&s, 20_000, 76);
        let refit = fitted(&s, 20_000, 77);
        let mut eval = s.scm.sample(5000, &mut stream(78, 0)).data.x;
        if s.finite_support {
            let table = pre_conditional_table(&s, 12345).unwrap();
            eval.retain(|x| (table.conditional(x).unwrap() - 0.5).abs() > 0.05);
        }
        let d = q2_acceptance_delta(&original, &refit, &eval).unwrap();
        assert!(d.delta.abs() <= 0.02, "{name}: {d:?} over {} rows", eval.len());
        assert!((d.delta - (d.rate_refit - d.rate_original)).abs() < 1e-15);
    }
}

/// Intervening on the effect with fresh target noise leaves the label to the
/// cause alone: below one half whenever x_C < 0.
#[test]
fn example2_effect_interventions_do_not_improve() {
    let s = setting("Example2");
    let train = s.scm.sample(2000, &mut stream(79, 0)).data;
    let clf = Classifier::fit(Backend::Logistic, &train, 0.5).unwrap();
    let c = cohort(&s, &clf, Method::IndCr, 0.9, 600, NoiseMode::Resampled, 79);
    let x_e = s.scm.graph().index("X_E").unwrap();
    let hit: Vec<_> = c
        .members
        .iter()
        .filter(|m| m.x[0] < -0.2 && m.action.intervention(&s.scm, &m.x).targets() == [x_e])
        .collect();
    assert!(hit.len() >= 100, "only {} effect-only actions", hit.len());
    let rate = hit.iter().map(|m| f64::from(m.label_post)).sum::<f64>() / hit.len() as f64;
    let expected = hit.iter().map(|m| normal_cdf(m.x[0])).sum::<f64>() / hit.len() as f64;
    assert!(rate < 0.5 - 0.05, "post label rate {rate}");
    assert!((rate - expected).abs() <= 0.06, "post label rate {rate}, cause-only law {expected}");
    let decided = hit.iter().filter(|m| m.decision_post == 1).count();
    assert!(decided as f64 >= 0.9 * hit.len() as f64);
}

#[test]
fn continuous_settings_have_no_q1() {
    let s = setting("Example2");
    assert!(matches!(pre_conditional_table(&s, 12345), Err(Error::ContinuousSupport(_))));
    let c = small_config("Example2", Method::IndCr, vec![40]);
    let r = run_seed(&c, &s, None, 40).unwrap();
    assert!(r.q1.is_none());
    assert!(r.q2.delta.is_finite());
}

#[test]
fn single_seed_smoke_run() {
    let mut c = small_config("LMult", Method::SubCr, vec![40]);
    c.cohort_size = Some(10);
    let s = c.build_setting().unwrap();
    let r = run_experiment(&c, &s).unwrap();
    assert_eq!(r.per_seed.len(), 1);
    let d = r.metric("acceptance_delta").unwrap();
    assert!(d.mean.is_finite() && d.std == 0.0);
    assert!(r.to_csv().unwrap().lines().count() > 10);
    assert!(!r.summary_row().contains("NaN ±") || r.mean("q1_weighted_mean").is_nan());
}

#[test]
fn aggregates_match_per_seed_entries() {
    let c = small_config("NLAdd", Method::IndCr, vec![40, 41, 42]);
    let s = c.build_setting().unwrap();
    let r = run_experiment(&c, &s).unwrap();
    assert_eq!(r.seeds, vec![40, 41, 42]);
    assert_eq!(r.per_seed.iter().map(|p| p.seed).collect::<Vec<_>>(), r.seeds);
    let deltas: Vec<f64> = r.per_seed.iter().map(|p| p.q2.delta).collect();
    let m = r.metric("acceptance_delta").unwrap();
    assert_eq!(m.values, deltas);
    let (mean, std) = mean_std(&deltas);
    assert_eq!((m.mean, m.std), (mean, std));
    let q1: Vec<f64> = r.per_seed.iter().map(|p| p.q1.as_ref().unwrap().weighted_mean).collect();
    assert_eq!(r.metric("q1_weighted_mean").unwrap().values, q1);
    for p in &r.per_seed {
        for v in [p.acc_original_pre, p.acc_refit_pre, p.acc_original_post, p.acc_refit_post, p.infeasible_fraction, p.post_label_rate] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn report_files_roundtrip_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (name, method) in [("LAdd", Method::IndIcr), ("LMult", Method::Ce)] {
        let c = small_config(name, method, vec![40, 41]);
        let r = run_experiment(&c, &c.build_setting().unwrap()).unwrap();
        let files = r.write(dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files[0].ends_with(format!("report_{name}_{method}.csv")));
        assert!(files[1].ends_with(format!("points_{name}_{method}.csv")));
        let json = std::fs::read_to_string(&files[2]).unwrap();
        let back = ExperimentReport::from_json(&json).unwrap();
        assert_eq!(back.to_csv().unwrap(), r.to_csv().unwrap());
        assert_eq!(back.setting, r.setting);
        // The embedded configuration reproduces the run.
        let again_cfg = ExperimentConfig::from_toml(&back.config_toml).unwrap();
        assert_eq!(again_cfg, c);
        let again = run_experiment(&again_cfg, &again_cfg.build_setting().unwrap()).unwrap();
        assert_eq!(again.to_csv().unwrap(), std::fs::read_to_string(&files[0]).unwrap());
        csvs.push(files[0].clone());
    }
    let table = merge_reports(&csvs).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("setting,method,q1_weighted_mean_mean,q1_weighted_mean_std"));
    assert!(lines[1].starts_with("LAdd,indICR,"));
    assert!(lines[2].starts_with("LMult,CE,"));
}
