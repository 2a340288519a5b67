//! Classifiers, refit sets and the mixture-validity harness.

use std::collections::HashMap;

use perfrec::dataset::Dataset;
use perfrec::models::{
    alpha_grid, assemble_refit_set, fit_tree, mixture_conditional, performatively_valid, Backend, Classifier, MixtureSpec,
    TreeParams,
};
use perfrec::perform::pre_conditional_table;
use perfrec::rng::stream;
use perfrec::scm::ConditionalTable;
use perfrec::settings::{self, SYNTHETIC};
use proptest::prelude::*;

fn key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e6).round() as i64).collect()
}

/// On finite support the grown tree reproduces the training frequency at
/// every point, which tends to the enumerated conditional.
#[test]
fn tree_matches_conditionals() {
    for name in SYNTHETIC {
        let s = settings::build(name, 12345).unwrap();
        let train = s.scm.sample(20_000, &mut stream(110, 0)).data;
        let clf = Classifier::fit(Backend::Tree, &train, 0.5).unwrap();
        let table = pre_conditional_table(&s, 12345).unwrap();
        let mut counts: HashMap<Vec<i64>, (Vec<f64>, f64, f64)> = HashMap::new();
        for (x, &l) in train.x.iter().zip(&train.labels) {
            let e = counts.entry(key(x)).or_insert((x.clone(), 0.0, 0.0));
            e.1 += 1.0;
            e.2 += f64::from(l);
        }
        for (x, n, pos) in counts.values() {
            let score = clf.score(x);
            assert!((score - pos / n).abs() < 1e-12, "{name} at {x:?}: {score} vs {}", pos / n);
            if *n >= 1000.0 {
                let truth = table.conditional(x).unwrap();
                assert!((score - truth).abs() <= 0.05, "{name} at {x:?}: {score} vs exact {truth}");
            }
        }
    }
}

#[test]
fn tree_fit_is_deterministic() {
    let s = settings::build("NLMult", 12345).unwrap();
    let train = s.scm.sample(3000, &mut stream(111, 0)).data;
    let a = Classifier::fit(Backend::Tree, &train, 0.5).unwrap().to_json().unwrap();
    let b = Classifier::fit(Backend::Tree, &train.clone(), 0.5).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let back = Classifier::from_json(&a).unwrap();
    assert_eq!(back.to_json().unwrap(), a);
}

#[test]
fn shallow_trees_respect_limits() {
    let s = settings::build("LCubic", 12345).unwrap();
    let train = s.scm.sample(3000, &mut stream(112, 0)).data;
    for depth in 0..4 {
        let t = fit_tree(&train, &TreeParams { max_depth: Some(depth), min_samples_leaf: 50 }).unwrap();
        assert!(t.depth() <= depth);
        assert!(t.n_leaves() <= 1 << depth);
    }
}

/// The logistic fit on the Gaussian chain recovers the Bayes boundary
/// `x_C + x_E = 0`.
#[test]
fn logistic_recovers_gaussian_boundary() {
    let s = settings::build("Example2", 12345).unwrap();
    let train = s.scm.sample(20_000, &mut stream(113, 0)).data;
    let clf = Classifier::fit(Backend::Logistic, &train, 0.5).unwrap();
    let test = s.scm.sample(10_000, &mut stream(113, 1)).data;
    let agree = test.x.iter().filter(|x| clf.decide(x) == u8::from(x[0] + x[1] >= 0.0)).count();
    assert!(agree as f64 >= 0.98 * test.len() as f64, "{agree}");
    let back = Classifier::from_json(&clf.to_json().unwrap()).unwrap();
    assert!(test.x.iter().all(|x| back.score(x) == clf.score(x)));
}

#[test]
fn refit_set_is_three_equal_parts() {
    let names = vec!["a".to_string()];
    let part = |v: f64, l: u8, n: usize| {
        let mut d = Dataset::new(names.clone());
        for _ in 0..n {
            d.push(vec![v], v, l);
        }
        d
    };
    let r = assemble_refit_set(&part(1.0, 1, 7), &part(0.0, 0, 7), &part(2.0, 1, 7)).unwrap();
    assert_eq!(r.len(), 21);
    assert_eq!(r.x.iter().filter(|x| x[0] == 2.0).count(), 7);
    assert!((r.positive_rate() - 14.0 / 21.0).abs() < 1e-12);
    assert!(assemble_refit_set(&part(1.0, 1, 6), &part(0.0, 0, 7), &part(2.0, 1, 7)).is_err());
}

fn table(points: &[([f64; 2], f64, f64)]) -> ConditionalTable {
    let mut t = ConditionalTable::default();
    for (x, p, h) in points {
        t.insert(x, *p, p * h);
    }
    t
}

/// Example 1: the post-recourse mass at (1, 1) has conditional 0.1/0.55 and
/// drags the mixture below the threshold.
#[test]
fn example1_mixture_is_invalid() {
    let pre = table(&[([0.0, 0.0], 0.275, 0.0), ([0.0, 1.0], 0.225, 1.0), ([1.0, 1.0], 0.5, 0.55)]);
    let post = table(&[([1.0, 1.0], 1.0, 0.1 / 0.55)]);
    let xs = vec![vec![1.0, 1.0], vec![0.0, 1.0]];
    assert!(!performatively_valid(&pre, &post, &xs, 0.5));
    let m = mixture_conditional(&pre, &post, MixtureSpec::new(0.5).unwrap(), &[1.0, 1.0]).unwrap();
    let direct = (0.5 * 0.5 * 0.55 + 0.5 * 0.1 / 0.55) / (0.5 * 0.5 + 0.5);
    assert!((m - direct).abs() < 1e-12);
    // Without the improvement gap the same mixture is valid.
    let same = table(&[([1.0, 1.0], 1.0, 0.55)]);
    assert!(performatively_valid(&pre, &same, &xs, 0.5));
}

proptest! {
    /// Raising the threshold never accepts more rows.
    #[test]
    fn acceptance_is_monotone_in_threshold(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, setting in 0usize..5) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let s = settings::build(SYNTHETIC[setting], 12345).unwrap();
        let train = s.scm.sample(1000, &mut stream(114, 0)).data;
        let base = Classifier::fit(s.backend, &train, 0.5).unwrap();
        let a = Classifier::new(base.scorer.clone(), lo).unwrap();
        let b = Classifier::new(base.scorer.clone(), hi).unwrap();
        for x in &train.x {
            prop_assert!(b.decide(x) <= a.decide(x));
            prop_assert!((0.0..=1.0).contains(&a.score(x)));
        }
    }

    /// The mixture conditional lies between its components and moves
    /// monotonically with the weight.
    #[test]
    fn mixture_interpolates(p_pre in 0.01f64..1.0, p_post in 0.01f64..1.0, h_pre in 0.0f64..=1.0, h_post in 0.0f64..=1.0) {
        let pre = table(&[([0.0, 0.0], p_pre, h_pre)]);
        let post = table(&[([0.0, 0.0], p_post, h_post)]);
        let values: Vec<f64> = alpha_grid().iter().map(|&a| mixture_conditional(&pre, &post, MixtureSpec::new(a).unwrap(), &[0.0, 0.0]).unwrap()).collect();
        let (lo, hi) = (h_pre.min(h_post) - 1e-12, h_pre.max(h_post) + 1e-12);
        prop_assert!(values.iter().all(|v| (lo..=hi).contains(v)));
        prop_assert!((values[0] - h_post).abs() < 1e-12 && (values[10] - h_pre).abs() < 1e-12);
        let up = values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        let down = values.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        prop_assert!(up || down);
    }
}
