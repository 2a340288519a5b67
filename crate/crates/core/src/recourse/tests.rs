use super::*;
use crate::rng::stream;
use crate::settings;

fn ex1_classifier() -> Classifier {
    Classifier::oracle(
        |x| match (x[0] as i64, x[1] as i64) {
            (1, 1) => 0.55,
            (0, 1) => 1.0,
            _ => 0.0,
        },
        0.5,
    )
    .unwrap()
}

fn ex2_boundary_classifier() -> Classifier {
    Classifier::oracle(|x| if x[0] + x[1] >= 0.0 { 1.0 } else { 0.0 }, 0.5).unwrap()
}

#[test]
fn method_names_roundtrip() {
    for m in Method::ALL {
        assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
    }
    assert_eq!("ind. ICR".parse::<Method>().unwrap(), Method::IndIcr);
    assert!("ICR".parse::<Method>().is_err());
}

#[test]
fn chain_costs() {
    let c = CostModel::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
    assert_eq!(c.point_cost(&[0.0, 0.0], &[0.0, 0.6]), 0.18);
    assert_eq!(c.point_cost(&[0.0, 0.0], &[0.6, 0.0]), 0.36);
    assert!(CostModel::new(vec![0, 1], vec![1.0, 1.0]).is_err());
    assert!(CostModel::new(vec![1, 2], vec![1.0, 0.0]).is_err());
}

#[test]
fn example1_costs() {
    let s = settings::build("Example1", 12345).unwrap();
    let x = [0.0, 0.0];
    assert_eq!(s.cost.intervention_cost(&s.scm, &x, &Intervention::none()), 0.0);
    let iv = Intervention::by_name(s.scm.graph(), &[("D", 1.0)]).unwrap();
    let c = s.cost.intervention_cost(&s.scm, &x, &iv);
    assert!((c - s.cost.gamma[0]).abs() < 1e-15);
    assert!((s.cost.gamma[0] - 4.0).abs() < 0.01);
}

#[test]
fn example1_individualized_improvement() {
    let s = settings::build("Example1", 12345).unwrap();
    let clf = ex1_classifier();
    let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 0.15, method: Method::IndIcr, samples: 10_000 };
    let iv = Intervention::by_name(s.scm.graph(), &[("D", 1.0)]).unwrap();
    let p = success_probability(problem, &[0.0, 0.0], &ActionKind::Intervention(iv), &mut stream(1, 0)).unwrap();
    assert!((p - 0.1 / 0.55).abs() < 0.02, "{p}");
}

#[test]
fn example1_search_finds_cause_move() {
    let s = settings::build("Example1", 12345).unwrap();
    let clf = ex1_classifier();
    let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 0.15, method: Method::IndIcr, samples: 1000 };
    let cfg = OptimizerConfig::new(s.domains.clone());
    let a = recommend(problem, &[0.0, 0.0], &cfg, &mut stream(2, 0)).unwrap();
    assert!(a.feasible);
    let d = s.scm.graph().index("D").unwrap();
    assert_eq!(a.kind, ActionKind::Intervention(Intervention::new(vec![(d, 1.0)])));
}

#[test]
fn accepted_applicant_gets_empty_action() {
    let s = settings::build("Example1", 12345).unwrap();
    let clf = ex1_classifier();
    let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 0.9, method: Method::IndCr, samples: 100 };
    let a = recommend(problem, &[0.0, 1.0], &OptimizerConfig::new(s.domains.clone()), &mut stream(3, 0)).unwrap();
    assert!(a.is_noop(&[0.0, 1.0]));
    assert_eq!(a.cost, 0.0);
}

#[test]
fn example2_ce_crosses_boundary_on_effect() {
    let s = settings::build("Example2", 12345).unwrap();
    let clf = ex2_boundary_classifier();
    let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 0.9, method: Method::Ce, samples: 1 };
    let x = [-1.0, 0.0];
    let cfg = OptimizerConfig::new(s.domains.clone());
    let a = evolutionary_search(problem, &x, &cfg, &mut stream(4, 0)).unwrap();
    let ActionKind::Point(p) = &a.kind else { panic!("{a:?}") };
    assert_eq!(p[0], -1.0);
    assert!((p[1] - 1.0).abs() < 0.1, "{p:?}");
    // a point past the boundary is accepted with certainty
    let pr = success_probability(problem, &x, &ActionKind::Point(vec![-1.0, 1.2]), &mut stream(4, 1)).unwrap();
    assert_eq!(pr, 1.0);
}

#[test]
fn search_is_deterministic() {
    let s = settings::build("LAdd", 12345).unwrap();
    let clf = Classifier::oracle(|x| if x[0] + x[1] >= 1.0 { 1.0 } else { 0.0 }, 0.5).unwrap();
    let cfg = OptimizerConfig::new(s.domains.clone());
    for method in Method::ALL {
        let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 0.9, method, samples: 300 };
        let a = evolutionary_search(problem, &[-2.0, -3.0], &cfg, &mut stream(5, 7)).unwrap();
        let b = evolutionary_search(problem, &[-2.0, -3.0], &cfg, &mut stream(5, 7)).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn optimizer_config_validation() {
    let mut cfg = OptimizerConfig::new(vec![Domain::Continuous { lo: 0.0, hi: 1.0 }]);
    assert!(cfg.validate().is_ok());
    cfg.crossover = 1.5;
    assert!(cfg.validate().is_err());
    let cfg = OptimizerConfig::new(vec![Domain::Continuous { lo: 1.0, hi: 0.0 }]);
    assert!(cfg.validate().is_err());
}

#[test]
fn grid_scan_finds_cheapest_single_move() {
    let s = settings::build("Example2", 12345).unwrap();
    let clf = ex2_boundary_classifier();
    let problem = RecourseProblem { scm: &s.scm, classifier: &clf, cost: &s.cost, t_r: 1.0, method: Method::Ce, samples: 1 };
    let a = grid_scan(problem, &[-1.0, 0.0], &s.domains, 31, &mut stream(6, 0)).unwrap().unwrap();
    let ActionKind::Point(p) = &a.kind else { panic!() };
    assert_eq!(p[0], -1.0);
    assert!(p[1] >= 1.0);
}
