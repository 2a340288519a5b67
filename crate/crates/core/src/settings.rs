//! Registry of data-generating processes: five shifted-binomial synthetic
//! SCMs, the two worked examples and the GPA setting fitted from data.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::models::Backend;
use crate::recourse::{CostModel, Domain};
use crate::rng::{purpose, stream};
use crate::scm::{fit_linear_gaussian, median, Equation, NoiseLaw, Scm, ScmBuilder, SupportKey};

pub const SYNTHETIC: [&str; 5] = ["LAdd", "LMult", "NLAdd", "NLMult", "LCubic"];
pub const REGISTERED: [&str; 8] = ["LAdd", "LMult", "NLAdd", "NLMult", "LCubic", "Example1", "Example2", "GPA"];

/// Rows in the calibration sample used when exact enumeration is impossible.
pub const CALIBRATION_ROWS: usize = 1_000_000;
/// A sampled feature with at most this many distinct values is categorical.
const MAX_CATEGORIES: usize = 64;

/// Default GPA causal graph. The column names follow the public first-year
/// GPA data set; the structure is a configurable guess.
pub const GPA_GRAPH: &str = "target: fy_gpa\nhs_gpa -> fy_gpa\nfy_gpa -> sat_sum\n";
/// Environment variable pointing at the GPA CSV.
pub const GPA_CSV_ENV: &str = "PERFREC_GPA_CSV";

#[derive(Debug, Clone)]
pub struct Setting {
    pub name: String,
    pub scm: Scm,
    pub cost: CostModel,
    pub backend: Backend,
    /// Per-feature optimizer domains from the calibration law.
    pub domains: Vec<Domain>,
    pub finite_support: bool,
    /// The effect depends on the target's noise and its own only through a
    /// single aggregate (their sum or product).
    pub noise_aggregates: bool,
}

fn canonical(name: &str) -> Result<&'static str> {
    REGISTERED
        .iter()
        .copied()
        .find(|r| r.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownSetting(name.to_string()))
}

fn lin(weights: &[f64]) -> Equation {
    Equation::Linear { weights: weights.to_vec(), intercept: 0.0 }
}

/// Structural model of a closed-form setting. Finite synthetic settings carry
/// a provisional threshold of 0 until calibrated by [`build`].
pub fn structural_model(name: &str) -> Result<Scm> {
    let sh = NoiseLaw::shbin;
    let b = ScmBuilder::new("Y");
    match canonical(name)? {
        "LAdd" => b
            .root("X_C", sh(8, 0.5, 0.0))
            .node("Y", &["X_C"], lin(&[1.0]), sh(2, 0.5, 0.0))
            .node("X_E", &["Y", "X_C"], lin(&[1.0, 1.0]), sh(2, 0.5, 0.0))
            .build(0.0),
        "LMult" => b
            .root("X_C", sh(5, 0.5, 3.5))
            .node("Y", &["X_C"], Equation::custom(|pa, u| pa[0] * u, |pa, v| v / pa[0]), sh(1, 0.5, 1.5))
            .node(
                "X_E",
                &["Y", "X_C"],
                Equation::custom(|pa, u| pa[0] * pa[1] * u, |pa, v| v / (pa[0] * pa[1])),
                sh(1, 0.5, 1.5),
            )
            .build(0.0),
        "NLAdd" => b
            .root("X_C", sh(8, 0.5, 0.0))
            .node("Y", &["X_C"], Equation::custom(|pa, u| pa[0] * pa[0] + u, |pa, v| v - pa[0] * pa[0]), sh(2, 0.5, 0.0))
            .node(
                "X_E",
                &["Y", "X_C"],
                Equation::custom(|pa, u| (pa[0] + pa[1]).powi(2) + u, |pa, v| v - (pa[0] + pa[1]).powi(2)),
                sh(2, 0.5, 0.0),
            )
            .build(0.0),
        "NLMult" => b
            .root("X_C", NoiseLaw::Mixture(vec![(0.5, sh(2, 0.5, 2.0)), (0.5, sh(4, 0.5, 4.0))]))
            .node("Y", &["X_C"], Equation::custom(|pa, u| pa[0] * pa[0] * u, |pa, v| v / (pa[0] * pa[0])), sh(2, 0.5, 2.0))
            .node(
                "X_E",
                &["Y", "X_C"],
                Equation::custom(|pa, u| (pa[0] + pa[1]).powi(2) * u, |pa, v| v / (pa[0] + pa[1]).powi(2)),
                sh(2, 0.5, 2.0),
            )
            .build(0.0),
        "LCubic" => b
            .root("X_C", sh(4, 0.5, -1.0))
            .node("Y", &["X_C"], Equation::custom(|pa, u| (pa[0] + u).powi(3), |pa, v| v.cbrt() - pa[0]), sh(2, 0.5, 1.0))
            .node(
                "X_E",
                &["Y", "X_C"],
                Equation::custom(|pa, u| (pa[1] + u - pa[0]).powi(3), |pa, v| v.cbrt() - pa[1] + pa[0]),
                sh(1, 0.5, 0.5),
            )
            .build(0.0),
        "Example1" => {
            fn offset(d: f64) -> f64 {
                if d == 0.0 {
                    0.55
                } else {
                    0.45
                }
            }
            fn g_base(pa: &[f64]) -> f64 {
                if pa[0] == 0.0 {
                    f64::from(u8::from(pa[1] >= 0.0))
                } else {
                    1.0
                }
            }
            b.root("D", NoiseLaw::Bernoulli { p: 0.5 })
                .node(
                    "Y",
                    &["D"],
                    Equation::custom(|pa, u| u - offset(pa[0]), |pa, v| v + offset(pa[0])),
                    NoiseLaw::Uniform { lo: 0.0, hi: 1.0 },
                )
                .node("G", &["D", "Y"], Equation::custom(|pa, u| g_base(pa) + u, |pa, v| v - g_base(pa)), NoiseLaw::zero())
                .build(0.0)
        }
        "Example2" => b
            .root("X_C", NoiseLaw::std_normal())
            .node("Y", &["X_C"], lin(&[1.0]), NoiseLaw::std_normal())
            .node("X_E", &["Y"], lin(&[1.0]), NoiseLaw::std_normal())
            .build(0.0),
        "GPA" => Err(Error::InvalidParameter("the GPA setting is fitted from data; use build_gpa".into())),
        _ => unreachable!("canonical names are exhaustive"),
    }
}

/// Builds a closed-form setting, calibrating the label threshold (finite
/// synthetic settings), feature variances and optimizer domains.
pub fn build(name: &str, calibration_seed: u64) -> Result<Setting> {
    let name = canonical(name)?;
    let scm = structural_model(name)?;
    let synthetic = SYNTHETIC.contains(&name);
    let scm = if synthetic { scm.clone().with_label_threshold(scm.exact_target_median()?)? } else { scm };
    let backend = if name == "Example2" { Backend::Logistic } else { Backend::Tree };
    calibrate(name, scm, backend, synthetic || name == "Example1", matches!(name, "LAdd" | "LMult"), calibration_seed)
}

/// Variances and domains: exact for enumerable models, otherwise from
/// [`CALIBRATION_ROWS`] rows drawn under the calibration seed.
pub fn calibrate(
    name: &str,
    scm: Scm,
    backend: Backend,
    finite_support: bool,
    noise_aggregates: bool,
    calibration_seed: u64,
) -> Result<Setting> {
    let d = scm.n_features();
    let (sigma2, domains) = match scm.enumerate_joint() {
        Ok(joint) => {
            let mut mean = vec![0.0; d];
            let mut sq = vec![0.0; d];
            let mut supports: Vec<Vec<f64>> = vec![Vec::new(); d];
            for (vals, p) in &joint {
                for (j, &f) in scm.features().iter().enumerate() {
                    mean[j] += p * vals[f];
                    sq[j] += p * vals[f] * vals[f];
                    supports[j].push(vals[f]);
                }
            }
            let sigma2 = (0..d).map(|j| sq[j] - mean[j] * mean[j]).collect();
            let domains = supports.into_iter().map(|s| Domain::Discrete(distinct(s))).collect();
            (sigma2, domains)
        }
        Err(Error::ContinuousSupport(_)) => {
            let mut rng = stream(calibration_seed, purpose::CALIBRATION);
            let s = scm.sample(CALIBRATION_ROWS, &mut rng);
            feature_stats(&s.data)
        }
        Err(e) => return Err(e),
    };
    let cost = CostModel::from_scm(&scm, sigma2)?;
    Ok(Setting { name: name.to_string(), scm, cost, backend, domains, finite_support, noise_aggregates })
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Population variance and domain per feature of a sample.
fn feature_stats(data: &Dataset) -> (Vec<f64>, Vec<Domain>) {
    let n = data.len() as f64;
    let mut sigma2 = Vec::new();
    let mut domains = Vec::new();
    for j in 0..data.n_features() {
        let col: Vec<f64> = data.x.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        sigma2.push(col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n);
        let mut seen: HashMap<SupportKey, f64> = HashMap::new();
        for &v in &col {
            if seen.len() > MAX_CATEGORIES {
                break;
            }
            seen.entry(SupportKey::new(&[v])).or_insert(v);
        }
        if seen.len() <= MAX_CATEGORIES {
            domains.push(Domain::Discrete(distinct(seen.into_values().collect())));
        } else {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            domains.push(Domain::Continuous { lo, hi });
        }
    }
    (sigma2, domains)
}

/// Rows read from the GPA CSV, relabeled with graph node names.
#[derive(Debug, Clone)]
pub struct GpaData {
    pub data: Dataset,
    /// Rows dropped for missing or non-numeric mapped values.
    pub dropped: usize,
}

/// Reads the GPA CSV. `column_map` maps node names to CSV columns; unmapped
/// nodes are looked up under their own name. Labels are `1[y >= median(y)]`.
pub fn ingest_gpa_reader<R: Read>(reader: R, column_map: &[(String, String)], graph: &CausalGraph) -> Result<GpaData> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let map: HashMap<&str, &str> = column_map.iter().map(|(n, c)| (n.as_str(), c.as_str())).collect();
    let mut cols = Vec::with_capacity(graph.len());
    let mut missing = Vec::new();
    for name in graph.names() {
        let col = map.get(name.as_str()).copied().unwrap_or(name.as_str());
        match header.iter().position(|h| h == col) {
            Some(c) => cols.push(c),
            None => missing.push(format!("{name} (column '{col}')")),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing.join(", ")));
    }
    let features = graph.features();
    let mut data = Dataset::new(features.iter().map(|&f| graph.name(f).to_string()).collect());
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Option<Vec<f64>> = cols
            .iter()
            .map(|&c| rec.get(c).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite()))
            .collect();
        match vals {
            Some(v) => data.push(features.iter().map(|&f| v[f]).collect(), v[graph.target()], 0),
            None => dropped += 1,
        }
    }
    let t = median(&data.y);
    data.labels = data.y.iter().map(|&y| u8::from(y >= t)).collect();
    Ok(GpaData { data, dropped })
}

pub fn ingest_gpa(path: &Path, column_map: &[(String, String)], graph: &CausalGraph) -> Result<GpaData> {
    let file = std::fs::File::open(path)?;
    ingest_gpa_reader(file, column_map, graph)
}

/// Linear-Gaussian GPA setting fitted on `data`, with a logistic backend.
pub fn build_gpa(graph: &CausalGraph, data: &Dataset, calibration_seed: u64) -> Result<Setting> {
    let scm = fit_linear_gaussian(graph, data)?;
    calibrate("GPA", scm, Backend::Logistic, false, false, calibration_seed)
}

/// Numeric aggregated-noise check: over `draws` prior draws, is `X_E` a function
/// of `X_C` and one aggregate of `(U_Y, U_E)`, either their sum or their
/// product? Requires nodes named `X_C`, `Y` and `X_E`.
pub fn aggregated_noise_check<R: Rng + ?Sized>(scm: &Scm, draws: usize, rng: &mut R) -> Result<bool> {
    let g = scm.graph();
    let (c, y, e) = (g.index("X_C")?, g.target(), g.index("X_E")?);
    let none = crate::scm::Intervention::none();
    let mut sum: HashMap<SupportKey, f64> = HashMap::new();
    let mut prod: HashMap<SupportKey, f64> = HashMap::new();
    let (mut sum_ok, mut prod_ok) = (true, true);
    for _ in 0..draws {
        let u = scm.sample_noise(rng);
        let v = scm.evaluate(&u, &none);
        let consistent = |m: &mut HashMap<SupportKey, f64>, agg: f64| {
            let prev = *m.entry(SupportKey::new(&[v[c], agg])).or_insert(v[e]);
            (prev - v[e]).abs() <= 1e-9 * (1.0 + v[e].abs())
        };
        sum_ok &= consistent(&mut sum, u[y] + u[e]);
        prod_ok &= consistent(&mut prod, u[y] * u[e]);
    }
    Ok(sum_ok || prod_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::Intervention;

    fn support(scm: &Scm, node: &str) -> Vec<f64> {
        let i = scm.graph().index(node).unwrap();
        distinct(scm.enumerate_joint().unwrap().iter().map(|(v, _)| v[i]).collect())
    }

    #[test]
    fn ladd_structure() {
        let s = build("LAdd", 12345).unwrap();
        assert_eq!(s.scm.feature_names(), vec!["X_C", "X_E"]);
        assert_eq!(support(&s.scm, "X_C"), (-4..=4).map(f64::from).collect::<Vec<_>>());
        let u = [1.0, -1.0, 1.0];
        assert_eq!(s.scm.evaluate(&u, &Intervention::none()), vec![1.0, 0.0, 2.0]);
        assert_eq!(s.scm.label_threshold(), 0.0);
        assert_eq!(s.cost.pi, vec![1, 2]);
        assert!((s.cost.sigma2[0] - 2.0).abs() < 1e-12 && (s.cost.sigma2[1] - 9.0).abs() < 1e-12);
        assert!(s.finite_support && s.noise_aggregates);
    }

    #[test]
    fn thresholds_are_exact_medians() {
        let want = [("LAdd", 0.0), ("LMult", 4.0), ("NLAdd", 1.0), ("NLMult", 16.0), ("LCubic", 0.0)];
        for (name, t) in want {
            assert_eq!(build(name, 1).unwrap().scm.label_threshold(), t, "{name}");
        }
    }

    #[test]
    fn nlmult_root_is_mixture() {
        let scm = structural_model("NLMult").unwrap();
        assert!(matches!(scm.noise_law(0), NoiseLaw::Mixture(p) if p.len() == 2));
        let u = [2.0, 3.0, 1.0];
        // Y = 4·3, X_E = (12 + 2)²·1
        assert_eq!(scm.evaluate(&u, &Intervention::none()), vec![2.0, 12.0, 196.0]);
    }

    #[test]
    fn lcubic_equations() {
        let scm = structural_model("LCubic").unwrap();
        let v = scm.evaluate(&[-2.0, 1.0, 1.0], &Intervention::none());
        assert_eq!(v, vec![-2.0, -1.0, 0.0]);
    }

    #[test]
    fn example2_is_gaussian_chain() {
        let s = build("Example2", 12345).unwrap();
        assert_eq!(s.backend, Backend::Logistic);
        assert!(!s.finite_support);
        assert_eq!(s.scm.label_threshold(), 0.0);
        assert!((s.cost.sigma2[1] - 3.0).abs() < 0.02);
        assert!(matches!(s.domains[0], Domain::Continuous { .. }));
    }

    #[test]
    fn example1_domains_are_binary() {
        let s = build("example1", 12345).unwrap();
        assert_eq!(s.domains, vec![Domain::Discrete(vec![0.0, 1.0]), Domain::Discrete(vec![0.0, 1.0])]);
    }

    #[test]
    fn unknown_setting() {
        assert!(matches!(build("Credit", 1), Err(Error::UnknownSetting(_))));
    }

    #[test]
    fn gpa_ingestion_counts_drops() {
        let graph = CausalGraph::parse(GPA_GRAPH).unwrap();
        let csv = "sex,hs,fy_gpa,sat_sum\n1,3.0,2.5,100\n2,,3.0,110\n1,3.5,x,120\n2,2.0,2.0,90\n1,4.0,3.9,\n";
        let map = vec![("hs_gpa".to_string(), "hs".to_string())];
        let g = ingest_gpa_reader(csv.as_bytes(), &map, &graph).unwrap();
        assert_eq!(g.dropped, 3);
        assert_eq!(g.data.len(), 2);
        assert_eq!(g.data.feature_names, vec!["hs_gpa", "sat_sum"]);
        assert_eq!(g.data.x[0], vec![3.0, 100.0]);
    }

    #[test]
    fn gpa_missing_columns_listed() {
        let graph = CausalGraph::parse(GPA_GRAPH).unwrap();
        let err = ingest_gpa_reader("a,fy_gpa\n1,2\n".as_bytes(), &[], &graph).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("hs_gpa") && msg.contains("sat_sum"), "{msg}");
    }
}
