//! The performativity loop: rejected applicants implement recourse, the
//! post-recourse population is simulated with their true noise, the model is
//! refit on the shifted mixture, and the two questions are measured:
//! Q1, the pointwise shift of `P(L = 1 | X = x)`, and Q2, the change in
//! acceptance rate of recourse implementers under the refit model.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, NoiseMode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{assemble_refit_set, Classifier};
use crate::recourse::{recommend, Action, CostModel, Method, OptimizerConfig, RecourseProblem};
use crate::rng::{purpose, stream};
use crate::scm::{ConditionalTable, Scm, SupportKey};
use crate::settings::{Setting, CALIBRATION_ROWS};

/// Cohort collection gives up after this many draws.
pub const MAX_DRAWS: usize = 10_000_000;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// How rejected applicants obtain and implement recommendations.
#[derive(Debug, Clone)]
pub struct RecourseSpec {
    pub method: Method,
    pub t_r: f64,
    pub samples: usize,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone)]
pub struct CohortMember {
    pub x: Vec<f64>,
    pub y: f64,
    pub label: u8,
    pub noise: Vec<f64>,
    pub action: Action,
    pub x_post: Vec<f64>,
    pub y_post: f64,
    pub label_post: u8,
    /// Decision of the original model on the pre-recourse row (always 0).
    pub decision_pre: u8,
    /// Decision of the original model on the post-recourse row.
    pub decision_post: u8,
}

#[derive(Debug, Clone, Default)]
pub struct RecourseCohort {
    pub members: Vec<CohortMember>,
    /// Rows drawn to find the rejected applicants.
    pub draws: usize,
}

impl RecourseCohort {
    fn dataset(&self, names: Vec<String>, post: bool, range: std::ops::Range<usize>) -> Dataset {
        let mut d = Dataset::new(names);
        for m in &self.members[range] {
            if post {
                d.push(m.x_post.clone(), m.y_post, m.label_post);
            } else {
                d.push(m.x.clone(), m.y, m.label);
            }
        }
        d
    }

    pub fn pre_dataset(&self, names: Vec<String>) -> Dataset {
        self.dataset(names, false, 0..self.members.len())
    }

    pub fn post_dataset(&self, names: Vec<String>) -> Dataset {
        self.dataset(names, true, 0..self.members.len())
    }

    pub fn infeasible(&self) -> usize {
        self.members.iter().filter(|m| !m.action.feasible).count()
    }
}

/// Features, outcome, label and the noise that generated them.
type Row = (Vec<f64>, f64, u8, Vec<f64>);

/// Draws rows until `n` of them satisfy `keep`, retaining their noise.
fn collect_rows<F: Fn(&[f64]) -> bool>(
    scm: &Scm,
    n: usize,
    seed: u64,
    purpose_index: u64,
    keep: F,
    what: &str,
) -> Result<(Vec<Row>, usize)> {
    let mut rng = stream(seed, purpose_index);
    let mut rows = Vec::with_capacity(n);
    let mut draws = 0;
    let none = crate::scm::Intervention::none();
    let mut vals = vec![0.0; scm.graph().len()];
    while rows.len() < n {
        if draws >= MAX_DRAWS {
            return Err(Error::CohortCollection(format!(
                "only {} {what} applicants among {MAX_DRAWS} draws",
                rows.len()
            )));
        }
        draws += 1;
        let u = scm.sample_noise(&mut rng);
        scm.evaluate_into(&u, &none, &mut vals);
        let x = scm.feature_row(&vals);
        if keep(&x) {
            let y = vals[scm.target()];
            rows.push((x, y, scm.label(y), u));
        }
    }
    Ok((rows, draws))
}

/// Rejected applicants, their recommendations and their ground-truth
/// post-recourse state. Applicant `i` uses its own stream, so the result
/// does not depend on scheduling.
pub fn simulate_post_recourse(
    scm: &Scm,
    classifier: &Classifier,
    cost: &CostModel,
    spec: &RecourseSpec,
    n_rejected: usize,
    noise: NoiseMode,
    seed: u64,
) -> Result<RecourseCohort> {
    if n_rejected == 0 {
        return Ok(RecourseCohort::default());
    }
    let (rows, draws) = collect_rows(scm, n_rejected, seed, purpose::COHORT, |x| classifier.decide(x) == 0, "rejected")?;
    let problem = RecourseProblem { scm, classifier, cost, t_r: spec.t_r, method: spec.method, samples: spec.samples };
    let y_node = scm.target();
    let resampled: Vec<usize> =
        (0..scm.graph().len()).filter(|&i| i == y_node || scm.is_descendant(y_node, i)).collect();
    let members = rows
        .into_par_iter()
        .enumerate()
        .map(|(i, (x, y, label, u))| {
            let mut rng = stream(seed, purpose::APPLICANT_BASE + i as u64);
            let action = recommend(problem, &x, &spec.optimizer, &mut rng)?;
            let iv = action.intervention(scm, &x);
            let mut post_noise = u.clone();
            if noise == NoiseMode::Resampled {
                for &k in &resampled {
                    post_noise[k] = scm.noise_law(k).sample(&mut rng);
                }
            }
            let vals = scm.evaluate(&post_noise, &iv);
            let x_post = scm.feature_row(&vals);
            let y_post = vals[y_node];
            let decision_post = classifier.decide(&x_post);
            Ok(CohortMember {
                decision_pre: classifier.decide(&x),
                x,
                y,
                label,
                noise: u,
                action,
                label_post: scm.label(y_post),
                x_post,
                y_post,
                decision_post,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecourseCohort { members, draws })
}

/// `P(X = x)` and `P(X = x, L = 1)` of the pre-recourse law: exact when the
/// noise is enumerable, otherwise from a calibration sample.
pub fn pre_conditional_table(setting: &Setting, calibration_seed: u64) -> Result<ConditionalTable> {
    if !setting.finite_support {
        return Err(Error::ContinuousSupport(setting.name.clone()));
    }
    match setting.scm.conditional_table() {
        Ok(t) => Ok(t),
        Err(Error::ContinuousSupport(_)) => {
            let mut rng = stream(calibration_seed, purpose::CALIBRATION);
            let s = setting.scm.sample(CALIBRATION_ROWS, &mut rng);
            let w = 1.0 / s.data.len() as f64;
            let mut t = ConditionalTable::default();
            for (x, &l) in s.data.x.iter().zip(&s.data.labels) {
                t.insert(x, w, w * f64::from(l));
            }
            Ok(t)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub x: Vec<f64>,
    pub pre: f64,
    pub post: f64,
    pub diff: f64,
    /// `P(X^p = x | rejected)` renormalized over the reported points.
    pub weight: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub points: Vec<ShiftPoint>,
    pub weighted_mean: f64,
    pub min: f64,
    pub max: f64,
    /// Cohort rows in buckets below the minimum size.
    pub sparse_rows: usize,
    /// Cohort rows at points without pre-recourse mass.
    pub off_support_rows: usize,
}

/// Q1: post-recourse label frequency minus the pre-recourse conditional at
/// every post-recourse point with at least `min_bucket` cohort rows.
pub fn q1_shift(pre: &ConditionalTable, cohort: &RecourseCohort, min_bucket: usize) -> Result<ShiftReport> {
    if min_bucket == 0 {
        return Err(Error::InvalidParameter("min_bucket must be positive".into()));
    }
    let mut buckets: BTreeMap<SupportKey, (usize, usize)> = BTreeMap::new();
    for m in &cohort.members {
        let e = buckets.entry(SupportKey::new(&m.x_post)).or_insert((0, 0));
        e.0 += 1;
        e.1 += usize::from(m.label_post);
    }
    let mut points = Vec::new();
    let (mut sparse_rows, mut off_support_rows) = (0, 0);
    for (key, (hits, pos)) in buckets {
        let x = key.values();
        if hits < min_bucket {
            sparse_rows += hits;
            continue;
        }
        let Some(pre_c) = pre.conditional(&x) else {
            off_support_rows += hits;
            continue;
        };
        let post = pos as f64 / hits as f64;
        points.push(ShiftPoint { x, pre: pre_c, post, diff: post - pre_c, weight: hits as f64, hits });
    }
    let total: f64 = points.iter().map(|p| p.weight).sum();
    points.iter_mut().for_each(|p| p.weight /= total);
    let (weighted_mean, min, max) = if points.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            points.iter().map(|p| p.weight * p.diff).sum(),
            points.iter().map(|p| p.diff).fold(f64::INFINITY, f64::min),
            points.iter().map(|p| p.diff).fold(f64::NEG_INFINITY, f64::max),
        )
    };
    Ok(ShiftReport { points, weighted_mean, min, max, sparse_rows, off_support_rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceDelta {
    pub rate_original: f64,
    pub rate_refit: f64,
    pub delta: f64,
}

/// Q2 on the evaluation half's post-recourse rows.
pub fn q2_acceptance_delta(original: &Classifier, refit: &Classifier, evaluation_post: &[Vec<f64>]) -> Result<AcceptanceDelta> {
    if evaluation_post.is_empty() {
        return Err(Error::InvalidParameter("the evaluation half is empty".into()));
    }
    let rate_original = original.acceptance_rate(evaluation_post);
    let rate_refit = refit.acceptance_rate(evaluation_post);
    Ok(AcceptanceDelta { rate_original, rate_refit, delta: rate_refit - rate_original })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub q1: Option<ShiftReport>,
    pub q2: AcceptanceDelta,
    /// Original model on held-out pre-recourse data.
    pub acc_original_pre: f64,
    pub acc_refit_pre: f64,
    /// Models on the evaluation half's post-recourse rows and labels.
    pub acc_original_post: f64,
    pub acc_refit_post: f64,
    pub infeasible_fraction: f64,
    pub cohort_draws: usize,
    pub post_label_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub setting: String,
    pub method: Method,
    pub noise: NoiseMode,
    pub t_r: f64,
    pub seeds: Vec<u64>,
    /// The fully resolved configuration as TOML.
    pub config_toml: String,
    pub per_seed: Vec<SeedResult>,
    pub metrics: Vec<MetricSummary>,
}

/// Mean and sample standard deviation (zero for a single value), ignoring
/// NaN entries.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One seed of the protocol: train, collect the cohort, split it, refit and
/// measure.
pub fn run_seed(config: &ExperimentConfig, setting: &Setting, pre_table: Option<&ConditionalTable>, seed: u64) -> Result<SeedResult> {
    let scm = &setting.scm;
    let names = scm.feature_names();
    let train_rows = config.train_rows.unwrap_or(2000);
    let test_rows = config.test_rows.unwrap_or(train_rows);
    let cohort_size = config.cohort_size.unwrap_or(500);

    let train = scm.sample(train_rows, &mut stream(seed, purpose::TRAIN)).data;
    let test = scm.sample(test_rows, &mut stream(seed, purpose::TEST)).data;
    let original = Classifier::fit(setting.backend, &train, config.t_c)?;

    let mut optimizer = OptimizerConfig::new(setting.domains.clone());
    optimizer.penalty = config.penalty;
    optimizer.polish = config.polish;
    let spec = RecourseSpec { method: config.method, t_r: config.t_r, samples: config.samples, optimizer };
    let cohort = simulate_post_recourse(scm, &original, &setting.cost, &spec, cohort_size, config.noise, seed)?;

    let q1 = match pre_table {
        Some(t) => Some(q1_shift(t, &cohort, config.min_bucket)?),
        None => None,
    };

    let half = cohort.members.len() / 2;
    let n = cohort.members.len();
    let refit_pre = cohort.dataset(names.clone(), false, 0..half);
    let refit_post = cohort.dataset(names.clone(), true, 0..half);
    let eval_post = cohort.dataset(names.clone(), true, half..n);
    let (accepted_rows, _) = collect_rows(scm, half, seed, purpose::ACCEPTED, |x| original.decide(x) == 1, "accepted")?;
    let mut accepted = Dataset::new(names);
    for (x, y, l, _) in accepted_rows {
        accepted.push(x, y, l);
    }
    let refit_set = assemble_refit_set(&accepted, &refit_pre, &refit_post)?;
    let refit = Classifier::fit(setting.backend, &refit_set, config.t_c)?;
    let q2 = q2_acceptance_delta(&original, &refit, &eval_post.x)?;

    Ok(SeedResult {
        seed,
        q1,
        q2,
        acc_original_pre: original.accuracy(&test),
        acc_refit_pre: refit.accuracy(&test),
        acc_original_post: original.accuracy(&eval_post),
        acc_refit_post: refit.accuracy(&eval_post),
        infeasible_fraction: cohort.infeasible() as f64 / n as f64,
        cohort_draws: cohort.draws,
        post_label_rate: eval_post.positive_rate(),
    })
}

const METRICS: [&str; 14] = [
    "q1_weighted_mean",
    "q1_min",
    "q1_max",
    "acceptance_original",
    "acceptance_refit",
    "acceptance_delta",
    "acc_original_pre",
    "acc_refit_pre",
    "acc_original_post",
    "acc_refit_post",
    "infeasible_fraction",
    "post_label_rate",
    "cohort_draws",
    "q1_points",
];

fn metric_value(r: &SeedResult, metric: &str) -> f64 {
    let q1 = |f: fn(&ShiftReport) -> f64| r.q1.as_ref().map_or(f64::NAN, f);
    match metric {
        "q1_weighted_mean" => q1(|s| s.weighted_mean),
        "q1_min" => q1(|s| s.min),
        "q1_max" => q1(|s| s.max),
        "q1_points" => q1(|s| s.points.len() as f64),
        "acceptance_original" => r.q2.rate_original,
        "acceptance_refit" => r.q2.rate_refit,
        "acceptance_delta" => r.q2.delta,
        "acc_original_pre" => r.acc_original_pre,
        "acc_refit_pre" => r.acc_refit_pre,
        "acc_original_post" => r.acc_original_post,
        "acc_refit_post" => r.acc_refit_post,
        "infeasible_fraction" => r.infeasible_fraction,
        "post_label_rate" => r.post_label_rate,
        "cohort_draws" => r.cohort_draws as f64,
        _ => f64::NAN,
    }
}

/// Runs every configured seed in parallel and aggregates. The config must
/// be resolved; a failing seed aborts the run and is named in the error.
pub fn run_experiment(config: &ExperimentConfig, setting: &Setting) -> Result<ExperimentReport> {
    config.validate()?;
    let pre_table = if setting.finite_support { Some(pre_conditional_table(setting, config.calibration_seed)?) } else { None };
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, setting, pre_table.as_ref(), seed).map_err(|e| Error::Seed { seed, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    let metrics = METRICS
        .iter()
        .map(|&m| {
            let values: Vec<f64> = per_seed.iter().map(|r| metric_value(r, m)).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary { metric: m.to_string(), mean, std, values }
        })
        .collect();
    Ok(ExperimentReport {
        version: VERSION.to_string(),
        setting: setting.name.clone(),
        method: config.method,
        noise: config.noise,
        t_r: config.t_r,
        seeds: config.seeds.clone(),
        config_toml: config.to_toml()?,
        per_seed,
        metrics,
    })
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn mean(&self, name: &str) -> f64 {
        self.metric(name).map_or(f64::NAN, |m| m.mean)
    }

    /// Columns: setting, method, metric, mean, std, seeds, values (per-seed
    /// values separated by `;` in seed order).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["setting", "method", "metric", "mean", "std", "seeds", "values"])?;
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
        for m in &self.metrics {
            let values = m.values.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            w.write_record([
                self.setting.as_str(),
                self.method.as_str(),
                m.metric.as_str(),
                &m.mean.to_string(),
                &m.std.to_string(),
                &seeds,
                &values,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Pointwise Q1 table for plotting: one row per seed and support point.
    pub fn points_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["setting", "method", "seed", "x", "pre", "post", "diff", "weight", "hits"])?;
        for r in &self.per_seed {
            for p in r.q1.iter().flat_map(|q| &q.points) {
                let x = p.x.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
                w.write_record([
                    self.setting.clone(),
                    self.method.to_string(),
                    r.seed.to_string(),
                    x,
                    p.pre.to_string(),
                    p.post.to_string(),
                    p.diff.to_string(),
                    p.weight.to_string(),
                    p.hits.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn file_stem(&self) -> String {
        format!("report_{}_{}", self.setting, self.method)
    }

    /// Writes the metric CSV, the point CSV and the JSON document; returns
    /// their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.file_stem();
        let files = [
            (dir.join(format!("{stem}.csv")), self.to_csv()?),
            (dir.join(format!("points_{}_{}.csv", self.setting, self.method)), self.points_csv()?),
            (dir.join(format!("{stem}_{}.json", self.version)), self.to_json()?),
        ];
        let mut out = Vec::new();
        for (path, body) in files {
            std::fs::write(&path, body)?;
            out.push(path);
        }
        Ok(out)
    }

    /// `setting  method  Q1 mean ± std  [min, max]  Q2 delta ± std`.
    pub fn summary_row(&self) -> String {
        let get = |m: &str| self.metric(m).map_or((f64::NAN, f64::NAN), |s| (s.mean, s.std));
        let (wm, wms) = get("q1_weighted_mean");
        let (mn, _) = get("q1_min");
        let (mx, _) = get("q1_max");
        let (d, ds) = get("acceptance_delta");
        let q1 = if wm.is_nan() { format!("{:>27}", "-") } else { format!("{wm:>6.2} ± {wms:<4.2} [{mn:>5.2}, {mx:>5.2}]") };
        format!("{:<9} {:<7} {q1}  {d:>6.2} ± {ds:<4.2}", self.setting, self.method.as_str())
    }
}

pub fn summary_header() -> String {
    format!("{:<9} {:<7} {:>27}  {}", "setting", "method", "Q1 weighted mean [min, max]", "Q2 acceptance delta")
}

/// Merges per-run metric CSVs into one table with a row per
/// (setting, method) and `mean`/`std` columns per metric.
pub fn merge_reports(paths: &[PathBuf]) -> Result<String> {
    let mut rows: BTreeMap<(String, String), HashMap<String, (String, String)>> = BTreeMap::new();
    for p in paths {
        let mut rdr = csv::Reader::from_path(p)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header.iter().position(|h| h == name).ok_or_else(|| {
                Error::InvalidDataset(format!("{}: missing column '{name}'", p.display()))
            })
        };
        let (cs, cm, cmet, cmean, cstd) = (col("setting")?, col("method")?, col("metric")?, col("mean")?, col("std")?);
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| rec.get(i).unwrap_or("").to_string();
            rows.entry((get(cs), get(cm))).or_default().insert(get(cmet), (get(cmean), get(cstd)));
        }
    }
    let mut out = String::from("setting,method");
    for m in METRICS {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    out.push('\n');
    for ((s, m), metrics) in rows {
        let _ = write!(out, "{s},{m}");
        for name in METRICS {
            let (a, b) = metrics.get(name).cloned().unwrap_or_default();
            let _ = write!(out, ",{a},{b}");
        }
        out.push('\n');
    }
    Ok(out)
}
