use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Action, ActionKind, Method, RecourseProblem, SuccessEstimator};
use crate::error::{Error, Result};
use crate::scm::Intervention;

/// Value range the optimizer may propose for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// Sorted support of a categorical or integer feature.
    Discrete(Vec<f64>),
    Continuous { lo: f64, hi: f64 },
}

impl Domain {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Domain::Discrete(v) => *v.choose(rng).expect("nonempty support"),
            Domain::Continuous { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        }
    }

    fn mutate<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> f64 {
        match self {
            Domain::Discrete(_) => self.sample(rng),
            Domain::Continuous { lo, hi } => {
                let z: f64 = rng.sample(StandardNormal);
                (value + 0.1 * (hi - lo) * z).clamp(*lo, *hi)
            }
        }
    }

    /// `k` evenly spaced values, or the whole support for discrete domains.
    pub fn grid(&self, k: usize) -> Vec<f64> {
        match self {
            Domain::Discrete(v) => v.clone(),
            Domain::Continuous { lo, hi } => {
                if k < 2 {
                    return vec![0.5 * (lo + hi)];
                }
                (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Discrete(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
            Domain::Continuous { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid domain {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `max(0, t_r − p)`
    Hinge,
    /// `t_r − p`
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover: f64,
    pub mutation: f64,
    /// Per-gene mutation rate.
    pub gene_rate: f64,
    pub lambda: f64,
    pub penalty: Penalty,
    pub tournament: usize,
    pub elitism: usize,
    /// Shrink the best feasible action toward `x` after the search.
    pub polish: bool,
    pub domains: Vec<Domain>,
}

impl OptimizerConfig {
    pub fn new(domains: Vec<Domain>) -> Self {
        Self {
            population: 25,
            generations: 25,
            crossover: 0.5,
            mutation: 0.5,
            gene_rate: 0.2,
            lambda: 1e4,
            penalty: Penalty::Hinge,
            tournament: 3,
            elitism: 1,
            polish: true,
            domains,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.population == 0 || self.tournament == 0 || self.elitism > self.population {
            return Err(Error::InvalidParameter("population, tournament and elitism sizes are inconsistent".into()));
        }
        if !prob(self.crossover) || !prob(self.mutation) || !prob(self.gene_rate) {
            return Err(Error::InvalidParameter("optimizer probabilities must lie in [0, 1]".into()));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidParameter("penalty weight must be positive".into()));
        }
        self.domains.iter().try_for_each(Domain::validate)
    }
}

type Genome = Vec<(bool, f64)>;

/// Grid points per feature used to seed the initial population.
const SEED_GRID: usize = 31;

#[derive(Clone)]
struct Scored {
    genome: Genome,
    cost: f64,
    p: f64,
    fitness: f64,
}

struct Ctx<'e, 'a> {
    est: &'e mut SuccessEstimator<'a>,
    lambda: f64,
    penalty: Penalty,
}

impl Ctx<'_, '_> {
    fn action(&self, genome: &Genome) -> ActionKind {
        let problem = self.est.problem();
        let x = self.est.x();
        if problem.method == Method::Ce {
            ActionKind::Point(genome.iter().zip(x).map(|(&(on, v), &xj)| if on { v } else { xj }).collect())
        } else {
            let f = problem.scm.features();
            ActionKind::Intervention(Intervention::new(
                genome.iter().enumerate().filter(|(_, g)| g.0).map(|(j, g)| (f[j], g.1)).collect(),
            ))
        }
    }

    fn score(&mut self, genome: Genome) -> Result<Scored> {
        let action = self.action(&genome);
        let problem = *self.est.problem();
        let cost = problem.cost.cost(problem.scm, self.est.x(), &action);
        let p = self.est.estimate(&action)?;
        let gap = problem.t_r - p;
        let pen = match self.penalty {
            Penalty::Hinge => gap.max(0.0),
            Penalty::Literal => gap,
        };
        Ok(Scored { genome, cost, p, fitness: cost + self.lambda * pen })
    }

    fn feasible(&self, s: &Scored) -> bool {
        s.p >= self.est.problem().t_r - 1e-12
    }
}

fn better_feasible(a: &Scored, b: &Scored) -> bool {
    a.cost < b.cost || (a.cost == b.cost && a.fitness < b.fitness)
}

/// Genetic search over per-feature (indicator, value) genes minimizing
/// `cost + λ·penalty(t_r − p_success)`.
///
/// Tournament selection with elitism, uniform gene-pair crossover, indicator
/// flips and value perturbation. The empty action and the fittest
/// single-feature grid action per feature are part of the initial
/// population. Returns the cheapest feasible action seen, else the fittest
/// one flagged infeasible.
pub fn evolutionary_search<R: Rng + ?Sized>(
    problem: RecourseProblem<'_>,
    x: &[f64],
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<Action> {
    config.validate()?;
    if config.domains.len() != problem.scm.n_features() {
        return Err(Error::SizeMismatch("optimizer domains do not match the feature count".into()));
    }
    let mut est = SuccessEstimator::new(problem, x, rng)?;
    let mut ctx = Ctx { est: &mut est, lambda: config.lambda, penalty: config.penalty };
    let d = x.len();

    let mut pop: Vec<Scored> = Vec::with_capacity(config.population);
    pop.push(ctx.score(x.iter().map(|&v| (false, v)).collect())?);
    // Seed with the fittest single-feature action per feature.
    for j in 0..d {
        let mut seed: Option<Scored> = None;
        for v in config.domains[j].grid(SEED_GRID) {
            let mut g: Genome = x.iter().map(|&xv| (false, xv)).collect();
            g[j] = (true, v);
            let s = ctx.score(g)?;
            if seed.as_ref().is_none_or(|b| s.fitness < b.fitness) {
                seed = Some(s);
            }
        }
        if let Some(s) = seed {
            if pop.len() < config.population {
                pop.push(s);
            }
        }
    }
    while pop.len() < config.population {
        let g: Genome = config.domains.iter().map(|dom| (rng.gen_bool(0.5), dom.sample(rng))).collect();
        pop.push(ctx.score(g)?);
    }
    let mut best_feasible: Option<Scored> = None;
    let mut best_any = pop[0].clone();
    let track = |pop: &[Scored], ctx: &Ctx, bf: &mut Option<Scored>, ba: &mut Scored| {
        for s in pop {
            if ctx.feasible(s) && bf.as_ref().is_none_or(|b| better_feasible(s, b)) {
                *bf = Some(s.clone());
            }
            if s.fitness < ba.fitness {
                *ba = s.clone();
            }
        }
    };
    track(&pop, &ctx, &mut best_feasible, &mut best_any);

    for _ in 0..config.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
        let mut next: Vec<Scored> = order[..config.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut offspring: Vec<Genome> = (0..config.population - config.elitism)
            .map(|_| {
                (0..config.tournament)
                    .map(|_| rng.gen_range(0..pop.len()))
                    .min_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness).then(a.cmp(&b)))
                    .map(|i| pop[i].genome.clone())
                    .expect("tournament size is positive")
            })
            .collect();
        for pair in offspring.chunks_mut(2) {
            if let [a, b] = pair {
                if rng.gen_bool(config.crossover) {
                    for j in 0..d {
                        if rng.gen_bool(0.5) {
                            std::mem::swap(&mut a[j], &mut b[j]);
                        }
                    }
                }
            }
        }
        for g in &mut offspring {
            if rng.gen_bool(config.mutation) {
                for (j, gene) in g.iter_mut().enumerate() {
                    if rng.gen_bool(config.gene_rate) {
                        gene.0 = !gene.0;
                    }
                    if rng.gen_bool(config.gene_rate) {
                        gene.1 = config.domains[j].mutate(gene.1, rng);
                    }
                }
            }
        }
        for g in offspring {
            next.push(ctx.score(g)?);
        }
        pop = next;
        track(&pop, &ctx, &mut best_feasible, &mut best_any);
    }

    let (best, feasible) = match best_feasible {
        Some(b) if config.polish => (polish(&mut ctx, b, x, &config.domains)?, true),
        Some(b) => (b, true),
        None if config.polish => (drop_idle_genes(&mut ctx, best_any, x)?, false),
        None => (best_any, false),
    };
    let kind = ctx.action(&best.genome);
    Ok(Action { method: problem.method, kind, success: best.p, cost: best.cost, feasible })
}

/// Drops genes of an infeasible action whose removal does not worsen its
/// fitness.
fn drop_idle_genes(ctx: &mut Ctx, mut best: Scored, x: &[f64]) -> Result<Scored> {
    for j in 0..x.len() {
        if !best.genome[j].0 {
            continue;
        }
        let mut g = best.genome.clone();
        g[j] = (false, x[j]);
        let s = ctx.score(g)?;
        if s.fitness <= best.fitness {
            best = s;
        }
    }
    Ok(best)
}

/// Drops genes and moves values toward `x` while the action stays feasible.
fn polish(ctx: &mut Ctx, mut best: Scored, x: &[f64], domains: &[Domain]) -> Result<Scored> {
    let d = x.len();
    // Normalize inactive genes so that equal actions have equal genomes.
    for j in 0..d {
        if !best.genome[j].0 {
            best.genome[j].1 = x[j];
        }
    }
    for j in 0..d {
        if !best.genome[j].0 {
            continue;
        }
        let mut g = best.genome.clone();
        g[j] = (false, x[j]);
        let s = ctx.score(g)?;
        if ctx.feasible(&s) && s.cost <= best.cost {
            best = s;
        }
    }
    for j in 0..d {
        let (on, v) = best.genome[j];
        if !on || v == x[j] {
            continue;
        }
        let (lo, hi) = if v < x[j] { (v, x[j]) } else { (x[j], v) };
        match &domains[j] {
            Domain::Discrete(support) => {
                let mut cands: Vec<f64> = support.iter().copied().filter(|&s| s >= lo && s <= hi && s != v).collect();
                cands.sort_by(|a, b| (a - x[j]).abs().total_cmp(&(b - x[j]).abs()));
                for c in cands {
                    let mut g = best.genome.clone();
                    g[j].1 = c;
                    let s = ctx.score(g)?;
                    if ctx.feasible(&s) && s.cost < best.cost {
                        best = s;
                        break;
                    }
                }
            }
            Domain::Continuous { .. } => {
                // bisect between x_j (assumed infeasible) and the feasible value
                let (mut near, mut far) = (x[j], v);
                for _ in 0..30 {
                    let mid = 0.5 * (near + far);
                    let mut g = best.genome.clone();
                    g[j].1 = mid;
                    let s = ctx.score(g)?;
                    if ctx.feasible(&s) {
                        far = mid;
                        if s.cost < best.cost {
                            best = s;
                        }
                    } else {
                        near = mid;
                    }
                }
            }
        }
    }
    Ok(best)
}

/// `do(∅)` for accepted applicants, the search result otherwise.
pub fn recommend<R: Rng + ?Sized>(
    problem: RecourseProblem<'_>,
    x: &[f64],
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<Action> {
    if problem.classifier.decide(x) == 1 {
        let kind = if problem.method == Method::Ce {
            ActionKind::Point(x.to_vec())
        } else {
            ActionKind::Intervention(Intervention::none())
        };
        return Ok(Action { method: problem.method, kind, success: f64::NAN, cost: 0.0, feasible: true });
    }
    evolutionary_search(problem, x, config, rng)
}

/// Cheapest feasible single-feature action over `points` grid values per
/// feature (the whole support for discrete features).
pub fn grid_scan<R: Rng + ?Sized>(
    problem: RecourseProblem<'_>,
    x: &[f64],
    domains: &[Domain],
    points: usize,
    rng: &mut R,
) -> Result<Option<Action>> {
    let mut est = SuccessEstimator::new(problem, x, rng)?;
    let mut best: Option<Action> = None;
    for (j, dom) in domains.iter().enumerate() {
        for v in dom.grid(points) {
            let kind = if problem.method == Method::Ce {
                let mut p = x.to_vec();
                p[j] = v;
                ActionKind::Point(p)
            } else {
                ActionKind::Intervention(Intervention::new(vec![(problem.scm.features()[j], v)]))
            };
            let p = est.estimate(&kind)?;
            if p < problem.t_r - 1e-12 {
                continue;
            }
            let cost = problem.cost.cost(problem.scm, x, &kind);
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(Action { method: problem.method, kind, success: p, cost, feasible: true });
            }
        }
    }
    Ok(best)
}
