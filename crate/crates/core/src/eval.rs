//! Regret against stationary comparators, sampled policy pools, seeded
//! Monte-Carlo replication and growth-exponent diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chains::{invariant_distribution, sample_next, CostFunction, Distribution, StochasticMatrix};
use crate::error::{Error, Result};
use crate::online::{run_episode, OnlineConfig, RunTrace, DEFAULT_EPSILON};
use crate::policy::{optimal_policy, sample_dirichlet_policy, KlPolicy};
use crate::spectral::SolverSettings;
use crate::world::{self, Graph, DEFAULT_DELTA, DEFAULT_STAY_PROB};

/// Increment of the splitmix64 generator (2^64 / golden ratio).
pub const SEED_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the `index`-th child seed of `base` with the splitmix64 finalizer.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(SEED_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorKind {
    BestInHindsight,
    FixedPolicy,
    SampledPoolBest,
}

/// `R_t = C_t − comparator(t)` for every prefix `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub horizon: usize,
    pub per_step: Vec<f64>,
    pub comparator_kind: ComparatorKind,
    pub comparator_cost: Vec<f64>,
}

fn check_costs(n: usize, costs: &[CostFunction]) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(f) = costs.iter().find(|f| f.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    Ok(())
}

fn finite_control_costs(policy: &KlPolicy) -> Result<Vec<f64>> {
    policy
        .control_cost()
        .iter()
        .enumerate()
        .map(|(x, c)| {
            c.finite()
                .ok_or_else(|| Error::Assumption(format!("infinite control cost at state {x}")))
        })
        .collect()
}

/// Prefix sums of `E_π[f_t] + E_π[D]`, `π` the policy's invariant distribution.
pub fn steady_state_comparator_cost(policy: &KlPolicy, costs: &[CostFunction]) -> Result<Vec<f64>> {
    check_costs(policy.n(), costs)?;
    let pi = invariant_distribution(policy.kernel())?;
    let mut control = 0.0;
    for (x, &w) in pi.weights().iter().enumerate() {
        if w > 0.0 {
            let c = policy.control_cost()[x].finite().ok_or_else(|| {
                Error::Assumption(format!("infinite control cost at recurrent state {x}"))
            })?;
            control += w * c;
        }
    }
    let mut acc = 0.0;
    costs
        .iter()
        .map(|f| {
            acc += pi.expect(f.values())? + control;
            Ok(acc)
        })
        .collect()
}

/// Prefix sums of `E_{ν_t}[c_t]` with the exact marginals
/// `ν_1 = δ_start`, `ν_{t+1} = ν_t P` of the policy started at `start`.
pub fn expected_realized_cost(policy: &KlPolicy, costs: &[CostFunction], start: usize) -> Result<Vec<f64>> {
    check_costs(policy.n(), costs)?;
    let control = finite_control_costs(policy)?;
    let mut nu = Distribution::point_mass(policy.n(), start)?;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(costs.len());
    for f in costs {
        acc += nu.expect(f.values())? + nu.expect(&control)?;
        out.push(acc);
        nu = nu.propagate(policy.kernel())?;
    }
    Ok(out)
}

/// Average of all revealed costs.
pub fn average_cost(costs: &[CostFunction]) -> Result<CostFunction> {
    let n = costs.first().ok_or(Error::Empty)?.len();
    check_costs(n, costs)?;
    let mut sum = vec![0.0; n];
    for f in costs {
        for (s, v) in sum.iter_mut().zip(f.values()) {
            *s += v;
        }
    }
    let k = costs.len() as f64;
    CostFunction::new(sum.into_iter().map(|s| s / k).collect())
}

/// Twisted kernel of the MPE solution for the average of all costs.
pub fn best_in_hindsight(passive: &StochasticMatrix, costs: &[CostFunction], settings: &SolverSettings) -> Result<KlPolicy> {
    check_costs(passive.n(), costs)?;
    let avg = average_cost(costs)?;
    Ok(optimal_policy(passive, &avg, settings)?.1)
}

/// `pool_size` random policies with flat-Dirichlet rows on the passive supports.
pub fn sample_policy_pool(passive: &StochasticMatrix, pool_size: usize, seed: u64) -> Result<Vec<KlPolicy>> {
    if pool_size == 0 {
        return Err(Error::InvalidParameter {
            name: "pool_size",
            reason: "must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pool_size)
        .map(|_| sample_dirichlet_policy(passive, 1.0, &mut rng))
        .collect()
}

/// Realized cumulative cost of a fixed policy on a cost sequence.
pub fn simulate_fixed_policy(policy: &KlPolicy, costs: &[CostFunction], start: usize, seed: u64) -> Result<Vec<f64>> {
    check_costs(policy.n(), costs)?;
    if start >= policy.n() {
        return Err(Error::IndexOutOfRange { index: start, n: policy.n() });
    }
    let control = policy.control_cost_values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(costs.len());
    for f in costs {
        acc += f.values()[x] + control[x];
        out.push(acc);
        x = sample_next(policy.kernel(), x, &mut rng)?;
    }
    Ok(out)
}

/// Runs every pooled policy on the same costs from the same start with the
/// same random stream, and returns the index of the one with the smallest
/// total realized cost (lowest index on ties) with its prefix costs.
pub fn pool_best_realized_cost(
    pool: &[KlPolicy],
    passive: &StochasticMatrix,
    costs: &[CostFunction],
    start: usize,
    seed: u64,
) -> Result<(usize, Vec<f64>)> {
    if pool.is_empty() {
        return Err(Error::Empty);
    }
    check_costs(passive.n(), costs)?;
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (i, policy) in pool.iter().enumerate() {
        if policy.n() != passive.n() {
            return Err(Error::DimensionMismatch { expected: passive.n(), got: policy.n() });
        }
        let trace = simulate_fixed_policy(policy, costs, start, seed)?;
        let total = *trace.last().unwrap();
        match &best {
            Some((_, b)) if *b.last().unwrap() <= total => {}
            _ => best = Some((i, trace)),
        }
    }
    Ok(best.unwrap())
}

pub fn regret_trace(run: &RunTrace, comparator_cost: &[f64], kind: ComparatorKind) -> Result<RegretTrace> {
    if run.cumulative.len() != comparator_cost.len() {
        return Err(Error::DimensionMismatch {
            expected: run.cumulative.len(),
            got: comparator_cost.len(),
        });
    }
    Ok(RegretTrace {
        horizon: comparator_cost.len(),
        per_step: run
            .cumulative
            .iter()
            .zip(comparator_cost)
            .map(|(c, k)| c - k)
            .collect(),
        comparator_kind: kind,
        comparator_cost: comparator_cost.to_vec(),
    })
}

/// Per-step mean and sample standard deviation over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Mean and `n − 1`-divisor standard deviation at every step.
pub fn summarize(traces: &[Vec<f64>], seeds: Vec<u64>) -> Result<MonteCarloSummary> {
    let runs = traces.len();
    if runs < 2 {
        return Err(Error::InvalidParameter {
            name: "runs",
            reason: format!("need at least 2 traces, got {runs}"),
        });
    }
    let len = traces[0].len();
    if let Some(t) = traces.iter().find(|t| t.len() != len) {
        return Err(Error::DimensionMismatch { expected: len, got: t.len() });
    }
    let k = runs as f64;
    let mean: Vec<f64> = (0..len)
        .map(|t| traces.iter().map(|r| r[t]).sum::<f64>() / k)
        .collect();
    let stddev = (0..len)
        .map(|t| {
            let ss: f64 = traces.iter().map(|r| (r[t] - mean[t]).powi(2)).sum();
            (ss / (k - 1.0)).sqrt()
        })
        .collect();
    Ok(MonteCarloSummary { runs, mean, stddev, seeds })
}

/// Least-squares slope of `log R_t` against `log t` over `t > burn_in`
/// (`trace[i]` is `R_{i+1}`). `None` when some `R_t` there is not positive.
pub fn growth_exponent(trace: &[f64], burn_in: usize) -> Result<Option<f64>> {
    let tail: Vec<(f64, f64)> = trace
        .iter()
        .enumerate()
        .skip(burn_in)
        .map(|(i, &r)| ((i + 1) as f64, r))
        .collect();
    if tail.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two points after burn-in {burn_in}, have {}",
            tail.len()
        )));
    }
    if tail.iter().all(|&(_, r)| r == tail[0].1) {
        return Err(Error::Degenerate("trace is constant after burn-in".into()));
    }
    if tail.iter().any(|&(_, r)| !(r > 0.0) || !r.is_finite()) {
        return Ok(None);
    }
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, r)| (t.ln(), r.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(Some(sxy / sxx))
}

/// Default burn-in: 10% of the horizon.
pub fn default_burn_in(horizon: usize) -> usize {
    horizon / 10
}

/// One tracking experiment's knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub graph: Graph,
    pub horizon: usize,
    pub epsilon: f64,
    pub stay_prob: f64,
    pub delta: f64,
    pub home: usize,
    pub start: usize,
    /// Sampled comparison policies per run; 0 skips the pool baseline.
    pub pool_size: usize,
    pub dirichlet_alpha: f64,
    pub solver: SolverSettings,
}

impl ExperimentSettings {
    pub fn new(graph: Graph) -> Self {
        Self {
            graph,
            horizon: 1000,
            epsilon: DEFAULT_EPSILON,
            stay_prob: DEFAULT_STAY_PROB,
            delta: DEFAULT_DELTA,
            home: 0,
            start: 0,
            pool_size: 1000,
            dirichlet_alpha: 1.0,
            solver: SolverSettings::default(),
        }
    }

    pub fn passive(&self) -> Result<StochasticMatrix> {
        world::build_passive(&self.graph, self.stay_prob, self.delta, self.home)
    }
}

/// Everything produced by one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub seed: u64,
    pub trace: RunTrace,
    pub hindsight: RegretTrace,
    pub pool: Option<RegretTrace>,
    /// Index of the best pooled policy.
    pub pool_best: Option<usize>,
}

/// One replication. The seed is split into independent streams for the
/// environment, the agent, the policy pool and the pool simulations.
pub fn run_experiment(settings: &ExperimentSettings, passive: &StochasticMatrix, seed: u64) -> Result<ExperimentRun> {
    let mut env = world::make_tracking_env(&settings.graph, split_seed(seed, 0), settings.dirichlet_alpha, settings.horizon)?;
    let costs = env.costs(settings.horizon)?;
    let config = OnlineConfig {
        epsilon: settings.epsilon,
        solver: settings.solver,
        ..OnlineConfig::default()
    };
    let trace = run_episode(passive, &mut env, settings.horizon, settings.start, split_seed(seed, 1), &config)?;

    let hindsight_policy = best_in_hindsight(passive, &costs, &settings.solver)?;
    let comparator = steady_state_comparator_cost(&hindsight_policy, &costs)?;
    let hindsight = regret_trace(&trace, &comparator, ComparatorKind::BestInHindsight)?;

    let (pool, pool_best) = if settings.pool_size > 0 {
        let policies = sample_policy_pool(passive, settings.pool_size, split_seed(seed, 2))?;
        let (best, cost) = pool_best_realized_cost(&policies, passive, &costs, settings.start, split_seed(seed, 3))?;
        (Some(regret_trace(&trace, &cost, ComparatorKind::SampledPoolBest)?), Some(best))
    } else {
        (None, None)
    };
    Ok(ExperimentRun {
        seed,
        trace,
        hindsight,
        pool,
        pool_best,
    })
}

/// Replications with their regret summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: Vec<ExperimentRun>,
    pub hindsight: MonteCarloSummary,
    pub pool: Option<MonteCarloSummary>,
}

/// `runs` replications with seeds `split_seed(base_seed, i)`, executed on the
/// current rayon pool. Results are collected in replication order, so the
/// output does not depend on scheduling.
pub fn monte_carlo(settings: &ExperimentSettings, runs: usize, base_seed: u64) -> Result<MonteCarloResult> {
    if runs < 2 {
        return Err(Error::InvalidParameter {
            name: "runs",
            reason: format!("need at least 2 replications, got {runs}"),
        });
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| split_seed(base_seed, i)).collect();
    monte_carlo_with_seeds(settings, seeds)
}

/// Replications with explicitly given seeds.
pub fn monte_carlo_with_seeds(settings: &ExperimentSettings, seeds: Vec<u64>) -> Result<MonteCarloResult> {
    let passive = settings.passive()?;
    let runs: Vec<ExperimentRun> = seeds
        .par_iter()
        .map(|&s| run_experiment(settings, &passive, s))
        .collect::<Result<_>>()?;
    let hindsight_traces: Vec<Vec<f64>> = runs.iter().map(|r| r.hindsight.per_step.clone()).collect();
    let hindsight = summarize(&hindsight_traces, seeds.clone())?;
    let pool = if settings.pool_size > 0 {
        let traces: Vec<Vec<f64>> = runs
            .iter()
            .map(|r| r.pool.as_ref().map(|p| p.per_step.clone()).unwrap_or_default())
            .collect();
        Some(summarize(&traces, seeds)?)
    } else {
        None
    };
    Ok(MonteCarloResult { runs, hindsight, pool })
}
