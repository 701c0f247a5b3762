//! Phased online strategy.
//!
//! Time is cut into phases of length `τ_m = ⌈m^{1/3−ε}⌉`. At the start of
//! phase `m` the strategy averages every state cost revealed during the
//! completed phases, solves the MPE for that average and follows the
//! resulting twisted kernel, unchanged, until the phase ends.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chains::{sample_next, CostFunction, StochasticMatrix};
use crate::error::{Error, Result};
use crate::policy::{kernel_sup_distance, twisted_kernel, KlPolicy};
use crate::scalar::Scalar;
use crate::spectral::{solve_mpe, SolverSettings};

/// Default exponent slack `ε`.
pub const DEFAULT_EPSILON: f64 = 0.05;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0 / 3.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in (0, 1/3), got {epsilon}"),
        });
    }
    Ok(())
}

/// `⌈m^{1/3−ε}⌉` for the 1-based phase index `m`.
///
/// Powers that land within rounding distance of an integer are snapped to
/// it, so e.g. `16^{1/4}` yields 2 rather than 3.
pub fn phase_length(epsilon: f64, m: usize) -> usize {
    let x = (m as f64).powf(1.0 / 3.0 - epsilon);
    let r = x.round();
    let len = if (x - r).abs() <= 1e-9 * x { r } else { x.ceil() };
    (len as usize).max(1)
}

/// Phase lengths and cumulative boundaries covering a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub epsilon: f64,
    /// `tau[m-1] = τ_m`.
    pub tau: Vec<usize>,
    /// `tau_cum[m-1] = τ_{1:m}`.
    pub tau_cum: Vec<usize>,
    pub horizon: usize,
}

impl PhaseSchedule {
    /// Number of phases that end at or before the horizon.
    pub fn complete_phases(&self) -> usize {
        self.tau_cum.iter().take_while(|&&c| c <= self.horizon).count()
    }

    /// `(4/3) T^{3/4+ε}`, the phase-count bound used in the regret analysis.
    pub fn phase_count_bound(&self) -> f64 {
        4.0 / 3.0 * (self.horizon as f64).powf(0.75 + self.epsilon)
    }

    /// 1-based phase containing the 0-based step `t`.
    pub fn phase_of_step(&self, t: usize) -> usize {
        self.tau_cum.partition_point(|&c| c <= t) + 1
    }
}

pub fn make_schedule(epsilon: f64, horizon: usize) -> Result<PhaseSchedule> {
    check_epsilon(epsilon)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let mut tau = Vec::new();
    let mut tau_cum = Vec::new();
    let mut total = 0;
    let mut m = 1;
    while total < horizon {
        let len = phase_length(epsilon, m);
        total += len;
        tau.push(len);
        tau_cum.push(total);
        m += 1;
    }
    Ok(PhaseSchedule {
        epsilon,
        tau,
        tau_cum,
        horizon,
    })
}

/// Source of the state-cost sequence. It never observes the agent, so the
/// sequence cannot depend on the agent's states or actions.
pub trait CostStream<T: Scalar = f64> {
    fn n(&self) -> usize;

    /// Cost for the next time step.
    fn next_cost(&mut self) -> CostFunction<T>;
}

/// Replays a fixed list of costs, repeating the last one when exhausted.
#[derive(Debug, Clone)]
pub struct ReplayStream<T = f64> {
    costs: Vec<CostFunction<T>>,
    cursor: usize,
}

impl<T: Scalar> ReplayStream<T> {
    pub fn new(costs: Vec<CostFunction<T>>) -> Result<Self> {
        let n = costs.first().ok_or(Error::Empty)?.len();
        if let Some(bad) = costs.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { costs, cursor: 0 })
    }

    pub fn constant(f: CostFunction<T>) -> Self {
        Self {
            costs: vec![f],
            cursor: 0,
        }
    }
}

impl<T: Scalar> CostStream<T> for ReplayStream<T> {
    fn n(&self) -> usize {
        self.costs[0].len()
    }

    fn next_cost(&mut self) -> CostFunction<T> {
        let i = self.cursor.min(self.costs.len() - 1);
        self.cursor += 1;
        self.costs[i].clone()
    }
}

/// Knobs of the phased strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig<T = f64> {
    pub epsilon: f64,
    /// Upper bound on revealed state costs (the admissible class).
    pub cost_cap: T,
    /// Reject costs above `cost_cap`; disable to accept any nonnegative cost.
    pub enforce_cost_cap: bool,
    pub solver: SolverSettings<T>,
}

impl<T: Scalar> Default for OnlineConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            cost_cap: T::one(),
            enforce_cost_cap: true,
            solver: SolverSettings::default(),
        }
    }
}

/// Mutable state of the strategy between steps.
#[derive(Debug, Clone)]
pub struct StrategyState<T = f64> {
    /// 1-based index of the running phase.
    pub current_phase: usize,
    pub policy: KlPolicy<T>,
    /// Sum of the costs of all completed phases.
    pub cost_sum: Vec<T>,
    /// Steps in the completed phases, `τ_{1:m−1}`.
    pub steps_seen: usize,
    pub current_state: usize,
    /// Steps taken in the running phase.
    pub phase_step: usize,
    /// Length of the running phase.
    pub phase_len: usize,
    /// Costs revealed in the running phase, merged when it closes.
    pub phase_buffer: Vec<T>,
}

/// What happened at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T = f64> {
    /// State occupied when the policy was applied.
    pub state: usize,
    pub state_cost: T,
    pub control_cost: T,
    pub next_state: usize,
    pub phase: usize,
    /// Whether a new phase (and policy) starts after this step.
    pub phase_closed: bool,
}

/// The phased strategy bound to a passive kernel.
#[derive(Debug, Clone)]
pub struct PhasedStrategy<'a, T: Scalar = f64> {
    passive: &'a StochasticMatrix<T>,
    config: OnlineConfig<T>,
    state: StrategyState<T>,
}

impl<'a, T: Scalar> PhasedStrategy<'a, T> {
    /// Sets up phase 1, whose policy is the MPE solution for the zero cost.
    pub fn new(passive: &'a StochasticMatrix<T>, start: usize, config: OnlineConfig<T>) -> Result<Self> {
        check_epsilon(config.epsilon)?;
        let n = passive.n();
        if start >= n {
            return Err(Error::IndexOutOfRange { index: start, n });
        }
        let mut strategy = Self {
            passive,
            config,
            state: StrategyState {
                current_phase: 0,
                policy: KlPolicy::passive(passive),
                cost_sum: vec![T::zero(); n],
                steps_seen: 0,
                current_state: start,
                phase_step: 0,
                phase_len: 0,
                phase_buffer: vec![T::zero(); n],
            },
        };
        strategy.begin_phase()?;
        Ok(strategy)
    }

    pub fn state(&self) -> &StrategyState<T> {
        &self.state
    }

    pub fn config(&self) -> &OnlineConfig<T> {
        &self.config
    }

    /// Average of the costs revealed during all completed phases (zero before any).
    pub fn average_cost(&self) -> CostFunction<T> {
        let s = &self.state;
        if s.steps_seen == 0 {
            return CostFunction::zeros(self.passive.n());
        }
        let k = T::from_usize(s.steps_seen).unwrap();
        CostFunction::new(s.cost_sum.iter().map(|&c| c / k).collect())
            .expect("averages of nonnegative costs are nonnegative")
    }

    /// Opens the next phase: solve the MPE for the running average and
    /// switch to the twisted kernel of its relative value function.
    pub fn begin_phase(&mut self) -> Result<()> {
        let avg = self.average_cost();
        let sol = solve_mpe(self.passive, &avg, &self.config.solver)?;
        let policy = twisted_kernel(self.passive, &sol.h)?;
        let s = &mut self.state;
        s.policy = policy;
        s.current_phase += 1;
        s.phase_step = 0;
        s.phase_len = phase_length(self.config.epsilon, s.current_phase);
        Ok(())
    }

    /// One round: pay `f_t(X_t) + D(P_t(X_t,·) ‖ P*(X_t,·))`, move, and
    /// close the phase if it is complete.
    pub fn step<R: rand::Rng + ?Sized>(&mut self, f_t: &CostFunction<T>, rng: &mut R) -> Result<StepRecord<T>> {
        let n = self.passive.n();
        if f_t.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f_t.len() });
        }
        if self.config.enforce_cost_cap && f_t.max() > self.config.cost_cap {
            return Err(Error::CostCapViolation {
                max: f_t.max().as_f64(),
                cap: self.config.cost_cap.as_f64(),
            });
        }
        let x = self.state.current_state;
        let control_cost = self.state.policy.control_cost()[x].finite().ok_or_else(|| {
            Error::Assumption(format!("infinite control cost at state {x}"))
        })?;
        let next_state = sample_next(self.state.policy.kernel(), x, rng)?;
        let phase = self.state.current_phase;

        let s = &mut self.state;
        for (b, &c) in s.phase_buffer.iter_mut().zip(f_t.values()) {
            *b = *b + c;
        }
        s.current_state = next_state;
        s.phase_step += 1;
        let phase_closed = s.phase_step == s.phase_len;
        if phase_closed {
            for (sum, b) in s.cost_sum.iter_mut().zip(s.phase_buffer.iter_mut()) {
                *sum = *sum + *b;
                *b = T::zero();
            }
            s.steps_seen += s.phase_len;
            self.begin_phase()?;
        }
        Ok(StepRecord {
            state: x,
            state_cost: f_t.values()[x],
            control_cost,
            next_state,
            phase,
            phase_closed,
        })
    }
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T = f64> {
    pub states: Vec<usize>,
    pub state_costs: Vec<T>,
    pub control_costs: Vec<T>,
    /// `C_t`, prefix sums of state plus control cost.
    pub cumulative: Vec<T>,
    /// 1-based phase of every step.
    pub phases: Vec<usize>,
    /// Steps (0-based) at which a new policy took effect.
    pub phase_boundaries: Vec<usize>,
    /// Per boundary: `‖P^(m+1) − P^(m)‖∞ · τ_{1:m} / τ_m`.
    pub policy_drift: Vec<T>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn step_costs(&self) -> impl Iterator<Item = T> + '_ {
        self.state_costs
            .iter()
            .zip(&self.control_costs)
            .map(|(&a, &b)| a + b)
    }

    pub fn max_drift(&self) -> T {
        self.policy_drift.iter().copied().fold(T::zero(), T::max)
    }
}

/// Runs the phased strategy for `horizon` steps against `env` starting from
/// `start`; the agent's transitions are driven by a generator seeded with `seed`.
pub fn run_episode<T: Scalar, E: CostStream<T> + ?Sized>(
    passive: &StochasticMatrix<T>,
    env: &mut E,
    horizon: usize,
    start: usize,
    seed: u64,
    config: &OnlineConfig<T>,
) -> Result<RunTrace<T>> {
    if env.n() != passive.n() {
        return Err(Error::DimensionMismatch {
            expected: passive.n(),
            got: env.n(),
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strategy = PhasedStrategy::new(passive, start, config.clone())?;
    let mut trace = RunTrace {
        states: Vec::with_capacity(horizon),
        state_costs: Vec::with_capacity(horizon),
        control_costs: Vec::with_capacity(horizon),
        cumulative: Vec::with_capacity(horizon),
        phases: Vec::with_capacity(horizon),
        phase_boundaries: vec![0],
        policy_drift: Vec::new(),
    };
    let mut total = T::zero();
    for t in 0..horizon {
        let f_t = env.next_cost();
        let st = strategy.state();
        let before = (st.phase_step + 1 == st.phase_len).then(|| st.policy.kernel().clone());
        let rec = strategy.step(&f_t, &mut rng)?;
        total = total + rec.state_cost + rec.control_cost;
        trace.states.push(rec.state);
        trace.state_costs.push(rec.state_cost);
        trace.control_costs.push(rec.control_cost);
        trace.cumulative.push(total);
        trace.phases.push(rec.phase);
        if let (true, Some(before)) = (t + 1 < horizon, before) {
            trace.phase_boundaries.push(t + 1);
            let dist = kernel_sup_distance(strategy.state().policy.kernel(), &before)?;
            let len = T::from_usize(phase_length(config.epsilon, rec.phase)).unwrap();
            let seen = T::from_usize(strategy.state().steps_seen).unwrap();
            trace.policy_drift.push(dist * seen / len);
        }
    }
    Ok(trace)
}
