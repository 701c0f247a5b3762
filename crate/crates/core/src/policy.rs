//! Twisted-kernel policies, KL control costs, steady-state evaluation and
//! the explicit uniform bound constants.

use rand::Rng;
use rand_distr::{Distribution as _, Gamma};

use crate::chains::{
    self, ergodicity_report, invariant_distribution, kl_slices,
    CostFunction, ExtReal, StochasticMatrix,
};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::spectral::{solve_mpe, MpeSolution, SolverSettings};

/// A stationary policy given by its transition kernel, together with the
/// per-state KL control cost `D(kernel(x,·) ‖ passive(x,·))`.
#[derive(Debug, Clone, PartialEq)]
pub struct KlPolicy<T = f64> {
    kernel: StochasticMatrix<T>,
    control_cost: Vec<ExtReal<T>>,
    source_h: Option<Vec<T>>,
}

impl<T: Scalar> KlPolicy<T> {
    /// Wraps an arbitrary kernel, evaluating its control cost against `passive`.
    pub fn from_kernel(passive: &StochasticMatrix<T>, kernel: StochasticMatrix<T>) -> Result<Self> {
        if kernel.n() != passive.n() {
            return Err(Error::DimensionMismatch {
                expected: passive.n(),
                got: kernel.n(),
            });
        }
        let control_cost = (0..passive.n())
            .map(|x| kl_slices(kernel.row(x), passive.row(x)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel,
            control_cost,
            source_h: None,
        })
    }

    /// The passive dynamics themselves: zero control cost everywhere.
    pub fn passive(passive: &StochasticMatrix<T>) -> Self {
        Self {
            kernel: passive.clone(),
            control_cost: vec![ExtReal::Finite(T::zero()); passive.n()],
            source_h: None,
        }
    }

    pub fn kernel(&self) -> &StochasticMatrix<T> {
        &self.kernel
    }

    pub fn control_cost(&self) -> &[ExtReal<T>] {
        &self.control_cost
    }

    /// Control costs as floats (`+inf` where infinite).
    pub fn control_cost_values(&self) -> Vec<T> {
        self.control_cost.iter().map(|c| c.to_float()).collect()
    }

    pub fn source_h(&self) -> Option<&[T]> {
        self.source_h.as_deref()
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }
}

/// `log Σ_y P(x,y) e^{-φ(y)}` over the support of row `x`.
fn log_normalizer<T: Scalar>(passive: &StochasticMatrix<T>, phi: &[T], x: usize) -> T {
    log_sum_exp(
        passive
            .support(x)
            .iter()
            .map(|&y| passive.get(x, y).ln() - phi[y]),
    )
}

/// Twisted kernel `P̃_φ(x,y) = P*(x,y) e^{-φ(y)} / Σ_z P*(x,z) e^{-φ(z)}`.
///
/// Rows keep exactly the support of the passive rows. The control cost of
/// each row is `-E_{P̃_φ(x,·)}[φ] - log Σ_z P*(x,z) e^{-φ(z)}`.
pub fn twisted_kernel<T: Scalar>(passive: &StochasticMatrix<T>, phi: &[T]) -> Result<KlPolicy<T>> {
    let n = passive.n();
    if phi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi.len(),
        });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "phi",
            reason: "twisting function must be finite".into(),
        });
    }
    if chains::span_seminorm(phi)? == T::zero() {
        return Ok(KlPolicy {
            source_h: Some(phi.to_vec()),
            ..KlPolicy::passive(passive)
        });
    }
    let mut data = vec![T::zero(); n * n];
    let mut control_cost = Vec::with_capacity(n);
    for x in 0..n {
        let log_z = log_normalizer(passive, phi, x);
        let mut mean_phi = T::zero();
        let mut mass = T::zero();
        for &y in passive.support(x) {
            let w = (passive.get(x, y).ln() - phi[y] - log_z).exp();
            data[x * n + y] = w;
            mass = mass + w;
        }
        // Rounding leaves the row mass within a few ulps of one; fold it back.
        for &y in passive.support(x) {
            data[x * n + y] = data[x * n + y] / mass;
            mean_phi = mean_phi + data[x * n + y] * phi[y];
        }
        control_cost.push(ExtReal::Finite((-mean_phi - log_z).max(T::zero())));
    }
    Ok(KlPolicy {
        kernel: StochasticMatrix::from_raw(n, data),
        control_cost,
        source_h: Some(phi.to_vec()),
    })
}

/// `D(P̃_φ(x,·) ‖ P̃_φ'(x,·)) = E_{P̃_φ(x,·)}[φ' − φ] + log(Λ_φ'(x) / Λ_φ(x))`.
pub fn twisted_row_divergence<T: Scalar>(
    passive: &StochasticMatrix<T>,
    phi: &[T],
    phi_prime: &[T],
    x: usize,
) -> Result<T> {
    let n = passive.n();
    for len in [phi.len(), phi_prime.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if x >= n {
        return Err(Error::IndexOutOfRange { index: x, n });
    }
    let log_z = log_normalizer(passive, phi, x);
    let log_z_prime = log_normalizer(passive, phi_prime, x);
    let mean: T = passive
        .support(x)
        .iter()
        .map(|&y| (passive.get(x, y).ln() - phi[y] - log_z).exp() * (phi_prime[y] - phi[y]))
        .sum();
    Ok((mean + log_z_prime - log_z).max(T::zero()))
}

/// Offline optimal policy: solve the MPE for `f`, then twist by `h_f`.
pub fn optimal_policy<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
) -> Result<(MpeSolution<T>, KlPolicy<T>)> {
    let sol = solve_mpe(passive, f, settings)?;
    let policy = twisted_kernel(passive, &sol.h)?;
    Ok((sol, policy))
}

/// `c(x, u) = f(x) + D(u ‖ P*(x,·))` with `u` the policy row at `x`.
pub fn state_action_cost<T: Scalar>(
    f: &CostFunction<T>,
    policy: &KlPolicy<T>,
    x: usize,
) -> Result<ExtReal<T>> {
    let n = policy.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if x >= n {
        return Err(Error::IndexOutOfRange { index: x, n });
    }
    Ok(ExtReal::Finite(f.values()[x]) + policy.control_cost[x])
}

/// Average cost `E_π[f + D]` under the policy's invariant distribution.
pub fn steady_state_cost<T: Scalar>(f: &CostFunction<T>, policy: &KlPolicy<T>) -> Result<T> {
    if f.len() != policy.n() {
        return Err(Error::DimensionMismatch {
            expected: policy.n(),
            got: f.len(),
        });
    }
    let pi = invariant_distribution(&policy.kernel)?;
    let mut total = T::zero();
    for (x, &w) in pi.weights().iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let c = policy.control_cost[x].finite().ok_or_else(|| {
            Error::Assumption(format!("infinite control cost at recurrent state {x}"))
        })?;
        total = total + w * (f.values()[x] + c);
    }
    Ok(total)
}

/// Constants bounding per-step cost, relative-value span and passive mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants<T = f64> {
    /// `cost_cap + log(1/p*)`: bound on every finite-KL state-action cost.
    pub k0: T,
    /// `log(1/θ) + n̄·cost_cap`: bound on the span of relative values.
    pub k1: T,
    /// Dobrushin coefficient of the passive kernel.
    pub alpha_passive: T,
    /// Smallest nonzero passive transition probability.
    pub p_star: T,
    pub theta: T,
    pub nbar: usize,
}

pub fn bound_constants<T: Scalar>(passive: &StochasticMatrix<T>, cost_cap: T) -> Result<BoundConstants<T>> {
    if !(cost_cap >= T::zero()) || !cost_cap.is_finite() {
        return Err(Error::InvalidParameter {
            name: "cost_cap",
            reason: format!("must be finite and nonnegative, got {cost_cap}"),
        });
    }
    let report = ergodicity_report(passive);
    let (Some(nbar), Some(theta)) = (report.nbar, report.theta) else {
        return Err(Error::NotErgodic {
            irreducible: report.irreducible,
            aperiodic: report.aperiodic,
        });
    };
    if !(report.dobrushin < T::one()) {
        return Err(Error::Assumption(format!(
            "Dobrushin coefficient of the passive kernel is {}, must be < 1",
            report.dobrushin
        )));
    }
    let p_star = (0..passive.n())
        .flat_map(|x| passive.support(x).iter().map(move |&y| passive.get(x, y)))
        .fold(T::one(), T::min);
    Ok(BoundConstants {
        k0: cost_cap + p_star.recip().ln(),
        k1: theta.recip().ln() + T::from_usize(nbar).unwrap() * cost_cap,
        alpha_passive: report.dobrushin,
        p_star,
        theta,
        nbar,
    })
}

/// `max_x ‖a(x,·) − b(x,·)‖₁`.
pub fn kernel_sup_distance<T: Scalar>(a: &StochasticMatrix<T>, b: &StochasticMatrix<T>) -> Result<T> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    (0..a.n())
        .map(|x| chains::l1_distance(a.row(x), b.row(x)))
        .try_fold(T::zero(), |m, d| Ok(m.max(d?)))
}

/// Random policy whose rows are flat-Dirichlet(`alpha`) draws over the
/// support of the passive rows. Draws that are not unichain are rejected
/// and redrawn.
pub fn sample_dirichlet_policy<T: Scalar, R: Rng + ?Sized>(
    passive: &StochasticMatrix<T>,
    alpha: f64,
    rng: &mut R,
) -> Result<KlPolicy<T>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter {
        name: "alpha",
        reason: e.to_string(),
    })?;
    let n = passive.n();
    loop {
        let mut data = vec![T::zero(); n * n];
        for x in 0..n {
            let support = passive.support(x);
            let draws = loop {
                let d: Vec<f64> = support.iter().map(|_| gamma.sample(rng)).collect();
                if d.iter().all(|&g| g > 0.0) {
                    break d;
                }
            };
            let total: f64 = draws.iter().sum();
            for (&y, g) in support.iter().zip(draws) {
                data[x * n + y] = T::lit(g / total);
            }
        }
        let kernel = StochasticMatrix::from_raw(n, data);
        if chains::is_unichain(&kernel) {
            return KlPolicy::from_kernel(passive, kernel);
        }
    }
}
