//! Multiplicative Poisson equation `e^{-f} P* V = e^{-λ} V`.
//!
//! The dominant (Frobenius–Perron) eigenpair of the twisted matrix
//! `A(x, y) = e^{-f(x)} P*(x, y)` is found by power iteration. Every
//! iterate is certified by the Collatz–Wielandt bracket
//!
//! ```text
//! min_x (AV)(x)/V(x)  <=  e^{-λ}  <=  max_x (AV)(x)/V(x)
//! ```
//!
//! which is monotone along the iteration for a positive start vector.
//! The relative value function is `h = -log V`, pinned at a reference
//! state so that `h(x°) = 0`.
//!
//! The loop normally runs on the linear scale with `e^{-(f - min f)}`
//! factored out, which keeps every entry of `A` in `(0, 1]`. If an iterate
//! leaves the normal floating-point range the solve restarts on the log
//! scale, where every product is evaluated with log-sum-exp.

use crate::chains::{self, CostFunction, StochasticMatrix};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Power-iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T = f64> {
    /// Maximum relative width of the eigenvalue bracket.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Reference state `x°` with `h(x°) = 0`.
    pub pin_index: usize,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(T::SOLVER_TOL),
            max_iterations: 100_000,
            pin_index: 0,
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("must be positive, got {}", self.tolerance),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be at least 1".into(),
            });
        }
        if self.pin_index >= n {
            return Err(Error::IndexOutOfRange {
                index: self.pin_index,
                n,
            });
        }
        Ok(())
    }
}

/// Certified solution of the multiplicative Poisson equation.
#[derive(Debug, Clone, PartialEq)]
pub struct MpeSolution<T = f64> {
    /// Optimal average cost `λ_f`.
    pub lambda: T,
    /// Relative value function, `h[pin] = 0`.
    pub h: Vec<T>,
    /// `V = e^{-h}`, `v[pin] = 1`.
    pub v: Vec<T>,
    /// Collatz–Wielandt bounds `(lower, upper)` on `e^{-λ}`.
    pub bracket: (T, T),
    pub iterations: usize,
}

struct Outcome<T> {
    log_v: Vec<T>,
    log_lower: T,
    log_upper: T,
    iterations: usize,
    converged: bool,
}

fn bracket_closed<T: Scalar>(log_lower: T, log_upper: T, tol: T) -> bool {
    // (U - L) / U = 1 - e^{-(log U - log L)}
    -(log_lower - log_upper).exp_m1() <= tol
}

fn check_inputs<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
) -> Result<()> {
    let n = passive.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    settings.validate(n)?;
    let irreducible = chains::is_irreducible(passive);
    let aperiodic = irreducible && chains::is_aperiodic(passive);
    if !(irreducible && aperiodic) {
        return Err(Error::NotErgodic {
            irreducible,
            aperiodic,
        });
    }
    Ok(())
}

/// Linear-scale loop. Returns `None` if an iterate under- or overflows.
fn iterate_linear<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &[T],
    settings: &SolverSettings<T>,
    start: &[T],
    observe: &mut dyn FnMut(T, T),
) -> Option<Outcome<T>> {
    let n = passive.n();
    let f_min = f.iter().copied().fold(T::infinity(), T::min);
    let weight: Vec<T> = f.iter().map(|&fx| (f_min - fx).exp()).collect();
    let pin = settings.pin_index;
    let floor = T::min_positive_value() / T::epsilon();

    let mut v: Vec<T> = start.iter().map(|&w| w.exp()).collect();
    let mut next = vec![T::zero(); n];
    let mut iterations = 0;
    loop {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for x in 0..n {
            let s: T = passive
                .support(x)
                .iter()
                .map(|&y| passive.get(x, y) * v[y])
                .sum();
            let ax = weight[x] * s;
            let ratio = ax / v[x];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            next[x] = ax;
        }
        if !(lo > T::zero()) || !hi.is_finite() {
            return None;
        }
        let log_lower = lo.ln() - f_min;
        let log_upper = hi.ln() - f_min;
        observe(log_lower, log_upper);
        let converged = bracket_closed(log_lower, log_upper, settings.tolerance);
        if converged || iterations >= settings.max_iterations {
            return Some(Outcome {
                log_v: v.iter().map(|x| x.ln()).collect(),
                log_lower,
                log_upper,
                iterations,
                converged,
            });
        }
        let scale = next[pin];
        for (vx, &nx) in v.iter_mut().zip(&next) {
            *vx = nx / scale;
            if !(*vx >= floor) || !vx.is_finite() {
                return None;
            }
        }
        iterations += 1;
    }
}

/// Log-scale loop: `w = log V`, every product through log-sum-exp.
fn iterate_log<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &[T],
    settings: &SolverSettings<T>,
    start: &[T],
    observe: &mut dyn FnMut(T, T),
) -> Outcome<T> {
    let n = passive.n();
    let log_p: Vec<Vec<(usize, T)>> = (0..n)
        .map(|x| {
            passive
                .support(x)
                .iter()
                .map(|&y| (y, passive.get(x, y).ln()))
                .collect()
        })
        .collect();
    let pin = settings.pin_index;
    let mut w = start.to_vec();
    let mut next = vec![T::zero(); n];
    let mut iterations = 0;
    loop {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for x in 0..n {
            let row = &log_p[x];
            let lw = -f[x] + log_sum_exp(row.iter().map(|&(y, lp)| lp + w[y]));
            let r = lw - w[x];
            lo = lo.min(r);
            hi = hi.max(r);
            next[x] = lw;
        }
        observe(lo, hi);
        let converged = bracket_closed(lo, hi, settings.tolerance);
        if converged || iterations >= settings.max_iterations {
            return Outcome {
                log_v: w,
                log_lower: lo,
                log_upper: hi,
                iterations,
                converged,
            };
        }
        let shift = next[pin];
        for (wx, &nx) in w.iter_mut().zip(&next) {
            *wx = nx - shift;
        }
        iterations += 1;
    }
}

fn finish<T: Scalar>(out: Outcome<T>, pin: usize) -> Result<MpeSolution<T>> {
    let lower = out.log_lower.exp();
    let upper = out.log_upper.exp();
    if !out.converged {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            lower: lower.as_f64(),
            upper: upper.as_f64(),
        });
    }
    // log of the bracket midpoint, evaluated relative to the lower end
    let half = T::lit(0.5);
    let log_mid = out.log_lower + (half + half * (out.log_upper - out.log_lower).exp()).ln();
    let shift = out.log_v[pin];
    let h: Vec<T> = out.log_v.iter().map(|&w| -(w - shift)).collect();
    let v = h.iter().map(|&hx| (-hx).exp()).collect();
    Ok(MpeSolution {
        lambda: -log_mid,
        h,
        v,
        bracket: (lower, upper),
        iterations: out.iterations,
    })
}

fn run<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
    start_log: &[T],
    observe: &mut dyn FnMut(T, T),
) -> Result<MpeSolution<T>> {
    check_inputs(passive, f, settings)?;
    let values = f.values();
    let out = match iterate_linear(passive, values, settings, start_log, observe) {
        Some(out) => out,
        None => iterate_log(passive, values, settings, start_log, observe),
    };
    finish(out, settings.pin_index)
}

/// Solves the MPE from the constant start vector `V ≡ 1`.
pub fn solve_mpe<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
) -> Result<MpeSolution<T>> {
    let start = vec![T::zero(); passive.n()];
    run(passive, f, settings, &start, &mut |_, _| {})
}

/// Solves the MPE from a caller-supplied strictly positive start vector.
pub fn solve_mpe_from<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
    start: &[T],
) -> Result<MpeSolution<T>> {
    if start.len() != passive.n() {
        return Err(Error::DimensionMismatch {
            expected: passive.n(),
            got: start.len(),
        });
    }
    if start.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "start",
            reason: "start vector must be finite and strictly positive".into(),
        });
    }
    let start_log: Vec<T> = start.iter().map(|s| s.ln()).collect();
    run(passive, f, settings, &start_log, &mut |_, _| {})
}

/// Forces the log-scale loop. Same contract as [`solve_mpe`].
pub fn solve_mpe_log_domain<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
) -> Result<MpeSolution<T>> {
    check_inputs(passive, f, settings)?;
    let start = vec![T::zero(); passive.n()];
    let out = iterate_log(passive, f.values(), settings, &start, &mut |_, _| {});
    finish(out, settings.pin_index)
}

/// Collatz–Wielandt bracket `(lower, upper)` on `e^{-λ}` at every iterate of
/// [`solve_mpe`], in iteration order.
pub fn bracket_history<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    settings: &SolverSettings<T>,
) -> Result<Vec<(T, T)>> {
    let mut history = Vec::new();
    let start = vec![T::zero(); passive.n()];
    let result = run(passive, f, settings, &start, &mut |lo, hi| {
        history.push((lo.exp(), hi.exp()))
    });
    match result {
        Ok(_) | Err(Error::NoConvergence { .. }) => Ok(history),
        Err(e) => Err(e),
    }
}

/// `max_x |h(x) + λ − f(x) + log Σ_y P*(x,y) e^{-h(y)}|`.
pub fn acoe_residual<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    sol: &MpeSolution<T>,
) -> Result<T> {
    acoe_residual_parts(passive, f, sol.lambda, &sol.h)
}

/// ACOE residual for an arbitrary `(λ, h)` pair.
pub fn acoe_residual_parts<T: Scalar>(
    passive: &StochasticMatrix<T>,
    f: &CostFunction<T>,
    lambda: T,
    h: &[T],
) -> Result<T> {
    let n = passive.n();
    for len in [f.len(), h.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut worst = T::zero();
    for x in 0..n {
        let log_lambda_h =
            log_sum_exp(passive.support(x).iter().map(|&y| passive.get(x, y).ln() - h[y]));
        let r = (h[x] + lambda - f.values()[x] + log_lambda_h).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Largest state count accepted by [`eigen_oracle`].
pub const ORACLE_MAX_STATES: usize = 12;

/// Brute-force dominant eigenpair of `e^{-f} P*`: 64 normalized squarings of
/// the matrix, the eigenvector read off the resulting rank-one limit, and
/// the eigenvalue from one Collatz–Wielandt bracket on that vector.
/// Returns `(λ, V)` with `V[0] = 1`.
pub fn eigen_oracle(passive: &StochasticMatrix<f64>, f: &CostFunction<f64>) -> Result<(f64, Vec<f64>)> {
    let n = passive.n();
    if n > ORACLE_MAX_STATES {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("oracle limited to {ORACLE_MAX_STATES} states, got {n}"),
        });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    let mut a = vec![0.0f64; n * n];
    for x in 0..n {
        for y in 0..n {
            a[x * n + y] = (-f.values()[x]).exp() * passive.get(x, y);
        }
    }
    let original = a.clone();
    for _ in 0..64 {
        let mut sq = vec![0.0f64; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    sq[i * n + j] += a[i * n + k] * a[k * n + j];
                }
            }
        }
        let m = sq.iter().copied().fold(0.0f64, f64::max);
        if !(m > 0.0) {
            return Err(Error::Degenerate("matrix power vanished".into()));
        }
        a = sq.into_iter().map(|v| v / m).collect();
    }
    let mut v: Vec<f64> = (0..n).map(|x| a[x * n..(x + 1) * n].iter().sum()).collect();
    if v.iter().any(|&vx| !(vx > 0.0)) {
        return Err(Error::Degenerate("limit is not strictly positive".into()));
    }
    let v0 = v[0];
    v.iter_mut().for_each(|vx| *vx /= v0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x in 0..n {
        let av: f64 = (0..n).map(|y| original[x * n + y] * v[y]).sum();
        lo = lo.min(av / v[x]);
        hi = hi.max(av / v[x]);
    }
    Ok((-(0.5 * (lo + hi)).ln(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn worked() -> (StochasticMatrix, CostFunction) {
        (
            mat(&[&[0.5, 0.5], &[0.5, 0.5]]),
            CostFunction::new(vec![0.0, 2f64.ln()]).unwrap(),
        )
    }

    #[test]
    fn zero_cost_is_trivial_fixed_point() {
        let p = mat(&[&[0.2, 0.8, 0.0], &[0.1, 0.1, 0.8], &[0.5, 0.0, 0.5]]);
        let sol = solve_mpe(&p, &CostFunction::zeros(3), &SolverSettings::default()).unwrap();
        assert!(sol.lambda.abs() < 1e-12);
        assert!(sol.h.iter().all(|h| h.abs() < 1e-12));
        assert!(sol.v.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_cost_shifts_lambda_only() {
        let p = mat(&[&[0.2, 0.8, 0.0], &[0.1, 0.1, 0.8], &[0.5, 0.0, 0.5]]);
        let f = CostFunction::constant(3, 0.7).unwrap();
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        assert!((sol.lambda - 0.7).abs() < 1e-12);
        assert!(sol.h.iter().all(|h| h.abs() < 1e-12));
    }

    #[test]
    fn worked_two_state_example() {
        let (p, f) = worked();
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        assert!((sol.lambda - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((sol.lambda - 0.287682).abs() < 1e-6);
        assert!((sol.v[0] - 1.0).abs() < 1e-12 && (sol.v[1] - 0.5).abs() < 1e-12);
        assert!(sol.h[0] == 0.0 && (sol.h[1] - 2f64.ln()).abs() < 1e-12);
        let (lo, hi) = sol.bracket;
        let eig = (-sol.lambda).exp();
        assert!(lo <= eig && eig <= hi && hi - lo <= 1e-12);
    }

    #[test]
    fn worked_example_residuals() {
        let (p, f) = worked();
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        assert!(acoe_residual(&p, &f, &sol).unwrap() < 1e-14);
        // A stale h is detected.
        let mut stale = sol.clone();
        stale.h[1] += 0.1;
        assert!(acoe_residual(&p, &f, &stale).unwrap() >= 0.01);
    }

    #[test]
    fn oracle_worked_example() {
        let (p, f) = worked();
        let (lambda, v) = eigen_oracle(&p, &f).unwrap();
        assert!((lambda - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((v[1] - 0.5).abs() < 1e-12);
        let (lambda0, _) = eigen_oracle(&p, &CostFunction::zeros(2)).unwrap();
        assert!(lambda0.abs() < 1e-14);
    }

    #[test]
    fn oracle_guard() {
        let p = StochasticMatrix::rank_one(&chains::Distribution::uniform(13).unwrap());
        assert!(eigen_oracle(&p, &CostFunction::zeros(13)).is_err());
    }

    #[test]
    fn rejects_non_ergodic_passive() {
        let swap = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let err = solve_mpe(&swap, &CostFunction::zeros(2), &SolverSettings::default());
        assert_eq!(err.unwrap_err(), Error::NotErgodic { irreducible: true, aperiodic: false });
        let reducible = mat(&[&[1.0, 0.0], &[0.5, 0.5]]);
        assert!(matches!(
            solve_mpe(&reducible, &CostFunction::zeros(2), &SolverSettings::default()),
            Err(Error::NotErgodic { irreducible: false, .. })
        ));
    }

    #[test]
    fn reports_non_convergence_with_bracket() {
        let p = mat(&[&[0.1, 0.9, 0.0], &[0.0, 0.1, 0.9], &[0.9, 0.0, 0.1]]);
        let f = CostFunction::new(vec![0.0, 0.5, 1.0]).unwrap();
        let settings = SolverSettings { max_iterations: 2, ..SolverSettings::default() };
        match solve_mpe(&p, &f, &settings) {
            Err(Error::NoConvergence { iterations, lower, upper }) => {
                assert_eq!(iterations, 2);
                assert!(lower < upper);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_settings() {
        let (p, f) = worked();
        let bad = SolverSettings { tolerance: 0.0, ..SolverSettings::default() };
        assert!(solve_mpe(&p, &f, &bad).is_err());
        let bad = SolverSettings { pin_index: 2, ..SolverSettings::default() };
        assert!(solve_mpe(&p, &f, &bad).is_err());
        assert!(solve_mpe(&p, &CostFunction::zeros(3), &SolverSettings::default()).is_err());
    }

    #[test]
    fn log_domain_survives_huge_costs() {
        let p = mat(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]]);
        let f = CostFunction::new(vec![0.0, 400.0, 1500.0]).unwrap();
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        assert!(sol.lambda.is_finite());
        assert!(acoe_residual(&p, &f, &sol).unwrap() < 1e-8);
        let forced = solve_mpe_log_domain(&p, &f, &SolverSettings::default()).unwrap();
        assert!((forced.lambda - sol.lambda).abs() < 1e-9);
    }

    #[test]
    fn linear_and_log_paths_agree() {
        let p = mat(&[&[0.2, 0.8, 0.0], &[0.1, 0.1, 0.8], &[0.5, 0.0, 0.5]]);
        let f = CostFunction::new(vec![0.3, 0.9, 0.1]).unwrap();
        let s = SolverSettings::default();
        let a = solve_mpe(&p, &f, &s).unwrap();
        let b = solve_mpe_log_domain(&p, &f, &s).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-12);
        for (x, y) in a.h.iter().zip(&b.h) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn bracket_is_monotone() {
        let p = mat(&[&[0.1, 0.9, 0.0], &[0.0, 0.1, 0.9], &[0.9, 0.0, 0.1]]);
        let f = CostFunction::new(vec![0.0, 0.5, 1.0]).unwrap();
        let hist = bracket_history(&p, &f, &SolverSettings::default()).unwrap();
        assert!(hist.len() > 5);
        for w in hist.windows(2) {
            assert!(w[1].0 >= w[0].0 * (1.0 - 1e-14));
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn single_precision_solve() {
        let p = StochasticMatrix::<f32>::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let f = CostFunction::new(vec![0.0f32, 2f32.ln()]).unwrap();
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        assert!((sol.lambda - (4.0f32 / 3.0).ln()).abs() < 1e-5);
    }
}
