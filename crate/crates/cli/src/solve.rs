use std::fmt;
use std::path::PathBuf;

use klmdp::chains::span_seminorm;
use klmdp::policy::twisted_kernel;
use klmdp::spectral::{acoe_residual, solve_mpe};
use klmdp::textio::{parse_cost, parse_matrix, write_matrix, write_vector};
use klmdp::{Policy, Solution, SolverSettings};

use crate::error::{read, write, CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub passive: PathBuf,
    pub cost: PathBuf,
    /// Where to write `h`, one value per line.
    pub h_out: Option<PathBuf>,
    /// Where to write the optimal (twisted) kernel.
    pub kernel_out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Solution,
    pub policy: Policy,
    pub span: f64,
    pub residual: f64,
}

impl SolveReport {
    /// Bounds on `λ` implied by the Collatz–Wielandt bracket.
    pub fn lambda_bracket(&self) -> (f64, f64) {
        let (lo, hi) = self.solution.bracket;
        (-hi.ln(), -lo.ln())
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.lambda_bracket();
        writeln!(f, "lambda        {:.12}", self.solution.lambda)?;
        writeln!(f, "bracket       [{lo:.12}, {hi:.12}]")?;
        writeln!(f, "span(h)       {:.12}", self.span)?;
        writeln!(f, "acoe residual {:.3e}", self.residual)?;
        write!(f, "iterations    {}", self.solution.iterations)
    }
}

/// Solves the average-cost problem for a passive kernel and a cost file.
pub fn cmd_solve(opts: &SolveOptions) -> Result<SolveReport> {
    let passive = parse_matrix(&read(&opts.passive)?).map_err(|e| CliError::from_core(Some(&opts.passive), e))?;
    let f = parse_cost(&read(&opts.cost)?).map_err(|e| CliError::from_core(Some(&opts.cost), e))?;
    if f.len() != passive.n() {
        return Err(CliError::Parse {
            path: opts.cost.clone(),
            message: format!("{} cost values for {} states", f.len(), passive.n()),
        });
    }
    let mut settings = SolverSettings::default();
    if let Some(tol) = opts.tolerance {
        settings.tolerance = tol;
    }
    if let Some(iters) = opts.max_iterations {
        settings.max_iterations = iters;
    }
    let solution = solve_mpe(&passive, &f, &settings)?;
    let policy = twisted_kernel(&passive, &solution.h)?;
    let report = SolveReport {
        span: span_seminorm(&solution.h)?,
        residual: acoe_residual(&passive, &f, &solution)?,
        solution,
        policy,
    };
    if let Some(path) = &opts.h_out {
        write(path, &write_vector(&report.solution.h))?;
    }
    if let Some(path) = &opts.kernel_out {
        write(path, &write_matrix(report.policy.kernel()))?;
    }
    Ok(report)
}
