use std::fmt::Write as _;
use std::path::PathBuf;

use klmdp::eval::{monte_carlo_with_seeds, run_experiment, split_seed, ExperimentRun};
use klmdp::textio::format_number;
use klmdp::MonteCarloSummary;

use crate::config::ExperimentConfig;
use crate::error::{write, CliError, Result};

pub const TRACE_HEADER: &str = "t,state,state_cost,control_cost,cum_cost,phase";
pub const SUMMARY_HEADER: &str = "t,mean_regret_hindsight,std_regret_hindsight,mean_regret_pool,std_regret_pool";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone)]
pub struct TrackReport {
    pub trace_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    pub hindsight: MonteCarloSummary,
    pub pool: Option<MonteCarloSummary>,
}

/// Runs the configured experiment and writes `trace_NNN.csv` per run plus
/// `summary.csv` into the output directory. `workers` bounds the thread
/// pool; `None` uses one thread per logical core.
pub fn cmd_track(config: &ExperimentConfig, workers: Option<usize>) -> Result<TrackReport> {
    if config.runs == 0 {
        return Err(CliError::Config("runs: must be at least 1".into()));
    }
    let settings = config.settings()?;
    let seeds: Vec<u64> = (0..config.runs as u64).map(|i| split_seed(config.base_seed, i)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    let (runs, hindsight, pool_summary) = pool.install(|| -> Result<_> {
        if seeds.len() == 1 {
            let passive = settings.passive()?;
            let run = run_experiment(&settings, &passive, seeds[0])?;
            let single = |trace: &[f64]| MonteCarloSummary {
                runs: 1,
                mean: trace.to_vec(),
                stddev: vec![0.0; trace.len()],
                seeds: seeds.clone(),
            };
            let hindsight = single(&run.hindsight.per_step);
            let pool = run.pool.as_ref().map(|p| single(&p.per_step));
            Ok((vec![run], hindsight, pool))
        } else {
            let mc = monte_carlo_with_seeds(&settings, seeds.clone())?;
            Ok((mc.runs, mc.hindsight, mc.pool))
        }
    })?;

    let width = config.runs.saturating_sub(1).to_string().len().max(3);
    let mut trace_files = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let path = config.output_dir.join(format!("trace_{i:0width$}.csv"));
        write(&path, &trace_csv(run))?;
        trace_files.push(path);
    }
    let summary_file = config.output_dir.join(SUMMARY_FILE);
    write(&summary_file, &summary_csv(&hindsight, pool_summary.as_ref()))?;
    Ok(TrackReport {
        trace_files,
        summary_file,
        hindsight,
        pool: pool_summary,
    })
}

pub fn trace_csv(run: &ExperimentRun) -> String {
    let tr = &run.trace;
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for t in 0..tr.horizon() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t + 1,
            tr.states[t],
            format_number(tr.state_costs[t]),
            format_number(tr.control_costs[t]),
            format_number(tr.cumulative[t]),
            tr.phases[t]
        );
    }
    out
}

/// Pool columns are left empty when the pool baseline is disabled.
pub fn summary_csv(hindsight: &MonteCarloSummary, pool: Option<&MonteCarloSummary>) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for t in 0..hindsight.mean.len() {
        let (pm, ps) = match pool {
            Some(p) => (format_number(p.mean[t]), format_number(p.stddev[t])),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{pm},{ps}",
            t + 1,
            format_number(hindsight.mean[t]),
            format_number(hindsight.stddev[t])
        );
    }
    out
}

