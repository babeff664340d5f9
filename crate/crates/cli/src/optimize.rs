//! `cfrelay optimize`: search input distributions and write the best one back.

use std::fmt::Write as _;
use std::path::PathBuf;

use cfrelay_core::optimize::{maximize_rate, OptimizationResult, OptimizerConfig};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::spec::NetworkSpec;
use crate::write_output;

#[derive(Clone, Debug)]
pub struct OptimizeArgs {
    pub spec: PathBuf,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl OptimizeArgs {
    pub fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            iterations: self.iterations,
            seed: self.seed,
            ..Default::default()
        }
    }
}

/// Run the search; none-feasible is reported as [`CliError::NoneFeasible`].
pub fn optimize(spec: &NetworkSpec, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let result = maximize_rate(&spec.alphabets, &spec.channel, config)?;
    if result.best.is_none() {
        return Err(CliError::NoneFeasible(format!(
            "no restart of '{}' reached a feasible distribution ({} restarts, seed {}); \
             even constant compression failed the constraints, so check that the receiver \
             observes the sender at all",
            spec.display_name(),
            config.restarts,
            config.seed
        )));
    }
    Ok(result)
}

/// `spec` with its `dist` replaced by the optimum and the run recorded in `origin`.
pub fn optimized_spec(spec: &NetworkSpec, config: &OptimizerConfig, result: &OptimizationResult) -> NetworkSpec {
    let (dist, verdict) = result.best.clone().expect("checked by optimize");
    let mut out = spec.clone();
    out.dist = Some(dist);
    out.origin = Some(json!({
        "command": "optimize",
        "seed": config.seed,
        "restarts": config.restarts,
        "iterations": config.iterations,
        "polish_iterations": config.polish_iterations,
        "rate": verdict.achieved_rate,
        "min_slack": verdict.min_slack,
    }));
    out
}

pub fn render(spec: &NetworkSpec, config: &OptimizerConfig, result: &OptimizationResult) -> String {
    let mut s = String::new();
    let (_, v) = result.best.as_ref().expect("checked by optimize");
    let _ = writeln!(s, "spec: {}", spec.display_name());
    let _ = writeln!(
        s,
        "seed: {}, restarts: {}, iterations: {}",
        config.seed, config.restarts, config.iterations
    );
    let _ = writeln!(
        s,
        "best rate: {:.6} (restart {})",
        v.achieved_rate,
        result.best_restart.unwrap_or(0)
    );
    let _ = writeln!(s, "min slack: {:.6}", v.min_slack);
    let _ = writeln!(s, "restart  feasible  rate      accepted");
    for r in &result.restarts {
        let _ = writeln!(
            s,
            "{:>7}  {:<8}  {:.6}  {}",
            r.index, r.feasible, r.rate, r.accepted_moves
        );
    }
    s
}

pub fn run(args: &OptimizeArgs) -> Result<String> {
    let spec = NetworkSpec::load(&args.spec)?;
    let config = args.config();
    config.validate()?;
    let result = optimize(&spec, &config)?;
    if let Some(path) = &args.out {
        write_output(path, &optimized_spec(&spec, &config, &result).to_json())?;
    }
    Ok(render(&spec, &config, &result))
}
