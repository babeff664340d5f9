//! `cfrelay sweep`: rate against a channel parameter, as CSV for plotting.
//!
//! Parameters act on the network spec's channel by passing one output through a
//! symmetric channel with the given crossover (uniform over the other
//! symbols):
//!
//! * `y0_noise`, `y1_noise`, `y2_noise` in `[0, 1]`: extra noise on that output;
//! * `relay_skew` in `[-1, 1]`: `t > 0` adds noise `t` to `y1`, `t < 0` adds `-t` to `y2`.
//!
//! A grid is `name=start:stop:count` (evenly spaced, endpoints included) or
//! `name=v1,v2,...`.

use std::fmt::Write as _;
use std::path::PathBuf;

use cfrelay_core::optimize::OptimizerConfig;
use cfrelay_core::{theorem1_verdict, Alphabets, Channel, Var};

use crate::error::{CliError, Result};
use crate::optimize::optimize;
use crate::spec::NetworkSpec;
use crate::write_output;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Y0Noise,
    Y1Noise,
    Y2Noise,
    RelaySkew,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Y0Noise, Param::Y1Noise, Param::Y2Noise, Param::RelaySkew];

    pub fn name(self) -> &'static str {
        match self {
            Param::Y0Noise => "y0_noise",
            Param::Y1Noise => "y1_noise",
            Param::Y2Noise => "y2_noise",
            Param::RelaySkew => "relay_skew",
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            Param::RelaySkew => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |m: String| CliError::Usage(format!("--param '{s}': {m}"));
        let (name, body) = s
            .split_once('=')
            .ok_or_else(|| bad("expected name=start:stop:count or name=v1,v2,...".into()))?;
        let param = Param::ALL
            .into_iter()
            .find(|p| p.name() == name.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
                bad(format!(
                    "unknown parameter '{name}'; expected one of {}",
                    names.join(" ")
                ))
            })?;
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("'{t}' is not a number")))
        };
        let values = if body.contains(':') {
            let parts: Vec<&str> = body.split(':').collect();
            let [start, stop, count] = parts[..] else {
                return Err(bad("a range needs exactly start:stop:count".into()));
            };
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize = count
                .trim()
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| bad(format!("'{count}' is not a positive point count")))?;
            if count == 1 {
                if start != stop {
                    return Err(bad("a one-point range needs start == stop".into()));
                }
                vec![start]
            } else {
                (0..count)
                    .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                    .collect()
            }
        } else {
            body.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(bad("grid is empty".into()));
        }
        let (lo, hi) = param.range();
        if let Some(x) = values.iter().find(|x| !(lo..=hi).contains(*x)) {
            return Err(bad(format!("value {x} is outside [{lo}, {hi}]")));
        }
        Ok(Grid { param, values })
    }
}

/// Pass output `var` of `channel` through a symmetric channel with crossover `e`.
pub fn add_output_noise(channel: &Channel, alphabets: &Alphabets, var: Var, e: f64) -> Channel {
    let m = alphabets.size(var);
    if e == 0.0 || m == 1 {
        return channel.clone();
    }
    let flip = |a: usize, b: usize| if a == b { 1.0 - e } else { e / (m - 1) as f64 };
    let size = |v| alphabets.size(v);
    Channel::from_fn(alphabets, |x0, x1, x2, y0, y1, y2| {
        let x = (x0, x1, x2);
        match var {
            Var::Y0 => (0..size(Var::Y0))
                .map(|a| channel.prob(x, (a, y1, y2)) * flip(a, y0))
                .sum(),
            Var::Y1 => (0..size(Var::Y1))
                .map(|a| channel.prob(x, (y0, a, y2)) * flip(a, y1))
                .sum(),
            Var::Y2 => (0..size(Var::Y2))
                .map(|a| channel.prob(x, (y0, y1, a)) * flip(a, y2))
                .sum(),
            _ => unreachable!("only channel outputs take noise"),
        }
    })
}

pub fn apply(param: Param, value: f64, channel: &Channel, alphabets: &Alphabets) -> Channel {
    match param {
        Param::Y0Noise => add_output_noise(channel, alphabets, Var::Y0, value),
        Param::Y1Noise => add_output_noise(channel, alphabets, Var::Y1, value),
        Param::Y2Noise => add_output_noise(channel, alphabets, Var::Y2, value),
        Param::RelaySkew if value >= 0.0 => add_output_noise(channel, alphabets, Var::Y1, value),
        Param::RelaySkew => add_output_noise(channel, alphabets, Var::Y2, -value),
    }
}

#[derive(Clone, Debug)]
pub struct SweepArgs {
    pub spec: PathBuf,
    pub grid: Grid,
    /// Re-optimize at every point instead of re-evaluating the network spec's dist.
    pub optimize: bool,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub const HEADER: &str = "param,value,feasible,rate,min_slack";

pub fn run(args: &SweepArgs) -> Result<String> {
    let spec = NetworkSpec::load(&args.spec)?;
    if !args.optimize {
        spec.require_dist()?;
    }
    let config = OptimizerConfig {
        restarts: args.restarts,
        iterations: args.iterations,
        seed: args.seed,
        ..Default::default()
    };
    config.validate()?;
    let mut csv = String::new();
    let _ = writeln!(csv, "# cfrelay sweep");
    let _ = writeln!(csv, "# spec: {}", spec.display_name());
    let _ = writeln!(csv, "# seed: {}", args.seed);
    if args.optimize {
        let _ = writeln!(
            csv,
            "# re-optimized per point: restarts {}, iterations {}",
            args.restarts, args.iterations
        );
    } else {
        let _ = writeln!(csv, "# re-evaluated with the network spec dist");
    }
    let _ = writeln!(csv, "{HEADER}");
    for &x in &args.grid.values {
        let channel = apply(args.grid.param, x, &spec.channel, &spec.alphabets);
        let verdict = if args.optimize {
            let point = NetworkSpec {
                channel,
                dist: None,
                ..spec.clone()
            };
            let r = optimize(&point, &config)?;
            r.best.expect("checked by optimize").1
        } else {
            let mut d = spec.require_dist()?.clone();
            d.channel = channel;
            theorem1_verdict(&d)?
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            args.grid.param.name(),
            x,
            verdict.feasible,
            verdict.achieved_rate,
            verdict.min_slack
        );
    }
    match &args.out {
        Some(path) => {
            write_output(path, &csv)?;
            Ok(format!("wrote {} rows to {}\n", args.grid.values.len(), path.display()))
        }
        None => Ok(csv),
    }
}
