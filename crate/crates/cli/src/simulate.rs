//! `cfrelay simulate`: Monte-Carlo error estimates of the block-Markov scheme.
//!
//! Output is CSV. Lines starting with `#` carry the network name, seed and fixed
//! parameters; then one header row and one row per block length:
//!
//! | column | meaning |
//! |---|---|
//! | `n` | symbols per block |
//! | `blocks` | `B`; `B + 1` blocks carry `B - 1` messages |
//! | `trials` | Monte-Carlo trials |
//! | `r`, `rs1`, `rs2`, `r011`, `r012`, `r021`, `r022`, `rh1`, `rh2` | realized rates `k / n` |
//! | `errors` | failed trials |
//! | `error_rate` | `errors / trials` |
//! | `ci_low`, `ci_high` | 95% Wilson interval |
//! | `inconsistent_chains` | trials whose decoded indices contradict the encoders |
//! | `failure_stages` | `stage/kind:count` pairs joined by `;` |

use std::fmt::Write as _;
use std::path::PathBuf;

use cfrelay_core::sim::{estimate_error, ErrorEstimate, SimParams, DEFAULT_EPSILON, DEFAULT_MAX_SYMBOLS};

use crate::error::{CliError, Result};
use crate::spec::NetworkSpec;
use crate::write_output;

pub const BUDGET_NAMES: [&str; 9] = ["k_r", "k_s1", "k_s2", "k_011", "k_012", "k_021", "k_022", "kh1", "kh2"];

/// Bit budgets in [`BUDGET_NAMES`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Budgets(pub [u32; 9]);

impl Budgets {
    /// Either nine comma-separated values in [`BUDGET_NAMES`] order or
    /// `name=value` pairs (unnamed budgets stay 0).
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |m: String| CliError::Usage(format!("--bits '{s}': {m}"));
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        let mut out = [0u32; 9];
        if parts.iter().any(|p| p.contains('=')) {
            for p in parts {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| bad(format!("'{p}' mixes positional and named budgets")))?;
                let i = BUDGET_NAMES
                    .iter()
                    .position(|n| *n == k.trim())
                    .ok_or_else(|| bad(format!("unknown budget '{k}'; names are {}", BUDGET_NAMES.join(" "))))?;
                out[i] = v.trim().parse().map_err(|_| bad(format!("'{v}' is not a bit count")))?;
            }
        } else {
            if parts.len() != 9 {
                return Err(bad(format!(
                    "expected 9 values ({}), found {}",
                    BUDGET_NAMES.join(","),
                    parts.len()
                )));
            }
            for (o, p) in out.iter_mut().zip(&parts) {
                *o = p.parse().map_err(|_| bad(format!("'{p}' is not a bit count")))?;
            }
        }
        Ok(Budgets(out))
    }
}

#[derive(Clone, Debug)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    pub n: Vec<usize>,
    pub blocks: usize,
    pub bits: Budgets,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub joint_decoding: bool,
    pub max_symbols: u64,
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn new(spec: PathBuf, n: Vec<usize>) -> Self {
        SimulateArgs {
            spec,
            n,
            blocks: 3,
            bits: Budgets::default(),
            epsilon: DEFAULT_EPSILON,
            trials: 100,
            seed: 0,
            joint_decoding: false,
            max_symbols: DEFAULT_MAX_SYMBOLS,
            out: None,
        }
    }

    pub fn params(&self, n: usize) -> SimParams {
        let [k_r, k_s1, k_s2, k_011, k_012, k_021, k_022, kh1, kh2] = self.bits.0;
        SimParams {
            n,
            blocks: self.blocks,
            k_r,
            k_s1,
            k_s2,
            k_011,
            k_012,
            k_021,
            k_022,
            kh1,
            kh2,
            epsilon: self.epsilon,
            trials: self.trials,
            seed: self.seed,
            joint_decoding: self.joint_decoding,
            max_symbols: self.max_symbols,
        }
    }
}

pub const HEADER: &str = "n,blocks,trials,r,rs1,rs2,r011,r012,r021,r022,rh1,rh2,errors,error_rate,ci_low,ci_high,inconsistent_chains,failure_stages";

fn row(p: &SimParams, e: &ErrorEstimate) -> String {
    let mut s = format!("{},{},{}", p.n, p.blocks, e.trials);
    let ks = [p.k_r, p.k_s1, p.k_s2, p.k_011, p.k_012, p.k_021, p.k_022, p.kh1, p.kh2];
    for k in ks {
        let _ = write!(s, ",{}", k as f64 / p.n as f64);
    }
    let stages: Vec<String> = e.failure_stages.iter().map(|(k, c)| format!("{k}:{c}")).collect();
    let _ = write!(
        s,
        ",{},{},{},{},{},{}",
        e.errors,
        e.error_rate,
        e.ci.0,
        e.ci.1,
        e.inconsistent_chains,
        stages.join(";")
    );
    s
}

pub fn run(args: &SimulateArgs) -> Result<String> {
    if args.n.is_empty() {
        return Err(CliError::Usage("--n needs at least one block length".into()));
    }
    let spec = NetworkSpec::load(&args.spec)?;
    let dist = spec.require_dist()?;
    let mut csv = String::new();
    let _ = writeln!(csv, "# cfrelay simulate");
    let _ = writeln!(csv, "# spec: {}", spec.display_name());
    let _ = writeln!(csv, "# seed: {}", args.seed);
    let _ = writeln!(
        csv,
        "# epsilon: {}, joint_decoding: {}, bits: {}",
        args.epsilon,
        args.joint_decoding,
        BUDGET_NAMES
            .iter()
            .zip(args.bits.0)
            .map(|(n, k)| format!("{n}={k}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(csv, "{HEADER}");
    for &n in &args.n {
        let p = args.params(n);
        let e = estimate_error(dist, &p)?;
        let _ = writeln!(csv, "{}", row(&p, &e));
    }
    match &args.out {
        Some(path) => {
            write_output(path, &csv)?;
            Ok(format!("wrote {} rows to {}\n", args.n.len(), path.display()))
        }
        None => Ok(csv),
    }
}
