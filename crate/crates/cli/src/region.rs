//! `cfrelay region`: information terms, verdicts and optional cross-checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use cfrelay_core::fme::{project_max_rate, MaxRate};
use cfrelay_core::region::{
    compare_modes_from_terms, info_vector_for, joint_mode_full_system, verdict_from_terms, DominanceReport,
    DEFAULT_GRID,
};
use cfrelay_core::{check_against_theorem1, ComparisonRecord, JointReading, RegionVerdict};
use serde::Serialize;

use crate::error::Result;
use crate::spec::NetworkSpec;
use crate::write_output;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Individual,
    Joint,
    Both,
}

#[derive(Clone, Debug)]
pub struct RegionArgs {
    pub spec: PathBuf,
    pub mode: Mode,
    pub reading: JointReading,
    pub fme_check: bool,
    pub grid: usize,
    pub out: Option<PathBuf>,
}

impl RegionArgs {
    pub fn new(spec: PathBuf) -> Self {
        RegionArgs {
            spec,
            mode: Mode::Individual,
            reading: JointReading::Printed,
            fme_check: false,
            grid: DEFAULT_GRID,
            out: None,
        }
    }
}

/// Joint-decoding mode: the stepwise system with the compression rows
/// replaced, projected onto the message rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointSummary {
    pub feasible: bool,
    /// `None` when no row bounds the rate.
    pub max_rate: Option<f64>,
    pub contradictions: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionReport {
    pub spec: String,
    pub mode: Mode,
    pub reading: JointReading,
    pub info_terms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub individual: Option<RegionVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fme_check: Option<ComparisonRecord>,
}

pub fn evaluate(spec: &NetworkSpec, args: &RegionArgs) -> Result<RegionReport> {
    let dist = spec.require_dist()?;
    let terms = info_vector_for(dist, args.reading)?;
    let individual = matches!(args.mode, Mode::Individual | Mode::Both).then(|| verdict_from_terms(&terms));
    let joint = matches!(args.mode, Mode::Joint | Mode::Both).then(|| {
        let system = joint_mode_full_system(&terms, args.reading);
        let p = project_max_rate(&system).expect("stepwise systems carry the rate");
        JointSummary {
            feasible: p.feasible,
            max_rate: match p.max_rate {
                MaxRate::Finite(_) => Some(p.max_rate.to_f64()),
                MaxRate::Unbounded => None,
            },
            contradictions: p.contradictions.iter().map(|r| r.provenance_label()).collect(),
            notes: system.notes.clone(),
        }
    });
    let dominance = (args.mode == Mode::Both).then(|| compare_modes_from_terms(&terms, args.reading, args.grid));
    let fme_check = if args.fme_check {
        Some(check_against_theorem1(dist)?)
    } else {
        None
    };
    Ok(RegionReport {
        spec: spec.display_name().to_string(),
        mode: args.mode,
        reading: args.reading,
        info_terms: terms.named(),
        individual,
        joint,
        dominance,
        fme_check,
    })
}

pub fn render(r: &RegionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "spec: {}", r.spec);
    let _ = writeln!(s, "information terms (bits):");
    let width = r.info_terms.keys().map(|k| k.len()).max().unwrap_or(0);
    for (k, v) in &r.info_terms {
        let _ = writeln!(s, "  {k:<width$}  {v:.6}");
    }
    if let Some(v) = &r.individual {
        let _ = writeln!(
            s,
            "individual decoding: {}, rate {:.6}, min slack {:.6}",
            if v.feasible { "feasible" } else { "infeasible" },
            v.achieved_rate,
            v.min_slack
        );
        for c in &v.violations {
            let _ = writeln!(s, "  violated {}: {:.6} >= {:.6}", c.id, c.lhs, c.rhs);
        }
    }
    if let Some(j) = &r.joint {
        let rate = j.max_rate.map_or("unbounded".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(
            s,
            "joint decoding ({} reading): {}, max rate {rate}",
            reading_name(r.reading),
            if j.feasible { "feasible" } else { "infeasible" }
        );
        for c in &j.contradictions {
            let _ = writeln!(s, "  contradiction from {c}");
        }
    }
    if let Some(d) = &r.dominance {
        let g = &d.grid;
        let _ = writeln!(
            s,
            "dominance: min rhs gap {:.3e} over {} pairs",
            d.min_gap,
            d.gaps.len()
        );
        let _ = writeln!(
            s,
            "  grid {n}x{n} up to {:.4}: individual {} points, joint {} points, contained: {}, consistent: {}",
            g.grid_max,
            g.individual_points,
            g.joint_points,
            g.contained,
            g.consistent,
            n = g.grid_size
        );
    }
    if let Some(c) = &r.fme_check {
        let _ = writeln!(s, "agreement: {}", c.agreement());
        let _ = writeln!(
            s,
            "  closed form: feasible {}, rate {:.9}; projection: feasible {}, rate {:.9}",
            c.theorem_feasible, c.theorem_rate, c.fme_feasible, c.fme_max_rate
        );
        for row in &c.contradictions {
            let _ = writeln!(s, "  contradiction from {row}");
        }
    }
    s
}

fn reading_name(r: JointReading) -> &'static str {
    match r {
        JointReading::Printed => "printed",
        JointReading::Symmetric => "symmetric",
    }
}

pub fn run(args: &RegionArgs) -> Result<String> {
    let spec = NetworkSpec::load(&args.spec)?;
    let report = evaluate(&spec, args)?;
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        write_output(path, &json)?;
    }
    Ok(render(&report))
}
