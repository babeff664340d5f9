//! Search over the free factors of the input distribution for the largest
//! feasible rate, with the channel held fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmf::{Alphabets, Channel, ConditionalTable, FactoredNetworkDistribution, FreeFactor};
use crate::region::{theorem1_verdict, RegionError, RegionVerdict};

/// Smallest rate increase that counts as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("grid has {points} points, above the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub iterations: usize,
    /// Step scale at the first iteration.
    pub initial_scale: f64,
    /// Step scale at the last iteration; the schedule decays geometrically.
    pub final_scale: f64,
    /// Extra iterations spent refining the winning restart, with steps
    /// decaying from `10 * final_scale` to `final_scale / 10`.
    #[serde(default = "default_polish")]
    pub polish_iterations: usize,
    pub seed: u64,
}

fn default_polish() -> usize {
    2000
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 8,
            iterations: 1500,
            initial_scale: 0.5,
            final_scale: 0.01,
            polish_iterations: default_polish(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.restarts == 0 {
            return Err(OptimizeError::Config("restarts must be at least 1".into()));
        }
        if !(self.final_scale > 0.0 && self.final_scale <= self.initial_scale && self.initial_scale <= 1.0) {
            return Err(OptimizeError::Config(format!(
                "scale schedule must satisfy 0 < final ({}) <= initial ({}) <= 1",
                self.final_scale, self.initial_scale
            )));
        }
        Ok(())
    }

    /// Step scale at iteration `i`.
    pub fn scale(&self, i: usize) -> f64 {
        if self.iterations <= 1 {
            return self.initial_scale;
        }
        let t = i as f64 / (self.iterations - 1) as f64;
        self.initial_scale * (self.final_scale / self.initial_scale).powf(t)
    }

    /// Step scale at polishing iteration `i`.
    pub fn polish_scale(&self, i: usize) -> f64 {
        let hi = (10.0 * self.final_scale).min(1.0);
        let lo = self.final_scale / 10.0;
        if self.polish_iterations <= 1 {
            return hi;
        }
        let t = i as f64 / (self.polish_iterations - 1) as f64;
        hi * (lo / hi).powf(t)
    }
}

/// A point drawn uniformly from the probability simplex of dimension `k`.
pub fn flat_dirichlet(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v.fill(1.0 / k as f64);
    }
    v
}

fn random_table(f: FreeFactor, a: &Alphabets, rng: &mut impl Rng) -> ConditionalTable {
    let mut t = f.uniform(a);
    for r in 0..t.row_count() {
        let row = flat_dirichlet(t.row_len(), rng);
        t.row_mut(r).copy_from_slice(&row);
    }
    t
}

/// Every free row drawn from a flat Dirichlet; the channel is kept as given.
pub fn random_dist(alphabets: &Alphabets, channel: &Channel, seed: u64) -> FactoredNetworkDistribution {
    random_dist_with(alphabets, channel, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_dist_with(alphabets: &Alphabets, channel: &Channel, rng: &mut impl Rng) -> FactoredNetworkDistribution {
    FactoredNetworkDistribution::from_fn(*alphabets, channel.clone(), |f, a| random_table(f, a, rng))
}

/// `row <- (1 - s) row + s d` with `d` drawn from a flat Dirichlet.
fn mix_toward_dirichlet(row: &mut [f64], s: f64, rng: &mut impl Rng) {
    let d = flat_dirichlet(row.len(), rng);
    let mut sum = 0.0;
    for (x, d) in row.iter_mut().zip(&d) {
        *x = (1.0 - s) * *x + s * d;
        sum += *x;
    }
    row.iter_mut().for_each(|x| *x /= sum);
}

/// Move up to `s` of probability from one random entry to another; an entry
/// holding less than `s` is emptied, so rows can reach the simplex boundary.
fn transfer_mass(row: &mut [f64], s: f64, rng: &mut impl Rng) {
    let k = row.len();
    let from = rng.random_range(0..k);
    let to = (from + rng.random_range(1..k)) % k;
    let amount = row[from].min(s * rng.random::<f64>().max(0.25));
    row[from] -= amount;
    row[to] += amount;
}

/// `(factor, row)` pairs whose simplex has more than one point.
fn movable_rows(d: &FactoredNetworkDistribution) -> Vec<(FreeFactor, usize)> {
    FreeFactor::ALL
        .iter()
        .flat_map(|&f| {
            let t = d.factor(f);
            let n = if t.row_len() > 1 { t.row_count() } else { 0 };
            (0..n).map(move |r| (f, r))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub feasible: bool,
    pub rate: f64,
    pub accepted_moves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// `None` when no restart reached a feasible distribution.
    pub best: Option<(FactoredNetworkDistribution, RegionVerdict)>,
    pub best_restart: Option<usize>,
    pub restarts: Vec<RestartSummary>,
}

impl OptimizationResult {
    pub fn best_rate(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, v)| v.achieved_rate)
    }
}

/// Mix the compression factors toward a point mass until the distribution is
/// feasible; a constant compression output always is.
fn make_feasible(
    mut d: FactoredNetworkDistribution,
) -> Result<(FactoredNetworkDistribution, RegionVerdict), RegionError> {
    let v = theorem1_verdict(&d)?;
    if v.feasible {
        return Ok((d, v));
    }
    let a = d.alphabets;
    let start = [d.q1.clone(), d.q2.clone()];
    let target = [FreeFactor::Q1.point_mass(&a), FreeFactor::Q2.point_mass(&a)];
    let mut last = v;
    for step in 1..=10 {
        let t = step as f64 / 10.0;
        for (k, f) in [FreeFactor::Q1, FreeFactor::Q2].into_iter().enumerate() {
            let mixed = d.factor_mut(f);
            for ((m, s), p) in mixed
                .probs_mut()
                .iter_mut()
                .zip(start[k].probs())
                .zip(target[k].probs())
            {
                *m = (1.0 - t) * s + t * p;
            }
        }
        last = theorem1_verdict(&d)?;
        if last.feasible {
            break;
        }
    }
    Ok((d, last))
}

const REPAIR_STEPS: usize = 6;

/// `q(yh | y, x, v)` averaged over `y`: the compression output no longer
/// depends on the relay observation.
fn blind(q: &ConditionalTable) -> ConditionalTable {
    let mut out = q.clone();
    let ny = q.given()[0].1;
    let rest = q.row_count() / ny;
    for k in 0..rest {
        let mut mean = vec![0.0; q.row_len()];
        for y in 0..ny {
            for (m, p) in mean.iter_mut().zip(q.row(y * rest + k)) {
                *m += p / ny as f64;
            }
        }
        for y in 0..ny {
            out.row_mut(y * rest + k).copy_from_slice(&mean);
        }
    }
    out
}

/// Blend both compression factors toward their blind versions by the
/// smallest amount (to bisection accuracy) that restores feasibility.
fn repair(d: FactoredNetworkDistribution) -> Result<(FactoredNetworkDistribution, RegionVerdict), RegionError> {
    let target = [blind(&d.q1), blind(&d.q2)];
    let blend = |t: f64| blend_quantizers(&d, &target, t);
    let mut hi = (blend(1.0), None);
    let (mut lo_t, mut hi_t) = (0.0, 1.0);
    for _ in 0..REPAIR_STEPS {
        let mid = 0.5 * (lo_t + hi_t);
        let cand = blend(mid);
        let v = theorem1_verdict(&cand)?;
        if v.feasible {
            hi_t = mid;
            hi = (cand, Some(v));
        } else {
            lo_t = mid;
        }
    }
    let (dist, v) = hi;
    let v = match v {
        Some(v) => v,
        None => theorem1_verdict(&dist)?,
    };
    Ok((dist, v))
}

/// `yh = y mod |Yh|` for every `(x, v)`.
fn identity_quantizer(q: &ConditionalTable) -> ConditionalTable {
    let mut out = q.clone();
    let rest = q.row_count() / q.given()[0].1;
    for r in 0..q.row_count() {
        let row = out.row_mut(r);
        let len = row.len();
        row.fill(0.0);
        row[(r / rest) % len] = 1.0;
    }
    out
}

fn blend_quantizers(
    d: &FactoredNetworkDistribution,
    target: &[ConditionalTable; 2],
    t: f64,
) -> FactoredNetworkDistribution {
    let mut out = d.clone();
    for (k, f) in [FreeFactor::Q1, FreeFactor::Q2].into_iter().enumerate() {
        for (m, b) in out.factor_mut(f).probs_mut().iter_mut().zip(target[k].probs()) {
            *m = (1.0 - t) * *m + t * b;
        }
    }
    out
}

/// Blend both compression factors toward the identity quantizer by the
/// largest amount (to bisection accuracy) that stays feasible.
fn sharpen(
    d: FactoredNetworkDistribution,
    v: RegionVerdict,
) -> Result<(FactoredNetworkDistribution, RegionVerdict), RegionError> {
    let target = [identity_quantizer(&d.q1), identity_quantizer(&d.q2)];
    let mut best = (d.clone(), v);
    let (mut lo_t, mut hi_t) = (0.0, 1.0);
    for _ in 0..REPAIR_STEPS {
        let mid = 0.5 * (lo_t + hi_t);
        let cand = blend_quantizers(&d, &target, mid);
        let cv = theorem1_verdict(&cand)?;
        if cv.feasible {
            lo_t = mid;
            if cv.achieved_rate > best.1.achieved_rate {
                best = (cand, cv);
            }
        } else {
            hi_t = mid;
        }
    }
    Ok(best)
}

struct RestartOutcome {
    best: Option<(FactoredNetworkDistribution, RegionVerdict)>,
    summary: RestartSummary,
}

/// Local search in place; returns the number of accepted moves.
fn climb(
    dist: &mut FactoredNetworkDistribution,
    verdict: &mut RegionVerdict,
    rng: &mut ChaCha8Rng,
    iterations: usize,
    scale: impl Fn(usize) -> f64,
) -> Result<usize, RegionError> {
    let rows = movable_rows(dist);
    if rows.is_empty() {
        return Ok(0);
    }
    let mut accepted = 0;
    for i in 0..iterations {
        let s = scale(i);
        let mut candidate = dist.clone();
        let (f, r) = rows[rng.random_range(0..rows.len())];
        let row = candidate.factor_mut(f).row_mut(r);
        if i % 2 == 0 {
            mix_toward_dirichlet(row, s, rng);
        } else {
            transfer_mass(row, s, rng);
        }
        let mut v = theorem1_verdict(&candidate)?;
        if !v.feasible {
            (candidate, v) = repair(candidate)?;
        } else if v.achieved_rate <= verdict.achieved_rate + IMPROVEMENT_TOL {
            (candidate, v) = sharpen(candidate, v)?;
        }
        if v.feasible && v.achieved_rate > verdict.achieved_rate + IMPROVEMENT_TOL {
            *dist = candidate;
            *verdict = v;
            accepted += 1;
        }
    }
    Ok(accepted)
}

fn run_restart(
    alphabets: &Alphabets,
    channel: &Channel,
    config: &OptimizerConfig,
    index: usize,
) -> Result<RestartOutcome, RegionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let (mut dist, mut verdict) = make_feasible(random_dist_with(alphabets, channel, &mut rng))?;
    let mut summary = RestartSummary {
        index,
        feasible: verdict.feasible,
        rate: verdict.achieved_rate,
        accepted_moves: 0,
    };
    if !verdict.feasible {
        return Ok(RestartOutcome { best: None, summary });
    }
    summary.accepted_moves = climb(&mut dist, &mut verdict, &mut rng, config.iterations, |i| {
        config.scale(i)
    })?;
    summary.rate = verdict.achieved_rate;
    Ok(RestartOutcome {
        best: Some((dist, verdict)),
        summary,
    })
}

/// Multi-restart local search. Each move perturbs one row (Dirichlet mixing
/// or pairwise mass transfer). An infeasible result is pulled back by
/// blending the compression factors toward their blind versions; a feasible
/// result that does not raise the rate spends its slack by blending them
/// toward the identity quantizer. A move is
/// kept iff it is feasible and strictly raises the rate. Restart `i` draws from stream `i` of the seed;
/// the best rate wins and ties go to the lowest restart index. The winner is
/// then polished with finer steps on stream `restarts + index`.
pub fn maximize_rate(
    alphabets: &Alphabets,
    channel: &Channel,
    config: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizeError> {
    config.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|i| run_restart(alphabets, channel, config, i))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(FactoredNetworkDistribution, RegionVerdict)> = None;
    let mut best_restart = None;
    let mut restarts = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if let Some((d, v)) = o.best {
            let better = best.as_ref().is_none_or(|(_, b)| v.achieved_rate > b.achieved_rate);
            if better {
                best_restart = Some(o.summary.index);
                best = Some((d, v));
            }
        }
        restarts.push(o.summary);
    }
    if let (Some((d, v)), Some(idx)) = (best.as_mut(), best_restart) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((config.restarts + idx) as u64);
        climb(d, v, &mut rng, config.polish_iterations, |i| config.polish_scale(i))?;
    }
    Ok(OptimizationResult {
        best,
        best_restart,
        restarts,
    })
}

/// Lattice points of the simplex of dimension `k` with coordinates in
/// multiples of `1/steps`.
pub fn simplex_lattice(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for i in 0..=left {
            cur.push(i);
            rec(k - 1, left - i, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(k, steps, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|p| p.into_iter().map(|c| c as f64 / steps as f64).collect())
        .collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

pub const DEFAULT_GRID_LIMIT: u128 = 2_000_000;

/// Exhaustive search over every free row on the simplex lattice of step
/// `1/steps`; intended as a coarse check on small instances.
pub fn grid_search(
    alphabets: &Alphabets,
    channel: &Channel,
    steps: usize,
    limit: u128,
) -> Result<Option<(FactoredNetworkDistribution, RegionVerdict)>, OptimizeError> {
    if steps == 0 {
        return Err(OptimizeError::Config("grid steps must be positive".into()));
    }
    let base = FactoredNetworkDistribution::uniform(*alphabets, channel.clone());
    let rows = movable_rows(&base);
    let lattices: Vec<Vec<Vec<f64>>> = rows
        .iter()
        .map(|&(f, _)| simplex_lattice(base.factor(f).row_len(), steps))
        .collect();
    let points = rows.iter().fold(1u128, |acc, &(f, _)| {
        let k = base.factor(f).row_len() as u128;
        acc.saturating_mul(binomial(steps as u128 + k - 1, k - 1))
    });
    if points > limit {
        return Err(OptimizeError::GridTooLarge { points, limit });
    }
    let mut counter = vec![0usize; rows.len()];
    let mut dist = base;
    let mut best: Option<(FactoredNetworkDistribution, RegionVerdict)> = None;
    loop {
        for (j, &(f, r)) in rows.iter().enumerate() {
            dist.factor_mut(f).row_mut(r).copy_from_slice(&lattices[j][counter[j]]);
        }
        let v = theorem1_verdict(&dist)?;
        if v.feasible && best.as_ref().is_none_or(|(_, b)| v.achieved_rate > b.achieved_rate) {
            best = Some((dist.clone(), v));
        }
        let mut j = 0;
        loop {
            if j == rows.len() {
                return Ok(best);
            }
            counter[j] += 1;
            if counter[j] < lattices[j].len() {
                break;
            }
            counter[j] = 0;
            j += 1;
        }
    }
}
