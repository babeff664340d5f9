//! Monte-Carlo simulation of the block-Markov compress-and-forward scheme.
//!
//! One trial sends `B - 1` messages over `B + 1` blocks of `n` symbols. Each
//! trial draws fresh codebooks and partitions, runs the relays, the sender
//! (which sees the receiver's previous blocks through feedback) and the
//! receiver, and records every decoding anomaly.
//!
//! Block indices are 1-based. Quantities at block 0 or earlier take index 0,
//! and the messages of blocks `B` and `B + 1` are fixed to 0.

use std::collections::BTreeMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmf::{build_joint, ConditionalTable, FactoredNetworkDistribution, JointPmf, PmfError, Var, VarSet};

pub const DEFAULT_MAX_SYMBOLS: u64 = 100_000_000;
pub const DEFAULT_EPSILON: f64 = 0.2;
/// Largest bit budget accepted for any single index.
pub const MAX_BITS: u32 = 24;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("invalid simulation parameters: {0}")]
    Params(String),
    #[error("codebooks need {needed} stored symbols, above the cap of {cap}")]
    MemoryGuard { needed: u128, cap: u64 },
    #[error("sequences are labelled {given} but the distribution is over {expected}")]
    LabelMismatch { given: VarSet, expected: VarSet },
    #[error("sequence for {var} has length {found}, expected {expected}")]
    Length { var: Var, expected: usize, found: usize },
    #[error("expected {expected} messages, got {found}")]
    MessageCount { expected: usize, found: usize },
    #[error("message {value} is out of range for {bits} bits")]
    MessageRange { value: usize, bits: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Symbols per block.
    pub n: usize,
    /// `B`: transmission spans `B + 1` blocks and carries `B - 1` messages.
    pub blocks: usize,
    pub k_r: u32,
    pub k_s1: u32,
    pub k_s2: u32,
    pub k_011: u32,
    pub k_012: u32,
    pub k_021: u32,
    pub k_022: u32,
    pub kh1: u32,
    pub kh2: u32,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Decode both compression indices as a pair at sender and receiver.
    pub joint_decoding: bool,
    pub max_symbols: u64,
}

impl SimParams {
    /// All budgets zero, three blocks, 100 trials.
    pub fn new(n: usize) -> Self {
        SimParams {
            n,
            blocks: 3,
            k_r: 0,
            k_s1: 0,
            k_s2: 0,
            k_011: 0,
            k_012: 0,
            k_021: 0,
            k_022: 0,
            kh1: 0,
            kh2: 0,
            epsilon: DEFAULT_EPSILON,
            trials: 100,
            seed: 0,
            joint_decoding: false,
            max_symbols: DEFAULT_MAX_SYMBOLS,
        }
    }

    pub fn message_count(&self) -> usize {
        self.blocks.saturating_sub(1)
    }

    /// `k_r / n`, the per-block message rate.
    pub fn realized_rate(&self) -> f64 {
        self.k_r as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Params(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.blocks < 2 {
            return bad(format!("blocks must be at least 2, got {}", self.blocks));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        let named = [
            ("k_r", self.k_r),
            ("k_s1", self.k_s1),
            ("k_s2", self.k_s2),
            ("k_011", self.k_011),
            ("k_012", self.k_012),
            ("k_021", self.k_021),
            ("k_022", self.k_022),
            ("kh1", self.kh1),
            ("kh2", self.kh2),
        ];
        for (name, k) in named {
            if k > MAX_BITS {
                return bad(format!("{name} = {k} exceeds {MAX_BITS} bits"));
            }
        }
        for (i, (ks, k1, k2, kh)) in [
            (self.k_s1, self.k_011, self.k_012, self.kh1),
            (self.k_s2, self.k_021, self.k_022, self.kh2),
        ]
        .into_iter()
        .enumerate()
        {
            let r = i + 1;
            if k1 > ks {
                return bad(format!("k_0{r}1 = {k1} exceeds k_s{r} = {ks}"));
            }
            if ks > kh {
                return bad(format!("k_s{r} = {ks} exceeds kh{r} = {kh}"));
            }
            if k2 > kh - ks {
                return bad(format!("k_0{r}2 = {k2} exceeds kh{r} - k_s{r} = {}", kh - ks));
            }
        }
        Ok(())
    }
}

/// Index-set sizes implied by the bit budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Sizes {
    n: usize,
    w: usize,
    /// Coarse (deterministic-cell) part of the relay cooperation index.
    w0a: [usize; 2],
    /// Subcell part of the relay cooperation index.
    w0b: [usize; 2],
    s: [usize; 2],
    z: [usize; 2],
}

impl Sizes {
    fn of(p: &SimParams) -> Self {
        Sizes {
            n: p.n,
            w: 1 << p.k_r,
            w0a: [1 << p.k_011, 1 << p.k_021],
            w0b: [1 << p.k_012, 1 << p.k_022],
            s: [1 << p.k_s1, 1 << p.k_s2],
            z: [1 << p.kh1, 1 << p.kh2],
        }
    }

    fn w0(&self, i: usize) -> usize {
        self.w0a[i] * self.w0b[i]
    }

    fn stored_symbols(&self) -> u128 {
        let n = self.n as u128;
        let mut total = self.w as u128 * self.w0(0) as u128 * self.w0(1) as u128;
        for i in 0..2 {
            let w0 = self.w0(i) as u128;
            let s = self.s[i] as u128;
            total += w0 + w0 * s + w0 * s * self.z[i] as u128;
        }
        total * n
    }
}

/// Samples one output symbol per conditioning row.
#[derive(Clone, Debug)]
struct RowSampler {
    rows: Vec<WeightedIndex<f64>>,
}

impl RowSampler {
    fn from_rows(probs: &[f64], row_len: usize) -> Self {
        RowSampler {
            rows: probs
                .chunks(row_len)
                .map(|r| WeightedIndex::new(r).expect("validated rows have positive mass"))
                .collect(),
        }
    }

    fn from_table(t: &ConditionalTable) -> Self {
        Self::from_rows(t.probs(), t.row_len())
    }

    fn sample(&self, row: usize, rng: &mut impl Rng) -> u16 {
        self.rows[row].sample(rng) as u16
    }
}

/// Codeword families, each entry a length-`n` symbol sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebooks {
    sizes_: Sizes,
    v: [Vec<u16>; 2],
    x: [Vec<u16>; 2],
    x0: Vec<u16>,
    yh: [Vec<u16>; 2],
}

impl Codebooks {
    fn slice(buf: &[u16], n: usize, idx: usize) -> &[u16] {
        &buf[idx * n..(idx + 1) * n]
    }

    /// `v_i(w0)` for relay `i` in `{0, 1}`.
    pub fn v(&self, i: usize, w0: usize) -> &[u16] {
        Self::slice(&self.v[i], self.sizes_.n, w0)
    }

    /// `x_i(s | w0)`.
    pub fn x(&self, i: usize, s: usize, w0: usize) -> &[u16] {
        Self::slice(&self.x[i], self.sizes_.n, w0 * self.sizes_.s[i] + s)
    }

    /// `x0(w, w01, w02)`.
    pub fn x0(&self, w: usize, w01: usize, w02: usize) -> &[u16] {
        let z = &self.sizes_;
        Self::slice(&self.x0, z.n, (w01 * z.w0(1) + w02) * z.w + w)
    }

    /// `yh_i(z | s, w0)`.
    pub fn yh(&self, i: usize, z: usize, s: usize, w0: usize) -> &[u16] {
        let k = &self.sizes_;
        Self::slice(&self.yh[i], k.n, (w0 * k.s[i] + s) * k.z[i] + z)
    }

    /// Number of codewords in each family: `v1, v2, x1, x2, x0, yh1, yh2`.
    pub fn family_sizes(&self) -> [usize; 7] {
        let n = self.sizes_.n;
        [
            self.v[0].len() / n,
            self.v[1].len() / n,
            self.x[0].len() / n,
            self.x[1].len() / n,
            self.x0.len() / n,
            self.yh[0].len() / n,
            self.yh[1].len() / n,
        ]
    }
}

/// Random cell and subcell maps over compression indices, and the
/// deterministic partition of cell indices into contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partitions {
    /// `cell[i][z]`: the cell `s` containing `z`.
    pub cell: [Vec<usize>; 2],
    /// `subcell[i][z]`: the subcell index of `z` within its cell.
    pub subcell: [Vec<usize>; 2],
    /// Size of each deterministic block of cell indices.
    pub det_block: [usize; 2],
}

impl Partitions {
    pub fn generate(params: &SimParams, rng: &mut impl Rng) -> Self {
        let z = Sizes::of(params);
        let mut cell: [Vec<usize>; 2] = Default::default();
        let mut subcell: [Vec<usize>; 2] = Default::default();
        for (i, c) in cell.iter_mut().enumerate() {
            *c = (0..z.z[i]).map(|_| rng.random_range(0..z.s[i])).collect();
        }
        for (i, c) in subcell.iter_mut().enumerate() {
            *c = (0..z.z[i]).map(|_| rng.random_range(0..z.w0b[i])).collect();
        }
        Partitions {
            cell,
            subcell,
            det_block: [z.s[0] / z.w0a[0], z.s[1] / z.w0a[1]],
        }
    }

    /// Deterministic cell of `s`.
    pub fn det(&self, i: usize, s: usize) -> usize {
        s / self.det_block[i]
    }

    /// Members of deterministic cell `a`.
    pub fn det_members(&self, i: usize, a: usize) -> std::ops::Range<usize> {
        a * self.det_block[i]..(a + 1) * self.det_block[i]
    }
}

/// Robust typicality against one marginal: for every joint symbol `a`,
/// `|count(a)/n - p(a)| <= epsilon * p(a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TypicalSet {
    vars: Vec<Var>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl TypicalSet {
    pub fn new(joint: &JointPmf, vars: &[Var]) -> Result<Self, PmfError> {
        Ok(Self::from_marginal(&joint.marginalize_vars(vars)?))
    }

    pub fn from_marginal(m: &JointPmf) -> Self {
        TypicalSet {
            vars: m.vars().to_vec(),
            sizes: m.sizes().to_vec(),
            probs: m.probs().to_vec(),
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Sequences may be given in any order but must cover exactly `vars()`.
    pub fn check(&self, seqs: &[(Var, &[u16])], epsilon: f64) -> bool {
        let ordered: Vec<&[u16]> = self
            .vars
            .iter()
            .map(|v| {
                seqs.iter()
                    .find(|(u, _)| u == v)
                    .expect("sequence for every variable")
                    .1
            })
            .collect();
        let n = ordered[0].len();
        let mut counts = vec![0u32; self.probs.len()];
        for k in 0..n {
            let mut idx = 0usize;
            for (seq, &size) in ordered.iter().zip(&self.sizes) {
                idx = idx * size + seq[k] as usize;
            }
            if self.probs[idx] <= 0.0 {
                return false;
            }
            counts[idx] += 1;
        }
        let n = n as f64;
        self.probs
            .iter()
            .zip(&counts)
            .all(|(&p, &c)| (c as f64 / n - p).abs() <= epsilon * p)
    }
}

/// Whether labelled sequences are jointly typical with respect to `joint`,
/// whose variables must be exactly the labels given.
pub fn is_jointly_typical(seqs: &[(Var, &[u16])], joint: &JointPmf, epsilon: f64) -> Result<bool, SimError> {
    let given: VarSet = seqs.iter().map(|(v, _)| *v).collect();
    if given != joint.var_set() || given.len() != seqs.len() {
        return Err(SimError::LabelMismatch {
            given,
            expected: joint.var_set(),
        });
    }
    let n = seqs.first().map_or(0, |(_, s)| s.len());
    for (v, s) in seqs {
        if s.len() != n {
            return Err(SimError::Length {
                var: *v,
                expected: n,
                found: s.len(),
            });
        }
    }
    if n == 0 {
        return Ok(false);
    }
    Ok(TypicalSet::from_marginal(joint).check(seqs, epsilon))
}

/// Decoding step at which an anomaly occurred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    RelayCover1,
    RelayCover2,
    SenderBins,
    SenderCompress1,
    SenderCompress2,
    SenderCompressPair,
    ReceiverCoarse,
    ReceiverBins,
    ReceiverCompress1,
    ReceiverCompress2,
    ReceiverCompressPair,
    ReceiverMessage,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::RelayCover1,
        Stage::RelayCover2,
        Stage::SenderBins,
        Stage::SenderCompress1,
        Stage::SenderCompress2,
        Stage::SenderCompressPair,
        Stage::ReceiverCoarse,
        Stage::ReceiverBins,
        Stage::ReceiverCompress1,
        Stage::ReceiverCompress2,
        Stage::ReceiverCompressPair,
        Stage::ReceiverMessage,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::RelayCover1 => "relay1.cover",
            Stage::RelayCover2 => "relay2.cover",
            Stage::SenderBins => "sender.bins",
            Stage::SenderCompress1 => "sender.compress.z1",
            Stage::SenderCompress2 => "sender.compress.z2",
            Stage::SenderCompressPair => "sender.compress.pair",
            Stage::ReceiverCoarse => "receiver.coarse",
            Stage::ReceiverBins => "receiver.bins",
            Stage::ReceiverCompress1 => "receiver.compress.z1",
            Stage::ReceiverCompress2 => "receiver.compress.z2",
            Stage::ReceiverCompressPair => "receiver.compress.pair",
            Stage::ReceiverMessage => "receiver.message",
        }
    }

    fn relay_cover(i: usize) -> Stage {
        [Stage::RelayCover1, Stage::RelayCover2][i]
    }

    fn sender_compress(i: usize) -> Stage {
        [Stage::SenderCompress1, Stage::SenderCompress2][i]
    }

    fn receiver_compress(i: usize) -> Stage {
        [Stage::ReceiverCompress1, Stage::ReceiverCompress2][i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    NoCandidate,
    NotUnique,
    /// A unique candidate that differs from what was sent.
    Wrong,
}

impl FailureKind {
    pub const ALL: [FailureKind; 3] = [FailureKind::NoCandidate, FailureKind::NotUnique, FailureKind::Wrong];

    pub fn label(self) -> &'static str {
        match self {
            FailureKind::NoCandidate => "no-candidate",
            FailureKind::NotUnique => "not-unique",
            FailureKind::Wrong => "wrong",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    /// Block at whose end the step ran.
    pub decoded_at: usize,
    /// Block whose index was being decoded.
    pub block: usize,
    pub stage: Stage,
    pub kind: FailureKind,
}

impl Anomaly {
    pub fn key(&self) -> String {
        format!("{}/{}", self.stage.label(), self.kind.label())
    }
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} for block {} at block {}",
            self.key(),
            self.block,
            self.decoded_at
        )
    }
}

/// Per-block indices: what was sent and what each node decoded.
/// Every vector has `B + 2` entries indexed by block; entry 0 holds the
/// boundary convention.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub messages: Vec<usize>,
    pub relay_z: [Vec<usize>; 2],
    pub relay_s: [Vec<usize>; 2],
    pub relay_w0: [Vec<usize>; 2],
    pub sender_s: [Vec<usize>; 2],
    pub sender_z: [Vec<usize>; 2],
    pub sender_w0: [Vec<usize>; 2],
    pub receiver_w0: [Vec<usize>; 2],
    pub receiver_s: [Vec<usize>; 2],
    pub receiver_z: [Vec<usize>; 2],
    pub receiver_w: Vec<usize>,
}

impl Trace {
    fn new(len: usize) -> Self {
        let z = || [vec![0; len], vec![0; len]];
        Trace {
            messages: vec![0; len],
            relay_z: z(),
            relay_s: z(),
            relay_w0: z(),
            sender_s: z(),
            sender_z: z(),
            sender_w0: z(),
            receiver_w0: z(),
            receiver_s: z(),
            receiver_z: z(),
            receiver_w: vec![0; len],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Some message block was declared undecodable or decoded wrongly.
    pub error: bool,
    /// Earliest anomaly, reported for failed trials only.
    pub failure: Option<Anomaly>,
    /// All anomalies in the order they occurred.
    pub anomalies: Vec<Anomaly>,
    /// With no anomalies, the decoded indices satisfy the encoding maps.
    pub chain_consistent: bool,
    pub trace: Trace,
}

/// `(choice, failure)` for a decoding step over `space`. A space of one
/// element is returned without a test; otherwise exactly one candidate must
/// pass. Fallbacks: the smallest passing candidate, else the first in `space`.
fn decide(space: &[usize], mut typical: impl FnMut(usize) -> bool) -> (usize, Option<FailureKind>) {
    match space {
        [] => (0, Some(FailureKind::NoCandidate)),
        [only] => (*only, None),
        _ => {
            let mut first = None;
            for &c in space {
                if typical(c) {
                    if let Some(f) = first {
                        return (f, Some(FailureKind::NotUnique));
                    }
                    first = Some(c);
                }
            }
            match first {
                Some(c) => (c, None),
                None => (space[0], Some(FailureKind::NoCandidate)),
            }
        }
    }
}

fn back(v: &[usize], b: usize, k: usize) -> usize {
    if b > k {
        v[b - k]
    } else {
        0
    }
}

const V: [Var; 2] = [Var::V1, Var::V2];
const X: [Var; 2] = [Var::X1, Var::X2];
const Y: [Var; 2] = [Var::Y1, Var::Y2];
const YH: [Var; 2] = [Var::Yh1, Var::Yh2];

struct Tests {
    relay: [TypicalSet; 2],
    sender_bins: TypicalSet,
    sender_z: [TypicalSet; 2],
    sender_pair: TypicalSet,
    receiver_coarse: TypicalSet,
    receiver_bins: TypicalSet,
    receiver_z: [TypicalSet; 2],
    receiver_pair: TypicalSet,
    receiver_message: TypicalSet,
}

impl Tests {
    fn new(j: &JointPmf) -> Result<Self, PmfError> {
        use Var::*;
        let t = |vars: &[Var]| TypicalSet::new(j, vars);
        Ok(Tests {
            relay: [t(&[V1, X1, Y1, Yh1])?, t(&[V2, X2, Y2, Yh2])?],
            sender_bins: t(&[V1, V2, X1, X2, X0, Y0])?,
            sender_z: [t(&[V1, X1, Y0, X0, Yh1])?, t(&[V2, X2, Y0, X0, Yh2])?],
            sender_pair: t(&[V1, V2, X1, X2, Y0, X0, Yh1, Yh2])?,
            receiver_coarse: t(&[V1, V2, Y0])?,
            receiver_bins: t(&[V1, V2, X1, X2, Y0])?,
            receiver_z: [t(&[V1, X1, Y0, Yh1])?, t(&[V2, X2, Y0, Yh2])?],
            receiver_pair: t(&[V1, V2, X1, X2, Y0, Yh1, Yh2])?,
            receiver_message: t(&[V1, V2, X1, X2, X0, Y0, Yh1, Yh2])?,
        })
    }
}

struct Samplers {
    v: [RowSampler; 2],
    x: [RowSampler; 2],
    x0: RowSampler,
    yh: [RowSampler; 2],
    channel: RowSampler,
}

/// Per-distribution state shared by all trials: samplers and typicality tests.
pub struct Simulator {
    params: SimParams,
    sizes: Sizes,
    alph: [usize; 10],
    samplers: Samplers,
    tests: Tests,
}

/// `p(yh | x, v)` rows indexed by `v * |X| + x`, uniform where `(v, x)` has no mass.
fn compression_conditional(j: &JointPmf, v: Var, x: Var, yh: Var) -> Result<(Vec<f64>, usize), PmfError> {
    let m = j.marginalize_vars(&[v, x, yh])?;
    let k = m.size_of(yh).unwrap_or(1);
    let mut rows = m.probs().to_vec();
    for row in rows.chunks_mut(k) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p /= s);
        } else {
            row.fill(1.0 / k as f64);
        }
    }
    Ok((rows, k))
}

impl Simulator {
    pub fn new(dist: &FactoredNetworkDistribution, params: &SimParams) -> Result<Self, SimError> {
        params.validate()?;
        let sizes = Sizes::of(params);
        let needed = sizes.stored_symbols();
        if needed > params.max_symbols as u128 {
            return Err(SimError::MemoryGuard {
                needed,
                cap: params.max_symbols,
            });
        }
        let joint = build_joint(dist)?;
        let (q1, k1) = compression_conditional(&joint, Var::V1, Var::X1, Var::Yh1)?;
        let (q2, k2) = compression_conditional(&joint, Var::V2, Var::X2, Var::Yh2)?;
        let samplers = Samplers {
            v: [RowSampler::from_table(&dist.p_v1), RowSampler::from_table(&dist.p_v2)],
            x: [RowSampler::from_table(&dist.p_x1), RowSampler::from_table(&dist.p_x2)],
            x0: RowSampler::from_table(&dist.p_x0),
            yh: [RowSampler::from_rows(&q1, k1), RowSampler::from_rows(&q2, k2)],
            channel: RowSampler::from_table(dist.channel.table()),
        };
        Ok(Simulator {
            params: params.clone(),
            sizes,
            alph: dist.alphabets.sizes(),
            samplers,
            tests: Tests::new(&joint)?,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    fn size(&self, v: Var) -> usize {
        self.alph[v.index()]
    }

    pub fn generate_codebooks(&self, rng: &mut impl Rng) -> Codebooks {
        let z = self.sizes;
        let n = z.n;
        let sm = &self.samplers;
        let mut v: [Vec<u16>; 2] = Default::default();
        let mut x: [Vec<u16>; 2] = Default::default();
        let mut yh: [Vec<u16>; 2] = Default::default();
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = (0..z.w0(i) * n).map(|_| sm.v[i].sample(0, rng)).collect();
        }
        for i in 0..2 {
            let mut buf = Vec::with_capacity(z.w0(i) * z.s[i] * n);
            for w0 in 0..z.w0(i) {
                for _ in 0..z.s[i] {
                    for k in 0..n {
                        buf.push(sm.x[i].sample(v[i][w0 * n + k] as usize, rng));
                    }
                }
            }
            x[i] = buf;
        }
        let nv2 = self.size(Var::V2);
        let mut x0 = Vec::with_capacity(z.w0(0) * z.w0(1) * z.w * n);
        for w01 in 0..z.w0(0) {
            for w02 in 0..z.w0(1) {
                for _ in 0..z.w {
                    for k in 0..n {
                        let row = v[0][w01 * n + k] as usize * nv2 + v[1][w02 * n + k] as usize;
                        x0.push(sm.x0.sample(row, rng));
                    }
                }
            }
        }
        for i in 0..2 {
            let nx = self.size(X[i]);
            let mut buf = Vec::with_capacity(z.w0(i) * z.s[i] * z.z[i] * n);
            for w0 in 0..z.w0(i) {
                for s in 0..z.s[i] {
                    let xs = &x[i][(w0 * z.s[i] + s) * n..][..n];
                    for _ in 0..z.z[i] {
                        for k in 0..n {
                            let row = v[i][w0 * n + k] as usize * nx + xs[k] as usize;
                            buf.push(sm.yh[i].sample(row, rng));
                        }
                    }
                }
            }
            yh[i] = buf;
        }
        Codebooks {
            sizes_: z,
            v,
            x,
            x0,
            yh,
        }
    }

    fn w0_join(&self, i: usize, a: usize, b: usize) -> usize {
        a * self.sizes.w0b[i] + b
    }

    fn w0_split(&self, i: usize, w0: usize) -> (usize, usize) {
        (w0 / self.sizes.w0b[i], w0 % self.sizes.w0b[i])
    }

    /// Draw `B - 1` uniform messages.
    pub fn random_messages(&self, rng: &mut impl Rng) -> Vec<usize> {
        (0..self.params.message_count())
            .map(|_| rng.random_range(0..self.sizes.w))
            .collect()
    }

    /// One trial with fresh codebooks and partitions drawn from `seed`.
    pub fn run_trial(&self, messages: &[usize], seed: u64) -> Result<TrialResult, SimError> {
        let expected = self.params.message_count();
        if messages.len() != expected {
            return Err(SimError::MessageCount {
                expected,
                found: messages.len(),
            });
        }
        if let Some(&m) = messages.iter().find(|&&m| m >= self.sizes.w) {
            return Err(SimError::MessageRange {
                value: m,
                bits: self.params.k_r,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cb = self.generate_codebooks(&mut rng);
        let parts = Partitions::generate(&self.params, &mut rng);
        Ok(self.transmit(&cb, &parts, messages, &mut rng))
    }

    fn transmit(&self, cb: &Codebooks, parts: &Partitions, messages: &[usize], rng: &mut impl Rng) -> TrialResult {
        let p = &self.params;
        let z = self.sizes;
        let eps = p.epsilon;
        let nb = p.blocks;
        let n = z.n;
        let mut t = Trace::new(nb + 2);
        t.messages[1..nb].copy_from_slice(messages);
        let mut anomalies = Vec::new();
        let mut y0: Vec<Vec<u16>> = vec![Vec::new(); nb + 2];
        let (ny1, ny2) = (self.size(Var::Y1), self.size(Var::Y2));
        let (nx1, nx2) = (self.size(Var::X1), self.size(Var::X2));
        let zero_space = |k: usize| -> Vec<usize> { (0..k).collect() };

        for b in 1..=nb + 1 {
            // encoding
            for i in 0..2 {
                t.relay_s[i][b] = parts.cell[i][t.relay_z[i][b - 1]];
                t.relay_w0[i][b] = self.w0_join(
                    i,
                    parts.det(i, t.relay_s[i][b - 1]),
                    parts.subcell[i][back(&t.relay_z[i], b, 2)],
                );
                t.sender_w0[i][b] = self.w0_join(
                    i,
                    parts.det(i, t.sender_s[i][b - 1]),
                    parts.subcell[i][back(&t.sender_z[i], b, 2)],
                );
            }
            let v = [cb.v(0, t.relay_w0[0][b]), cb.v(1, t.relay_w0[1][b])];
            let x = [
                cb.x(0, t.relay_s[0][b], t.relay_w0[0][b]),
                cb.x(1, t.relay_s[1][b], t.relay_w0[1][b]),
            ];
            let x0 = cb.x0(t.messages[b], t.sender_w0[0][b], t.sender_w0[1][b]);

            // channel
            let mut ys = [vec![0u16; n], vec![0u16; n], vec![0u16; n]];
            for k in 0..n {
                let row = (x0[k] as usize * nx1 + x[0][k] as usize) * nx2 + x[1][k] as usize;
                let o = self.samplers.channel.sample(row, rng) as usize;
                ys[0][k] = (o / (ny1 * ny2)) as u16;
                ys[1][k] = ((o / ny2) % ny1) as u16;
                ys[2][k] = (o % ny2) as u16;
            }
            let [y0b, y1b, y2b] = ys;
            y0[b] = y0b;
            let yr = [&y1b, &y2b];

            // relays pick the smallest covering index
            for i in 0..2 {
                let (s, w0) = (t.relay_s[i][b], t.relay_w0[i][b]);
                let (choice, fail) = decide(&zero_space(z.z[i]), |c| {
                    self.tests.relay[i].check(
                        &[(V[i], v[i]), (X[i], x[i]), (Y[i], yr[i]), (YH[i], cb.yh(i, c, s, w0))],
                        eps,
                    )
                });
                t.relay_z[i][b] = choice;
                if fail == Some(FailureKind::NoCandidate) {
                    anomalies.push(Anomaly {
                        decoded_at: b,
                        block: b,
                        stage: Stage::relay_cover(i),
                        kind: FailureKind::NoCandidate,
                    });
                }
            }

            if b <= nb {
                self.sender_steps(cb, parts, &mut t, &y0, b, &mut anomalies);
            }
            self.receiver_steps(cb, parts, &mut t, &y0, b, &mut anomalies);
        }

        let error = (1..nb).any(|m| {
            t.receiver_w[m] != t.messages[m]
                || anomalies
                    .iter()
                    .any(|a| a.stage == Stage::ReceiverMessage && a.block == m && a.kind != FailureKind::Wrong)
        });
        let chain_consistent = !anomalies.is_empty() || self.chain_holds(parts, &t);
        TrialResult {
            error,
            failure: if error { anomalies.first().copied() } else { None },
            anomalies,
            chain_consistent,
            trace: t,
        }
    }

    fn record(
        anomalies: &mut Vec<Anomaly>,
        decoded_at: usize,
        block: usize,
        stage: Stage,
        fail: Option<FailureKind>,
        correct: bool,
    ) {
        let kind = fail.or(if correct { None } else { Some(FailureKind::Wrong) });
        if let Some(kind) = kind {
            anomalies.push(Anomaly {
                decoded_at,
                block,
                stage,
                kind,
            });
        }
    }

    fn sender_steps(
        &self,
        cb: &Codebooks,
        parts: &Partitions,
        t: &mut Trace,
        y0: &[Vec<u16>],
        b: usize,
        anomalies: &mut Vec<Anomaly>,
    ) {
        let z = self.sizes;
        let eps = self.params.epsilon;
        let w0 = [t.sender_w0[0][b], t.sender_w0[1][b]];
        let x0 = cb.x0(t.messages[b], w0[0], w0[1]);
        let pairs: Vec<usize> = (0..z.s[0] * z.s[1]).collect();
        let (c, fail) = decide(&pairs, |c| {
            let (s1, s2) = (c / z.s[1], c % z.s[1]);
            self.tests.sender_bins.check(
                &[
                    (Var::V1, cb.v(0, w0[0])),
                    (Var::V2, cb.v(1, w0[1])),
                    (Var::X1, cb.x(0, s1, w0[0])),
                    (Var::X2, cb.x(1, s2, w0[1])),
                    (Var::X0, x0),
                    (Var::Y0, &y0[b]),
                ],
                eps,
            )
        });
        t.sender_s[0][b] = c / z.s[1];
        t.sender_s[1][b] = c % z.s[1];
        let correct = t.sender_s[0][b] == t.relay_s[0][b] && t.sender_s[1][b] == t.relay_s[1][b];
        Self::record(anomalies, b, b, Stage::SenderBins, fail, correct);

        if b < 2 {
            return;
        }
        let pb = b - 1;
        let pw0 = [t.sender_w0[0][pb], t.sender_w0[1][pb]];
        let ps = [t.sender_s[0][pb], t.sender_s[1][pb]];
        let px0 = cb.x0(t.messages[pb], pw0[0], pw0[1]);
        let members =
            |i: usize| -> Vec<usize> { (0..z.z[i]).filter(|&c| parts.cell[i][c] == t.sender_s[i][b]).collect() };
        if self.params.joint_decoding {
            let (m1, m2) = (members(0), members(1));
            let space: Vec<usize> = m1
                .iter()
                .flat_map(|&a| m2.iter().map(move |&c| a * z.z[1] + c))
                .collect();
            let (c, fail) = decide(&space, |c| {
                let (z1, z2) = (c / z.z[1], c % z.z[1]);
                self.tests.sender_pair.check(
                    &[
                        (Var::V1, cb.v(0, pw0[0])),
                        (Var::V2, cb.v(1, pw0[1])),
                        (Var::X1, cb.x(0, ps[0], pw0[0])),
                        (Var::X2, cb.x(1, ps[1], pw0[1])),
                        (Var::Y0, &y0[pb]),
                        (Var::X0, px0),
                        (Var::Yh1, cb.yh(0, z1, ps[0], pw0[0])),
                        (Var::Yh2, cb.yh(1, z2, ps[1], pw0[1])),
                    ],
                    eps,
                )
            });
            t.sender_z[0][pb] = c / z.z[1];
            t.sender_z[1][pb] = c % z.z[1];
            let correct = t.sender_z[0][pb] == t.relay_z[0][pb] && t.sender_z[1][pb] == t.relay_z[1][pb];
            Self::record(anomalies, b, pb, Stage::SenderCompressPair, fail, correct);
        } else {
            for i in 0..2 {
                let (c, fail) = decide(&members(i), |c| {
                    self.tests.sender_z[i].check(
                        &[
                            (V[i], cb.v(i, pw0[i])),
                            (X[i], cb.x(i, ps[i], pw0[i])),
                            (Var::Y0, &y0[pb]),
                            (Var::X0, px0),
                            (YH[i], cb.yh(i, c, ps[i], pw0[i])),
                        ],
                        eps,
                    )
                });
                t.sender_z[i][pb] = c;
                let correct = c == t.relay_z[i][pb];
                Self::record(anomalies, b, pb, Stage::sender_compress(i), fail, correct);
            }
        }
    }

    fn receiver_steps(
        &self,
        cb: &Codebooks,
        parts: &Partitions,
        t: &mut Trace,
        y0: &[Vec<u16>],
        b: usize,
        anomalies: &mut Vec<Anomaly>,
    ) {
        let z = self.sizes;
        let eps = self.params.epsilon;
        let nb = self.params.blocks;

        // coarse relay indices of this block
        let (n1, n2) = (z.w0(0), z.w0(1));
        let pairs: Vec<usize> = (0..n1 * n2).collect();
        let (c, fail) = decide(&pairs, |c| {
            self.tests.receiver_coarse.check(
                &[
                    (Var::V1, cb.v(0, c / n2)),
                    (Var::V2, cb.v(1, c % n2)),
                    (Var::Y0, &y0[b]),
                ],
                eps,
            )
        });
        t.receiver_w0[0][b] = c / n2;
        t.receiver_w0[1][b] = c % n2;
        let correct = t.receiver_w0[0][b] == t.relay_w0[0][b] && t.receiver_w0[1][b] == t.relay_w0[1][b];
        Self::record(anomalies, b, b, Stage::ReceiverCoarse, fail, correct);
        if b < 2 {
            return;
        }

        // cell indices of the previous block, restricted to the decoded deterministic cells
        let pb = b - 1;
        let pw0 = [t.receiver_w0[0][pb], t.receiver_w0[1][pb]];
        let cells = [
            self.w0_split(0, t.receiver_w0[0][b]).0,
            self.w0_split(1, t.receiver_w0[1][b]).0,
        ];
        let r1: Vec<usize> = parts.det_members(0, cells[0]).collect();
        let r2: Vec<usize> = parts.det_members(1, cells[1]).collect();
        let space: Vec<usize> = r1
            .iter()
            .flat_map(|&a| r2.iter().map(move |&c| a * z.s[1] + c))
            .collect();
        let (c, fail) = decide(&space, |c| {
            let (s1, s2) = (c / z.s[1], c % z.s[1]);
            self.tests.receiver_bins.check(
                &[
                    (Var::V1, cb.v(0, pw0[0])),
                    (Var::V2, cb.v(1, pw0[1])),
                    (Var::X1, cb.x(0, s1, pw0[0])),
                    (Var::X2, cb.x(1, s2, pw0[1])),
                    (Var::Y0, &y0[pb]),
                ],
                eps,
            )
        });
        t.receiver_s[0][pb] = c / z.s[1];
        t.receiver_s[1][pb] = c % z.s[1];
        let correct = t.receiver_s[0][pb] == t.relay_s[0][pb] && t.receiver_s[1][pb] == t.relay_s[1][pb];
        Self::record(anomalies, b, pb, Stage::ReceiverBins, fail, correct);
        if b < 3 {
            return;
        }

        // compression indices two blocks back
        let qb = b - 2;
        let qw0 = [t.receiver_w0[0][qb], t.receiver_w0[1][qb]];
        let qs = [t.receiver_s[0][qb], t.receiver_s[1][qb]];
        let members = |i: usize| -> Vec<usize> {
            let sub = self.w0_split(i, t.receiver_w0[i][b]).1;
            (0..z.z[i])
                .filter(|&c| parts.cell[i][c] == t.receiver_s[i][pb] && parts.subcell[i][c] == sub)
                .collect()
        };
        if self.params.joint_decoding {
            let (m1, m2) = (members(0), members(1));
            let space: Vec<usize> = m1
                .iter()
                .flat_map(|&a| m2.iter().map(move |&c| a * z.z[1] + c))
                .collect();
            let (c, fail) = decide(&space, |c| {
                self.tests.receiver_pair.check(
                    &[
                        (Var::V1, cb.v(0, qw0[0])),
                        (Var::V2, cb.v(1, qw0[1])),
                        (Var::X1, cb.x(0, qs[0], qw0[0])),
                        (Var::X2, cb.x(1, qs[1], qw0[1])),
                        (Var::Y0, &y0[qb]),
                        (Var::Yh1, cb.yh(0, c / z.z[1], qs[0], qw0[0])),
                        (Var::Yh2, cb.yh(1, c % z.z[1], qs[1], qw0[1])),
                    ],
                    eps,
                )
            });
            t.receiver_z[0][qb] = c / z.z[1];
            t.receiver_z[1][qb] = c % z.z[1];
            let correct = t.receiver_z[0][qb] == t.relay_z[0][qb] && t.receiver_z[1][qb] == t.relay_z[1][qb];
            Self::record(anomalies, b, qb, Stage::ReceiverCompressPair, fail, correct);
        } else {
            for i in 0..2 {
                let (c, fail) = decide(&members(i), |c| {
                    self.tests.receiver_z[i].check(
                        &[
                            (V[i], cb.v(i, qw0[i])),
                            (X[i], cb.x(i, qs[i], qw0[i])),
                            (Var::Y0, &y0[qb]),
                            (YH[i], cb.yh(i, c, qs[i], qw0[i])),
                        ],
                        eps,
                    )
                });
                t.receiver_z[i][qb] = c;
                let correct = c == t.relay_z[i][qb];
                Self::record(anomalies, b, qb, Stage::receiver_compress(i), fail, correct);
            }
        }

        // message two blocks back
        if qb >= nb {
            return;
        }
        let qz = [t.receiver_z[0][qb], t.receiver_z[1][qb]];
        let msgs: Vec<usize> = (0..z.w).collect();
        let (c, fail) = decide(&msgs, |w| {
            self.tests.receiver_message.check(
                &[
                    (Var::V1, cb.v(0, qw0[0])),
                    (Var::V2, cb.v(1, qw0[1])),
                    (Var::X1, cb.x(0, qs[0], qw0[0])),
                    (Var::X2, cb.x(1, qs[1], qw0[1])),
                    (Var::X0, cb.x0(w, qw0[0], qw0[1])),
                    (Var::Y0, &y0[qb]),
                    (Var::Yh1, cb.yh(0, qz[0], qs[0], qw0[0])),
                    (Var::Yh2, cb.yh(1, qz[1], qs[1], qw0[1])),
                ],
                eps,
            )
        });
        t.receiver_w[qb] = c;
        Self::record(anomalies, b, qb, Stage::ReceiverMessage, fail, c == t.messages[qb]);
    }

    /// Decoded indices must reproduce the encoding maps: cooperation indices
    /// from earlier cells and compression indices, cells from compression
    /// indices, and messages as sent.
    fn chain_holds(&self, parts: &Partitions, t: &Trace) -> bool {
        let nb = self.params.blocks;
        let relays = (0..2).all(|i| {
            let receiver = (1..=nb + 1).all(|b| {
                let w0 = self.w0_join(
                    i,
                    parts.det(i, t.receiver_s[i][b - 1]),
                    parts.subcell[i][back(&t.receiver_z[i], b, 2)],
                );
                t.receiver_w0[i][b] == w0
            }) && (1..=nb).all(|b| t.receiver_s[i][b] == parts.cell[i][t.receiver_z[i][b - 1]]);
            let sender = (1..=nb).all(|b| t.sender_s[i][b] == parts.cell[i][t.sender_z[i][b - 1]])
                && (1..=nb).all(|b| t.sender_w0[i][b] == t.relay_w0[i][b]);
            receiver && sender
        });
        relays && (1..nb).all(|m| t.receiver_w[m] == t.messages[m])
    }

    /// Independent trials with uniform messages. Trial `k` uses stream `k`
    /// of the configured seed.
    pub fn estimate_error(&self) -> ErrorEstimate {
        let p = &self.params;
        let results: Vec<TrialResult> = (0..p.trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
                rng.set_stream(k as u64);
                let messages = self.random_messages(&mut rng);
                self.run_trial(&messages, rng.next_u64())
                    .expect("messages drawn in range")
            })
            .collect();
        ErrorEstimate::from_results(p, &results)
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    /// 95% interval.
    pub ci: (f64, f64),
    /// Earliest-anomaly tag of each failed trial, keyed `stage/kind`.
    pub failure_stages: BTreeMap<String, usize>,
    /// Trials whose decoded chain contradicted the encoding maps.
    pub inconsistent_chains: usize,
    pub realized_rate: f64,
}

impl ErrorEstimate {
    pub fn from_results(params: &SimParams, results: &[TrialResult]) -> Self {
        let errors = results.iter().filter(|r| r.error).count();
        let mut failure_stages = BTreeMap::new();
        for r in results.iter().filter(|r| r.error) {
            if let Some(a) = r.failure {
                *failure_stages.entry(a.key()).or_insert(0) += 1;
            }
        }
        ErrorEstimate {
            trials: results.len(),
            errors,
            error_rate: errors as f64 / results.len().max(1) as f64,
            ci: wilson_interval(errors, results.len()),
            failure_stages,
            inconsistent_chains: results.iter().filter(|r| !r.chain_consistent).count(),
            realized_rate: params.realized_rate(),
        }
    }
}

pub fn run_trial(
    dist: &FactoredNetworkDistribution,
    params: &SimParams,
    messages: &[usize],
    seed: u64,
) -> Result<TrialResult, SimError> {
    Simulator::new(dist, params)?.run_trial(messages, seed)
}

pub fn estimate_error(dist: &FactoredNetworkDistribution, params: &SimParams) -> Result<ErrorEstimate, SimError> {
    Ok(Simulator::new(dist, params)?.estimate_error())
}

pub fn generate_codebooks(
    dist: &FactoredNetworkDistribution,
    params: &SimParams,
    seed: u64,
) -> Result<Codebooks, SimError> {
    let sim = Simulator::new(dist, params)?;
    Ok(sim.generate_codebooks(&mut ChaCha8Rng::seed_from_u64(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{Alphabets, Channel, FreeFactor};

    fn p2p(flip: f64) -> FactoredNetworkDistribution {
        let a = Alphabets::singleton()
            .with(Var::X0, 2)
            .unwrap()
            .with(Var::Y0, 2)
            .unwrap();
        let ch = Channel::from_fn(&a, |x0, _, _, y0, _, _| if x0 == y0 { 1.0 - flip } else { flip });
        FactoredNetworkDistribution::uniform(a, ch)
    }

    fn all_binary_uniform() -> FactoredNetworkDistribution {
        let a = Alphabets::binary();
        let ch = Channel::from_fn(&a, |_, _, _, _, _, _| 0.125);
        FactoredNetworkDistribution::uniform(a, ch)
    }

    #[test]
    fn zero_budgets_give_single_codewords() {
        let cb = generate_codebooks(&all_binary_uniform(), &SimParams::new(4), 1).unwrap();
        assert_eq!(cb.family_sizes(), [1; 7]);
    }

    #[test]
    fn point_mass_gives_constant_codewords() {
        let a = Alphabets::binary();
        let ch = Channel::from_fn(&a, |_, _, _, y0, y1, y2| (y0 + y1 + y2 == 0) as u8 as f64);
        let d = FactoredNetworkDistribution::from_fn(a, ch, |f, a| f.point_mass(a));
        let mut p = SimParams::new(5);
        p.k_r = 2;
        p.kh1 = 1;
        let cb = generate_codebooks(&d, &p, 3).unwrap();
        for i in 0..2 {
            assert!(cb.v[i].iter().all(|&s| s == 0));
            assert!(cb.yh[i].iter().all(|&s| s == 0));
        }
        assert!(cb.x0.iter().all(|&s| s == 0));
    }

    #[test]
    fn uniform_codewords_are_balanced() {
        let mut p = SimParams::new(8);
        p.k_011 = 7;
        p.k_s1 = 7;
        p.kh1 = 7;
        let cb = generate_codebooks(&all_binary_uniform(), &p, 11).unwrap();
        assert_eq!(cb.v[0].len(), 1024);
        let ones = cb.v[0].iter().filter(|&&s| s == 1).count() as f64 / 1024.0;
        assert!((ones - 0.5).abs() < 0.05, "{ones}");
    }

    #[test]
    fn memory_guard_trips() {
        let mut p = SimParams::new(16);
        p.k_r = 20;
        p.max_symbols = 1000;
        assert!(matches!(
            Simulator::new(&p2p(0.0), &p),
            Err(SimError::MemoryGuard { .. })
        ));
    }

    #[test]
    fn params_are_checked() {
        let mut p = SimParams::new(8);
        p.k_011 = 1;
        assert!(p.validate().is_err());
        let mut p = SimParams::new(8);
        p.kh1 = 2;
        p.k_s1 = 1;
        p.k_012 = 2;
        assert!(p.validate().is_err());
        p.k_012 = 1;
        assert!(p.validate().is_ok());
        let mut p = SimParams::new(8);
        p.epsilon = 1.0;
        assert!(p.validate().is_err());
        p.epsilon = 0.5;
        p.blocks = 1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn deterministic_cells_are_contiguous_and_equal() {
        let mut p = SimParams::new(4);
        p.kh1 = 4;
        p.k_s1 = 3;
        p.k_011 = 1;
        let parts = Partitions::generate(&p, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(parts.det_block[0], 4);
        for a in 0..2 {
            let m: Vec<_> = parts.det_members(0, a).collect();
            assert_eq!(m.len(), 4);
            assert!(m.iter().all(|&s| parts.det(0, s) == a));
        }
        assert_eq!(parts.cell[0].len(), 16);
        assert!(parts.cell[0].iter().all(|&s| s < 8));
    }

    #[test]
    fn typicality_examples() {
        let j = JointPmf::new(vec![(Var::X0, 2), (Var::Y0, 2)], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let zeros = [0u16; 6];
        assert!(is_jointly_typical(&[(Var::X0, &zeros), (Var::Y0, &zeros)], &j, 0.1).unwrap());
        let j = JointPmf::new(vec![(Var::X0, 2), (Var::Y0, 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let x = [0u16, 1, 0, 1];
        let y = [0u16, 1, 1, 1];
        assert!(!is_jointly_typical(&[(Var::X0, &x), (Var::Y0, &y)], &j, 0.9).unwrap());
        assert!(is_jointly_typical(&[(Var::Y0, &x), (Var::X0, &x)], &j, 0.1).unwrap());
        assert!(matches!(
            is_jointly_typical(&[(Var::X0, &x)], &j, 0.1),
            Err(SimError::LabelMismatch { .. })
        ));
        assert!(matches!(
            is_jointly_typical(&[(Var::X0, &x), (Var::Y0, &y[..3])], &j, 0.1),
            Err(SimError::Length { .. })
        ));
    }

    #[test]
    fn long_iid_sequences_are_typical() {
        let probs = vec![0.4, 0.1, 0.2, 0.3];
        let j = JointPmf::new(vec![(Var::X0, 2), (Var::Y0, 2)], probs.clone()).unwrap();
        let sampler = WeightedIndex::new(&probs).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for _ in 0..10_000 {
                let s = sampler.sample(&mut rng) as u16;
                x.push(s / 2);
                y.push(s % 2);
            }
            hits += is_jointly_typical(&[(Var::X0, &x), (Var::Y0, &y)], &j, 0.1).unwrap() as usize;
        }
        assert!(hits >= 99);
    }

    #[test]
    fn decide_rules() {
        assert_eq!(decide(&[7], |_| false), (7, None));
        assert_eq!(decide(&[], |_| true), (0, Some(FailureKind::NoCandidate)));
        assert_eq!(decide(&[2, 3, 4], |c| c >= 3), (3, Some(FailureKind::NotUnique)));
        assert_eq!(decide(&[2, 3, 4], |c| c == 4), (4, None));
        assert_eq!(decide(&[2, 3], |_| false), (2, Some(FailureKind::NoCandidate)));
    }

    #[test]
    fn zero_budgets_never_fail() {
        let mut p = SimParams::new(3);
        p.trials = 20;
        let e = estimate_error(&all_binary_uniform(), &p).unwrap();
        assert_eq!(e.errors, 0);
        assert_eq!(e.inconsistent_chains, 0);
    }

    #[test]
    fn trials_are_deterministic() {
        let mut p = SimParams::new(8);
        p.k_r = 1;
        p.epsilon = 0.9;
        let r1 = run_trial(&p2p(0.05), &p, &[1, 0], 42).unwrap();
        let r2 = run_trial(&p2p(0.05), &p, &[1, 0], 42).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.trace.messages, vec![0, 1, 0, 0, 0]);
    }

    #[test]
    fn message_checks() {
        let mut p = SimParams::new(8);
        p.k_r = 1;
        let sim = Simulator::new(&p2p(0.0), &p).unwrap();
        assert!(matches!(sim.run_trial(&[0], 1), Err(SimError::MessageCount { .. })));
        assert!(matches!(sim.run_trial(&[0, 2], 1), Err(SimError::MessageRange { .. })));
    }

    #[test]
    fn wilson_zero_of_200() {
        let (lo, hi) = wilson_interval(0, 200);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0188).abs() < 5e-4, "{hi}");
        let (lo, hi) = wilson_interval(200, 200);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.98);
    }

    #[test]
    fn histogram_counts_failed_trials() {
        let mut p = SimParams::new(6);
        p.k_r = 2;
        p.trials = 50;
        p.epsilon = 0.5;
        let d = FactoredNetworkDistribution::from_fn(p2p(0.5).alphabets, p2p(0.5).channel, |f, a| {
            if f == FreeFactor::PX0 {
                f.uniform(a)
            } else {
                f.point_mass(a)
            }
        });
        let e = estimate_error(&d, &p).unwrap();
        assert!(e.errors > 0);
        assert_eq!(e.failure_stages.values().sum::<usize>(), e.errors);
    }

    #[test]
    fn relayed_network_runs_with_nonzero_budgets() {
        let mut p = SimParams::new(6);
        p.k_r = 1;
        p.k_s1 = 1;
        p.kh1 = 2;
        p.k_011 = 1;
        p.k_012 = 1;
        p.k_s2 = 1;
        p.kh2 = 1;
        p.trials = 10;
        for joint in [false, true] {
            p.joint_decoding = joint;
            let e = estimate_error(&all_binary_uniform(), &p).unwrap();
            assert_eq!(e.trials, 10);
            assert_eq!(e.inconsistent_chains, 0);
            assert_eq!(e.failure_stages.values().sum::<usize>(), e.errors);
        }
    }
}
