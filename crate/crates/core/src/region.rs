//! Achievable-rate evaluation for the two-relay network with feedback.
//!
//! Three views of the same achievability argument live here:
//!
//! * [`theorem1_verdict`] evaluates the closed-form rate and the three
//!   compression constraints (relay 1, relay 2, both relays) directly;
//! * [`stepwise_system`] emits the per-decoding-step rate constraints as a
//!   linear system in the nine rate variables, which [`crate::fme`] projects;
//! * [`joint_decoding_system`] emits the constraints obtained when sender and
//!   receiver decode both compression indices jointly.
//!
//! Row ids name the decoding step a constraint comes from, e.g.
//! `sender.bin.s1` or `relay.cover.2`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fme::{self, InequalitySystem, LinearInequality, RateVar};
use crate::info::{InfoCalculator, InfoError};
use crate::pmf::{build_joint, FactoredNetworkDistribution, PmfError, Var, VarSet};

/// Tolerance applied to every strict `lhs < rhs` of the closed-form constraints.
pub const RATE_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

/// A conditional mutual information `I(a; b | given)` in canonical form:
/// the two argument groups are ordered by their label sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InfoTerm {
    pub a: VarSet,
    pub b: VarSet,
    pub given: VarSet,
}

impl InfoTerm {
    pub fn new(a: &[Var], b: &[Var], given: &[Var]) -> Self {
        let (a, b) = (VarSet::of(a), VarSet::of(b));
        let (a, b) = if Self::key(b) < Self::key(a) { (b, a) } else { (a, b) };
        InfoTerm {
            a,
            b,
            given: VarSet::of(given),
        }
    }

    fn key(s: VarSet) -> Vec<Var> {
        s.iter().collect()
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl PartialOrd for InfoTerm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InfoTerm {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (Self::key(self.a), Self::key(self.b), Self::key(self.given)).cmp(&(
            Self::key(other.a),
            Self::key(other.b),
            Self::key(other.given),
        ))
    }
}

impl fmt::Display for InfoTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.given.is_empty() {
            write!(f, "I({}; {})", self.a, self.b)
        } else {
            write!(f, "I({}; {} | {})", self.a, self.b, self.given)
        }
    }
}

/// The named information quantities the constraints are built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// `I(X0; Y0,Yh1,Yh2,X1,X2 | V1,V2)`
    Message,
    /// `I(V1,X1; V2,X2)`
    Cooperation,
    /// `I(Yh1; Y1 | V1,X1)`
    Cover1,
    Cover2,
    /// `I(X1; X0,Y0,V2,X2 | V1)`
    SenderBin1,
    SenderBin2,
    /// `I(V1; V2,X2)`
    Coherence1,
    /// `I(V2; V1,X1)`
    Coherence2,
    /// `I(X1,X2; X0,Y0 | V1,V2)`
    SenderBinPair,
    /// `I(V1; V2)`
    AuxPair,
    /// `I(Yh1; X0,Y0 | V1,X1)`
    SenderSide1,
    SenderSide2,
    /// `I(V1; Y0,V2)`
    Coarse1,
    Coarse2,
    /// `I(V1,V2; Y0)`
    CoarsePair,
    /// `I(X1; Y0,V2,X2 | V1)`
    ReceiverBin1,
    ReceiverBin2,
    /// `I(X1,X2; Y0 | V1,V2)`
    ReceiverBinPair,
    /// `I(Yh1; Y0 | V1,X1)`
    ReceiverSide1,
    ReceiverSide2,
    /// `I(Yh1; X0,Y0,V2,X2 | V1,X1)`
    SenderJoint1,
    /// `I(Yh2; X0,Y0,V1,X1,Yh1 | V2,X2)`
    SenderJoint2,
    /// `I(Yh1,Yh2; X0,Y0 | V1,V2,X1,X2)`
    SenderJointPair,
    /// `I(Yh1; Y0,V2,X2,Yh2 | V1,X1)`
    ReceiverJoint1,
    /// `I(Yh2; Y0,V1,X1,Yh1 | V2,X2)`
    ReceiverJoint2,
    /// `I(Yh1,Yh2; Y0 | V1,X1,V2,X2)`
    ReceiverJointPair,
    /// `I(Yh1; X0,Y0,V2,X2,Yh2 | V1,X1)`, used only by the symmetric reading.
    SenderJoint1Symmetric,
}

impl Term {
    /// Every term that appears in the rate, the stepwise constraints and the
    /// joint-decoding constraints as written.
    pub const PRINTED: [Term; 26] = [
        Term::Message,
        Term::Cooperation,
        Term::Cover1,
        Term::Cover2,
        Term::SenderBin1,
        Term::SenderBin2,
        Term::Coherence1,
        Term::Coherence2,
        Term::SenderBinPair,
        Term::AuxPair,
        Term::SenderSide1,
        Term::SenderSide2,
        Term::Coarse1,
        Term::Coarse2,
        Term::CoarsePair,
        Term::ReceiverBin1,
        Term::ReceiverBin2,
        Term::ReceiverBinPair,
        Term::ReceiverSide1,
        Term::ReceiverSide2,
        Term::SenderJoint1,
        Term::SenderJoint2,
        Term::SenderJointPair,
        Term::ReceiverJoint1,
        Term::ReceiverJoint2,
        Term::ReceiverJointPair,
    ];

    pub fn info_term(self) -> InfoTerm {
        use Var::*;
        match self {
            Term::Message => InfoTerm::new(&[X0], &[Y0, Yh1, Yh2, X1, X2], &[V1, V2]),
            Term::Cooperation => InfoTerm::new(&[V1, X1], &[V2, X2], &[]),
            Term::Cover1 => InfoTerm::new(&[Yh1], &[Y1], &[V1, X1]),
            Term::Cover2 => InfoTerm::new(&[Yh2], &[Y2], &[V2, X2]),
            Term::SenderBin1 => InfoTerm::new(&[X1], &[X0, Y0, V2, X2], &[V1]),
            Term::SenderBin2 => InfoTerm::new(&[X2], &[X0, Y0, V1, X1], &[V2]),
            Term::Coherence1 => InfoTerm::new(&[V1], &[V2, X2], &[]),
            Term::Coherence2 => InfoTerm::new(&[V2], &[V1, X1], &[]),
            Term::SenderBinPair => InfoTerm::new(&[X1, X2], &[X0, Y0], &[V1, V2]),
            Term::AuxPair => InfoTerm::new(&[V1], &[V2], &[]),
            Term::SenderSide1 => InfoTerm::new(&[Yh1], &[X0, Y0], &[V1, X1]),
            Term::SenderSide2 => InfoTerm::new(&[Yh2], &[X0, Y0], &[V2, X2]),
            Term::Coarse1 => InfoTerm::new(&[V1], &[Y0, V2], &[]),
            Term::Coarse2 => InfoTerm::new(&[V2], &[Y0, V1], &[]),
            Term::CoarsePair => InfoTerm::new(&[V1, V2], &[Y0], &[]),
            Term::ReceiverBin1 => InfoTerm::new(&[X1], &[Y0, V2, X2], &[V1]),
            Term::ReceiverBin2 => InfoTerm::new(&[X2], &[Y0, V1, X1], &[V2]),
            Term::ReceiverBinPair => InfoTerm::new(&[X1, X2], &[Y0], &[V1, V2]),
            Term::ReceiverSide1 => InfoTerm::new(&[Yh1], &[Y0], &[V1, X1]),
            Term::ReceiverSide2 => InfoTerm::new(&[Yh2], &[Y0], &[V2, X2]),
            Term::SenderJoint1 => InfoTerm::new(&[Yh1], &[X0, Y0, V2, X2], &[V1, X1]),
            Term::SenderJoint2 => InfoTerm::new(&[Yh2], &[X0, Y0, V1, X1, Yh1], &[V2, X2]),
            Term::SenderJointPair => InfoTerm::new(&[Yh1, Yh2], &[X0, Y0], &[V1, V2, X1, X2]),
            Term::ReceiverJoint1 => InfoTerm::new(&[Yh1], &[Y0, V2, X2, Yh2], &[V1, X1]),
            Term::ReceiverJoint2 => InfoTerm::new(&[Yh2], &[Y0, V1, X1, Yh1], &[V2, X2]),
            Term::ReceiverJointPair => InfoTerm::new(&[Yh1, Yh2], &[Y0], &[V1, X1, V2, X2]),
            Term::SenderJoint1Symmetric => InfoTerm::new(&[Yh1], &[X0, Y0, V2, X2, Yh2], &[V1, X1]),
        }
    }
}

/// Values of the named information terms for one distribution, in bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoTermValues {
    values: BTreeMap<Term, f64>,
}

impl InfoTermValues {
    pub fn get(&self, t: Term) -> Option<f64> {
        self.values.get(&t).copied()
    }

    fn v(&self, t: Term) -> f64 {
        self.values
            .get(&t)
            .copied()
            .unwrap_or_else(|| panic!("term {t:?} was not evaluated"))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(canonical name, value)` pairs sorted by name.
    pub fn named(&self) -> BTreeMap<String, f64> {
        self.values.iter().map(|(t, v)| (t.info_term().name(), *v)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Term, f64)> + '_ {
        self.values.iter().map(|(t, v)| (*t, *v))
    }
}

fn evaluate_terms(dist: &FactoredNetworkDistribution, terms: &[Term]) -> Result<InfoTermValues, RegionError> {
    let joint = build_joint(dist)?;
    let mut calc = InfoCalculator::new(&joint);
    let mut values = BTreeMap::new();
    for &t in terms {
        let it = t.info_term();
        values.insert(t, calc.mutual_info(it.a, it.b, it.given)?);
    }
    Ok(InfoTermValues { values })
}

/// Evaluate every printed term on the joint of `dist`.
pub fn info_vector(dist: &FactoredNetworkDistribution) -> Result<InfoTermValues, RegionError> {
    evaluate_terms(dist, &Term::PRINTED)
}

/// Terms needed by the closed-form verdict only.
const VERDICT_TERMS: [Term; 20] = [
    Term::Message,
    Term::Cooperation,
    Term::Cover1,
    Term::Cover2,
    Term::SenderBin1,
    Term::SenderBin2,
    Term::Coherence1,
    Term::Coherence2,
    Term::SenderBinPair,
    Term::AuxPair,
    Term::SenderSide1,
    Term::SenderSide2,
    Term::Coarse1,
    Term::Coarse2,
    Term::CoarsePair,
    Term::ReceiverBin1,
    Term::ReceiverBin2,
    Term::ReceiverBinPair,
    Term::ReceiverSide1,
    Term::ReceiverSide2,
];

/// Evaluation of one `lhs < rhs` constraint (or one branch of a `min`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConstraintCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs < self.rhs + RATE_MARGIN
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub feasible: bool,
    pub achieved_rate: f64,
    pub violations: Vec<ConstraintCheck>,
    /// Every branch evaluated, violated or not.
    pub checks: Vec<ConstraintCheck>,
    pub min_slack: f64,
}

/// Closed-form rate and compression constraints.
pub fn theorem1_verdict(dist: &FactoredNetworkDistribution) -> Result<RegionVerdict, RegionError> {
    Ok(verdict_from_terms(&evaluate_terms(dist, &VERDICT_TERMS)?))
}

pub fn verdict_from_terms(t: &InfoTermValues) -> RegionVerdict {
    use Term::*;
    let v = |x| t.v(x);
    let lhs1 = v(Cover1);
    let lhs2 = v(Cover2);
    let lhs12 = lhs1 + lhs2;
    let recv1 = v(ReceiverSide1);
    let recv2 = v(ReceiverSide2);

    let check = |id: &str, lhs: f64, rhs: f64| ConstraintCheck {
        id: id.to_string(),
        lhs,
        rhs,
    };
    let checks = vec![
        check("relay1.sender", lhs1, v(SenderBin1) + v(Coherence1) + v(SenderSide1)),
        check(
            "relay1.receiver",
            lhs1,
            v(Coarse1) + v(ReceiverBin1) + v(Coherence1) + recv1,
        ),
        check("relay2.sender", lhs2, v(SenderBin2) + v(Coherence2) + v(SenderSide2)),
        check(
            "relay2.receiver",
            lhs2,
            v(Coarse2) + v(ReceiverBin2) + v(Coherence2) + recv2,
        ),
        check(
            "both.sender",
            lhs12,
            v(SenderBinPair) + v(AuxPair) + v(SenderSide1) + v(SenderSide2),
        ),
        check(
            "both.receiver.separate-coarse",
            lhs12,
            v(Coarse1) + v(Coarse2) + v(ReceiverBinPair) + v(AuxPair) + recv1 + recv2,
        ),
        check(
            "both.receiver.joint-coarse",
            lhs12,
            v(CoarsePair) + v(ReceiverBinPair) + v(AuxPair) + recv1 + recv2,
        ),
        check(
            "both.receiver.separate-bins",
            lhs12,
            v(CoarsePair) + v(ReceiverBin1) + v(Coherence1) + v(ReceiverBin2) + v(Coherence2) + recv1 + recv2,
        ),
    ];
    let violations: Vec<ConstraintCheck> = checks.iter().filter(|c| !c.holds()).cloned().collect();
    let min_slack = checks.iter().map(ConstraintCheck::slack).fold(f64::INFINITY, f64::min);
    RegionVerdict {
        feasible: violations.is_empty(),
        achieved_rate: v(Message) + v(Cooperation),
        violations,
        checks,
        min_slack,
    }
}

/// Ids of the stepwise rows, in emission order.
pub mod rows {
    pub const SENDER_BIN_1: &str = "sender.bin.s1";
    pub const SENDER_BIN_2: &str = "sender.bin.s2";
    pub const SENDER_BIN_PAIR: &str = "sender.bin.pair";
    pub const SENDER_COMPRESS_1: &str = "sender.compress.z1";
    pub const SENDER_COMPRESS_2: &str = "sender.compress.z2";
    pub const RECEIVER_COARSE_1: &str = "receiver.coarse.w01";
    pub const RECEIVER_COARSE_2: &str = "receiver.coarse.w02";
    pub const RECEIVER_COARSE_PAIR: &str = "receiver.coarse.pair";
    pub const RECEIVER_BIN_1: &str = "receiver.bin.s1";
    pub const RECEIVER_BIN_2: &str = "receiver.bin.s2";
    pub const RECEIVER_BIN_PAIR: &str = "receiver.bin.pair";
    pub const RECEIVER_COMPRESS_1: &str = "receiver.compress.z1";
    pub const RECEIVER_COMPRESS_2: &str = "receiver.compress.z2";
    pub const RELAY_COVER_1: &str = "relay.cover.1";
    pub const RELAY_COVER_2: &str = "relay.cover.2";
    pub const MESSAGE: &str = "receiver.message";

    /// The fifteen per-step rows (the message row is listed separately).
    pub const STEPWISE: [&str; 15] = [
        SENDER_BIN_1,
        SENDER_BIN_2,
        SENDER_BIN_PAIR,
        SENDER_COMPRESS_1,
        SENDER_COMPRESS_2,
        RECEIVER_COARSE_1,
        RECEIVER_COARSE_2,
        RECEIVER_COARSE_PAIR,
        RECEIVER_BIN_1,
        RECEIVER_BIN_2,
        RECEIVER_BIN_PAIR,
        RECEIVER_COMPRESS_1,
        RECEIVER_COMPRESS_2,
        RELAY_COVER_1,
        RELAY_COVER_2,
    ];

    pub const SENDER_JOINT: [&str; 6] = [
        "sender.joint.z1@s1",
        "sender.joint.z2@s1",
        "sender.joint.pair@s1",
        "sender.joint.z1@s2",
        "sender.joint.z2@s2",
        "sender.joint.pair@s2",
    ];

    pub const RECEIVER_JOINT: [&str; 6] = [
        "receiver.joint.z1@s1",
        "receiver.joint.z2@s1",
        "receiver.joint.pair@s1",
        "receiver.joint.z1@s2",
        "receiver.joint.z2@s2",
        "receiver.joint.pair@s2",
    ];

    pub fn is_joint_decoding(id: &str) -> bool {
        id.starts_with("sender.joint.") || id.starts_with("receiver.joint.")
    }
}

/// Per-decoding-step constraints in all nine rate variables, plus the message
/// row and nonnegativity of every variable.
pub fn stepwise_system(dist: &FactoredNetworkDistribution) -> Result<InequalitySystem, RegionError> {
    Ok(stepwise_system_from_terms(&info_vector(dist)?))
}

pub fn stepwise_system_from_terms(t: &InfoTermValues) -> InequalitySystem {
    use RateVar::*;
    use Term::*;
    let v = |x| t.v(x);
    let up = |id, terms: &[(RateVar, i64)], c| LinearInequality::upper(id, terms, c, true);
    let mut s = InequalitySystem::new(RateVar::ALL.to_vec());

    s.push(up(rows::SENDER_BIN_1, &[(Rs1, 1)], v(SenderBin1) + v(Coherence1)));
    s.push(up(rows::SENDER_BIN_2, &[(Rs2, 1)], v(SenderBin2) + v(Coherence2)));
    s.push(up(
        rows::SENDER_BIN_PAIR,
        &[(Rs1, 1), (Rs2, 1)],
        v(SenderBinPair) + v(AuxPair),
    ));
    s.push(up(rows::SENDER_COMPRESS_1, &[(Rh1, 1), (Rs1, -1)], v(SenderSide1)));
    s.push(up(rows::SENDER_COMPRESS_2, &[(Rh2, 1), (Rs2, -1)], v(SenderSide2)));
    s.push(up(rows::RECEIVER_COARSE_1, &[(R011, 1), (R012, 1)], v(Coarse1)));
    s.push(up(rows::RECEIVER_COARSE_2, &[(R021, 1), (R022, 1)], v(Coarse2)));
    s.push(up(
        rows::RECEIVER_COARSE_PAIR,
        &[(R011, 1), (R012, 1), (R021, 1), (R022, 1)],
        v(CoarsePair),
    ));
    s.push(up(
        rows::RECEIVER_BIN_1,
        &[(Rs1, 1), (R011, -1)],
        v(ReceiverBin1) + v(Coherence1),
    ));
    s.push(up(
        rows::RECEIVER_BIN_2,
        &[(Rs2, 1), (R021, -1)],
        v(ReceiverBin2) + v(Coherence2),
    ));
    s.push(up(
        rows::RECEIVER_BIN_PAIR,
        &[(Rs1, 1), (Rs2, 1), (R011, -1), (R021, -1)],
        v(ReceiverBinPair) + v(AuxPair),
    ));
    s.push(up(
        rows::RECEIVER_COMPRESS_1,
        &[(Rh1, 1), (Rs1, -1), (R012, -1)],
        v(ReceiverSide1),
    ));
    s.push(up(
        rows::RECEIVER_COMPRESS_2,
        &[(Rh2, 1), (Rs2, -1), (R022, -1)],
        v(ReceiverSide2),
    ));
    s.push(LinearInequality::lower(
        rows::RELAY_COVER_1,
        &[(Rh1, 1)],
        v(Cover1),
        true,
    ));
    s.push(LinearInequality::lower(
        rows::RELAY_COVER_2,
        &[(Rh2, 1)],
        v(Cover2),
        true,
    ));
    s.push(up(rows::MESSAGE, &[(R, 1)], v(Message) + v(Cooperation)));
    s.add_nonnegativity();
    s
}

/// How to read the joint-decoding rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointReading {
    /// Offsets and conditioning sets exactly as written: the first triple of
    /// sender rows carries `+R_s1`, the second `+R_s2`; the receiver rows add
    /// `R_012` or `R_022` alongside. `Rh11` is read as `Rh1`, `V1,X` as `V1,X1`.
    #[default]
    Printed,
    /// Each single-relay row carries its own relay's offsets and the pair
    /// rows carry both; the relay-1 sender row also conditions on `Yh2`.
    Symmetric,
}

type JointRow = (&'static str, Vec<(RateVar, i64)>, f64);

/// Joint-decoding rows for the given reading, as
/// `(id, terms, info constant)`.
fn joint_rows(t: &InfoTermValues, reading: JointReading) -> Vec<JointRow> {
    use RateVar::*;
    use Term::*;
    let v = |x| t.v(x);
    let coop = v(Cooperation);
    let mut out = Vec::with_capacity(12);
    match reading {
        JointReading::Printed => {
            for (k, offset) in [(0usize, Rs1), (3, Rs2)] {
                let ids = &rows::SENDER_JOINT[k..k + 3];
                out.push((ids[0], vec![(Rh1, 1), (offset, -1)], v(SenderJoint1) + coop));
                out.push((ids[1], vec![(Rh2, 1), (offset, -1)], v(SenderJoint2) + coop));
                out.push((
                    ids[2],
                    vec![(Rh1, 1), (Rh2, 1), (offset, -1)],
                    v(SenderJointPair) + coop,
                ));
            }
            for (k, offset, sub) in [(0usize, Rs1, R012), (3, Rs2, R022)] {
                let ids = &rows::RECEIVER_JOINT[k..k + 3];
                out.push((
                    ids[0],
                    vec![(Rh1, 1), (offset, -1), (sub, -1)],
                    v(ReceiverJoint1) + coop,
                ));
                out.push((
                    ids[1],
                    vec![(Rh2, 1), (offset, -1), (sub, -1)],
                    v(ReceiverJoint2) + coop,
                ));
                out.push((
                    ids[2],
                    vec![(Rh1, 1), (Rh2, 1), (offset, -1), (sub, -1)],
                    v(ReceiverJointPair) + coop,
                ));
            }
        }
        JointReading::Symmetric => {
            for k in [0usize, 3] {
                let ids = &rows::SENDER_JOINT[k..k + 3];
                out.push((ids[0], vec![(Rh1, 1), (Rs1, -1)], v(SenderJoint1Symmetric) + coop));
                out.push((ids[1], vec![(Rh2, 1), (Rs2, -1)], v(SenderJoint2) + coop));
                out.push((
                    ids[2],
                    vec![(Rh1, 1), (Rh2, 1), (Rs1, -1), (Rs2, -1)],
                    v(SenderJointPair) + coop,
                ));
            }
            for k in [0usize, 3] {
                let ids = &rows::RECEIVER_JOINT[k..k + 3];
                out.push((ids[0], vec![(Rh1, 1), (Rs1, -1), (R012, -1)], v(ReceiverJoint1) + coop));
                out.push((ids[1], vec![(Rh2, 1), (Rs2, -1), (R022, -1)], v(ReceiverJoint2) + coop));
                out.push((
                    ids[2],
                    vec![(Rh1, 1), (Rh2, 1), (Rs1, -1), (Rs2, -1), (R012, -1), (R022, -1)],
                    v(ReceiverJointPair) + coop,
                ));
            }
        }
    }
    out
}

fn reading_notes(reading: JointReading) -> Vec<String> {
    match reading {
        JointReading::Printed => vec![
            "sender pair rows: 'Rh11' read as Rh1".into(),
            "receiver.joint.z1 rows: conditioning 'V1, X' read as V1,X1".into(),
            "sender.joint.*@s1 rows all carry +R_s1 and sender.joint.*@s2 rows +R_s2, as written".into(),
            "receiver.joint.*@s1 rows carry +R_s1+R_012 and receiver.joint.*@s2 rows +R_s2+R_022, as written".into(),
            "sender.joint.z2 rows condition on Yh1 while sender.joint.z1 rows omit Yh2, as written".into(),
        ],
        JointReading::Symmetric => vec![
            "symmetric reading: single-relay rows carry that relay's own offsets, pair rows carry both".into(),
            "symmetric reading: sender.joint.z1 rows also condition on Yh2".into(),
            "symmetric reading: the @s1 and @s2 triples coincide".into(),
        ],
    }
}

fn terms_for_reading(reading: JointReading) -> Vec<Term> {
    let mut terms = Term::PRINTED.to_vec();
    if reading == JointReading::Symmetric {
        terms.push(Term::SenderJoint1Symmetric);
    }
    terms
}

/// Evaluate every term used by the given reading of the joint-decoding rows.
pub fn info_vector_for(
    dist: &FactoredNetworkDistribution,
    reading: JointReading,
) -> Result<InfoTermValues, RegionError> {
    evaluate_terms(dist, &terms_for_reading(reading))
}

/// Joint-decoding compression rows plus the two relay covering rows.
pub fn joint_decoding_system(
    dist: &FactoredNetworkDistribution,
    reading: JointReading,
) -> Result<InequalitySystem, RegionError> {
    let t = evaluate_terms(dist, &terms_for_reading(reading))?;
    Ok(joint_decoding_system_from_terms(&t, reading))
}

pub fn joint_decoding_system_from_terms(t: &InfoTermValues, reading: JointReading) -> InequalitySystem {
    use RateVar::*;
    let mut s = InequalitySystem::new(vec![Rs1, Rs2, R012, R022, Rh1, Rh2]);
    s.notes = reading_notes(reading);
    for (id, terms, c) in joint_rows(t, reading) {
        s.push(LinearInequality::upper(id, &terms, c, true));
    }
    s.push(LinearInequality::lower(
        rows::RELAY_COVER_1,
        &[(Rh1, 1)],
        t.v(Term::Cover1),
        true,
    ));
    s.push(LinearInequality::lower(
        rows::RELAY_COVER_2,
        &[(Rh2, 1)],
        t.v(Term::Cover2),
        true,
    ));
    s.add_nonnegativity();
    s
}

/// Stepwise system with the four individual compression rows replaced by the
/// joint-decoding rows.
pub fn joint_mode_full_system(t: &InfoTermValues, reading: JointReading) -> InequalitySystem {
    let individual = [
        rows::SENDER_COMPRESS_1,
        rows::SENDER_COMPRESS_2,
        rows::RECEIVER_COMPRESS_1,
        rows::RECEIVER_COMPRESS_2,
    ];
    let mut s = stepwise_system_from_terms(t);
    s.rows
        .retain(|r| !individual.iter().any(|id| r.provenance.contains(*id)));
    s.notes = reading_notes(reading);
    for (id, terms, c) in joint_rows(t, reading) {
        s.push(LinearInequality::upper(id, &terms, c, true));
    }
    s
}

/// Right-hand-side gap between a joint-decoding row and the individual row it relaxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsGap {
    pub individual: String,
    pub joint: String,
    pub individual_rhs: f64,
    pub joint_rhs: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWitness {
    pub rh1: f64,
    pub rh2: f64,
    /// Provenance of each violated row of the projected joint-mode system.
    pub violated_joint_rows: Vec<String>,
}

/// Sampled comparison of the `(Rh1, Rh2)` feasible sets of the two modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridContainment {
    pub grid_size: usize,
    /// Both axes span `[0, grid_max]`, 1.25 times the largest single-axis
    /// upper bound of either mode (plus 0.01).
    pub grid_max: f64,
    pub individual_points: usize,
    pub joint_points: usize,
    /// Points feasible for individual decoding but not joint decoding.
    pub counterexamples: usize,
    pub contained: bool,
    pub witnesses: Vec<GridWitness>,
    /// Every counterexample is explained by a violated row that descends from
    /// a joint-decoding constraint.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub reading: JointReading,
    pub gaps: Vec<RhsGap>,
    pub min_gap: f64,
    pub grid: GridContainment,
}

pub const DEFAULT_GRID: usize = 32;
const MAX_WITNESSES: usize = 8;

/// Compare individual and joint decoding of the compression indices.
pub fn compare_modes(
    dist: &FactoredNetworkDistribution,
    reading: JointReading,
    grid: usize,
) -> Result<DominanceReport, RegionError> {
    let t = evaluate_terms(dist, &terms_for_reading(reading))?;
    Ok(compare_modes_from_terms(&t, reading, grid))
}

pub fn compare_modes_from_terms(t: &InfoTermValues, reading: JointReading, grid: usize) -> DominanceReport {
    let joint = joint_rows(t, reading);
    let constant_of = |id: &str| joint.iter().find(|(j, _, _)| *j == id).map(|r| r.2).unwrap();
    let pairs: [(&str, f64, [&str; 2]); 4] = [
        (
            rows::SENDER_COMPRESS_1,
            t.v(Term::SenderSide1),
            [rows::SENDER_JOINT[0], rows::SENDER_JOINT[3]],
        ),
        (
            rows::SENDER_COMPRESS_2,
            t.v(Term::SenderSide2),
            [rows::SENDER_JOINT[1], rows::SENDER_JOINT[4]],
        ),
        (
            rows::RECEIVER_COMPRESS_1,
            t.v(Term::ReceiverSide1),
            [rows::RECEIVER_JOINT[0], rows::RECEIVER_JOINT[3]],
        ),
        (
            rows::RECEIVER_COMPRESS_2,
            t.v(Term::ReceiverSide2),
            [rows::RECEIVER_JOINT[1], rows::RECEIVER_JOINT[4]],
        ),
    ];
    let mut gaps = Vec::new();
    for (ind, ind_rhs, joints) in pairs {
        for j in joints {
            let joint_rhs = constant_of(j);
            gaps.push(RhsGap {
                individual: ind.to_string(),
                joint: j.to_string(),
                individual_rhs: ind_rhs,
                joint_rhs,
                gap: joint_rhs - ind_rhs,
            });
        }
    }
    let min_gap = gaps.iter().map(|g| g.gap).fold(f64::INFINITY, f64::min);

    let keep = [RateVar::Rh1, RateVar::Rh2];
    let ind_proj = fme::project_onto(&stepwise_system_from_terms(t), &keep);
    let joint_proj = fme::project_onto(&joint_mode_full_system(t, reading), &keep);
    let grid = grid_containment(&ind_proj, &joint_proj, grid.max(2));
    DominanceReport {
        reading,
        gaps,
        min_gap,
        grid,
    }
}

/// Tightest upper bound on `v` alone, if any row bounds it.
fn axis_bound(sys: &InequalitySystem, v: RateVar) -> Option<f64> {
    fme::project_onto(sys, &[v])
        .rows
        .iter()
        .map(|r| r.to_le())
        .filter(|r| r.coeff(v).is_positive())
        .map(|r| fme::to_f64(&(&r.constant / r.coeff(v))))
        .reduce(f64::min)
}

fn grid_containment(ind: &InequalitySystem, joint: &InequalitySystem, n: usize) -> GridContainment {
    let extent = [ind, joint]
        .iter()
        .flat_map(|sys| [axis_bound(sys, RateVar::Rh1), axis_bound(sys, RateVar::Rh2)])
        .flatten()
        .fold(0.0, f64::max);
    let grid_max = 1.25 * extent + 0.01;
    let top = fme::rationalize(grid_max);
    let steps = BigRational::from_integer((n as i64 - 1).into());
    let mut point = vec![BigRational::from_integer(0.into()); RateVar::ALL.len()];

    let mut individual_points = 0;
    let mut joint_points = 0;
    let mut counterexamples = 0;
    let mut witnesses = Vec::new();
    let mut consistent = true;
    for i in 0..n {
        for j in 0..n {
            let x = &top * BigRational::from_integer((i as i64).into()) / &steps;
            let y = &top * BigRational::from_integer((j as i64).into()) / &steps;
            point[RateVar::Rh1.index()] = x.clone();
            point[RateVar::Rh2.index()] = y.clone();
            let ind_ok = ind.holds_at(&point);
            let joint_ok = joint.holds_at(&point);
            individual_points += ind_ok as usize;
            joint_points += joint_ok as usize;
            if ind_ok && !joint_ok {
                counterexamples += 1;
                let violated: Vec<_> = joint.rows.iter().filter(|r| !r.holds_at(&point)).collect();
                let explained = violated
                    .iter()
                    .any(|r| r.provenance.iter().any(|id| rows::is_joint_decoding(id)));
                consistent &= explained;
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(GridWitness {
                        rh1: fme::to_f64(&x),
                        rh2: fme::to_f64(&y),
                        violated_joint_rows: violated.iter().map(|r| r.provenance_label()).collect(),
                    });
                }
            }
        }
    }
    GridContainment {
        grid_size: n,
        grid_max,
        individual_points,
        joint_points,
        counterexamples,
        contained: counterexamples == 0,
        witnesses,
        consistent,
    }
}
