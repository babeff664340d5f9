//! Exact Fourier-Motzkin elimination over linear systems in the rate variables.
//!
//! Information-term constants arrive as `f64` and are rationalized at
//! denominator 10^12; from then on all arithmetic is exact. Strict rows are
//! flagged and a combined row is strict iff either parent is. A constant row
//! `0 <= c` is accepted when `c >= -10^-12` (strict) or `c >= 0` (non-strict).

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::pmf::FactoredNetworkDistribution;
use crate::region::{self, RegionError, RegionVerdict, RATE_MARGIN};

/// Denominator used to rationalize floating constants.
pub const RATIONAL_DENOMINATOR: i64 = 1_000_000_000_000;

/// Rate variables in bits per channel use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RateVar {
    R,
    Rs1,
    Rs2,
    R011,
    R012,
    R021,
    R022,
    Rh1,
    Rh2,
}

impl RateVar {
    pub const ALL: [RateVar; 9] = [
        RateVar::R,
        RateVar::Rs1,
        RateVar::Rs2,
        RateVar::R011,
        RateVar::R012,
        RateVar::R021,
        RateVar::R022,
        RateVar::Rh1,
        RateVar::Rh2,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RateVar::R => "R",
            RateVar::Rs1 => "R_s1",
            RateVar::Rs2 => "R_s2",
            RateVar::R011 => "R_011",
            RateVar::R012 => "R_012",
            RateVar::R021 => "R_021",
            RateVar::R022 => "R_022",
            RateVar::Rh1 => "Rh1",
            RateVar::Rh2 => "Rh2",
        }
    }
}

impl fmt::Display for RateVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Order in which [`project_max_rate`] eliminates variables.
pub const ELIMINATION_ORDER: [RateVar; 8] = [
    RateVar::Rh1,
    RateVar::Rh2,
    RateVar::Rs1,
    RateVar::Rs2,
    RateVar::R011,
    RateVar::R012,
    RateVar::R021,
    RateVar::R022,
];

pub fn rationalize(x: f64) -> BigRational {
    let scaled = (x * RATIONAL_DENOMINATOR as f64).round();
    BigRational::new(BigInt::from(scaled as i128), BigInt::from(RATIONAL_DENOMINATOR))
}

pub fn feasibility_margin() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(RATIONAL_DENOMINATOR))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
}

/// `sum coeffs[v] * v  (<=|>=)  constant`, optionally strict.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearInequality {
    pub coeffs: Vec<BigRational>,
    pub constant: BigRational,
    pub relation: Relation,
    pub strict: bool,
    /// Ids of the source rows this inequality was derived from.
    pub provenance: BTreeSet<String>,
}

impl LinearInequality {
    fn build(id: &str, terms: &[(RateVar, i64)], constant: BigRational, relation: Relation, strict: bool) -> Self {
        let mut coeffs = vec![BigRational::zero(); RateVar::ALL.len()];
        for &(v, c) in terms {
            coeffs[v.index()] += BigRational::from_integer(BigInt::from(c));
        }
        LinearInequality {
            coeffs,
            constant,
            relation,
            strict,
            provenance: BTreeSet::from([id.to_string()]),
        }
    }

    /// `sum terms < constant` (or `<=` when not strict).
    pub fn upper(id: &str, terms: &[(RateVar, i64)], constant: f64, strict: bool) -> Self {
        Self::build(id, terms, rationalize(constant), Relation::Le, strict)
    }

    /// `sum terms > constant` (or `>=` when not strict).
    pub fn lower(id: &str, terms: &[(RateVar, i64)], constant: f64, strict: bool) -> Self {
        Self::build(id, terms, rationalize(constant), Relation::Ge, strict)
    }

    /// `var >= 0`.
    pub fn nonnegative(var: RateVar) -> Self {
        Self::build(
            &format!("nonneg:{}", var.name()),
            &[(var, 1)],
            BigRational::zero(),
            Relation::Ge,
            false,
        )
    }

    pub fn coeff(&self, v: RateVar) -> &BigRational {
        &self.coeffs[v.index()]
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Same inequality written as `<=`.
    pub fn to_le(&self) -> LinearInequality {
        match self.relation {
            Relation::Le => self.clone(),
            Relation::Ge => LinearInequality {
                coeffs: self.coeffs.iter().map(|c| -c).collect(),
                constant: -&self.constant,
                relation: Relation::Le,
                strict: self.strict,
                provenance: self.provenance.clone(),
            },
        }
    }

    /// Left-hand side minus right-hand side, sign-adjusted so that a
    /// satisfied row has nonnegative slack.
    pub fn slack_at(&self, point: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(point).map(|(c, x)| to_f64(c) * x).sum();
        match self.relation {
            Relation::Le => to_f64(&self.constant) - lhs,
            Relation::Ge => lhs - to_f64(&self.constant),
        }
    }

    /// Exact check at a rational point, with the system's tolerance semantics.
    pub fn holds_at(&self, point: &[BigRational]) -> bool {
        let le = self.to_le();
        let lhs = le
            .coeffs
            .iter()
            .zip(point)
            .fold(BigRational::zero(), |acc, (c, x)| acc + c * x);
        let slack = &le.constant - lhs;
        if le.strict {
            slack >= -feasibility_margin()
        } else {
            !slack.is_negative()
        }
    }

    /// For a constant row: is it satisfied?
    fn constant_holds(&self) -> bool {
        debug_assert!(self.is_constant());
        let le = self.to_le();
        if le.strict {
            le.constant >= -feasibility_margin()
        } else {
            !le.constant.is_negative()
        }
    }

    pub fn provenance_label(&self) -> String {
        self.provenance.iter().cloned().collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for LinearInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for v in RateVar::ALL {
            let c = self.coeff(v);
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            let mag = c.abs();
            if wrote {
                write!(f, " {sign} ")?;
            } else if c.is_negative() {
                f.write_str("-")?;
            }
            if mag.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag}*{v}")?;
            }
            wrote = true;
        }
        if !wrote {
            f.write_str("0")?;
        }
        let op = match (self.relation, self.strict) {
            (Relation::Le, true) => "<",
            (Relation::Le, false) => "<=",
            (Relation::Ge, true) => ">",
            (Relation::Ge, false) => ">=",
        };
        write!(f, " {op} {:.12}  [{}]", to_f64(&self.constant), self.provenance_label())
    }
}

/// A list of inequalities over a subset of the rate variables.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalitySystem {
    pub vars: Vec<RateVar>,
    pub rows: Vec<LinearInequality>,
    /// Free-form notes about how the rows were read off their sources.
    pub notes: Vec<String>,
}

impl InequalitySystem {
    pub fn new(vars: Vec<RateVar>) -> Self {
        InequalitySystem {
            vars,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: LinearInequality) {
        debug_assert!(RateVar::ALL
            .into_iter()
            .all(|v| self.vars.contains(&v) || row.coeff(v).is_zero()));
        self.rows.push(row);
    }

    pub fn add_nonnegativity(&mut self) {
        for v in self.vars.clone() {
            self.push(LinearInequality::nonnegative(v));
        }
    }

    /// Rows whose provenance is exactly the given source id.
    pub fn rows_from<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a LinearInequality> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.provenance.len() == 1 && r.provenance.contains(id))
    }

    pub fn holds_at(&self, point: &[BigRational]) -> bool {
        self.rows.iter().all(|r| r.holds_at(point))
    }
}

fn normalize(mut row: LinearInequality) -> LinearInequality {
    // scale so the first nonzero coefficient has magnitude 1
    if let Some(lead) = row.coeffs.iter().find(|c| !c.is_zero()).map(|c| c.abs()) {
        if !lead.is_one() {
            for c in &mut row.coeffs {
                *c = &*c / &lead;
            }
            row.constant = &row.constant / &lead;
        }
    }
    row
}

/// Drop satisfied constant rows, exact duplicates, and rows dominated by a
/// row with identical coefficients and a tighter constant.
fn prune(rows: Vec<LinearInequality>) -> Vec<LinearInequality> {
    let mut kept: Vec<LinearInequality> = Vec::with_capacity(rows.len());
    let mut by_coeffs: HashMap<Vec<BigRational>, usize> = HashMap::new();
    for row in rows {
        if row.is_constant() && row.constant_holds() {
            continue;
        }
        match by_coeffs.get(&row.coeffs) {
            Some(&i) => {
                let cur = &kept[i];
                let tighter =
                    row.constant < cur.constant || (row.constant == cur.constant && row.strict && !cur.strict);
                if tighter {
                    kept[i] = row;
                }
            }
            None => {
                by_coeffs.insert(row.coeffs.clone(), kept.len());
                kept.push(row);
            }
        }
    }
    kept
}

/// Eliminate one variable: every (lower bound, upper bound) pair on `var` is
/// combined into a row free of `var`; rows without `var` pass through.
pub fn eliminate(system: &InequalitySystem, var: RateVar) -> InequalitySystem {
    let k = var.index();
    let mut pass = Vec::new();
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    for row in &system.rows {
        let le = row.to_le();
        if le.coeffs[k].is_positive() {
            uppers.push(le);
        } else if le.coeffs[k].is_negative() {
            lowers.push(le);
        } else {
            pass.push(normalize(le));
        }
    }
    let mut rows = pass;
    for up in &uppers {
        for lo in &lowers {
            let a = &up.coeffs[k];
            let b = -&lo.coeffs[k];
            let coeffs: Vec<BigRational> = up.coeffs.iter().zip(&lo.coeffs).map(|(u, l)| u * &b + l * a).collect();
            debug_assert!(coeffs[k].is_zero());
            let constant = &up.constant * &b + &lo.constant * a;
            let provenance = up.provenance.union(&lo.provenance).cloned().collect();
            rows.push(normalize(LinearInequality {
                coeffs,
                constant,
                relation: Relation::Le,
                strict: up.strict || lo.strict,
                provenance,
            }));
        }
    }
    InequalitySystem {
        vars: system.vars.iter().copied().filter(|&v| v != var).collect(),
        rows: prune(rows),
        notes: system.notes.clone(),
    }
}

/// Eliminate every variable not in `keep`, in [`ELIMINATION_ORDER`] (then `R`).
pub fn project_onto(system: &InequalitySystem, keep: &[RateVar]) -> InequalitySystem {
    let mut sys = InequalitySystem {
        vars: system.vars.clone(),
        rows: prune(system.rows.iter().map(|r| normalize(r.to_le())).collect()),
        notes: system.notes.clone(),
    };
    let order = ELIMINATION_ORDER.iter().copied().chain([RateVar::R]);
    for v in order {
        if sys.vars.contains(&v) && !keep.contains(&v) {
            sys = eliminate(&sys, v);
        }
    }
    sys
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaxRate {
    Finite(BigRational),
    Unbounded,
}

impl MaxRate {
    pub fn to_f64(&self) -> f64 {
        match self {
            MaxRate::Finite(r) => to_f64(r),
            MaxRate::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub feasible: bool,
    /// Largest `R` allowed by the surviving upper bounds (meaningful when feasible).
    pub max_rate: MaxRate,
    /// System left after eliminating everything but `R`.
    pub projected: InequalitySystem,
    /// Violated constant rows, and the lower/upper pair on `R` when those clash.
    pub contradictions: Vec<LinearInequality>,
}

/// Project onto `R` and report feasibility and the maximal rate.
///
/// Returns `None` when `R` is not a variable of the system.
pub fn project_max_rate(system: &InequalitySystem) -> Option<Projection> {
    if !system.vars.contains(&RateVar::R) {
        return None;
    }
    let projected = project_onto(system, &[RateVar::R]);
    let r = RateVar::R.index();
    let mut contradictions: Vec<LinearInequality> = Vec::new();
    let mut upper: Option<(BigRational, &LinearInequality)> = None;
    let mut lower: Option<(BigRational, &LinearInequality)> = None;
    for row in &projected.rows {
        let le = row.to_le();
        let a = &le.coeffs[r];
        if a.is_zero() {
            if !le.constant_holds() {
                contradictions.push(row.clone());
            }
        } else if a.is_positive() {
            let bound = &le.constant / a;
            if upper.as_ref().is_none_or(|(u, _)| bound < *u) {
                upper = Some((bound, row));
            }
        } else {
            let bound = &le.constant / a;
            if lower.as_ref().is_none_or(|(l, _)| bound > *l) {
                lower = Some((bound, row));
            }
        }
    }
    if let (Some((u, urow)), Some((l, lrow))) = (&upper, &lower) {
        if l - u > feasibility_margin() {
            contradictions.push((*lrow).clone());
            contradictions.push((*urow).clone());
        }
    }
    let max_rate = match upper {
        Some((u, _)) => MaxRate::Finite(u),
        None => MaxRate::Unbounded,
    };
    Some(Projection {
        feasible: contradictions.is_empty(),
        max_rate,
        projected,
        contradictions,
    })
}

/// Outcome of projecting the stepwise system and comparing with the closed-form verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub theorem_feasible: bool,
    pub theorem_rate: f64,
    /// Smallest `rhs - lhs` across the closed-form constraints.
    pub theorem_min_slack: f64,
    pub fme_feasible: bool,
    pub fme_max_rate: f64,
    pub feasibility_agrees: bool,
    pub rate_agrees: bool,
    /// A disagreement whose binding constraint sits within the 1e-9 margin.
    pub boundary_case: bool,
    /// Provenance and text of each contradictory row found by elimination.
    pub contradictions: Vec<String>,
}

impl ComparisonRecord {
    pub fn agreement(&self) -> bool {
        self.feasibility_agrees && self.rate_agrees
    }
}

/// Rate agreement tolerance between the two routes.
pub const RATE_AGREEMENT_TOL: f64 = 1e-9;

pub fn compare(verdict: &RegionVerdict, projection: &Projection) -> ComparisonRecord {
    let fme_rate = projection.max_rate.to_f64();
    let feasibility_agrees = verdict.feasible == projection.feasible;
    let rate_agrees =
        !(verdict.feasible && projection.feasible) || (verdict.achieved_rate - fme_rate).abs() <= RATE_AGREEMENT_TOL;
    let boundary_case = !feasibility_agrees && verdict.min_slack.abs() <= RATE_MARGIN;
    ComparisonRecord {
        theorem_feasible: verdict.feasible,
        theorem_rate: verdict.achieved_rate,
        theorem_min_slack: verdict.min_slack,
        fme_feasible: projection.feasible,
        fme_max_rate: fme_rate,
        feasibility_agrees,
        rate_agrees,
        boundary_case,
        contradictions: projection.contradictions.iter().map(|r| r.to_string()).collect(),
    }
}

/// Run the stepwise system through elimination and compare with the
/// closed-form constraints on the same distribution.
pub fn check_against_theorem1(dist: &FactoredNetworkDistribution) -> Result<ComparisonRecord, RegionError> {
    let terms = region::info_vector(dist)?;
    let verdict = region::verdict_from_terms(&terms);
    let system = region::stepwise_system_from_terms(&terms);
    let projection = project_max_rate(&system).expect("stepwise system contains R");
    Ok(compare(&verdict, &projection))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn sys(vars: &[RateVar], rows: Vec<LinearInequality>) -> InequalitySystem {
        InequalitySystem {
            vars: vars.to_vec(),
            rows,
            notes: vec![],
        }
    }

    // x := R011, y := R012 for the textbook examples
    const X: RateVar = RateVar::R011;
    const Y: RateVar = RateVar::R012;

    #[test]
    fn textbook_chain() {
        // {y <= a, x <= y + b} -> {x <= a + b}
        let s = sys(
            &[X, Y],
            vec![
                LinearInequality::upper("a", &[(Y, 1)], 2.0, false),
                LinearInequality::upper("b", &[(X, 1), (Y, -1)], 3.0, false),
            ],
        );
        let out = eliminate(&s, Y);
        assert_eq!(out.vars, vec![X]);
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert_eq!(row.coeff(X), &q(1, 1));
        assert_eq!(row.constant, q(5, 1));
        assert_eq!(row.provenance_label(), "a+b");
    }

    #[test]
    fn one_sided_bounds_vanish() {
        let s = sys(
            &[Y],
            vec![
                LinearInequality::nonnegative(Y),
                LinearInequality::lower("c", &[(Y, 1)], 0.7, true),
            ],
        );
        assert!(eliminate(&s, Y).rows.is_empty());
    }

    #[test]
    fn hand_checkable_projection() {
        // {x + y <= 3, y >= 1, x >= 0} -> {x <= 2, x >= 0}
        let s = sys(
            &[X, Y],
            vec![
                LinearInequality::upper("s", &[(X, 1), (Y, 1)], 3.0, false),
                LinearInequality::lower("y", &[(Y, 1)], 1.0, false),
                LinearInequality::nonnegative(X),
            ],
        );
        let out = eliminate(&s, Y);
        assert_eq!(out.rows.len(), 2);
        let up = out.rows.iter().find(|r| r.coeff(X) == &q(1, 1)).unwrap();
        assert_eq!(up.constant, q(2, 1));
        let lo = out.rows.iter().find(|r| r.coeff(X) == &q(-1, 1)).unwrap();
        assert_eq!(lo.constant, q(0, 1));
    }

    #[test]
    fn constructed_contradiction_is_infeasible() {
        let s = sys(
            &[RateVar::R, RateVar::Rh1, RateVar::Rs1],
            vec![
                LinearInequality::lower("18", &[(RateVar::Rh1, 1)], 5.0, true),
                LinearInequality::upper("8", &[(RateVar::Rh1, 1), (RateVar::Rs1, -1)], 0.5, true),
                LinearInequality::upper("5", &[(RateVar::Rs1, 1)], 1.5, true),
                LinearInequality::upper("rate", &[(RateVar::R, 1)], 1.0, true),
            ],
        );
        let p = project_max_rate(&s).unwrap();
        assert!(!p.feasible);
        assert!(p.contradictions[0].provenance.contains("18"));
        assert!(p.contradictions[0].provenance.contains("8"));
    }

    #[test]
    fn max_rate_and_unbounded() {
        let s = sys(
            &[RateVar::R],
            vec![
                LinearInequality::upper("rate", &[(RateVar::R, 1)], 0.75, true),
                LinearInequality::nonnegative(RateVar::R),
            ],
        );
        let p = project_max_rate(&s).unwrap();
        assert!(p.feasible);
        assert_eq!(p.max_rate, MaxRate::Finite(q(3, 4)));

        let s = sys(&[RateVar::R], vec![LinearInequality::nonnegative(RateVar::R)]);
        assert_eq!(project_max_rate(&s).unwrap().max_rate, MaxRate::Unbounded);
        assert!(project_max_rate(&sys(&[X], vec![])).is_none());
    }

    #[test]
    fn strict_zero_boundary_is_accepted_within_margin() {
        // y < 0 and y >= 0 combine to 0 < 0, accepted under the margin
        let s = sys(
            &[Y],
            vec![
                LinearInequality::upper("u", &[(Y, 1)], 0.0, true),
                LinearInequality::nonnegative(Y),
            ],
        );
        assert!(eliminate(&s, Y).rows.is_empty());
        let s = sys(
            &[Y],
            vec![
                LinearInequality::upper("u", &[(Y, 1)], -1e-9, true),
                LinearInequality::nonnegative(Y),
            ],
        );
        assert_eq!(eliminate(&s, Y).rows.len(), 1);
    }

    #[test]
    fn duplicates_keep_the_tighter_constant() {
        let s = sys(
            &[X, Y],
            vec![
                LinearInequality::upper("a", &[(X, 2)], 4.0, false),
                LinearInequality::upper("b", &[(X, 1)], 1.5, false),
                LinearInequality::upper("c", &[(Y, 1)], 1.0, false),
            ],
        );
        let out = eliminate(&s, Y);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].constant, q(3, 2));
    }

    #[test]
    fn rationalization_resolution() {
        assert_eq!(rationalize(0.5), q(1, 2));
        let r = rationalize(1.0 / 3.0);
        assert!((to_f64(&r) - 1.0 / 3.0).abs() < 1e-12);
    }
}
