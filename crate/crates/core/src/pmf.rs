//! Finite alphabets, conditional probability tables and the network joint pmf.
//!
//! The joint distribution over the ten network variables is assembled from the
//! product form
//!
//! ```text
//! p(v1) p(v2) p(x1|v1) p(x2|v2) p(x0|v1,v2) p(y0,y1,y2|x0,x1,x2) p(yh1|y1,x1,v1) p(yh2|y2,x2,v2)
//! ```
//!
//! and stored densely, row-major in the fixed label order
//! `(v1, v2, x0, x1, x2, y1, y2, yh1, yh2, y0)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-sum tolerance applied to every input table.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// One of the ten random variables of the network, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    V1,
    V2,
    X0,
    X1,
    X2,
    Y1,
    Y2,
    Yh1,
    Yh2,
    Y0,
}

impl Var {
    pub const ALL: [Var; 10] = [
        Var::V1,
        Var::V2,
        Var::X0,
        Var::X1,
        Var::X2,
        Var::Y1,
        Var::Y2,
        Var::Yh1,
        Var::Yh2,
        Var::Y0,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Lower-case label used in spec files.
    pub fn label(self) -> &'static str {
        match self {
            Var::V1 => "v1",
            Var::V2 => "v2",
            Var::X0 => "x0",
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::Y1 => "y1",
            Var::Y2 => "y2",
            Var::Yh1 => "yh1",
            Var::Yh2 => "yh2",
            Var::Y0 => "y0",
        }
    }

    pub fn from_label(label: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.label() == label)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Var::V1 => "V1",
            Var::V2 => "V2",
            Var::X0 => "X0",
            Var::X1 => "X1",
            Var::X2 => "X2",
            Var::Y1 => "Y1",
            Var::Y2 => "Y2",
            Var::Yh1 => "Yh1",
            Var::Yh2 => "Yh2",
            Var::Y0 => "Y0",
        };
        f.write_str(s)
    }
}

/// A set of variables, iterated in canonical order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(u16);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn of(vars: &[Var]) -> VarSet {
        vars.iter().fold(VarSet::EMPTY, |s, &v| s.with(v))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn with(self, v: Var) -> VarSet {
        VarSet(self.0 | (1 << v.index()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & (1 << v.index()) != 0
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VarSet) -> VarSet {
        VarSet(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        Var::ALL.into_iter().filter(move |v| self.contains(*v))
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromIterator<Var> for VarSet {
    fn from_iter<I: IntoIterator<Item = Var>>(iter: I) -> Self {
        iter.into_iter().fold(VarSet::EMPTY, |s, v| s.with(v))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("alphabet for {0} must have at least one symbol")]
    EmptyAlphabet(Var),
    #[error("table {table}: expected {expected} entries, found {found}")]
    Shape {
        table: String,
        expected: usize,
        found: usize,
    },
    #[error("distribution failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("variable {0} is not part of this table")]
    UnknownVar(Var),
    #[error("variable {0} listed more than once")]
    DuplicateVar(Var),
    #[error("selection of variables is empty")]
    EmptySelection,
    #[error("joint table mass {0} differs from 1")]
    NotNormalized(f64),
    #[error("joint table has a negative or non-finite entry {0}")]
    BadEntry(f64),
}

/// Alphabet sizes for the ten network variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    sizes: [usize; 10],
}

impl Alphabets {
    pub fn new(sizes: [usize; 10]) -> Result<Self, PmfError> {
        if let Some(v) = Var::ALL.into_iter().find(|v| sizes[v.index()] == 0) {
            return Err(PmfError::EmptyAlphabet(v));
        }
        Ok(Alphabets { sizes })
    }

    /// Every alphabet of size one.
    pub fn singleton() -> Self {
        Alphabets { sizes: [1; 10] }
    }

    /// Every alphabet binary.
    pub fn binary() -> Self {
        Alphabets { sizes: [2; 10] }
    }

    pub fn with(mut self, var: Var, size: usize) -> Result<Self, PmfError> {
        if size == 0 {
            return Err(PmfError::EmptyAlphabet(var));
        }
        self.sizes[var.index()] = size;
        Ok(self)
    }

    #[inline]
    pub fn size(&self, var: Var) -> usize {
        self.sizes[var.index()]
    }

    pub fn sizes(&self) -> [usize; 10] {
        self.sizes
    }

    /// Number of cells in the full joint table.
    pub fn joint_len(&self) -> usize {
        self.sizes.iter().product()
    }
}

/// A conditional pmf `p(output | given)` stored as one row per conditioning tuple.
///
/// Both the conditioning tuple and the output tuple are indexed row-major, so
/// the entry for `(g, o)` lives at `g * row_len + o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    name: String,
    given: Vec<(Var, usize)>,
    output: Vec<(Var, usize)>,
    probs: Vec<f64>,
}

impl ConditionalTable {
    pub fn new(
        name: impl Into<String>,
        given: Vec<(Var, usize)>,
        output: Vec<(Var, usize)>,
        probs: Vec<f64>,
    ) -> Result<Self, PmfError> {
        let name = name.into();
        let expected: usize = given.iter().chain(output.iter()).map(|(_, s)| *s).product();
        if probs.len() != expected {
            return Err(PmfError::Shape {
                table: name,
                expected,
                found: probs.len(),
            });
        }
        Ok(ConditionalTable {
            name,
            given,
            output,
            probs,
        })
    }

    /// Uniform rows.
    pub fn uniform(name: impl Into<String>, given: Vec<(Var, usize)>, output: Vec<(Var, usize)>) -> Self {
        let rows: usize = given.iter().map(|(_, s)| *s).product();
        let len: usize = output.iter().map(|(_, s)| *s).product();
        let probs = vec![1.0 / len as f64; rows * len];
        ConditionalTable {
            name: name.into(),
            given,
            output,
            probs,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn given(&self) -> &[(Var, usize)] {
        &self.given
    }

    pub fn output(&self) -> &[(Var, usize)] {
        &self.output
    }

    pub fn row_count(&self) -> usize {
        self.given.iter().map(|(_, s)| *s).product()
    }

    pub fn row_len(&self) -> usize {
        self.output.iter().map(|(_, s)| *s).product()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let len = self.row_len();
        &self.probs[r * len..(r + 1) * len]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let len = self.row_len();
        &mut self.probs[r * len..(r + 1) * len]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    #[inline]
    pub fn get(&self, row: usize, out: usize) -> f64 {
        self.probs[row * self.row_len() + out]
    }

    /// Decompose a flat row index into the conditioning symbols.
    pub fn row_digits(&self, mut r: usize) -> Vec<usize> {
        let mut digits = vec![0; self.given.len()];
        for (d, (_, s)) in self.given.iter().enumerate().rev() {
            digits[d] = r % s;
            r /= s;
        }
        digits
    }

    fn issues(&self, alphabets: &Alphabets, out: &mut Vec<Issue>) {
        for (var, size) in self.given.iter().chain(self.output.iter()) {
            if alphabets.size(*var) != *size {
                out.push(Issue::Shape {
                    table: self.name.clone(),
                    var: *var,
                    expected: alphabets.size(*var),
                    found: *size,
                });
            }
        }
        let len = self.row_len();
        for r in 0..self.row_count() {
            let row = &self.probs[r * len..(r + 1) * len];
            for (o, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    out.push(Issue::Negative {
                        table: self.name.clone(),
                        row: self.row_digits(r),
                        column: o,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.is_nan() || (sum - 1.0).abs() > NORMALIZATION_TOL {
                out.push(Issue::RowSum {
                    table: self.name.clone(),
                    row: self.row_digits(r),
                    sum,
                });
            }
        }
    }
}

/// The network channel `p(y0, y1, y2 | x0, x1, x2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel(ConditionalTable);

impl Channel {
    /// `probs` is laid out as `p[x0][x1][x2][y0][y1][y2]`.
    pub fn new(alphabets: &Alphabets, probs: Vec<f64>) -> Result<Self, PmfError> {
        let a = alphabets;
        ConditionalTable::new(
            "channel",
            vec![
                (Var::X0, a.size(Var::X0)),
                (Var::X1, a.size(Var::X1)),
                (Var::X2, a.size(Var::X2)),
            ],
            vec![
                (Var::Y0, a.size(Var::Y0)),
                (Var::Y1, a.size(Var::Y1)),
                (Var::Y2, a.size(Var::Y2)),
            ],
            probs,
        )
        .map(Channel)
    }

    /// Build from a closure `f(x0, x1, x2, y0, y1, y2)`.
    pub fn from_fn(alphabets: &Alphabets, f: impl Fn(usize, usize, usize, usize, usize, usize) -> f64) -> Self {
        let a = alphabets;
        let (nx0, nx1, nx2) = (a.size(Var::X0), a.size(Var::X1), a.size(Var::X2));
        let (ny0, ny1, ny2) = (a.size(Var::Y0), a.size(Var::Y1), a.size(Var::Y2));
        let mut probs = Vec::with_capacity(nx0 * nx1 * nx2 * ny0 * ny1 * ny2);
        for x0 in 0..nx0 {
            for x1 in 0..nx1 {
                for x2 in 0..nx2 {
                    for y0 in 0..ny0 {
                        for y1 in 0..ny1 {
                            for y2 in 0..ny2 {
                                probs.push(f(x0, x1, x2, y0, y1, y2));
                            }
                        }
                    }
                }
            }
        }
        Channel::new(alphabets, probs).expect("closure table has the alphabet shape")
    }

    pub fn table(&self) -> &ConditionalTable {
        &self.0
    }

    pub fn table_mut(&mut self) -> &mut ConditionalTable {
        &mut self.0
    }

    #[inline]
    pub fn prob(&self, x: (usize, usize, usize), y: (usize, usize, usize)) -> f64 {
        let t = &self.0;
        let nx1 = t.given[1].1;
        let nx2 = t.given[2].1;
        let ny1 = t.output[1].1;
        let ny2 = t.output[2].1;
        let row = (x.0 * nx1 + x.1) * nx2 + x.2;
        let col = (y.0 * ny1 + y.1) * ny2 + y.2;
        t.get(row, col)
    }
}

/// The seven factors the input distribution is free to choose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FreeFactor {
    PV1,
    PV2,
    PX1,
    PX2,
    PX0,
    Q1,
    Q2,
}

impl FreeFactor {
    pub const ALL: [FreeFactor; 7] = [
        FreeFactor::PV1,
        FreeFactor::PV2,
        FreeFactor::PX1,
        FreeFactor::PX2,
        FreeFactor::PX0,
        FreeFactor::Q1,
        FreeFactor::Q2,
    ];

    /// Key used for this factor in spec files.
    pub fn key(self) -> &'static str {
        match self {
            FreeFactor::PV1 => "p_v1",
            FreeFactor::PV2 => "p_v2",
            FreeFactor::PX1 => "p_x1_given_v1",
            FreeFactor::PX2 => "p_x2_given_v2",
            FreeFactor::PX0 => "p_x0_given_v1_v2",
            FreeFactor::Q1 => "q1_yh1_given_y1_x1_v1",
            FreeFactor::Q2 => "q2_yh2_given_y2_x2_v2",
        }
    }

    /// Conditioning variables (outer indices) followed by the output variable.
    pub fn layout(self) -> (&'static [Var], Var) {
        match self {
            FreeFactor::PV1 => (&[], Var::V1),
            FreeFactor::PV2 => (&[], Var::V2),
            FreeFactor::PX1 => (&[Var::V1], Var::X1),
            FreeFactor::PX2 => (&[Var::V2], Var::X2),
            FreeFactor::PX0 => (&[Var::V1, Var::V2], Var::X0),
            FreeFactor::Q1 => (&[Var::Y1, Var::X1, Var::V1], Var::Yh1),
            FreeFactor::Q2 => (&[Var::Y2, Var::X2, Var::V2], Var::Yh2),
        }
    }

    fn display_name(self) -> &'static str {
        match self {
            FreeFactor::PV1 => "p(v1)",
            FreeFactor::PV2 => "p(v2)",
            FreeFactor::PX1 => "p(x1|v1)",
            FreeFactor::PX2 => "p(x2|v2)",
            FreeFactor::PX0 => "p(x0|v1,v2)",
            FreeFactor::Q1 => "p(yh1|y1,x1,v1)",
            FreeFactor::Q2 => "p(yh2|y2,x2,v2)",
        }
    }

    /// Table for this factor with the given flat probabilities.
    pub fn table(self, alphabets: &Alphabets, probs: Vec<f64>) -> Result<ConditionalTable, PmfError> {
        let (given, out) = self.layout();
        ConditionalTable::new(
            self.display_name(),
            given.iter().map(|&v| (v, alphabets.size(v))).collect(),
            vec![(out, alphabets.size(out))],
            probs,
        )
    }

    pub fn uniform(self, alphabets: &Alphabets) -> ConditionalTable {
        let (given, out) = self.layout();
        ConditionalTable::uniform(
            self.display_name(),
            given.iter().map(|&v| (v, alphabets.size(v))).collect(),
            vec![(out, alphabets.size(out))],
        )
    }

    /// Every row a point mass on symbol 0.
    pub fn point_mass(self, alphabets: &Alphabets) -> ConditionalTable {
        let mut t = self.uniform(alphabets);
        for r in 0..t.row_count() {
            let row = t.row_mut(r);
            row.fill(0.0);
            row[0] = 1.0;
        }
        t
    }
}

/// One problem found by [`FactoredNetworkDistribution::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Issue {
    Shape {
        table: String,
        var: Var,
        expected: usize,
        found: usize,
    },
    RowSum {
        table: String,
        row: Vec<usize>,
        sum: f64,
    },
    Negative {
        table: String,
        row: Vec<usize>,
        column: usize,
        value: f64,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Shape {
                table,
                var,
                expected,
                found,
            } => write!(f, "{table}: {var} has size {found}, alphabet says {expected}"),
            Issue::RowSum { table, row, sum } => write!(f, "{table}: row {row:?} sums to {sum}"),
            Issue::Negative {
                table,
                row,
                column,
                value,
            } => write!(f, "{table}: entry {row:?}[{column}] = {value} is negative"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// The input distribution together with the channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredNetworkDistribution {
    pub alphabets: Alphabets,
    pub p_v1: ConditionalTable,
    pub p_v2: ConditionalTable,
    pub p_x1: ConditionalTable,
    pub p_x2: ConditionalTable,
    pub p_x0: ConditionalTable,
    pub channel: Channel,
    pub q1: ConditionalTable,
    pub q2: ConditionalTable,
}

impl FactoredNetworkDistribution {
    /// Uniform free factors around the given channel.
    pub fn uniform(alphabets: Alphabets, channel: Channel) -> Self {
        Self::from_fn(alphabets, channel, |f, a| f.uniform(a))
    }

    pub fn from_fn(
        alphabets: Alphabets,
        channel: Channel,
        mut make: impl FnMut(FreeFactor, &Alphabets) -> ConditionalTable,
    ) -> Self {
        FactoredNetworkDistribution {
            p_v1: make(FreeFactor::PV1, &alphabets),
            p_v2: make(FreeFactor::PV2, &alphabets),
            p_x1: make(FreeFactor::PX1, &alphabets),
            p_x2: make(FreeFactor::PX2, &alphabets),
            p_x0: make(FreeFactor::PX0, &alphabets),
            q1: make(FreeFactor::Q1, &alphabets),
            q2: make(FreeFactor::Q2, &alphabets),
            channel,
            alphabets,
        }
    }

    pub fn factor(&self, f: FreeFactor) -> &ConditionalTable {
        match f {
            FreeFactor::PV1 => &self.p_v1,
            FreeFactor::PV2 => &self.p_v2,
            FreeFactor::PX1 => &self.p_x1,
            FreeFactor::PX2 => &self.p_x2,
            FreeFactor::PX0 => &self.p_x0,
            FreeFactor::Q1 => &self.q1,
            FreeFactor::Q2 => &self.q2,
        }
    }

    pub fn factor_mut(&mut self, f: FreeFactor) -> &mut ConditionalTable {
        match f {
            FreeFactor::PV1 => &mut self.p_v1,
            FreeFactor::PV2 => &mut self.p_v2,
            FreeFactor::PX1 => &mut self.p_x1,
            FreeFactor::PX2 => &mut self.p_x2,
            FreeFactor::PX0 => &mut self.p_x0,
            FreeFactor::Q1 => &mut self.q1,
            FreeFactor::Q2 => &mut self.q2,
        }
    }

    /// Every shape, row-sum and negativity problem across the eight tables.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for f in FreeFactor::ALL {
            let table = self.factor(f);
            let (given, out) = f.layout();
            let layout_ok = table.given.len() == given.len()
                && table.given.iter().zip(given).all(|((v, _), g)| v == g)
                && table.output.len() == 1
                && table.output[0].0 == out;
            if !layout_ok {
                issues.push(Issue::Shape {
                    table: table.name.clone(),
                    var: out,
                    expected: self.alphabets.size(out),
                    found: table.row_len(),
                });
                continue;
            }
            table.issues(&self.alphabets, &mut issues);
        }
        self.channel.0.issues(&self.alphabets, &mut issues);
        ValidationReport { issues }
    }

    pub fn check(&self) -> Result<(), PmfError> {
        let report = self.validate();
        if report.is_clean() {
            Ok(())
        } else {
            Err(PmfError::Invalid(report))
        }
    }
}

/// Dense joint pmf over a labelled tuple of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    vars: Vec<Var>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(vars: Vec<(Var, usize)>, probs: Vec<f64>) -> Result<Self, PmfError> {
        let mut seen = VarSet::EMPTY;
        for (v, s) in &vars {
            if seen.contains(*v) {
                return Err(PmfError::DuplicateVar(*v));
            }
            if *s == 0 {
                return Err(PmfError::EmptyAlphabet(*v));
            }
            seen = seen.with(*v);
        }
        let expected: usize = vars.iter().map(|(_, s)| *s).product();
        if probs.len() != expected {
            return Err(PmfError::Shape {
                table: "joint".into(),
                expected,
                found: probs.len(),
            });
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(PmfError::BadEntry(bad));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(PmfError::NotNormalized(mass));
        }
        Ok(JointPmf {
            vars: vars.iter().map(|(v, _)| *v).collect(),
            sizes: vars.iter().map(|(_, s)| *s).collect(),
            probs,
        })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn var_set(&self) -> VarSet {
        VarSet::of(&self.vars)
    }

    pub fn size_of(&self, v: Var) -> Option<usize> {
        self.vars.iter().position(|&w| w == v).map(|i| self.sizes[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability of a full index tuple, in this table's variable order.
    pub fn prob(&self, index: &[usize]) -> f64 {
        let flat = index.iter().zip(&self.sizes).fold(0usize, |acc, (&i, &s)| acc * s + i);
        self.probs[flat]
    }

    /// Sum out every variable not in `keep`. The result keeps this table's
    /// variable order.
    pub fn marginalize(&self, keep: VarSet) -> Result<JointPmf, PmfError> {
        if keep.is_empty() {
            return Err(PmfError::EmptySelection);
        }
        if let Some(v) = keep.iter().find(|v| !self.vars.contains(v)) {
            return Err(PmfError::UnknownVar(v));
        }
        if keep == self.var_set() {
            return Ok(self.clone());
        }
        let nd = self.vars.len();
        // stride of each dimension inside the output table; 0 when summed out
        let mut out_strides = vec![0usize; nd];
        let mut stride = 1usize;
        for d in (0..nd).rev() {
            if keep.contains(self.vars[d]) {
                out_strides[d] = stride;
                stride *= self.sizes[d];
            }
        }
        let mut out = vec![0.0; stride];
        let mut digits = vec![0usize; nd];
        let mut o = 0usize;
        for &p in &self.probs {
            out[o] += p;
            let mut d = nd;
            while d > 0 {
                d -= 1;
                digits[d] += 1;
                o += out_strides[d];
                if digits[d] < self.sizes[d] {
                    break;
                }
                o -= out_strides[d] * self.sizes[d];
                digits[d] = 0;
            }
        }
        let (vars, sizes) = self
            .vars
            .iter()
            .zip(&self.sizes)
            .filter(|(v, _)| keep.contains(**v))
            .map(|(v, s)| (*v, *s))
            .unzip();
        Ok(JointPmf {
            vars,
            sizes,
            probs: out,
        })
    }

    /// Same as [`JointPmf::marginalize`] with an explicit label list.
    pub fn marginalize_vars(&self, keep: &[Var]) -> Result<JointPmf, PmfError> {
        self.marginalize(VarSet::of(keep))
    }
}

/// Assemble the ten-variable joint from the product form.
pub fn build_joint(dist: &FactoredNetworkDistribution) -> Result<JointPmf, PmfError> {
    let report = dist.validate();
    if !report.is_clean() {
        let shape = report.issues.iter().find_map(|i| match i {
            Issue::Shape {
                table, expected, found, ..
            } => Some(PmfError::Shape {
                table: table.clone(),
                expected: *expected,
                found: *found,
            }),
            _ => None,
        });
        return Err(shape.unwrap_or(PmfError::Invalid(report)));
    }

    let a = &dist.alphabets;
    let [nv1, nv2, nx0, nx1, nx2, ny1, ny2, nh1, nh2, ny0] = a.sizes();
    let mut probs = vec![0.0; a.joint_len()];
    let mut idx = 0usize;
    // Loop nest follows the canonical label order so `idx` walks the table.
    for v1 in 0..nv1 {
        let p1 = dist.p_v1.get(0, v1);
        for v2 in 0..nv2 {
            let p2 = p1 * dist.p_v2.get(0, v2);
            for x0 in 0..nx0 {
                let p3 = p2 * dist.p_x0.get(v1 * nv2 + v2, x0);
                for x1 in 0..nx1 {
                    let p4 = p3 * dist.p_x1.get(v1, x1);
                    for x2 in 0..nx2 {
                        let p5 = p4 * dist.p_x2.get(v2, x2);
                        for y1 in 0..ny1 {
                            for y2 in 0..ny2 {
                                for h1 in 0..nh1 {
                                    let q1 = dist.q1.get((y1 * nx1 + x1) * nv1 + v1, h1);
                                    for h2 in 0..nh2 {
                                        let q2 = dist.q2.get((y2 * nx2 + x2) * nv2 + v2, h2);
                                        let base = p5 * q1 * q2;
                                        for y0 in 0..ny0 {
                                            if base != 0.0 {
                                                probs[idx] = base * dist.channel.prob((x0, x1, x2), (y0, y1, y2));
                                            }
                                            idx += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(JointPmf {
        vars: Var::ALL.to_vec(),
        sizes: a.sizes().to_vec(),
        probs,
    })
}
