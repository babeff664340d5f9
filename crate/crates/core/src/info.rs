//! Entropies and conditional mutual informations, in bits.
//!
//! Everything is computed from marginal entropies,
//! `I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)`, with `0 log 0 = 0`.

use std::collections::HashMap;

use thiserror::Error;

use crate::pmf::{JointPmf, PmfError, VarSet};

/// Slightly negative results within this bound are rounding noise and clamp to 0.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("variable group is empty")]
    EmptyGroup,
    #[error("groups {0} and {1} overlap")]
    Overlap(VarSet, VarSet),
    #[error("information measure evaluated to {0}, below the rounding tolerance")]
    Inconsistent(f64),
}

fn table_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// `H(group)` of the marginal of `joint`.
pub fn entropy(joint: &JointPmf, group: VarSet) -> Result<f64, InfoError> {
    if group.is_empty() {
        return Err(InfoError::EmptyGroup);
    }
    Ok(table_entropy(joint.marginalize(group)?.probs()))
}

/// `I(a; b | given)`; `given` may be empty.
pub fn mutual_info(joint: &JointPmf, a: VarSet, b: VarSet, given: VarSet) -> Result<f64, InfoError> {
    InfoCalculator::new(joint).mutual_info(a, b, given)
}

/// Memoizes marginal entropies of one joint table so that many information
/// terms over the same distribution share marginalizations. Each new
/// marginal is summed from the smallest cached table that covers it.
#[derive(Debug)]
pub struct InfoCalculator<'a> {
    joint: &'a JointPmf,
    cache: HashMap<VarSet, f64>,
    tables: Vec<JointPmf>,
}

impl<'a> InfoCalculator<'a> {
    pub fn new(joint: &'a JointPmf) -> Self {
        InfoCalculator {
            joint,
            cache: HashMap::new(),
            tables: Vec::new(),
        }
    }

    pub fn joint(&self) -> &JointPmf {
        self.joint
    }

    /// Entropy of a (possibly empty) group.
    pub fn entropy(&mut self, group: VarSet) -> Result<f64, InfoError> {
        if group.is_empty() {
            return Ok(0.0);
        }
        if let Some(&h) = self.cache.get(&group) {
            return Ok(h);
        }
        let source = self
            .tables
            .iter()
            .filter(|t| group.is_subset(t.var_set()))
            .min_by_key(|t| t.probs().len())
            .unwrap_or(self.joint);
        let table = source.marginalize(group)?;
        let h = table_entropy(table.probs());
        self.cache.insert(group, h);
        if table.probs().len() > 1 {
            self.tables.push(table);
        }
        Ok(h)
    }

    /// `I(a; b | given)` before clamping.
    pub fn mutual_info_unclamped(&mut self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64, InfoError> {
        if a.is_empty() || b.is_empty() {
            return Err(InfoError::EmptyGroup);
        }
        if !a.is_disjoint(b) {
            return Err(InfoError::Overlap(a, b));
        }
        if !a.is_disjoint(given) {
            return Err(InfoError::Overlap(a, given));
        }
        if !b.is_disjoint(given) {
            return Err(InfoError::Overlap(b, given));
        }
        let hac = self.entropy(a.union(given))?;
        let hbc = self.entropy(b.union(given))?;
        let habc = self.entropy(a.union(b).union(given))?;
        let hc = self.entropy(given)?;
        Ok(hac + hbc - habc - hc)
    }

    pub fn mutual_info(&mut self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64, InfoError> {
        let raw = self.mutual_info_unclamped(a, b, given)?;
        if raw >= 0.0 {
            Ok(raw)
        } else if raw >= -CLAMP_TOL {
            Ok(0.0)
        } else {
            Err(InfoError::Inconsistent(raw))
        }
    }
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    table_entropy(&[p, 1.0 - p])
}
