//! Real sequences indexed by integers, from a closed form in `n` or from data.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq)]
pub enum Sequence {
    Closed(Expr),
    Data(BTreeMap<i64, f64>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeqError {
    #[error("no data for index {0}")]
    Missing(i64),
    #[error("term {n}: {source}")]
    Eval { n: i64, source: ExprError },
}

impl Sequence {
    pub fn at(&self, n: i64) -> Result<f64, SeqError> {
        match self {
            Sequence::Closed(e) => e.eval_n(n).map_err(|source| SeqError::Eval { n, source }),
            Sequence::Data(d) => d.get(&n).copied().ok_or(SeqError::Missing(n)),
        }
    }

    /// Last index a data sequence covers; closed forms are unbounded.
    pub fn last_index(&self) -> Option<i64> {
        match self {
            Sequence::Closed(_) => None,
            Sequence::Data(d) => d.keys().next_back().copied(),
        }
    }

    /// Terms `from..=to`.
    pub fn terms(&self, from: i64, to: i64) -> Result<Vec<f64>, SeqError> {
        (from..=to).map(|n| self.at(n)).collect()
    }
}
