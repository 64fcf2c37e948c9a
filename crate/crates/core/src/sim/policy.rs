use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Axis, Error, Result};
use crate::stats::QueryId;

/// A vocabulary symbol. Symbol [`STOP`] ends a sequence.
pub type Symbol = usize;

pub const STOP: Symbol = 0;

/// Tabular softmax policy conditioned on `(query, position)`.
///
/// `π(y_t | x, y_<t)` is collapsed to `π(y_t | x, t)`, so a sequence's
/// probability still factorizes token by token while the table stays
/// `Q × L × V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    num_queries: usize,
    vocab_size: usize,
    max_length: usize,
    logits: Vec<f64>,
}

impl PolicyTable {
    /// Uniform policy (all logits zero).
    pub fn new(num_queries: usize, vocab_size: usize, max_length: usize) -> Result<Self> {
        if num_queries == 0 {
            return Err(Error::InvalidParameter {
                name: "num_queries",
                reason: "must be positive",
            });
        }
        if vocab_size < 2 {
            return Err(Error::InvalidParameter {
                name: "vocab_size",
                reason: "need the stop symbol plus at least one other",
            });
        }
        if max_length == 0 {
            return Err(Error::InvalidParameter {
                name: "max_length",
                reason: "must be positive",
            });
        }
        Ok(Self {
            num_queries,
            vocab_size,
            max_length,
            logits: vec![0.0; num_queries * max_length * vocab_size],
        })
    }

    pub fn num_queries(&self) -> usize {
        self.num_queries
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    /// Flat offset of `(query, position, symbol)` in [`Self::logits`].
    pub fn offset(&self, query: usize, position: usize, symbol: Symbol) -> usize {
        (query * self.max_length + position) * self.vocab_size + symbol
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn set_logit(&mut self, query: usize, position: usize, symbol: Symbol, value: f64) {
        let i = self.offset(query, position, symbol);
        self.logits[i] = value;
    }

    pub(crate) fn query_index(&self, query: QueryId) -> Result<usize> {
        let q = query.0 as usize;
        if query.0 >= self.num_queries as u64 {
            return Err(Error::IndexOutOfBounds {
                axis: Axis::Queries,
                index: q,
                len: self.num_queries,
            });
        }
        Ok(q)
    }

    fn row(&self, query: usize, position: usize) -> &[f64] {
        let start = self.offset(query, position, 0);
        &self.logits[start..start + self.vocab_size]
    }

    /// `log π(· | query, position)`, computed with a max shift.
    pub fn log_distribution(&self, query: usize, position: usize) -> Vec<f64> {
        let row = self.row(query, position);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = libm::log(row.iter().map(|z| libm::exp(z - max)).sum::<f64>());
        row.iter().map(|z| (z - max) - log_norm).collect()
    }

    pub fn distribution(&self, query: usize, position: usize) -> Vec<f64> {
        self.log_distribution(query, position)
            .into_iter()
            .map(libm::exp)
            .collect()
    }

    pub fn log_prob(&self, query: usize, position: usize, symbol: Symbol) -> f64 {
        self.log_distribution(query, position)[symbol]
    }

    pub fn sequence_log_prob(&self, query: usize, tokens: &[Symbol]) -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(t, &y)| self.log_prob(query, t, y))
            .sum()
    }

    /// Index of the first non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.logits.iter().position(|z| !z.is_finite())
    }

    /// Every sequence the policy can emit for `query`, with its probability.
    ///
    /// A sequence ends at the first [`STOP`] or at `max_length`, so there are
    /// at most `V^L` of them.
    pub fn enumerate(&self, query: usize) -> Vec<(Vec<Symbol>, f64)> {
        let dists: Vec<Vec<f64>> = (0..self.max_length).map(|t| self.distribution(query, t)).collect();
        let mut out = Vec::new();
        let mut stack: Vec<(Vec<Symbol>, f64)> = vec![(Vec::new(), 1.0)];
        while let Some((prefix, p)) = stack.pop() {
            let t = prefix.len();
            for (symbol, &q) in dists[t].iter().enumerate() {
                let mut seq = prefix.clone();
                seq.push(symbol);
                if symbol == STOP || seq.len() == self.max_length {
                    out.push((seq, p * q));
                } else {
                    stack.push((seq, p * q));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_distribution() {
        let p = PolicyTable::new(2, 4, 3).unwrap();
        let d = p.distribution(1, 2);
        assert!(d.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn enumeration_sums_to_one() {
        let mut p = PolicyTable::new(1, 3, 4).unwrap();
        for (i, z) in p.logits_mut().iter_mut().enumerate() {
            *z = (i as f64 * 0.37).sin() * 2.0;
        }
        let seqs = p.enumerate(0);
        // 1 + 2 + 4 sequences ending in STOP before L, plus 8 * 3 of full length
        assert_eq!(seqs.len(), 1 + 2 + 4 + 8 * 3);
        let total: f64 = seqs.iter().map(|(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (seq, q) in &seqs {
            assert!((libm::exp(p.sequence_log_prob(0, seq)) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let mut p = PolicyTable::new(1, 3, 1).unwrap();
        p.set_logit(0, 0, 1, 800.0);
        let d = p.log_distribution(0, 0);
        assert!(d.iter().all(|x| x.is_finite() || *x == f64::NEG_INFINITY));
        assert!(d[1].abs() < 1e-12);
    }

    #[test]
    fn huge_uniform_logits_stay_uniform() {
        let mut p = PolicyTable::new(1, 4, 1).unwrap();
        p.logits_mut().iter_mut().for_each(|z| *z = 1e300);
        assert!(p.distribution(0, 0).iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(PolicyTable::new(0, 3, 2).is_err());
        assert!(PolicyTable::new(1, 1, 2).is_err());
        assert!(PolicyTable::new(1, 3, 0).is_err());
    }
}
