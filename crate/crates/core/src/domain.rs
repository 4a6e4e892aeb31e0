use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Multi-hot domain membership of one query. All-zero marks an unlabeled
/// (out-of-domain) query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DomainLabelVector {
    bits: Vec<bool>,
}

impl DomainLabelVector {
    pub fn zeros(num_domains: usize) -> Self {
        DomainLabelVector {
            bits: vec![false; num_domains],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        DomainLabelVector { bits }
    }

    pub fn one_hot(num_domains: usize, index: usize) -> Self {
        let mut v = Self::zeros(num_domains);
        v.set(index);
        v
    }

    pub fn from_indices(num_domains: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(num_domains);
        for i in indices {
            v.set(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn set(&mut self, index: usize) {
        self.bits[index] = true;
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_unlabeled(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Labels as 0/1 scalars, the BCE targets.
    pub fn targets<S: Scalar>(&self) -> Vec<S> {
        self.bits
            .iter()
            .map(|&b| if b { S::one() } else { S::zero() })
            .collect()
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("label bitstring contains '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

impl fmt::Display for DomainLabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
