use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One tensor factor: a short label and its dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled tensor factors.
///
/// The order fixes the computational-basis ordering: the first subsystem is
/// the most significant digit of a flat index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimsLabel {
    subsystems: Vec<Subsystem>,
}

impl DimsLabel {
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let subsystems: Vec<Subsystem> = parts
            .into_iter()
            .map(|(label, dim)| Subsystem { label: label.into(), dim })
            .collect();
        for (i, s) in subsystems.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::InvalidDim(0));
            }
            if subsystems[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        let dims = Self { subsystems };
        super::check_cap(dims.total())?;
        Ok(dims)
    }

    /// A single subsystem.
    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    /// The empty (scalar) space, total dimension 1.
    pub fn scalar() -> Self {
        Self { subsystems: Vec::new() }
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn total(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.index_of(label)?].dim)
    }

    /// Product of the dimensions of the given labels.
    pub fn dim_of_set(&self, labels: &[&str]) -> Result<usize> {
        labels.iter().try_fold(1usize, |acc, l| Ok(acc * self.dim_of(l)?))
    }

    /// Positions of the given labels, in the order requested.
    pub fn indices_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l)).collect()
    }

    /// Concatenation; labels must stay distinct.
    pub fn concat(&self, other: &DimsLabel) -> Result<Self> {
        Self::new(
            self.subsystems
                .iter()
                .chain(other.subsystems.iter())
                .map(|s| (s.label.clone(), s.dim)),
        )
    }

    /// Sub-list of subsystems at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            subsystems: positions.iter().map(|&p| self.subsystems[p].clone()).collect(),
        }
    }

    /// Rename a single label.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let idx = self.index_of(from)?;
        let mut subsystems = self.subsystems.clone();
        subsystems[idx].label = to.to_string();
        Self::new(subsystems.into_iter().map(|s| (s.label, s.dim)))
    }

    /// Positions not listed in `positions`, in original order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|i| !positions.contains(i)).collect()
    }
}
