//! Discrete functions from attribute indices to row values.

use std::fmt;

use crate::error::{Error, Result};

/// A possibly partial map from `n` attributes to values in `[0, rows)`.
///
/// This is the unit that gets registered into a register, used as a cue, and
/// produced by retrieval. Undefined attributes are `None`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiscreteFunction(Vec<Option<usize>>);

impl DiscreteFunction {
    pub fn total(values: Vec<usize>) -> Self {
        DiscreteFunction(values.into_iter().map(Some).collect())
    }

    pub fn partial(values: Vec<Option<usize>>) -> Self {
        DiscreteFunction(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, attribute: usize) -> Option<usize> {
        self.0.get(attribute).copied().flatten()
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.0
    }

    /// Defined `(attribute, value)` pairs.
    pub fn defined(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    pub fn is_total(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    /// The values of a total function, or the first undefined attribute.
    pub fn to_total(&self) -> Result<Vec<usize>> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::PartialFunction { attribute: i }))
            .collect()
    }

    /// Checks the length against `n` and every defined value against `rows`.
    pub fn check(&self, n: usize, rows: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: self.len(),
            });
        }
        match self.defined().find(|&(_, v)| v >= rows) {
            Some((attribute, value)) => Err(Error::ValueOutOfRange {
                attribute,
                value,
                rows,
            }),
            None => Ok(()),
        }
    }
}

impl From<Vec<usize>> for DiscreteFunction {
    fn from(values: Vec<usize>) -> Self {
        DiscreteFunction::total(values)
    }
}

impl fmt::Display for DiscreteFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (i, v)) in self.defined().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({i}, {v})")?;
        }
        f.write_str("}")
    }
}
