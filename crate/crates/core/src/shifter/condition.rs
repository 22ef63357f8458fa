use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a single-attribute intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Increase,
    #[serde(rename = "-")]
    Decrease,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Increase, Direction::Decrease];

    pub fn code(self) -> i8 {
        match self {
            Direction::Increase => 1,
            Direction::Decrease => -1,
        }
    }

    /// The attribute class an intervention in this direction aims for.
    pub fn target(self) -> bool {
        self == Direction::Increase
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Increase => "+",
            Direction::Decrease => "-",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Per-attribute codes: `+1` increase, `-1` decrease, `0` leave unset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct ConditionVector(Vec<i8>);

impl TryFrom<Vec<i8>> for ConditionVector {
    type Error = Error;

    fn try_from(codes: Vec<i8>) -> Result<Self> {
        Self::new(codes)
    }
}

impl From<ConditionVector> for Vec<i8> {
    fn from(c: ConditionVector) -> Self {
        c.0
    }
}

impl ConditionVector {
    pub fn new(codes: Vec<i8>) -> Result<Self> {
        if let Some(bad) = codes.iter().find(|c| !(-1..=1).contains(*c)) {
            return Err(Error::invalid(format!(
                "condition code {bad} is not one of -1, 0, +1"
            )));
        }
        Ok(Self(codes))
    }

    pub fn unset(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn single(m: usize, attribute: usize, direction: Direction) -> Result<Self> {
        if attribute >= m {
            return Err(Error::invalid(format!(
                "attribute index {attribute} out of range 0..{m}"
            )));
        }
        let mut codes = vec![0; m];
        codes[attribute] = direction.code();
        Ok(Self(codes))
    }

    pub fn codes(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_unset(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Codes as network inputs.
    pub fn as_input(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&c| f64::from(c))
    }

    /// BCE targets (`+1 -> 1`, `-1 -> 0`) and mask (`0 -> masked out`).
    pub fn targets_and_mask(&self) -> (Vec<f64>, Vec<f64>) {
        self.0
            .iter()
            .map(|&c| match c {
                1 => (1.0, 1.0),
                -1 => (0.0, 1.0),
                _ => (0.0, 0.0),
            })
            .unzip()
    }
}
