use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shifter::{ConditionVector, Direction};

fn parse_attr(token: &str, m: usize) -> Result<usize> {
    let index = token
        .strip_prefix("attr")
        .and_then(|i| i.parse::<usize>().ok())
        .ok_or_else(|| Error::invalid(format!("expected attr<i>, got {token:?}")))?;
    if index >= m {
        return Err(Error::invalid(format!(
            "attribute attr{index} out of range: valid attributes are attr0..attr{}",
            m.saturating_sub(1)
        )));
    }
    Ok(index)
}

/// Condition codes with at least one attribute set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConditionVector", into = "ConditionVector")]
pub struct Intervention(ConditionVector);

impl TryFrom<ConditionVector> for Intervention {
    type Error = Error;

    fn try_from(codes: ConditionVector) -> Result<Self> {
        Self::new(codes)
    }
}

impl From<Intervention> for ConditionVector {
    fn from(iv: Intervention) -> Self {
        iv.0
    }
}

impl Intervention {
    pub fn new(codes: ConditionVector) -> Result<Self> {
        if codes.is_unset() {
            return Err(Error::invalid(
                "an intervention must set at least one attribute",
            ));
        }
        Ok(Self(codes))
    }

    pub fn single(m: usize, attribute: usize, direction: Direction) -> Result<Self> {
        Self::new(ConditionVector::single(m, attribute, direction)?)
    }

    /// Parses `attr<i>=(+1|-1)` items joined by commas.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut codes = vec![0i8; m];
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (attr, value) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected attr<i>=+1|-1, got {item:?}")))?;
            let index = parse_attr(attr.trim(), m)?;
            let code = match value.trim() {
                "+1" | "1" => 1,
                "-1" => -1,
                "0" => 0,
                other => {
                    return Err(Error::invalid(format!(
                        "intervention value must be +1 or -1, got {other:?}"
                    )))
                }
            };
            if codes[index] != 0 {
                return Err(Error::invalid(format!("attr{index} set twice")));
            }
            codes[index] = code;
        }
        Self::new(ConditionVector::new(codes)?)
    }

    pub fn codes(&self) -> &ConditionVector {
        &self.0
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .0
            .codes()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| format!("attr{i}={}", if c > 0 { "+1" } else { "-1" }))
            .collect();
        f.write_str(&items.join(","))
    }
}

/// Required factual attribute classes; at most one constraint per attribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, bool)>", into = "Vec<(usize, bool)>")]
pub struct Context(Vec<(usize, bool)>);

impl TryFrom<Vec<(usize, bool)>> for Context {
    type Error = Error;

    fn try_from(items: Vec<(usize, bool)>) -> Result<Self> {
        Self::new(items)
    }
}

impl From<Context> for Vec<(usize, bool)> {
    fn from(c: Context) -> Self {
        c.0
    }
}

impl Context {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Constraints are kept sorted by attribute index.
    pub fn new(mut items: Vec<(usize, bool)>) -> Result<Self> {
        items.sort_unstable();
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!(
                "context constrains attr{} more than once",
                w[0].0
            )));
        }
        Ok(Self(items))
    }

    /// Parses `attr<i>=(0|1)` items joined by `&`; the empty string is the empty context.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let items = text
            .split('&')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let (attr, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("expected attr<i>=0|1, got {item:?}")))?;
                let bit = match value.trim() {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::invalid(format!(
                            "context value must be 0 or 1, got {other:?}"
                        )))
                    }
                };
                Ok((parse_attr(attr.trim(), m)?, bit))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn constraints(&self) -> &[(usize, bool)] {
        &self.0
    }

    /// Largest attribute index mentioned, if any.
    pub fn max_attribute(&self) -> Option<usize> {
        self.0.last().map(|c| c.0)
    }

    pub fn matches(&self, classes: &[bool]) -> bool {
        self.0
            .iter()
            .all(|&(i, bit)| classes.get(i).is_some_and(|&c| c == bit))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .0
            .iter()
            .map(|&(i, b)| format!("attr{i}={}", u8::from(b)))
            .collect();
        f.write_str(&items.join("&"))
    }
}
