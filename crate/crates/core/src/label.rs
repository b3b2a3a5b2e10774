use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const LAG_MARKER: &str = "@lag";

/// Identifier of a return series: the source index name plus a lag in days.
///
/// Lag-0 labels render as the bare name; lagged copies render as
/// `name@lagK`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesLabel {
    pub name: String,
    pub lag: usize,
}

impl SeriesLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), lag: 0 }
    }

    pub fn lagged(name: impl Into<String>, lag: usize) -> Self {
        Self { name: name.into(), lag }
    }
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lag == 0 {
            f.write_str(&self.name)
        } else {
            write!(f, "{}{}{}", self.name, LAG_MARKER, self.lag)
        }
    }
}

impl FromStr for SeriesLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((name, lag)) = s.rsplit_once(LAG_MARKER) {
            if let Ok(lag) = lag.parse::<usize>() {
                if lag > 0 {
                    return Ok(Self::lagged(name, lag));
                }
            }
        }
        Ok(Self::new(s))
    }
}

impl From<&str> for SeriesLabel {
    fn from(s: &str) -> Self {
        s.parse().unwrap()
    }
}

impl Serialize for SeriesLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeriesLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap())
    }
}
