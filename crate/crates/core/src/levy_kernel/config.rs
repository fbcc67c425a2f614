//! JSON description of a lifespan measure.
//!
//! ```json
//! {"family": "exponential", "b": 1.2, "d": 1.0}
//! {"family": "dirac", "b": 0.7, "a": "inf"}
//! {"family": "mixture", "b": 1.0, "components": [{"weight": 0.5, "family": "dirac", "a": 2.0}, ...]}
//! {"family": "empirical", "b": 2.0, "sample": [1.0, 3.0]}
//! {"family": "hazard", "b": 1.0, "breaks": [0.0, 1.0], "rates": [0.2, 1.5]}
//! ```

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::measure::{LifespanLaw, LifespanSpec, PiecewiseHazard};
use super::KernelError;

/// A level that may be `+inf`, written `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level(pub f64);

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Level(v)),
            Raw::Text(t) => match t.trim() {
                "inf" | "+inf" | "Infinity" | "infinity" => Ok(Level(f64::INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum LawConfig {
    Exponential { d: f64 },
    Dirac { a: Level },
    Mixture { components: Vec<ComponentConfig> },
    Empirical { sample: Vec<Level> },
    Hazard { breaks: Vec<f64>, rates: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub weight: f64,
    #[serde(flatten)]
    pub law: LawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub b: f64,
    #[serde(flatten)]
    pub law: LawConfig,
}

impl LawConfig {
    fn to_law(&self) -> Result<LifespanLaw, KernelError> {
        Ok(match self {
            LawConfig::Exponential { d } => LifespanLaw::Exponential { d: *d },
            LawConfig::Dirac { a } => LifespanLaw::Dirac { a: a.0 },
            LawConfig::Mixture { components } => LifespanLaw::Mixture(
                components
                    .iter()
                    .map(|c| c.law.to_law().map(|l| (c.weight, l)))
                    .collect::<Result<_, _>>()?,
            ),
            LawConfig::Empirical { sample } => {
                LifespanLaw::Empirical(sample.iter().map(|l| l.0).collect())
            }
            LawConfig::Hazard { breaks, rates } => {
                LifespanLaw::Hazard(PiecewiseHazard::new(breaks.clone(), rates.clone())?)
            }
        })
    }
}

impl MeasureConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Validates the description and computes `b`, `q` and `m`.
    pub fn build(&self) -> Result<LifespanSpec, KernelError> {
        match &self.law {
            LawConfig::Hazard { breaks, rates } => LifespanSpec::from_hazard(
                self.b,
                PiecewiseHazard::new(breaks.clone(), rates.clone())?,
            ),
            law => LifespanSpec::new(self.b, law.to_law()?),
        }
    }
}
