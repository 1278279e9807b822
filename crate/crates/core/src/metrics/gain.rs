use serde::{Deserialize, Serialize};

use super::{MetricError, Result};
use crate::corpus::BinaryLabel;

/// Label vocabularies that can be turned into graded gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// relevant / partial / irrelevant -> 1 / 0.5 / 0
    ThreeWay,
    /// analyst grades 1..3 -> 1/3, 2/3, 1; unannotated -> 0
    Graded1To3,
    /// relevant -> 1, anything else -> 0
    Binary,
}

impl std::str::FromStr for LabelScheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "three_way" => Ok(LabelScheme::ThreeWay),
            "graded_1_3" => Ok(LabelScheme::Graded1To3),
            "binary" => Ok(LabelScheme::Binary),
            other => Err(format!("unknown label scheme `{other}`")),
        }
    }
}

impl std::fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelScheme::ThreeWay => "three_way",
            LabelScheme::Graded1To3 => "graded_1_3",
            LabelScheme::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainMap {
    scheme: LabelScheme,
}

pub fn gain_mapping(scheme: LabelScheme) -> GainMap {
    GainMap { scheme }
}

impl GainMap {
    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    /// Gain of a raw label string under this scheme.
    pub fn gain(&self, label: &str) -> Result<f64> {
        let norm = label.trim().to_ascii_lowercase();
        let unknown = || MetricError::UnknownLabel {
            scheme: self.scheme.to_string(),
            label: label.to_string(),
        };
        match self.scheme {
            LabelScheme::ThreeWay | LabelScheme::Binary => {
                let bin = match norm.as_str() {
                    "relevant" => BinaryLabel::Relevant,
                    "partial" | "partially relevant" | "partially" => BinaryLabel::Partial,
                    "irrelevant" | "not relevant" => BinaryLabel::Irrelevant,
                    _ => return Err(unknown()),
                };
                Ok(self.gain_of(bin))
            }
            LabelScheme::Graded1To3 => match norm.as_str() {
                "1" => Ok(1.0 / 3.0),
                "2" => Ok(2.0 / 3.0),
                "3" => Ok(1.0),
                "0" | "unannotated" | "" => Ok(0.0),
                _ => Err(unknown()),
            },
        }
    }

    /// Gain of a three-way label. Under the graded scheme the labels map
    /// onto the end points and midpoint of the scale.
    pub fn gain_of(&self, label: BinaryLabel) -> f64 {
        match (self.scheme, label) {
            (_, BinaryLabel::Relevant) => 1.0,
            (LabelScheme::Binary, BinaryLabel::Partial) => 0.0,
            (_, BinaryLabel::Partial) => 0.5,
            (_, BinaryLabel::Irrelevant) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_values() {
        let three = gain_mapping(LabelScheme::ThreeWay);
        assert_eq!(three.gain("partial").unwrap(), 0.5);
        assert_eq!(three.gain("Relevant").unwrap(), 1.0);
        assert_eq!(three.gain("irrelevant").unwrap(), 0.0);

        let graded = gain_mapping(LabelScheme::Graded1To3);
        assert_eq!(graded.gain("2").unwrap(), 2.0 / 3.0);
        assert_eq!(graded.gain("1").unwrap(), 1.0 / 3.0);
        assert_eq!(graded.gain("3").unwrap(), 1.0);
        assert_eq!(graded.gain("unannotated").unwrap(), 0.0);

        let bin = gain_mapping(LabelScheme::Binary);
        assert_eq!(bin.gain("irrelevant").unwrap(), 0.0);
        assert_eq!(bin.gain("partial").unwrap(), 0.0);
        assert_eq!(bin.gain("relevant").unwrap(), 1.0);
    }

    #[test]
    fn unknown_labels_are_errors() {
        assert!(gain_mapping(LabelScheme::ThreeWay).gain("maybe").is_err());
        assert!(gain_mapping(LabelScheme::Graded1To3).gain("4").is_err());
        assert_eq!("graded_1_3".parse::<LabelScheme>().unwrap(), LabelScheme::Graded1To3);
        assert!("five_way".parse::<LabelScheme>().is_err());
    }
}
