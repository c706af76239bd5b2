//! Transaction classes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Ground-truth label of a node as found in the classes file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Illicit,
    Licit,
    Unknown,
}

impl Label {
    /// Parses the release encoding: `"1"` illicit, `"2"` licit, `"unknown"`.
    pub fn parse(raw: &str) -> Option<Label> {
        match raw.trim() {
            "1" => Some(Label::Illicit),
            "2" => Some(Label::Licit),
            "unknown" => Some(Label::Unknown),
            _ => None,
        }
    }

    pub fn encode(self) -> &'static str {
        match self {
            Label::Illicit => "1",
            Label::Licit => "2",
            Label::Unknown => "unknown",
        }
    }

    pub fn class(self) -> Option<Class> {
        match self {
            Label::Illicit => Some(Class::Illicit),
            Label::Licit => Some(Class::Licit),
            Label::Unknown => None,
        }
    }

    /// Position in 3×3 transfer tables: illicit, licit, unknown.
    pub fn index(self) -> usize {
        match self {
            Label::Illicit => 0,
            Label::Licit => 1,
            Label::Unknown => 2,
        }
    }

    pub const ALL: [Label; 3] = [Label::Illicit, Label::Licit, Label::Unknown];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Illicit => "illicit",
            Label::Licit => "licit",
            Label::Unknown => "unknown",
        })
    }
}

/// Binary target. The discriminant is the output column of every model:
/// column 0 is licit, column 1 is illicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Licit = 0,
    Illicit = 1,
}

impl Class {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Class {
        if i == 1 { Class::Illicit } else { Class::Licit }
    }

    /// Argmax over `[p_licit, p_illicit]`; ties go to licit.
    pub fn from_probs(row: &[f64]) -> Class {
        if row[1] > row[0] { Class::Illicit } else { Class::Licit }
    }

    pub fn label(self) -> Label {
        match self {
            Class::Licit => Label::Licit,
            Class::Illicit => Label::Illicit,
        }
    }
}

/// Loss weights per class, `(licit, illicit)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub licit: f64,
    pub illicit: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights { licit: 1.0, illicit: 1.0 };
    pub const ILLICIT_HEAVY: ClassWeights = ClassWeights { licit: 0.3, illicit: 0.7 };

    pub fn of(&self, class: Class) -> f64 {
        match class {
            Class::Licit => self.licit,
            Class::Illicit => self.illicit,
        }
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::ILLICIT_HEAVY
    }
}

impl std::str::FromStr for ClassWeights {
    type Err = String;

    /// `"0.3,0.7"` → licit 0.3, illicit 0.7.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format!("expected `licit,illicit`, got `{s}`"));
        }
        let parse = |p: &str| p.parse::<f64>().map_err(|e| format!("bad weight `{p}`: {e}"));
        let (licit, illicit) = (parse(parts[0])?, parse(parts[1])?);
        if !(licit >= 0.0 && illicit >= 0.0 && licit + illicit > 0.0) {
            return Err(format!("weights must be non-negative and not both zero: `{s}`"));
        }
        Ok(ClassWeights { licit, illicit })
    }
}
