use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};

/// Binary verification label, `+1` for kin and `-1` for non-kin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Kin,
    NotKin,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Kin => 1.0,
            Label::NotKin => -1.0,
        }
    }

    pub fn is_kin(self) -> bool {
        self == Label::Kin
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Kin => Label::NotKin,
            Label::NotKin => Label::Kin,
        }
    }

    pub fn from_decision(positive: bool) -> Label {
        if positive {
            Label::Kin
        } else {
            Label::NotKin
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Kin => 1,
            Label::NotKin => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = KinError;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Kin),
            -1 => Ok(Label::NotKin),
            other => Err(KinError::param("label", format!("{other} is not +1 or -1"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Kin => "+1",
            Label::NotKin => "-1",
        })
    }
}

/// Checks that both classes occur.
pub(crate) fn require_both_classes(labels: &[Label]) -> Result<()> {
    let pos = labels.iter().any(|l| l.is_kin());
    let neg = labels.iter().any(|l| !l.is_kin());
    if pos && neg {
        Ok(())
    } else {
        Err(KinError::SingleClass)
    }
}
