use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TripleSample;
use crate::error::{KinError, Result};

/// Which two members form the reference pair and which one is queried.
///
/// Models always see `(slot1, slot2, query)` in the `(father, mother,
/// child)` fields. The permuted forms swap the query member into the child
/// slot, so each permutation is its own inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriadForm {
    /// Father-mother pair, son or daughter queried (FM-S / FM-D).
    ParentsChild,
    /// Father-child pair, mother queried (FS-M / FD-M).
    FatherChildMother,
    /// Mother-child pair, father queried (MS-F / MD-F).
    MotherChildFather,
}

impl FromStr for TriadForm {
    type Err = KinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FM-S" | "FM-D" => Ok(TriadForm::ParentsChild),
            "FS-M" | "FD-M" => Ok(TriadForm::FatherChildMother),
            "MS-F" | "MD-F" => Ok(TriadForm::MotherChildFather),
            other => Err(KinError::param(
                "form",
                format!("unknown tri-subject form `{other}`"),
            )),
        }
    }
}

impl fmt::Display for TriadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriadForm::ParentsChild => "FM-C",
            TriadForm::FatherChildMother => "FC-M",
            TriadForm::MotherChildFather => "MC-F",
        })
    }
}

pub fn permute_roles(triples: &[TripleSample], form: TriadForm) -> Vec<TripleSample> {
    triples
        .iter()
        .cloned()
        .map(|mut t| {
            match form {
                TriadForm::ParentsChild => {}
                // (father, child | mother)
                TriadForm::FatherChildMother => std::mem::swap(&mut t.mother, &mut t.child),
                // (child, mother | father)
                TriadForm::MotherChildFather => std::mem::swap(&mut t.father, &mut t.child),
            }
            t
        })
        .collect()
}
