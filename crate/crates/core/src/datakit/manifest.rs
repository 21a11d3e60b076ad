use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "FM-S")]
    FmS,
    #[serde(rename = "FM-D")]
    FmD,
}

impl Relation {
    pub const ALL: [Relation; 2] = [Relation::FmS, Relation::FmD];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::FmS => "FM-S",
            Relation::FmD => "FM-D",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = KinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FM-S" => Ok(Relation::FmS),
            "FM-D" => Ok(Relation::FmD),
            other => Err(KinError::param(
                "relation",
                format!("unknown relation type `{other}`"),
            )),
        }
    }
}

/// One family: member references are image paths or `feature:` cache keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub family_id: String,
    pub relation: Relation,
    pub father: String,
    pub mother: String,
    pub child: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

#[derive(Deserialize)]
struct RawRecord {
    family_id: Option<String>,
    relation: Option<String>,
    father: Option<String>,
    mother: Option<String>,
    child: Option<String>,
    fold: Option<usize>,
}

/// Parses JSON-lines manifest text. Blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<FamilyRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| KinError::Manifest {
            line: line_no,
            reason: e.to_string(),
        })?;
        let family_id = raw
            .family_id
            .filter(|s| !s.is_empty())
            .ok_or(KinError::Manifest {
                line: line_no,
                reason: "missing family_id".into(),
            })?;
        let relation = raw.relation.ok_or(KinError::Manifest {
            line: line_no,
            reason: "missing relation".into(),
        })?;
        let relation = relation
            .parse::<Relation>()
            .map_err(|_| KinError::Manifest {
                line: line_no,
                reason: format!("unknown relation type `{relation}`"),
            })?;
        let member = |v: Option<String>, member: &'static str| {
            v.filter(|s| !s.is_empty())
                .ok_or_else(|| KinError::MissingMember {
                    family_id: family_id.clone(),
                    member,
                })
        };
        let father = member(raw.father, "father")?;
        let mother = member(raw.mother, "mother")?;
        let child = member(raw.child, "child")?;
        if !seen.insert(family_id.clone()) {
            return Err(KinError::DuplicateFamily(family_id));
        }
        out.push(FamilyRecord {
            family_id,
            relation,
            father,
            mother,
            child,
            fold: raw.fold,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<FamilyRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| KinError::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(path: &Path, records: &[FamilyRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| KinError::io(path, e))
}
