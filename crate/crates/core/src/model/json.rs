//! JSON forms of structures and teams. Elements are written by label.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Assignment, DoubleTeam, ModelError, RelationDecl, Structure, Team};
use crate::syntax::VarName;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationJson {
    pub arity: usize,
    pub tuples: Vec<Vec<String>>,
}

/// `{"domain":["0","1"],"relations":{"P":{"arity":1,"tuples":[["0"]]}}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureJson {
    pub domain: Vec<String>,
    #[serde(default)]
    pub relations: BTreeMap<String, RelationJson>,
}

/// `{"vars":["x"],"assignments":[{"x":"0"}]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamJson {
    pub vars: Vec<VarName>,
    pub assignments: Vec<BTreeMap<VarName, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleTeamJson {
    #[serde(rename = "U")]
    pub u: TeamJson,
    #[serde(rename = "V")]
    pub v: TeamJson,
}

fn json_err(e: serde_json::Error) -> ModelError {
    ModelError::Json(e.to_string())
}

impl StructureJson {
    pub fn into_structure(self) -> Result<Structure, ModelError> {
        let labels = self.domain;
        let index = |l: &String| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| ModelError::UnknownLabel(l.clone()))
        };
        let mut relations = BTreeMap::new();
        for (name, r) in &self.relations {
            let mut tuples = BTreeSet::new();
            for t in &r.tuples {
                tuples.insert(t.iter().map(index).collect::<Result<Vec<_>, _>>()?);
            }
            relations.insert(
                name.clone(),
                RelationDecl {
                    arity: r.arity,
                    tuples,
                },
            );
        }
        Structure::new(labels, relations)
    }
}

impl Structure {
    pub fn from_json(text: &str) -> Result<Structure, ModelError> {
        serde_json::from_str::<StructureJson>(text)
            .map_err(json_err)?
            .into_structure()
    }

    pub fn to_json(&self) -> StructureJson {
        StructureJson {
            domain: self.labels.clone(),
            relations: self
                .relations
                .iter()
                .map(|(name, decl)| {
                    let tuples = decl
                        .tuples
                        .iter()
                        .map(|t| t.iter().map(|&e| self.labels[e].clone()).collect())
                        .collect();
                    (
                        name.clone(),
                        RelationJson {
                            arity: decl.arity,
                            tuples,
                        },
                    )
                })
                .collect(),
        }
    }
}

impl TeamJson {
    pub fn into_team(self, structure: &Structure) -> Result<Team, ModelError> {
        let vars: BTreeSet<VarName> = self.vars.into_iter().collect();
        let mut team = Team::empty(vars);
        for a in self.assignments {
            let mut pairs = Vec::with_capacity(a.len());
            for (v, label) in a {
                pairs.push((v, structure.elem(&label)?));
            }
            team.insert(Assignment::from_pairs(pairs))?;
        }
        Ok(team)
    }
}

impl Team {
    pub fn from_json(text: &str, structure: &Structure) -> Result<Team, ModelError> {
        serde_json::from_str::<TeamJson>(text)
            .map_err(json_err)?
            .into_team(structure)
    }

    pub fn to_json(&self, structure: &Structure) -> TeamJson {
        TeamJson {
            vars: self.vars.iter().cloned().collect(),
            assignments: self
                .members
                .iter()
                .map(|s| assignment_json(s, structure))
                .collect(),
        }
    }
}

pub fn assignment_json(s: &Assignment, structure: &Structure) -> BTreeMap<VarName, String> {
    s.bindings()
        .iter()
        .map(|(v, &e)| (v.clone(), structure.label(e).to_string()))
        .collect()
}

impl DoubleTeam {
    pub fn from_json(text: &str, structure: &Structure) -> Result<DoubleTeam, ModelError> {
        let j: DoubleTeamJson = serde_json::from_str(text).map_err(json_err)?;
        DoubleTeam::new(j.u.into_team(structure)?, j.v.into_team(structure)?)
    }

    pub fn to_json(&self, structure: &Structure) -> DoubleTeamJson {
        DoubleTeamJson {
            u: self.u.to_json(structure),
            v: self.v.to_json(structure),
        }
    }
}
