//! Property statuses and their propagation.
//!
//! Nodes play one of four roles. Goals get verdicts from the solver.
//! Lemmas hold once every goal of their wrapper holds. Relational clauses
//! mirror their wrapper assert. Bridges, and the lemmas and clauses of
//! properties with no wrapper, are axioms.
//!
//! Propagation computes a least fixpoint: a node becomes Valid only when
//! each of its dependencies is resolved (Proven, Valid or AssumedValid), so
//! dependency cycles never validate themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::PropertyId;
use crate::smt::{SolverVerdict, VerdictKind};
use crate::transform::{LinkKind, StatusLink};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Unknown,
    Proven { by: String, time_ms: u64 },
    /// Model values in decimal, keyed by VC variable.
    Invalid { counterexample: Vec<(String, String)> },
    AssumedValid,
    ValidUnderCondition { pending: BTreeSet<PropertyId> },
    Valid,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Unknown => "unknown",
            Status::Proven { .. } => "proven",
            Status::Invalid { .. } => "invalid",
            Status::AssumedValid => "assumed_valid",
            Status::ValidUnderCondition { .. } => "valid_under_condition",
            Status::Valid => "valid",
        }
    }

    /// Holds without any open condition.
    pub fn is_resolved(&self) -> bool {
        matches!(self, Status::Proven { .. } | Status::Valid | Status::AssumedValid)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Goal,
    Lemma,
    Clause,
    Bridge,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatusError {
    #[error("duplicate property id '{0}'")]
    Duplicate(PropertyId),
    #[error("'{0}' is not a proof goal")]
    NotAGoal(PropertyId),
    #[error("unknown property '{0}'")]
    Unknown(PropertyId),
}

/// Verdict-derived facts about a goal; statuses are recomputed from these.
#[derive(Debug, Clone)]
enum Outcome {
    Open,
    Proven { by: String, time_ms: u64 },
    Refuted(Vec<(String, String)>),
}

#[derive(Debug, Clone)]
struct Node {
    role: Role,
    status: Status,
    outcome: Outcome,
    /// What must be resolved for a conditional status to become final.
    deps: BTreeSet<PropertyId>,
    /// Set for clauses that mirror a wrapper assert.
    mirrors: Option<PropertyId>,
    explanation: Option<String>,
}

impl Node {
    fn new(role: Role, status: Status) -> Self {
        Node {
            role,
            status,
            outcome: Outcome::Open,
            deps: BTreeSet::new(),
            mirrors: None,
            explanation: None,
        }
    }
}

/// One line of the consolidated report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: PropertyId,
    pub status: String,
    pub pending: Vec<PropertyId>,
    pub evidence: Vec<PropertyId>,
    pub time_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<BTreeMap<String, String>>,
    pub explanation: String,
}

#[derive(Debug, Clone, Default)]
pub struct StatusDb {
    nodes: BTreeMap<PropertyId, Node>,
}

impl StatusDb {
    /// Builds the graph from transform links and the goal ids of the
    /// program. A lemma proved through a wrapper waits on every goal of
    /// that wrapper, not just its final assert: the assert alone says
    /// nothing if, say, an inlined loop invariant is wrong.
    pub fn seed(links: &[StatusLink], goals: &[PropertyId]) -> Result<StatusDb, StatusError> {
        let mut db = StatusDb::default();
        for g in goals {
            db.insert(g.clone(), Node::new(Role::Goal, Status::Unknown))?;
        }
        let mut by_owner: BTreeMap<&str, BTreeSet<PropertyId>> = BTreeMap::new();
        for g in goals {
            by_owner.entry(g.owner()).or_default().insert(g.clone());
        }
        for link in links {
            match link.kind {
                LinkKind::BridgingEnsuresAssumed => {
                    db.insert_once(link.target.clone(), Node::new(Role::Bridge, Status::AssumedValid))?;
                }
                LinkKind::LemmaAssumed => {
                    db.insert(link.source.clone(), Node::new(Role::Clause, Status::AssumedValid))?;
                    db.insert(link.target.clone(), Node::new(Role::Lemma, Status::AssumedValid))?;
                }
                LinkKind::PropertyMirrorsAssert => {
                    let mut node = Node::new(Role::Clause, Status::Unknown);
                    node.mirrors = Some(link.target.clone());
                    db.insert(link.source.clone(), node)?;
                    if !db.nodes.contains_key(&link.target) {
                        db.insert(link.target.clone(), Node::new(Role::Goal, Status::Unknown))?;
                    }
                }
                LinkKind::WrapperAssertProvesLemma => {
                    let mut deps = by_owner.get(link.source.owner()).cloned().unwrap_or_default();
                    deps.insert(link.source.clone());
                    let mut node = Node::new(
                        Role::Lemma,
                        Status::ValidUnderCondition {
                            pending: deps.clone(),
                        },
                    );
                    node.deps = deps;
                    db.insert(link.target.clone(), node)?;
                    if !db.nodes.contains_key(&link.source) {
                        db.insert(link.source.clone(), Node::new(Role::Goal, Status::Unknown))?;
                    }
                }
            }
        }
        db.propagate();
        Ok(db)
    }

    fn insert(&mut self, id: PropertyId, node: Node) -> Result<(), StatusError> {
        if self.nodes.contains_key(&id) {
            return Err(StatusError::Duplicate(id));
        }
        self.nodes.insert(id, node);
        Ok(())
    }

    /// Several properties may share one bridge.
    fn insert_once(&mut self, id: PropertyId, node: Node) -> Result<(), StatusError> {
        match self.nodes.get(&id) {
            Some(n) if n.role == node.role => Ok(()),
            Some(_) => Err(StatusError::Duplicate(id)),
            None => self.insert(id, node),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn status(&self, id: &PropertyId) -> Option<&Status> {
        self.nodes.get(id).map(|n| &n.status)
    }

    pub fn role(&self, id: &PropertyId) -> Option<Role> {
        self.nodes.get(id).map(|n| n.role)
    }

    pub fn ids(&self) -> impl Iterator<Item = &PropertyId> {
        self.nodes.keys()
    }

    pub fn goals(&self) -> impl Iterator<Item = &PropertyId> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.role == Role::Goal)
            .map(|(id, _)| id)
    }

    /// Lemmas a VC may assume.
    pub fn lemma_usable(&self, id: &PropertyId) -> bool {
        self.nodes.get(id).is_some_and(|n| {
            n.role == Role::Lemma
                && matches!(
                    n.status,
                    Status::Valid | Status::ValidUnderCondition { .. } | Status::AssumedValid
                )
        })
    }

    /// Applies a solver verdict for goal `id`, whose proof relied on
    /// `deps`. A sat verdict wins over unsat and is never undone, and
    /// inconclusive verdicts change nothing, so the fixpoint does not
    /// depend on the order in which verdicts arrive.
    pub fn record(
        &mut self,
        id: &PropertyId,
        verdict: &SolverVerdict,
        deps: &[PropertyId],
    ) -> Result<(), StatusError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| StatusError::Unknown(id.clone()))?;
        if node.role != Role::Goal {
            return Err(StatusError::NotAGoal(id.clone()));
        }
        match (&verdict.result, &node.outcome) {
            (_, Outcome::Refuted(_)) => {}
            (VerdictKind::Sat, _) => {
                let model = verdict
                    .model
                    .iter()
                    .flatten()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect();
                node.outcome = Outcome::Refuted(model);
                node.deps.clear();
            }
            (VerdictKind::Unsat, Outcome::Open) => {
                node.outcome = Outcome::Proven {
                    by: verdict.solver.clone(),
                    time_ms: verdict.wall_time.as_millis() as u64,
                };
                node.deps = deps.iter().filter(|d| *d != id).cloned().collect();
            }
            _ => {}
        }
        self.propagate();
        Ok(())
    }

    /// Attaches a human-readable note to a node, shown in reports.
    pub fn explain(&mut self, id: &PropertyId, text: impl Into<String>) -> Result<(), StatusError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| StatusError::Unknown(id.clone()))?;
        node.explanation = Some(text.into());
        Ok(())
    }

    fn resolved(&self, id: &PropertyId) -> bool {
        // Ids the graph does not track are contracts of prototypes, which
        // are axioms.
        self.nodes.get(id).is_none_or(|n| n.status.is_resolved())
    }

    fn pending(&self, deps: &BTreeSet<PropertyId>) -> BTreeSet<PropertyId> {
        deps.iter().filter(|d| !self.resolved(d)).cloned().collect()
    }

    /// Recomputes every derived status from the recorded outcomes: start
    /// from the weakest status each node can have and upgrade until
    /// nothing changes.
    fn propagate(&mut self) {
        for node in self.nodes.values_mut() {
            node.status = match (node.role, &node.outcome) {
                (Role::Goal, Outcome::Open) => Status::Unknown,
                (Role::Goal, Outcome::Refuted(m)) => Status::Invalid {
                    counterexample: m.clone(),
                },
                (Role::Goal, Outcome::Proven { .. }) | (Role::Lemma, _) if !node.deps.is_empty() => {
                    Status::ValidUnderCondition {
                        pending: node.deps.clone(),
                    }
                }
                (Role::Goal, Outcome::Proven { by, time_ms }) => Status::Proven {
                    by: by.clone(),
                    time_ms: *time_ms,
                },
                (Role::Clause, _) if node.mirrors.is_some() => Status::Unknown,
                _ => continue,
            };
        }
        loop {
            let mut updates: Vec<(PropertyId, Status)> = Vec::new();
            for (id, node) in &self.nodes {
                let next = match (node.role, &node.status) {
                    (Role::Clause, _) => match node.mirrors.as_ref().and_then(|t| self.nodes.get(t)) {
                        Some(t) => t.status.clone(),
                        None => continue,
                    },
                    (_, Status::ValidUnderCondition { .. }) => {
                        let pending = self.pending(&node.deps);
                        match &node.outcome {
                            _ if !pending.is_empty() => Status::ValidUnderCondition { pending },
                            Outcome::Proven { by, time_ms } => Status::Proven {
                                by: by.clone(),
                                time_ms: *time_ms,
                            },
                            _ => Status::Valid,
                        }
                    }
                    _ => continue,
                };
                if next != node.status {
                    updates.push((id.clone(), next));
                }
            }
            if updates.is_empty() {
                break;
            }
            for (id, status) in updates {
                if let Some(n) = self.nodes.get_mut(&id) {
                    n.status = status;
                }
            }
        }
    }

    /// Resolved properties a node's status rests on.
    fn evidence(&self, node: &Node) -> Vec<PropertyId> {
        match (&node.status, &node.mirrors) {
            (Status::Invalid { .. } | Status::Unknown, None) => Vec::new(),
            (_, Some(t)) => vec![t.clone()],
            _ => node.deps.iter().filter(|d| self.resolved(d)).cloned().collect(),
        }
    }

    fn describe(&self, node: &Node) -> String {
        if let Some(e) = &node.explanation {
            return e.clone();
        }
        match (&node.status, node.role) {
            (Status::Unknown, Role::Clause) => "wrapper assert not proved".into(),
            (Status::Unknown, _) => "no proof found".into(),
            (Status::Proven { by, .. }, Role::Clause) => format!("wrapper assert proved by {by}"),
            (Status::Proven { by, .. }, _) => format!("proved by {by}"),
            (Status::Invalid { .. }, Role::Clause) => "wrapper assert has a counterexample".into(),
            (Status::Invalid { .. }, _) => "solver found a counterexample".into(),
            (Status::AssumedValid, Role::Bridge) => "bridge to logic counterpart, valid by construction".into(),
            (Status::AssumedValid, _) => "no wrapper can be built (prototype callee); taken as an axiom".into(),
            (Status::ValidUnderCondition { .. }, Role::Lemma) => "holds once its wrapper goals are proved".into(),
            (Status::ValidUnderCondition { .. }, _) => "proved, relying on properties not yet proved".into(),
            (Status::Valid, Role::Lemma) => "every goal of its wrapper is proved".into(),
            (Status::Valid, Role::Clause) => "wrapper assert is valid".into(),
            (Status::Valid, _) => "proved, and every property it relies on holds".into(),
        }
    }

    /// Report rows sorted by id.
    pub fn consolidated(&self) -> Vec<ReportRow> {
        self.nodes
            .iter()
            .map(|(id, node)| {
                let pending = match &node.status {
                    Status::ValidUnderCondition { pending } => pending.iter().cloned().collect(),
                    _ => Vec::new(),
                };
                let time_ms = match &node.status {
                    Status::Proven { time_ms, .. } => Some(*time_ms),
                    _ => None,
                };
                let counterexample = match &node.status {
                    Status::Invalid { counterexample } => Some(counterexample.iter().cloned().collect()),
                    _ => None,
                };
                ReportRow {
                    id: id.clone(),
                    status: node.status.name().to_string(),
                    pending,
                    evidence: self.evidence(node),
                    time_ms,
                    counterexample,
                    explanation: self.describe(node),
                }
            })
            .collect()
    }
}
