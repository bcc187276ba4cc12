//! The proof tree: a DAG of goals deduplicated by goal text.
//!
//! Distinct tactic applications can reach the same goal, so nodes are shared
//! rather than duplicated: there is exactly one node per goal text. A
//! success edge records which children (residual subgoals) it produced; an
//! error edge records the failure message. A node is proved when some
//! success edge out of it has every child proved, which for an edge with no
//! children holds vacuously: a tactic that closes a goal outright proves it.
//!
//! Proved status spreads monotonically. Marking a node proved walks its
//! incoming edges and re-checks each source; sharing means one proof can
//! close branches in several places at once. Because the status only moves
//! toward Proved and only when an edge's children are all already proved, a
//! goal reachable from itself cannot prove itself through that cycle.
//!
//! [`verify_witness`] recomputes provability from the edge structure alone,
//! as a least fixpoint, without reading any stored status. It is
//! deliberately separate from the incremental propagation so the two can
//! check each other.

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Not yet expanded; eligible for the frontier.
    Open,
    /// Expanded with at least one success edge, not yet proved.
    Expanded,
    /// Some success edge out of this node has all children proved.
    Proved,
    /// Expanded and every tactic errored (or none were proposed).
    Failed,
}

#[derive(Debug, Clone)]
pub struct ProofNode {
    pub goal_id: String,
    pub goal_text: String,
    /// Best cumulative log-probability of any path reaching this goal.
    pub cum_logprob: f64,
    pub status: NodeStatus,
    in_edges: Vec<EdgeId>,
    out_edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeOutcome {
    Error(String),
    /// Node ids of the residual subgoals; empty closes the source goal.
    Children(Vec<NodeId>),
}

#[derive(Debug, Clone)]
pub struct ProofEdge {
    pub source: NodeId,
    pub tactic_text: String,
    pub logit: f64,
    pub time_s: f64,
    pub outcome: EdgeOutcome,
}

/// Result of attaching one subgoal during [`ProofTree::add_success_edge`].
#[derive(Debug, Clone, Copy)]
pub struct ChildUpdate {
    pub node: NodeId,
    /// A node for this goal text did not exist before.
    pub created: bool,
    /// The node existed and this path raised its cumulative log-probability.
    pub raised: bool,
}

#[derive(Debug, Clone)]
pub struct ProofTree {
    nodes: Vec<ProofNode>,
    edges: Vec<ProofEdge>,
    by_goal: std::collections::HashMap<String, NodeId>,
    root: NodeId,
}

impl ProofTree {
    /// A tree holding just the open root goal, with log-probability 0.
    pub fn new(root_goal_id: &str, root_goal_text: &str) -> Self {
        let root = ProofNode {
            goal_id: root_goal_id.to_string(),
            goal_text: root_goal_text.to_string(),
            cum_logprob: 0.0,
            status: NodeStatus::Open,
            in_edges: Vec::new(),
            out_edges: Vec::new(),
        };
        let mut by_goal = std::collections::HashMap::new();
        by_goal.insert(root_goal_text.to_string(), 0);
        Self {
            nodes: vec![root],
            edges: Vec::new(),
            by_goal,
            root: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &ProofNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ProofNode> {
        self.nodes.iter()
    }

    pub fn edge(&self, id: EdgeId) -> &ProofEdge {
        &self.edges[id]
    }

    pub fn edges(&self) -> impl Iterator<Item = &ProofEdge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn status(&self, id: NodeId) -> NodeStatus {
        self.nodes[id].status
    }

    pub fn is_proved(&self, id: NodeId) -> bool {
        self.nodes[id].status == NodeStatus::Proved
    }

    /// The node for a goal text, if one exists.
    pub fn find(&self, goal_text: &str) -> Option<NodeId> {
        self.by_goal.get(goal_text).copied()
    }

    /// Records a failed tactic application.
    pub fn add_error_edge(
        &mut self,
        source: NodeId,
        tactic_text: &str,
        logit: f64,
        time_s: f64,
        message: &str,
    ) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(ProofEdge {
            source,
            tactic_text: tactic_text.to_string(),
            logit,
            time_s,
            outcome: EdgeOutcome::Error(message.to_string()),
        });
        self.nodes[source].out_edges.push(id);
        id
    }

    /// Records a successful tactic application, merging each subgoal into
    /// the existing node for its text or creating a fresh open node.
    ///
    /// A merged node keeps the maximum cumulative log-probability over all
    /// paths that reached it; priorities already handed out downstream are
    /// not revisited. New nodes inherit `source`'s goal-id root with their
    /// node index appended. If every child is already proved (vacuously so
    /// for no subgoals), the source is proved on the spot.
    pub fn add_success_edge(
        &mut self,
        source: NodeId,
        tactic_text: &str,
        logit: f64,
        time_s: f64,
        subgoals: &[String],
    ) -> (EdgeId, Vec<ChildUpdate>) {
        let child_cum = self.nodes[source].cum_logprob + logit;
        let mut children = Vec::with_capacity(subgoals.len());
        let mut updates = Vec::new();
        for text in subgoals {
            match self.by_goal.get(text) {
                Some(&id) => {
                    let raised = child_cum > self.nodes[id].cum_logprob;
                    if raised {
                        self.nodes[id].cum_logprob = child_cum;
                        updates.push(ChildUpdate {
                            node: id,
                            created: false,
                            raised: true,
                        });
                    }
                    children.push(id);
                }
                None => {
                    let id = self.nodes.len();
                    let goal_id = format!("{}/g{}", self.nodes[self.root].goal_id, id);
                    self.nodes.push(ProofNode {
                        goal_id,
                        goal_text: text.clone(),
                        cum_logprob: child_cum,
                        status: NodeStatus::Open,
                        in_edges: Vec::new(),
                        out_edges: Vec::new(),
                    });
                    self.by_goal.insert(text.clone(), id);
                    children.push(id);
                    updates.push(ChildUpdate {
                        node: id,
                        created: true,
                        raised: false,
                    });
                }
            }
        }
        let eid = self.edges.len();
        self.edges.push(ProofEdge {
            source,
            tactic_text: tactic_text.to_string(),
            logit,
            time_s,
            outcome: EdgeOutcome::Children(children.clone()),
        });
        self.nodes[source].out_edges.push(eid);
        for &c in &children {
            if self.nodes[c].in_edges.last() != Some(&eid) {
                self.nodes[c].in_edges.push(eid);
            }
        }
        if children
            .iter()
            .all(|&c| self.nodes[c].status == NodeStatus::Proved)
        {
            self.propagate_proved(source);
        }
        (eid, updates)
    }

    /// Marks `node` proved and propagates: any source whose success edge now
    /// has all children proved becomes proved too, to a fixpoint. Proved is
    /// final; re-proving is a no-op.
    pub fn propagate_proved(&mut self, node: NodeId) {
        let mut work = vec![node];
        while let Some(id) = work.pop() {
            if self.nodes[id].status == NodeStatus::Proved {
                continue;
            }
            self.nodes[id].status = NodeStatus::Proved;
            let incoming = self.nodes[id].in_edges.clone();
            for eid in incoming {
                let source = self.edges[eid].source;
                if self.nodes[source].status == NodeStatus::Proved {
                    continue;
                }
                if let EdgeOutcome::Children(ch) = &self.edges[eid].outcome {
                    if ch
                        .iter()
                        .all(|&c| self.nodes[c].status == NodeStatus::Proved)
                    {
                        work.push(source);
                    }
                }
            }
        }
    }

    /// Settles a node's status after its expansion ran: Proved stays,
    /// otherwise Expanded if any tactic succeeded, Failed if none did.
    pub fn finalize_expansion(&mut self, id: NodeId) {
        if self.nodes[id].status == NodeStatus::Proved {
            return;
        }
        let any_success = self.nodes[id]
            .out_edges
            .iter()
            .any(|&e| matches!(self.edges[e].outcome, EdgeOutcome::Children(_)));
        self.nodes[id].status = if any_success {
            NodeStatus::Expanded
        } else {
            NodeStatus::Failed
        };
    }

    #[cfg(test)]
    pub(crate) fn force_status(&mut self, id: NodeId, status: NodeStatus) {
        self.nodes[id].status = status;
    }
}

/// Checks from the edge structure alone whether the root goal is provable.
///
/// Computes the least fixpoint of "a node is provable if some success edge
/// out of it has all children provable" by repeated passes, never reading a
/// stored status. Cycles cannot satisfy the rule, so a goal is never counted
/// as proving itself.
pub fn verify_witness(tree: &ProofTree) -> bool {
    let mut provable = vec![false; tree.node_count()];
    let mut changed = true;
    while changed {
        changed = false;
        for edge in tree.edges() {
            if provable[edge.source] {
                continue;
            }
            if let EdgeOutcome::Children(ch) = &edge.outcome {
                if ch.iter().all(|&c| provable[c]) {
                    provable[edge.source] = true;
                    changed = true;
                }
            }
        }
    }
    provable[tree.root()]
}
