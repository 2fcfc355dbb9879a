//! Depth-limited extensive-form tree over alternating shots, solved by
//! backward induction.
//!
//! Each edge carries the reward-weighted utility of the shot for the player
//! who made it. The game is not zero-sum: at every choice node the player to
//! act picks the child that maximizes their own accumulated utility.

use serde::{Deserialize, Serialize};

use crate::model::{ConditionalModel, Matchup};
use crate::ranking::better_first;
use crate::shot::{LegalityMatrix, ShotId, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Focal,
    Opponent,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Focal => Role::Opponent,
            Role::Opponent => Role::Focal,
        }
    }
}

/// Accumulated utility of both players.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeValue {
    pub focal: f64,
    pub opponent: f64,
}

impl NodeValue {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Focal => self.focal,
            Role::Opponent => self.opponent,
        }
    }

    pub fn plus(mut self, role: Role, utility: f64) -> Self {
        match role {
            Role::Focal => self.focal += utility,
            Role::Opponent => self.opponent += utility,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameNode {
    /// Player to act here.
    pub agent: Role,
    /// Shot on the edge into this node; `None` before the serve.
    pub incoming: Option<ShotId>,
    /// Utility of `incoming` for the player who made it (`agent.other()`).
    pub incoming_utility: f64,
    pub incoming_support: u64,
    pub depth: usize,
    /// Successors in taxonomy order. Empty at terminal nodes.
    pub children: Vec<GameNode>,
}

impl GameNode {
    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    /// Nodes below the root.
    pub fn descendant_count(&self) -> usize {
        self.children.iter().map(|c| 1 + c.descendant_count()).sum()
    }

    pub fn max_branching(&self) -> usize {
        self.children.iter().map(GameNode::max_branching).max().unwrap_or(0).max(self.children.len())
    }
}

fn model_for(matchup: &Matchup, role: Role) -> &ConditionalModel {
    match role {
        Role::Focal => &matchup.focal,
        Role::Opponent => &matchup.opponent,
    }
}

/// Candidate moves for `role` facing `stimulus`, with edge utility and support.
///
/// Only answers seen at least once are expanded; with no evidence at all
/// every legal answer is offered at zero utility.
pub fn candidate_moves(
    matchup: &Matchup,
    role: Role,
    stimulus: Option<ShotId>,
    matrix: &LegalityMatrix,
) -> Vec<(ShotId, f64, u64)> {
    let m = model_for(matchup, role);
    let all: Vec<ShotId> = match stimulus {
        Some(s) => matrix.legal_responses(s),
        None => m.taxonomy().serves().collect(),
    };
    let scored: Vec<(ShotId, f64, u64)> = all
        .iter()
        .map(|&c| match stimulus {
            Some(s) => (c, m.edge_utility(c, s), m.support(c, s)),
            None => (c, m.opener_edge_utility(c), m.opener_support(c)),
        })
        .filter(|&(_, _, support)| support > 0)
        .collect();
    if scored.is_empty() {
        all.into_iter().map(|c| (c, 0.0, 0)).collect()
    } else {
        scored
    }
}

/// Expands every line of play `depth` shots deep from `root_stimulus`, with
/// `root_agent` to act first.
pub fn expand_tree(
    matchup: &Matchup,
    root_stimulus: Option<ShotId>,
    root_agent: Role,
    depth: usize,
    matrix: &LegalityMatrix,
) -> GameNode {
    fn grow(matchup: &Matchup, node: &mut GameNode, depth: usize, matrix: &LegalityMatrix) {
        if node.depth >= depth {
            return;
        }
        node.children = candidate_moves(matchup, node.agent, node.incoming, matrix)
            .into_iter()
            .map(|(shot, utility, support)| {
                let mut child = GameNode {
                    agent: node.agent.other(),
                    incoming: Some(shot),
                    incoming_utility: utility,
                    incoming_support: support,
                    depth: node.depth + 1,
                    children: Vec::new(),
                };
                grow(matchup, &mut child, depth, matrix);
                child
            })
            .collect();
    }
    let mut root = GameNode {
        agent: root_agent,
        incoming: root_stimulus,
        incoming_utility: 0.0,
        incoming_support: 0,
        depth: 0,
        children: Vec::new(),
    };
    grow(matchup, &mut root, depth, matrix);
    root
}

/// One move on the induced line of play.
#[derive(Debug, Clone, PartialEq)]
pub struct LineStep {
    pub agent: Role,
    pub shot: ShotId,
    pub utility: f64,
    pub support: u64,
    /// Accumulated value from this move to the horizon.
    pub value: NodeValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Induction {
    /// Root agent's choice; `None` for a terminal root.
    pub best: Option<ShotId>,
    pub value: NodeValue,
    /// Induced line from the root to the horizon.
    pub line: Vec<LineStep>,
}

/// Solves the tree leaves-to-root.
///
/// A node's value is its chosen child's value plus the acting player's
/// edge utility for that child. Ties go to the better-supported shot, then
/// to taxonomy order.
pub fn backward_induce(root: &GameNode) -> Induction {
    let mut line = Vec::new();
    let value = solve(root, &mut line);
    Induction { best: line.first().map(|s| s.shot), value, line }
}

fn solve(node: &GameNode, line: &mut Vec<LineStep>) -> NodeValue {
    let mut best: Option<(NodeValue, usize, Vec<LineStep>)> = None;
    for (i, child) in node.children.iter().enumerate() {
        let mut sub = Vec::new();
        let value = solve(child, &mut sub).plus(node.agent, child.incoming_utility);
        let better = match &best {
            None => true,
            Some((bv, bi, _)) => {
                let current = &node.children[*bi];
                better_first(
                    (value.get(node.agent), child.incoming_support, child.incoming.expect("child has a shot")),
                    (bv.get(node.agent), current.incoming_support, current.incoming.expect("child has a shot")),
                )
                .is_lt()
            }
        };
        if better {
            best = Some((value, i, sub));
        }
    }
    match best {
        None => NodeValue::default(),
        Some((value, i, sub)) => {
            let child = &node.children[i];
            line.push(LineStep {
                agent: node.agent,
                shot: child.incoming.expect("child has a shot"),
                utility: child.incoming_utility,
                support: child.incoming_support,
                value,
            });
            line.extend(sub);
            value
        }
    }
}

impl LineStep {
    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "agent": self.agent,
            "shot": tax.name(self.shot),
            "utility": self.utility,
            "support": self.support,
            "value": self.value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shot::Taxonomy;

    fn shot(i: usize) -> ShotId {
        Taxonomy::standard().iter().nth(i).unwrap()
    }

    fn node(agent: Role, s: usize, u: f64, depth: usize, children: Vec<GameNode>) -> GameNode {
        GameNode { agent, incoming: Some(shot(s)), incoming_utility: u, incoming_support: 1, depth, children }
    }

    #[test]
    fn lookahead_beats_greedy() {
        // Focal: A (0.4, then opponent's best reply leaves focal -0.2) vs B (0.1, then +0.3).
        let a = node(
            Role::Opponent,
            2,
            0.4,
            1,
            vec![node(Role::Focal, 3, 0.5, 2, vec![node(Role::Opponent, 4, -0.2, 3, vec![])])],
        );
        let b = node(
            Role::Opponent,
            5,
            0.1,
            1,
            vec![node(Role::Focal, 6, 0.5, 2, vec![node(Role::Opponent, 7, 0.3, 3, vec![])])],
        );
        let root = GameNode {
            agent: Role::Focal,
            incoming: Some(shot(0)),
            incoming_utility: 0.0,
            incoming_support: 0,
            depth: 0,
            children: vec![a, b],
        };
        let ind = backward_induce(&root);
        assert_eq!(ind.best, Some(shot(5)));
        assert!((ind.value.focal - 0.4).abs() < 1e-12);
        assert!((ind.value.opponent - 0.5).abs() < 1e-12);
        assert_eq!(ind.line.len(), 3);
    }

    #[test]
    fn opponent_maximizes_own_utility() {
        // The opponent picks its own best reply.
        let reply_a = node(Role::Focal, 3, 0.9, 2, vec![]);
        let reply_b = node(Role::Focal, 4, 0.1, 2, vec![]);
        let mid = node(Role::Opponent, 2, 0.0, 1, vec![reply_a, reply_b]);
        let root = GameNode {
            agent: Role::Focal,
            incoming: Some(shot(0)),
            incoming_utility: 0.0,
            incoming_support: 0,
            depth: 0,
            children: vec![mid],
        };
        let ind = backward_induce(&root);
        assert_eq!(ind.line[1].shot, shot(3));
        assert_eq!(ind.value.opponent, 0.9);
    }

    #[test]
    fn terminal_root() {
        let root = node(Role::Focal, 0, 0.0, 0, vec![]);
        let ind = backward_induce(&root);
        assert_eq!(ind.best, None);
        assert_eq!(ind.value, NodeValue::default());
    }

    #[test]
    fn ties_prefer_support_then_taxonomy_order() {
        let mut low = node(Role::Opponent, 4, 0.2, 1, vec![]);
        low.incoming_support = 1;
        let mut high = node(Role::Opponent, 9, 0.2, 1, vec![]);
        high.incoming_support = 3;
        let early = node(Role::Opponent, 2, 0.2, 1, vec![]);
        let root = GameNode {
            agent: Role::Focal,
            incoming: Some(shot(0)),
            incoming_utility: 0.0,
            incoming_support: 0,
            depth: 0,
            children: vec![early.clone(), low, high],
        };
        assert_eq!(backward_induce(&root).best, Some(shot(9)));
        let root = GameNode { children: vec![early, node(Role::Opponent, 3, 0.2, 1, vec![])], ..root };
        assert_eq!(backward_induce(&root).best, Some(shot(2)));
    }
}
