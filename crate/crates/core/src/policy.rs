//! Opponent reply policies for rollouts, registered by name.
//!
//! A rollout needs the opponent's answer to each predicted focal shot.
//! Policies are selected at runtime (`--opponent-policy`, config file, or
//! session config) through a [`PolicyRegistry`].

use std::sync::Arc;

use crate::error::SimError;
use crate::model::Matchup;
use crate::ranking::better_first;
use crate::shot::{LegalityMatrix, ShotId};
use crate::tree::{backward_induce, expand_tree, NodeValue, Role};

pub const BEST_OWN_UTILITY: &str = "best-own-utility";
pub const MOST_PROBABLE: &str = "most-probable";

pub struct ReplyContext<'a> {
    pub matchup: &'a Matchup,
    /// The focal shot being answered.
    pub stimulus: ShotId,
    pub depth: usize,
    pub matrix: &'a LegalityMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyMove {
    pub shot: ShotId,
    pub value: NodeValue,
}

pub trait ReplyPolicy: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn reply(&self, ctx: &ReplyContext<'_>) -> PolicyMove;
}

/// The opponent solves its own lookahead tree and plays the induced best shot.
pub struct BestOwnUtility;

impl ReplyPolicy for BestOwnUtility {
    fn name(&self) -> &'static str {
        BEST_OWN_UTILITY
    }

    fn description(&self) -> &'static str {
        "opponent plays its backward-induced best shot"
    }

    fn reply(&self, ctx: &ReplyContext<'_>) -> PolicyMove {
        let tree = expand_tree(ctx.matchup, Some(ctx.stimulus), Role::Opponent, ctx.depth, ctx.matrix);
        let ind = backward_induce(&tree);
        PolicyMove { shot: ind.best.expect("depth >= 1 and legal answers exist"), value: ind.value }
    }
}

/// The opponent repeats its most frequent historical answer.
pub struct MostProbable;

impl ReplyPolicy for MostProbable {
    fn name(&self) -> &'static str {
        MOST_PROBABLE
    }

    fn description(&self) -> &'static str {
        "opponent plays its most frequent answer to the shot"
    }

    fn reply(&self, ctx: &ReplyContext<'_>) -> PolicyMove {
        let m = &ctx.matchup.opponent;
        let s = ctx.stimulus;
        let shot = ctx
            .matrix
            .legal_responses(s)
            .into_iter()
            .min_by(|&a, &b| better_first((m.prob(a, s), m.support(a, s), a), (m.prob(b, s), m.support(b, s), b)))
            .expect("legal answers exist");
        PolicyMove { shot, value: NodeValue::default().plus(Role::Opponent, m.edge_utility(shot, s)) }
    }
}

#[derive(Clone)]
pub struct PolicyRegistry {
    policies: Vec<Arc<dyn ReplyPolicy>>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(BestOwnUtility));
        reg.register(Arc::new(MostProbable));
        reg
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self { policies: Vec::new() }
    }

    /// Adds a policy, replacing any existing one with the same name.
    pub fn register(&mut self, policy: Arc<dyn ReplyPolicy>) {
        self.policies.retain(|p| p.name() != policy.name());
        self.policies.push(policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ReplyPolicy>, SimError> {
        self.policies
            .iter()
            .find(|p| p.name() == name)
            .cloned()
            .ok_or_else(|| SimError::UnknownPolicy { name: name.to_string(), known: self.names().join(", ") })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.policies.iter().map(|p| p.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn ReplyPolicy>> {
        self.policies.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed;

    impl ReplyPolicy for Fixed {
        fn name(&self) -> &'static str {
            MOST_PROBABLE
        }
        fn description(&self) -> &'static str {
            "test double"
        }
        fn reply(&self, ctx: &ReplyContext<'_>) -> PolicyMove {
            PolicyMove { shot: ctx.stimulus, value: NodeValue::default() }
        }
    }

    #[test]
    fn default_registry_lists_both_policies() {
        let reg = PolicyRegistry::default();
        assert_eq!(reg.names(), vec![BEST_OWN_UTILITY, MOST_PROBABLE]);
        assert!(reg.get(BEST_OWN_UTILITY).is_ok());
        let err = reg.get("random").err().unwrap().to_string();
        assert!(err.contains("best-own-utility, most-probable"), "{err}");
    }

    #[test]
    fn register_replaces_by_name() {
        let mut reg = PolicyRegistry::default();
        reg.register(Arc::new(Fixed));
        assert_eq!(reg.names().len(), 2);
        assert_eq!(reg.get(MOST_PROBABLE).unwrap().description(), "test double");
    }
}
