//! Shot recommendation and rally simulation for two-player racket sports.
//!
//! Rally logs are parsed into a [`Dataset`]. A [`ConditionalModel`] counts how
//! one player answers each shot of the other and how those answers end up
//! scoring. [`best_response`] ranks the next shot; [`simulate`] plays out a
//! rally by solving short lookahead trees for both players.

pub mod config;
pub mod error;
pub mod fixture;
pub mod matchlog;
pub mod model;
pub mod policy;
pub mod ranking;
pub mod recommend;
pub mod reward;
pub mod shot;
pub mod simulate;
pub mod tree;

pub use config::Config;
pub use error::{ConfigError, DataError, ModelError, ShotError, SimError};
pub use matchlog::{Dataset, Match, Player, PlayerId, Rally, RallyOutcome, ShotEvent, Termination};
pub use model::{ConditionalModel, Matchup, Observation};
pub use policy::{PolicyRegistry, ReplyPolicy};
pub use recommend::{best_response, opening_recommendation, predict_opponent, recommendation_table, Recommendation};
pub use reward::{label_rewards, RewardConfig, RewardTier};
pub use shot::{Category, LegalityMatrix, ShotId, Taxonomy};
pub use simulate::{simulate, Rollout, SimConfig};
pub use tree::{backward_induce, expand_tree, GameNode, Induction, NodeValue, Role};
