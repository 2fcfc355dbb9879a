//! Rally rollouts: from a seed prefix, repeatedly solve a short lookahead
//! tree for the focal player's next shot, let the opponent answer through
//! its reply policy, and keep going until the step limit.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::matchlog::{validate_shots, PlayerId, ShotEvent};
use crate::model::{Matchup, Observation};
use crate::policy::{PolicyRegistry, ReplyContext, BEST_OWN_UTILITY};
use crate::recommend::render_grid;
use crate::shot::{LegalityMatrix, ShotId, Taxonomy};
use crate::tree::{backward_induce, expand_tree, Induction, NodeValue, Role};

pub const SIMULATION_MATCH: &str = "simulation";
pub const SIMULATION_RALLY: &str = "rollout";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Lookahead depth in shots. 3 = focal, opponent, focal.
    pub depth: usize,
    /// Focal shots in the finished line, seed included. The opponent's
    /// reply to the last one is still predicted.
    pub step_limit: usize,
    pub opponent_policy: String,
    /// Fold predicted shots back into the models as the rollout proceeds.
    pub live_update: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { depth: 3, step_limit: 20, opponent_policy: BEST_OWN_UTILITY.to_string(), live_update: false }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.depth < 1 {
            return Err(SimError::Config("depth must be at least 1".into()));
        }
        if self.step_limit < 1 {
            return Err(SimError::Config("step limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutMove {
    pub agent: Role,
    pub shot: ShotId,
    /// Value of the decision when it was made.
    pub value: NodeValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub focal: PlayerId,
    pub opponent: PlayerId,
    pub seed: Vec<ShotEvent>,
    pub moves: Vec<RolloutMove>,
    pub step_limit: usize,
}

/// The focal player's induced choice against `stimulus`.
pub fn choose_focal(matchup: &Matchup, stimulus: Option<ShotId>, depth: usize, matrix: &LegalityMatrix) -> Induction {
    backward_induce(&expand_tree(matchup, stimulus, Role::Focal, depth, matrix))
}

pub fn simulate(
    matchup: &Matchup,
    seed: &[ShotEvent],
    cfg: &SimConfig,
    registry: &PolicyRegistry,
    matrix: &LegalityMatrix,
) -> Result<Rollout, SimError> {
    cfg.validate()?;
    let policy = registry.get(&cfg.opponent_policy)?;
    let focal = matchup.focal_id().clone();
    let opponent = matchup.opponent_id().clone();
    if seed.is_empty() {
        return Err(SimError::Seed("seed has no shots".into()));
    }
    let hard = LegalityMatrix::hard_only(matchup.taxonomy().clone());
    validate_shots(seed, &[focal.clone(), opponent.clone()], &hard).map_err(SimError::Seed)?;

    let mut history: Vec<ShotEvent> = seed.to_vec();
    let mut moves = Vec::new();
    let mut focal_steps = seed.iter().filter(|e| e.actor == focal).count();
    loop {
        let last = history.last().expect("seed is non-empty");
        let last_by_focal = last.actor == focal;
        if !last_by_focal && focal_steps >= cfg.step_limit {
            break;
        }
        let working;
        let current = if cfg.live_update {
            working = matchup.update_live(&Observation {
                match_id: SIMULATION_MATCH,
                rally_id: SIMULATION_RALLY,
                shots: &history,
                outcome: None,
            })?;
            &working
        } else {
            matchup
        };
        let next = if last_by_focal {
            let reply = policy.reply(&ReplyContext { matchup: current, stimulus: last.shot, depth: cfg.depth, matrix });
            RolloutMove { agent: Role::Opponent, shot: reply.shot, value: reply.value }
        } else {
            let ind = choose_focal(current, Some(last.shot), cfg.depth, matrix);
            focal_steps += 1;
            RolloutMove { agent: Role::Focal, shot: ind.best.expect("depth >= 1"), value: ind.value }
        };
        let actor = if next.agent == Role::Focal { focal.clone() } else { opponent.clone() };
        history.push(ShotEvent::new(actor, next.shot, history.len()));
        moves.push(next);
    }
    Ok(Rollout { focal, opponent, seed: seed.to_vec(), moves, step_limit: cfg.step_limit })
}

/// Parses `p:shot,o:shot,...` (roles) or `player_id:shot` tokens into a seed.
pub fn parse_seed(text: &str, matchup: &Matchup) -> Result<Vec<ShotEvent>, SimError> {
    let tax = matchup.taxonomy();
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, token)| {
            let (who, shot) =
                token.split_once(':').ok_or_else(|| SimError::Seed(format!("token `{token}` must be `p:shot`")))?;
            let actor = match who {
                "p" => matchup.focal_id().clone(),
                "o" => matchup.opponent_id().clone(),
                id if id == matchup.focal_id().as_str() => matchup.focal_id().clone(),
                id if id == matchup.opponent_id().as_str() => matchup.opponent_id().clone(),
                other => return Err(SimError::Seed(format!("unknown actor `{other}` (use p or o)"))),
            };
            let shot = tax.parse(shot).map_err(|e| SimError::Seed(e.to_string()))?;
            Ok(ShotEvent::new(actor, shot, i))
        })
        .collect()
}

impl Rollout {
    /// Seed and predicted shots as one sequence, with the move index for predictions.
    pub fn sequence(&self) -> Vec<(Role, ShotId, Option<usize>)> {
        let role = |a: &PlayerId| if a == &self.focal { Role::Focal } else { Role::Opponent };
        self.seed
            .iter()
            .map(|e| (role(&e.actor), e.shot, None))
            .chain(self.moves.iter().enumerate().map(|(i, m)| (m.agent, m.shot, Some(i))))
            .collect()
    }

    pub fn focal_predictions(&self) -> usize {
        self.moves.iter().filter(|m| m.agent == Role::Focal).count()
    }

    /// Rows of (focal shot, opponent shot) in play order.
    pub fn rows(&self) -> Vec<(Option<ShotId>, Option<ShotId>)> {
        let mut rows: Vec<(Option<ShotId>, Option<ShotId>)> = Vec::new();
        for (agent, shot, _) in self.sequence() {
            match agent {
                Role::Focal => rows.push((Some(shot), None)),
                Role::Opponent => match rows.last_mut() {
                    Some(row) if row.1.is_none() => row.1 = Some(shot),
                    _ => rows.push((None, Some(shot))),
                },
            }
        }
        rows
    }

    /// Shot-number table with one column per player.
    pub fn to_table(&self, tax: &Taxonomy, focal_name: &str, opponent_name: &str) -> String {
        let seed: Vec<String> = self.seed.iter().map(|e| format!("{}:{}", e.actor, tax.name(e.shot))).collect();
        let header = vec!["Shot number".to_string(), format!("{focal_name}'s shot"), format!("{opponent_name}'s shot")];
        let body: Vec<Vec<String>> = self
            .rows()
            .iter()
            .enumerate()
            .map(|(i, (p, o))| {
                vec![
                    (i + 1).to_string(),
                    p.map_or("-".to_string(), |s| tax.name(s).to_string()),
                    o.map_or("-".to_string(), |s| tax.name(s).to_string()),
                ]
            })
            .collect();
        format!("seed: {}\n{}", seed.join(","), render_grid(&header, &body))
    }

    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "focal": self.focal,
            "opponent": self.opponent,
            "step_limit": self.step_limit,
            "seed": self.seed.iter().map(|e| serde_json::json!({
                "actor": e.actor,
                "shot": tax.name(e.shot),
            })).collect::<Vec<_>>(),
            "moves": self.moves.iter().map(|m| serde_json::json!({
                "agent": m.agent,
                "shot": tax.name(m.shot),
                "value": m.value,
            })).collect::<Vec<_>>(),
        })
    }
}
