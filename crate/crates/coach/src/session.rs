//! One coaching session: the base dataset, the rallies recorded live, the
//! rally in progress, and models kept in step with all three.
//!
//! A [`Session`] is an immutable value. Every mutation goes through
//! [`Session::apply`] with an [`Event`] and returns a new session, which is
//! what makes replaying an event log reproduce the same state and lets undo
//! restore the previous value exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rally_core::matchlog::{validate_outcome, validate_shots};
use rally_core::model::{Matchup, Observation};
use rally_core::recommend::{opening_recommendation, predict_opponent, recommendation_table};
use rally_core::simulate::{simulate, SimConfig};
use rally_core::tree::{candidate_moves, LineStep};
use rally_core::{
    backward_induce, best_response, expand_tree, Category, Config, Dataset, LegalityMatrix, Match, NodeValue, Player,
    PlayerId, PolicyRegistry, Rally, RallyOutcome, Recommendation, RewardConfig, Role, Rollout, ShotEvent, ShotId,
    Taxonomy, Termination,
};
use serde::{Deserialize, Serialize};

use crate::error::SessionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub k: usize,
    pub depth: usize,
    /// Focal shots predicted by a what-if rollout.
    pub steps: usize,
    pub alpha: f64,
    pub rewards: RewardConfig,
    pub drop_to_smash: bool,
    pub opponent_policy: String,
    pub live_update: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self::from(&Config::default())
    }
}

impl From<&Config> for SessionConfig {
    fn from(c: &Config) -> Self {
        Self {
            k: c.recommend.k,
            depth: c.simulate.depth,
            steps: c.simulate.steps,
            alpha: c.model.alpha,
            rewards: c.rewards,
            drop_to_smash: c.soft_rules.drop_to_smash,
            opponent_policy: c.simulate.opponent_policy.clone(),
            live_update: c.simulate.live_update,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self, registry: &PolicyRegistry) -> Result<(), SessionError> {
        let invalid = |m: String| SessionError::InvalidConfig(m);
        self.rewards.validated().map_err(|e| invalid(e.to_string()))?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.k == 0 || self.depth == 0 || self.steps == 0 {
            return Err(invalid("k, depth and steps must be at least 1".into()));
        }
        registry.get(&self.opponent_policy).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    fn sim_config(&self, step_limit: usize) -> SimConfig {
        SimConfig {
            depth: self.depth,
            step_limit,
            opponent_policy: self.opponent_policy.clone(),
            live_update: self.live_update,
        }
    }
}

/// A state change, as written to the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        created_at: DateTime<Utc>,
        dataset: String,
        dataset_version: String,
        focal: PlayerId,
        opponent: PlayerId,
        config: SessionConfig,
    },
    Shot {
        actor: PlayerId,
        shot: String,
    },
    RallyEnd {
        winner: PlayerId,
        termination: Termination,
    },
    Undo,
}

#[derive(Debug, Clone, PartialEq)]
struct LiveState {
    live: Vec<Rally>,
    buffer: Vec<ShotEvent>,
    /// Points won, indexed focal then opponent.
    score: [u32; 2],
    /// Base data plus completed live rallies.
    committed: Matchup,
    /// `committed` plus the rally in progress.
    current: Matchup,
}

#[derive(Debug)]
struct UndoLink {
    state: Arc<LiveState>,
    prev: Option<Arc<UndoLink>>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub dataset: String,
    pub dataset_version: String,
    pub focal: Player,
    pub opponent: Player,
    pub config: SessionConfig,
    base: Arc<Dataset>,
    matrix: LegalityMatrix,
    state: Arc<LiveState>,
    undo: Option<Arc<UndoLink>>,
    /// Log entries applied, the creation entry included.
    seq: u64,
}

impl Session {
    /// Builds a fresh session from its creation event.
    pub fn create(event: &Event, base: Arc<Dataset>, registry: &PolicyRegistry) -> Result<Session, SessionError> {
        let Event::Created { session_id, created_at, dataset, dataset_version, focal, opponent, config } = event else {
            return Err(SessionError::Log("log does not start with a creation entry".into()));
        };
        if &base.version() != dataset_version {
            return Err(SessionError::DatasetMismatch {
                name: dataset.clone(),
                expected: dataset_version.clone(),
                found: base.version(),
            });
        }
        config.validate(registry)?;
        if focal == opponent {
            return Err(SessionError::InvalidConfig("focal and opponent must differ".into()));
        }
        let player = |id: &PlayerId| -> Result<Player, SessionError> {
            base.player(id.as_str()).cloned().ok_or_else(|| SessionError::UnknownPlayer(id.to_string()))
        };
        let (focal, opponent) = (player(focal)?, player(opponent)?);
        let committed = Matchup::build(&base, focal.id.as_str(), opponent.id.as_str(), config.rewards, config.alpha)?;
        let matrix = LegalityMatrix::new(base.taxonomy().clone()).with_soft_rule(
            Category::Drop,
            Category::Smash,
            config.drop_to_smash,
        );
        Ok(Session {
            id: session_id.clone(),
            created_at: *created_at,
            dataset: dataset.clone(),
            dataset_version: dataset_version.clone(),
            focal,
            opponent,
            config: config.clone(),
            base,
            matrix,
            state: Arc::new(LiveState {
                live: Vec::new(),
                buffer: Vec::new(),
                score: [0, 0],
                current: committed.clone(),
                committed,
            }),
            undo: None,
            seq: 1,
        })
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn buffer(&self) -> &[ShotEvent] {
        &self.state.buffer
    }

    pub fn live_rallies(&self) -> &[Rally] {
        &self.state.live
    }

    pub fn score(&self) -> [u32; 2] {
        self.state.score
    }

    /// Models over base data plus completed live rallies.
    pub fn committed(&self) -> &Matchup {
        &self.state.committed
    }

    /// Models including the rally in progress.
    pub fn current(&self) -> &Matchup {
        &self.state.current
    }

    pub fn matrix(&self) -> &LegalityMatrix {
        &self.matrix
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        self.base.taxonomy()
    }

    /// Soft-rule notes on the rally in progress.
    pub fn soft_warnings(&self) -> Vec<String> {
        validate_shots(&self.state.buffer, &self.players(), &self.matrix).unwrap_or_default()
    }

    pub fn live_match_id(&self) -> String {
        format!("live-{}", self.id)
    }

    fn players(&self) -> [PlayerId; 2] {
        [self.focal.id.clone(), self.opponent.id.clone()]
    }

    /// Resolves `focal`/`opponent` or a player id.
    pub fn resolve_player(&self, who: &str) -> Result<PlayerId, SessionError> {
        match who {
            "focal" => Ok(self.focal.id.clone()),
            "opponent" => Ok(self.opponent.id.clone()),
            id if id == self.focal.id.as_str() => Ok(self.focal.id.clone()),
            id if id == self.opponent.id.as_str() => Ok(self.opponent.id.clone()),
            other => Err(SessionError::UnknownPlayer(other.to_string())),
        }
    }

    fn role_of(&self, id: &PlayerId) -> Role {
        if id == &self.focal.id {
            Role::Focal
        } else {
            Role::Opponent
        }
    }

    /// Whose shot is next: the focal player at the start of a rally, then alternating.
    pub fn to_act(&self) -> Role {
        self.state.buffer.last().map_or(Role::Focal, |e| self.role_of(&e.actor).other())
    }

    /// Applies one logged event, returning the new session.
    pub fn apply(&self, event: &Event) -> Result<Session, SessionError> {
        let state = match event {
            Event::Created { .. } => return Err(SessionError::Log("session already created".into())),
            Event::Shot { actor, shot } => self.with_shot(actor, shot)?,
            Event::RallyEnd { winner, termination } => self.with_rally_end(winner, *termination)?,
            Event::Undo => {
                let link = self.undo.as_ref().ok_or(SessionError::NothingToUndo)?;
                let mut next = self.clone();
                next.state = link.state.clone();
                next.undo = link.prev.clone();
                next.seq += 1;
                return Ok(next);
            }
        };
        let mut next = self.clone();
        next.undo = Some(Arc::new(UndoLink { state: self.state.clone(), prev: self.undo.clone() }));
        next.state = Arc::new(state);
        next.seq += 1;
        Ok(next)
    }

    fn with_shot(&self, actor: &PlayerId, shot: &str) -> Result<LiveState, SessionError> {
        let actor = self.resolve_player(actor.as_str())?;
        let shot = self.base.taxonomy().parse(shot)?;
        let mut buffer = self.state.buffer.clone();
        buffer.push(ShotEvent::new(actor, shot, buffer.len()));
        let hard = LegalityMatrix::hard_only(self.base.taxonomy().clone());
        validate_shots(&buffer, &self.players(), &hard).map_err(SessionError::IllegalShot)?;
        let current = self.state.committed.update_live(&Observation {
            match_id: &self.live_match_id(),
            rally_id: &self.next_rally_id(),
            shots: &buffer,
            outcome: None,
        })?;
        Ok(LiveState { buffer, current, ..(*self.state).clone() })
    }

    fn next_rally_id(&self) -> String {
        format!("L{:04}", self.state.live.len() + 1)
    }

    fn with_rally_end(&self, winner: &PlayerId, termination: Termination) -> Result<LiveState, SessionError> {
        let winner = self.resolve_player(winner.as_str())?;
        let buffer = &self.state.buffer;
        let first = buffer.first().ok_or(SessionError::NoRally)?;
        let outcome = RallyOutcome { winner, termination };
        validate_outcome(buffer, &outcome, &self.players()).map_err(SessionError::BadOutcome)?;
        let rally = Rally {
            rally_id: self.next_rally_id(),
            server: first.actor.clone(),
            shots: buffer.clone(),
            outcome,
            set: None,
        };
        let committed = self.state.committed.update_live(&Observation {
            match_id: &self.live_match_id(),
            rally_id: &rally.rally_id,
            shots: &rally.shots,
            outcome: Some(&rally.outcome),
        })?;
        let mut score = self.state.score;
        score[usize::from(self.role_of(&rally.outcome.winner) == Role::Opponent)] += 1;
        let mut live = self.state.live.clone();
        live.push(rally);
        Ok(LiveState { live, buffer: Vec::new(), score, current: committed.clone(), committed })
    }

    /// The live rallies as a dataset of their own: both players and one match.
    pub fn live_dataset(&self) -> Result<Dataset, SessionError> {
        let mut d = Dataset::empty(self.base.legality().clone())
            .with_player(self.focal.clone())?
            .with_player(self.opponent.clone())?;
        if !self.state.live.is_empty() {
            let mut m = Match::new(self.live_match_id(), self.players(), self.created_at.date_naive());
            m.rallies = self.state.live.clone();
            d = d.add_match(m)?;
        }
        Ok(d)
    }

    /// Base data plus live rallies, for checking against a from-scratch rebuild.
    pub fn combined_dataset(&self) -> Result<Dataset, SessionError> {
        Ok(self.base.merge(&self.live_dataset()?)?)
    }

    pub fn advise(&self) -> Advice {
        let mu = &self.state.current;
        let to_act = self.to_act();
        let stimulus = self.state.buffer.last().map(|e| e.shot);
        let k = self.config.k;
        let recommendation = match (stimulus, to_act) {
            (None, _) => opening_recommendation(&mu.focal, k),
            (Some(s), Role::Focal) => best_response(&mu.focal, s, k, &self.matrix),
            (Some(s), Role::Opponent) => predict_opponent(&mu.opponent, s, k, &self.matrix),
        };
        let ind = backward_induce(&expand_tree(mu, stimulus, to_act, self.config.depth, &self.matrix));
        let responder = if to_act == Role::Focal { &mu.focal } else { &mu.opponent };
        let observations = match stimulus {
            Some(s) => responder.stimulus_total(s),
            None => self.base.taxonomy().serves().map(|s| responder.opener_support(s)).sum(),
        };
        Advice {
            session_id: self.id.clone(),
            seq: self.seq,
            to_act,
            actor: if to_act == Role::Focal { self.focal.id.clone() } else { self.opponent.id.clone() },
            stimulus,
            recommendation,
            depth: self.config.depth,
            best_shot: ind.best,
            value: ind.value,
            line: ind.line,
            observations,
        }
    }

    /// The focal player's value for playing `shot` now, under the lookahead.
    pub fn shot_value(&self, shot: ShotId) -> NodeValue {
        let mu = &self.state.current;
        let stimulus = self.state.buffer.last().map(|e| e.shot);
        let depth = self.config.depth;
        let considered = candidate_moves(mu, Role::Focal, stimulus, &self.matrix);
        let u = considered.iter().find(|c| c.0 == shot).map_or(0.0, |c| c.1);
        let below = backward_induce(&expand_tree(mu, Some(shot), Role::Opponent, depth - 1, &self.matrix));
        below.value.plus(Role::Focal, u)
    }

    /// Rollout after a hypothetical focal shot. Leaves the session untouched.
    pub fn whatif(&self, shot: &str, registry: &PolicyRegistry) -> Result<WhatIf, SessionError> {
        if self.to_act() != Role::Focal {
            return Err(SessionError::IllegalShot("it is the opponent's turn to play".into()));
        }
        let shot = self.base.taxonomy().parse(shot)?;
        let mut seed = self.state.buffer.clone();
        seed.push(ShotEvent::new(self.focal.id.clone(), shot, seed.len()));
        validate_shots(&seed, &self.players(), &self.matrix).map_err(SessionError::IllegalShot)?;
        if let [.., prev, _] = seed.as_slice() {
            if !self.matrix.is_legal_response(shot, prev.shot) {
                return Err(SessionError::IllegalShot(format!(
                    "`{}` is ruled out after `{}` by a soft rule",
                    self.base.taxonomy().name(shot),
                    self.base.taxonomy().name(prev.shot)
                )));
            }
        }
        let focal_in_seed = seed.iter().filter(|e| e.actor == self.focal.id).count();
        let cfg = self.config.sim_config(focal_in_seed + self.config.steps);
        let rollout = simulate(&self.state.current, &seed, &cfg, registry, &self.matrix)?;
        Ok(WhatIf { session_id: self.id.clone(), seq: self.seq, shot, value: self.shot_value(shot), rollout })
    }

    pub fn export(&self) -> Result<Export, SessionError> {
        let tax = self.base.taxonomy();
        let live = self.live_dataset()?;
        let mu = &self.state.committed;
        let mut frequencies = BTreeMap::new();
        for p in [&self.focal.id, &self.opponent.id] {
            let mut counts: BTreeMap<String, u64> = tax.iter().map(|s| (tax.name(s).to_string(), 0)).collect();
            let events = self.state.live.iter().flat_map(|r| &r.shots).chain(&self.state.buffer);
            for e in events.filter(|e| &e.actor == p) {
                *counts.entry(tax.name(e.shot).to_string()).or_default() += 1;
            }
            frequencies.insert(p.to_string(), counts);
        }
        Ok(Export {
            session_id: self.id.clone(),
            rally_log: live.to_log_string(),
            focal_table_csv: recommendation_table(&mu.focal, self.config.k, &self.matrix).to_csv(tax),
            opponent_table_csv: recommendation_table(&mu.opponent, self.config.k, &self.matrix).to_csv(tax),
            frequencies,
            in_progress_shots: self.state.buffer.len(),
        })
    }

    pub fn summary(&self) -> serde_json::Value {
        let tax = self.base.taxonomy();
        serde_json::json!({
            "session_id": self.id,
            "seq": self.seq,
            "created_at": self.created_at,
            "dataset": self.dataset,
            "dataset_version": self.dataset_version,
            "focal": self.focal,
            "opponent": self.opponent,
            "config": self.config,
            "to_act": self.to_act(),
            "buffer": self.state.buffer.iter().map(|e| serde_json::json!({
                "actor": e.actor,
                "shot": tax.name(e.shot),
            })).collect::<Vec<_>>(),
            "live_rallies": self.state.live.len(),
            "score": {
                self.focal.id.to_string(): self.state.score[0],
                self.opponent.id.to_string(): self.state.score[1],
            },
            "models": {
                "focal": self.state.current.focal.fingerprint(),
                "opponent": self.state.current.opponent.fingerprint(),
            },
            "can_undo": self.undo.is_some(),
        })
    }
}

/// Comparison for tests and replay checks: everything but the undo history.
impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.created_at == other.created_at
            && self.dataset == other.dataset
            && self.dataset_version == other.dataset_version
            && self.focal == other.focal
            && self.opponent == other.opponent
            && self.config == other.config
            && self.seq == other.seq
            && self.state == other.state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub session_id: String,
    pub seq: u64,
    pub to_act: Role,
    pub actor: PlayerId,
    pub stimulus: Option<ShotId>,
    pub recommendation: Recommendation,
    pub depth: usize,
    pub best_shot: Option<ShotId>,
    pub value: NodeValue,
    pub line: Vec<LineStep>,
    /// Shots the player to act has answered to this stimulus before.
    pub observations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIf {
    pub session_id: String,
    pub seq: u64,
    pub shot: ShotId,
    pub value: NodeValue,
    pub rollout: Rollout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Export {
    pub session_id: String,
    pub rally_log: String,
    pub focal_table_csv: String,
    pub opponent_table_csv: String,
    /// Shots per player over live rallies and the rally in progress.
    pub frequencies: BTreeMap<String, BTreeMap<String, u64>>,
    pub in_progress_shots: usize,
}

impl Advice {
    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "session_id": self.session_id,
            "seq": self.seq,
            "to_act": self.to_act,
            "actor": self.actor,
            "stimulus": self.stimulus.map(|s| tax.name(s)),
            "recommendation": self.recommendation.to_json(tax),
            "lookahead": {
                "depth": self.depth,
                "best_shot": self.best_shot.map(|s| tax.name(s)),
                "value": self.value,
                "line": self.line.iter().map(|l| l.to_json(tax)).collect::<Vec<_>>(),
            },
            "confidence": {
                "observations": self.observations,
                "support": self.recommendation.ranked.iter().map(|b| b.support).collect::<Vec<_>>(),
            },
        })
    }
}

impl WhatIf {
    pub fn to_json(&self, session: &Session) -> serde_json::Value {
        let tax = session.taxonomy();
        serde_json::json!({
            "session_id": self.session_id,
            "seq": self.seq,
            "shot": tax.name(self.shot),
            "value": self.value,
            "rollout": self.rollout.to_json(tax),
            "table": self.rollout.to_table(tax, &session.focal.display_name, &session.opponent.display_name),
        })
    }
}
