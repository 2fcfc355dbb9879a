//! Conditional play and success statistics for one ordered player pair.
//!
//! A [`ConditionalModel`] answers, for the responder: how often was shot `r`
//! played in answer to the stimulator's shot `s`, how often did that win the
//! point, and what reward did it earn on average. All counts are integers,
//! so a model grown by live updates compares exactly equal to one rebuilt
//! from scratch over the same rallies.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DataError, ModelError};
use crate::matchlog::{validate_outcome, validate_shots, Dataset, Player, PlayerId, RallyOutcome, ShotEvent};
use crate::reward::{tier_at, RewardConfig, RewardTier};
use crate::shot::{LegalityMatrix, ShotId, ShotType, Taxonomy};

pub const MODEL_FORMAT: &str = "rally-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub hp: u64,
    pub mp: u64,
    pub mn: u64,
    pub ln: u64,
    pub neutral: u64,
    /// Instances whose reward window has not closed yet.
    #[serde(default)]
    pub pending: u64,
}

impl TierCounts {
    fn bump(&mut self, tier: Option<RewardTier>) {
        match tier {
            Some(RewardTier::Hp) => self.hp += 1,
            Some(RewardTier::Mp) => self.mp += 1,
            Some(RewardTier::Mn) => self.mn += 1,
            Some(RewardTier::Ln) => self.ln += 1,
            Some(RewardTier::Neutral) => self.neutral += 1,
            None => self.pending += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.hp + self.mp + self.mn + self.ln + self.neutral + self.pending
    }
}

/// Where an observation came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceRef {
    #[serde(rename = "match")]
    pub match_id: String,
    pub rally: String,
    pub index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStats {
    pub tiers: TierCounts,
    pub instances: BTreeSet<InstanceRef>,
}

impl PairStats {
    pub fn n_played(&self) -> u64 {
        self.tiers.total()
    }

    /// Instances labeled as a direct winner or a point set up two shots later.
    pub fn n_point_won(&self) -> u64 {
        self.tiers.hp + self.tiers.mp
    }

    /// Pending instances contribute nothing until their window closes.
    pub fn reward_sum(&self, cfg: &RewardConfig) -> f64 {
        let t = &self.tiers;
        t.hp as f64 * cfg.hp
            + t.mp as f64 * cfg.mp
            + t.mn as f64 * cfg.mn
            + t.ln as f64 * cfg.ln
            + t.neutral as f64 * cfg.neutral
    }
}

/// A rally, complete or in progress, to fold into a model.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub match_id: &'a str,
    pub rally_id: &'a str,
    pub shots: &'a [ShotEvent],
    pub outcome: Option<&'a RallyOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalModel {
    taxonomy: Arc<Taxonomy>,
    responder: Player,
    stimulator: Player,
    rewards: RewardConfig,
    alpha: f64,
    /// Keyed by (response, stimulus).
    pairs: BTreeMap<(ShotId, ShotId), PairStats>,
    /// Rally-opening shots by the responder.
    openers: BTreeMap<ShotId, PairStats>,
    stimulus_totals: BTreeMap<ShotId, u64>,
}

impl ConditionalModel {
    /// Counts every adjacent (stimulus, response) pair in matches between the two players.
    pub fn build(
        d: &Dataset,
        responder: &str,
        stimulator: &str,
        rewards: RewardConfig,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        if responder == stimulator {
            return Err(ModelError::SamePlayer(responder.to_string()));
        }
        let lookup = |id: &str| -> Result<Player, ModelError> {
            if d.matches().is_empty() {
                let id = PlayerId::new(id).map_err(|_| DataError::UnknownPlayer(id.to_string()))?;
                return Ok(d.player(id.as_str()).cloned().unwrap_or(Player { display_name: id.to_string(), id }));
            }
            Ok(d.require_player(id)?.clone())
        };
        let mut model = Self::empty(d.taxonomy().clone(), lookup(responder)?, lookup(stimulator)?, rewards, alpha)?;
        for m in d.matches() {
            if !m.involves(&model.responder.id, &model.stimulator.id) {
                continue;
            }
            for rally in &m.rallies {
                model.count(&Observation {
                    match_id: &m.match_id,
                    rally_id: &rally.rally_id,
                    shots: &rally.shots,
                    outcome: Some(&rally.outcome),
                });
            }
        }
        Ok(model)
    }

    pub fn empty(
        taxonomy: Arc<Taxonomy>,
        responder: Player,
        stimulator: Player,
        rewards: RewardConfig,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        if responder.id == stimulator.id {
            return Err(ModelError::SamePlayer(responder.id.to_string()));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(ModelError::Alpha(alpha));
        }
        if [rewards.hp, rewards.mp, rewards.mn, rewards.ln, rewards.neutral].iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Rewards("values must be finite".into()));
        }
        Ok(Self {
            taxonomy,
            responder,
            stimulator,
            rewards,
            alpha,
            pairs: BTreeMap::new(),
            openers: BTreeMap::new(),
            stimulus_totals: BTreeMap::new(),
        })
    }

    fn count(&mut self, obs: &Observation<'_>) {
        for (t, ev) in obs.shots.iter().enumerate() {
            if ev.actor != self.responder.id {
                continue;
            }
            let tier = tier_at(obs.shots, obs.outcome, t);
            let stats = if t == 0 {
                self.openers.entry(ev.shot).or_default()
            } else {
                let stimulus = obs.shots[t - 1].shot;
                *self.stimulus_totals.entry(stimulus).or_default() += 1;
                self.pairs.entry((ev.shot, stimulus)).or_default()
            };
            stats.tiers.bump(tier);
            stats.instances.insert(InstanceRef {
                match_id: obs.match_id.to_string(),
                rally: obs.rally_id.to_string(),
                index: t,
            });
        }
    }

    /// Returns a new model with `obs` folded in.
    ///
    /// An observation without an outcome counts every responder shot but
    /// leaves the last few labels pending. Apply each rally exactly once to
    /// a model that does not already contain it: to track a rally in
    /// progress, re-apply the growing prefix to the same base model.
    pub fn update_live(&self, obs: &Observation<'_>) -> Result<Self, ModelError> {
        let players = [self.responder.id.clone(), self.stimulator.id.clone()];
        let hard = LegalityMatrix::hard_only(self.taxonomy.clone());
        let invalid = |message: String| {
            ModelError::Data(DataError::Validation { line: None, rally_id: obs.rally_id.to_string(), message })
        };
        validate_shots(obs.shots, &players, &hard).map_err(invalid)?;
        if let Some(outcome) = obs.outcome {
            validate_outcome(obs.shots, outcome, &players).map_err(invalid)?;
        }
        let mut next = self.clone();
        next.count(obs);
        Ok(next)
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn responder(&self) -> &Player {
        &self.responder
    }

    pub fn stimulator(&self) -> &Player {
        &self.stimulator
    }

    pub fn rewards(&self) -> &RewardConfig {
        &self.rewards
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stats(&self, response: ShotId, stimulus: ShotId) -> Option<&PairStats> {
        self.pairs.get(&(response, stimulus))
    }

    pub fn opener_stats(&self, serve: ShotId) -> Option<&PairStats> {
        self.openers.get(&serve)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (ShotId, ShotId, &PairStats)> {
        self.pairs.iter().map(|(&(r, s), st)| (r, s, st))
    }

    /// Responses observed to `stimulus`.
    pub fn stimulus_total(&self, stimulus: ShotId) -> u64 {
        self.stimulus_totals.get(&stimulus).copied().unwrap_or(0)
    }

    /// Stimuli faced at least once, in taxonomy order.
    pub fn observed_stimuli(&self) -> Vec<ShotId> {
        self.stimulus_totals.iter().filter(|(_, &n)| n > 0).map(|(&s, _)| s).collect()
    }

    pub fn support(&self, response: ShotId, stimulus: ShotId) -> u64 {
        self.stats(response, stimulus).map_or(0, PairStats::n_played)
    }

    /// Smoothed P(response | stimulus). Zero for hard-illegal responses.
    pub fn prob(&self, response: ShotId, stimulus: ShotId) -> f64 {
        if !self.taxonomy.is_hard_legal(response, stimulus) {
            return 0.0;
        }
        let legal = self.taxonomy.hard_legal_responses(stimulus).count() as f64;
        let denom = self.stimulus_total(stimulus) as f64 + self.alpha * legal;
        if denom == 0.0 {
            return 0.0;
        }
        (self.support(response, stimulus) as f64 + self.alpha) / denom
    }

    /// Share of instances that won the point. Never smoothed.
    pub fn success_rate(&self, response: ShotId, stimulus: ShotId) -> f64 {
        ratio_success(self.stats(response, stimulus))
    }

    /// Mean reward label over the instances of the pair.
    pub fn total_reward(&self, response: ShotId, stimulus: ShotId) -> f64 {
        ratio_reward(self.stats(response, stimulus), &self.rewards)
    }

    /// P(serve) among the responder's rally openers.
    pub fn opener_prob(&self, serve: ShotId) -> f64 {
        if !self.taxonomy.is_serve(serve) {
            return 0.0;
        }
        let total: u64 = self.openers.values().map(PairStats::n_played).sum();
        let denom = total as f64 + self.alpha * self.taxonomy.serves().count() as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (self.opener_support(serve) as f64 + self.alpha) / denom
    }

    pub fn opener_support(&self, serve: ShotId) -> u64 {
        self.openers.get(&serve).map_or(0, PairStats::n_played)
    }

    pub fn opener_success_rate(&self, serve: ShotId) -> f64 {
        ratio_success(self.openers.get(&serve))
    }

    pub fn opener_total_reward(&self, serve: ShotId) -> f64 {
        ratio_reward(self.openers.get(&serve), &self.rewards)
    }

    /// Best-response utility: P · P_success.
    pub fn utility(&self, response: ShotId, stimulus: ShotId) -> f64 {
        self.prob(response, stimulus) * self.success_rate(response, stimulus)
    }

    /// Reward-weighted utility: P · P_success · R_T.
    pub fn edge_utility(&self, response: ShotId, stimulus: ShotId) -> f64 {
        self.utility(response, stimulus) * self.total_reward(response, stimulus)
    }

    pub fn opener_utility(&self, serve: ShotId) -> f64 {
        self.opener_prob(serve) * self.opener_success_rate(serve)
    }

    pub fn opener_edge_utility(&self, serve: ShotId) -> f64 {
        self.opener_utility(serve) * self.opener_total_reward(serve)
    }

    /// Short digest of players, parameters and counts; equal models share it.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}|{}|{}|{:?}|", self.responder.id, self.stimulator.id, self.alpha, self.rewards));
        for ((r, s), st) in &self.pairs {
            h.update(format!("{}>{}:{:?};", self.taxonomy.name(*s), self.taxonomy.name(*r), st.tiers));
        }
        for (s, st) in &self.openers {
            h.update(format!("^{}:{:?};", self.taxonomy.name(*s), st.tiers));
        }
        hex::encode(&h.finalize()[..6])
    }

    pub fn to_json(&self) -> String {
        let tax = &self.taxonomy;
        let row = |response: ShotId, stimulus: Option<ShotId>, st: &PairStats| PairRow {
            response: tax.name(response).to_string(),
            stimulus: stimulus.map(|s| tax.name(s).to_string()),
            n_played: st.n_played(),
            n_point_won: st.n_point_won(),
            reward_sum: st.reward_sum(&self.rewards),
            tiers: st.tiers,
            instances: st.instances.iter().cloned().collect(),
        };
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            responder: self.responder.clone(),
            stimulator: self.stimulator.clone(),
            alpha: self.alpha,
            rewards: self.rewards,
            taxonomy: tax.shots().to_vec(),
            // Stimulus-major order reads like the recommendation tables.
            pairs: {
                let mut rows: Vec<_> = self.pairs.iter().collect();
                rows.sort_by_key(|(&(r, s), _)| (s, r));
                rows.into_iter().map(|(&(r, s), st)| row(r, Some(s), st)).collect()
            },
            openers: self.openers.iter().map(|(&s, st)| row(s, None, st)).collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!("unexpected format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(ModelError::Format(format!("unsupported version {}", file.version)));
        }
        let taxonomy = Arc::new(Taxonomy::new(file.taxonomy).map_err(|e| ModelError::Format(e.to_string()))?);
        let mut model = Self::empty(taxonomy.clone(), file.responder, file.stimulator, file.rewards, file.alpha)?;
        let parse = |n: &str| taxonomy.parse(n).map_err(|e| ModelError::Format(e.to_string()));
        for rows in [&file.pairs, &file.openers] {
            for row in rows {
                let stats = PairStats { tiers: row.tiers, instances: row.instances.iter().cloned().collect() };
                let consistent = stats.n_played() == row.n_played
                    && stats.n_point_won() == row.n_point_won
                    && stats.instances.len() as u64 == row.n_played;
                if !consistent {
                    return Err(ModelError::Format(format!(
                        "row `{}` / `{}` has inconsistent counts",
                        row.response,
                        row.stimulus.as_deref().unwrap_or("-")
                    )));
                }
                let response = parse(&row.response)?;
                match &row.stimulus {
                    Some(s) => {
                        let stimulus = parse(s)?;
                        if !taxonomy.is_hard_legal(response, stimulus) {
                            return Err(ModelError::Format(format!("illegal pair `{}` / `{s}`", row.response)));
                        }
                        *model.stimulus_totals.entry(stimulus).or_default() += stats.n_played();
                        model.pairs.insert((response, stimulus), stats);
                    }
                    None => {
                        if !taxonomy.is_serve(response) {
                            return Err(ModelError::Format(format!("opener `{}` is not a serve", row.response)));
                        }
                        model.openers.insert(response, stats);
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

fn ratio_success(stats: Option<&PairStats>) -> f64 {
    match stats {
        Some(st) if st.n_played() > 0 => st.n_point_won() as f64 / st.n_played() as f64,
        _ => 0.0,
    }
}

fn ratio_reward(stats: Option<&PairStats>, cfg: &RewardConfig) -> f64 {
    match stats {
        Some(st) if st.n_played() > 0 => st.reward_sum(cfg) / st.n_played() as f64,
        _ => 0.0,
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    responder: Player,
    stimulator: Player,
    alpha: f64,
    rewards: RewardConfig,
    taxonomy: Vec<ShotType>,
    pairs: Vec<PairRow>,
    openers: Vec<PairRow>,
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stimulus: Option<String>,
    n_played: u64,
    n_point_won: u64,
    reward_sum: f64,
    tiers: TierCounts,
    instances: Vec<InstanceRef>,
}

/// The focal player's model and the opponent's, mirrored.
#[derive(Debug, Clone, PartialEq)]
pub struct Matchup {
    pub focal: ConditionalModel,
    pub opponent: ConditionalModel,
}

impl Matchup {
    pub fn new(focal: ConditionalModel, opponent: ConditionalModel) -> Result<Self, ModelError> {
        if focal.responder.id != opponent.stimulator.id || focal.stimulator.id != opponent.responder.id {
            return Err(ModelError::Mismatch(format!(
                "focal model is {} vs {}, opponent model is {} vs {}",
                focal.responder.id, focal.stimulator.id, opponent.responder.id, opponent.stimulator.id
            )));
        }
        if focal.taxonomy != opponent.taxonomy {
            return Err(ModelError::Mismatch("different taxonomies".into()));
        }
        Ok(Self { focal, opponent })
    }

    pub fn build(
        d: &Dataset,
        focal: &str,
        opponent: &str,
        rewards: RewardConfig,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            ConditionalModel::build(d, focal, opponent, rewards, alpha)?,
            ConditionalModel::build(d, opponent, focal, rewards, alpha)?,
        )
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.focal.taxonomy
    }

    pub fn focal_id(&self) -> &PlayerId {
        &self.focal.responder.id
    }

    pub fn opponent_id(&self) -> &PlayerId {
        &self.opponent.responder.id
    }

    pub fn update_live(&self, obs: &Observation<'_>) -> Result<Self, ModelError> {
        Ok(Self { focal: self.focal.update_live(obs)?, opponent: self.opponent.update_live(obs)? })
    }
}
