//! Reward tiers and per-shot reward labeling.
//!
//! Each shot a player makes is labeled by what happens within the next two
//! shots of the rally: a direct winner, a point set up for two shots later,
//! a weak shot punished by the reply, or a direct error. Everything else is
//! neutral.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::matchlog::{PlayerId, Rally, RallyOutcome, ShotEvent, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub hp: f64,
    pub mp: f64,
    pub mn: f64,
    pub ln: f64,
    #[serde(default)]
    pub neutral: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { hp: 5.0, mp: 2.0, mn: -2.0, ln: -5.0, neutral: 0.0 }
    }
}

impl RewardConfig {
    /// Checks the tier ordering `hp > mp > neutral > mn >= ln`.
    pub fn validated(self) -> Result<Self, ModelError> {
        let all = [self.hp, self.mp, self.mn, self.ln, self.neutral];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Rewards("values must be finite".into()));
        }
        if !(self.hp > self.mp && self.mp > self.neutral && self.neutral > self.mn && self.mn >= self.ln) {
            return Err(ModelError::Rewards(format!(
                "expected hp > mp > neutral > mn >= ln, got hp={} mp={} neutral={} mn={} ln={}",
                self.hp, self.mp, self.neutral, self.mn, self.ln
            )));
        }
        Ok(self)
    }

    /// Every tier worth 1. Used to check that the reward-weighted utility
    /// collapses to the plain best-response utility; not a valid tier ordering.
    pub fn unit() -> Self {
        Self { hp: 1.0, mp: 1.0, mn: 1.0, ln: 1.0, neutral: 1.0 }
    }

    /// Parses `hp,mp,mn,ln` (neutral stays 0).
    pub fn parse_list(s: &str) -> Result<Self, ModelError> {
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| ModelError::Rewards(format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let [hp, mp, mn, ln] = values.as_slice() else {
            return Err(ModelError::Rewards(format!("expected 4 values `hp,mp,mn,ln`, got `{s}`")));
        };
        RewardConfig { hp: *hp, mp: *mp, mn: *mn, ln: *ln, neutral: 0.0 }.validated()
    }

    pub fn value(&self, tier: RewardTier) -> f64 {
        match tier {
            RewardTier::Hp => self.hp,
            RewardTier::Mp => self.mp,
            RewardTier::Mn => self.mn,
            RewardTier::Ln => self.ln,
            RewardTier::Neutral => self.neutral,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [self.hp, self.mp, self.mn, self.ln, self.neutral].iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardTier {
    Hp,
    Mp,
    Mn,
    Ln,
    Neutral,
}

impl RewardTier {
    /// Tiers that count as the shot having won the point.
    pub fn is_success(self) -> bool {
        matches!(self, RewardTier::Hp | RewardTier::Mp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardLabel {
    pub tier: RewardTier,
    pub value: f64,
}

/// Tier of the shot at `t`, or `None` while the two-shot window after it is
/// still open (the rally has no outcome yet and fewer than three shots follow).
pub fn tier_at(shots: &[ShotEvent], outcome: Option<&RallyOutcome>, t: usize) -> Option<RewardTier> {
    let len = shots.len();
    debug_assert!(t < len);
    let Some(outcome) = outcome else {
        return (t + 3 < len).then_some(RewardTier::Neutral);
    };
    let actor = &shots[t].actor;
    let last = len - 1;
    let decisive = outcome.termination == Termination::WinnerShot;
    let tier = if t == last {
        if decisive {
            RewardTier::Hp
        } else {
            RewardTier::Ln
        }
    } else if t + 1 == last && decisive && &outcome.winner != actor {
        RewardTier::Mn
    } else if t + 2 == last && decisive && &outcome.winner == actor {
        RewardTier::Mp
    } else {
        RewardTier::Neutral
    };
    Some(tier)
}

/// One label per shot played by `focal`, in rally order.
pub fn label_rewards(rally: &Rally, focal: &PlayerId, cfg: &RewardConfig) -> Vec<RewardLabel> {
    (0..rally.shots.len())
        .filter(|&t| &rally.shots[t].actor == focal)
        .map(|t| {
            let tier = tier_at(&rally.shots, Some(&rally.outcome), t).expect("complete rally");
            RewardLabel { tier, value: cfg.value(tier) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchlog::rally_from_names;
    use crate::shot::Taxonomy;

    fn tiers(shots: &[(&str, &str)], winner: &str, end: Termination, focal: &str) -> Vec<RewardTier> {
        let tax = Taxonomy::standard();
        let rally = rally_from_names(&tax, "r", shots, winner, end).unwrap();
        label_rewards(&rally, &PlayerId::new(focal).unwrap(), &RewardConfig::default())
            .into_iter()
            .map(|l| l.tier)
            .collect()
    }

    #[test]
    fn direct_winner_is_hp() {
        let t = tiers(
            &[("p", "backhand_short_serve"), ("o", "forehand_lift"), ("p", "jump_smash")],
            "p",
            Termination::WinnerShot,
            "p",
        );
        assert_eq!(t, vec![RewardTier::Mp, RewardTier::Hp]);
    }

    #[test]
    fn setup_two_shots_before_winner_is_mp() {
        let t = tiers(
            &[
                ("o", "backhand_long_serve"),
                ("p", "forehand_lift"),
                ("o", "backhand_short_clear"),
                ("p", "forehand_kill"),
            ],
            "p",
            Termination::WinnerShot,
            "p",
        );
        assert_eq!(t, vec![RewardTier::Mp, RewardTier::Hp]);
    }

    #[test]
    fn punished_shot_is_mn_and_error_is_ln() {
        let t = tiers(
            &[("p", "backhand_short_serve"), ("o", "forehand_lift"), ("p", "forehand_drop"), ("o", "forehand_kill")],
            "o",
            Termination::WinnerShot,
            "p",
        );
        assert_eq!(t, vec![RewardTier::Neutral, RewardTier::Mn]);
        let t = tiers(
            &[("p", "backhand_short_serve"), ("o", "forehand_lift"), ("p", "forehand_drop")],
            "o",
            Termination::UnforcedError,
            "p",
        );
        assert_eq!(t, vec![RewardTier::Neutral, RewardTier::Ln]);
    }

    #[test]
    fn far_from_outcome_is_neutral() {
        let t = tiers(
            &[
                ("p", "backhand_short_serve"),
                ("o", "forehand_lift"),
                ("p", "forehand_long_clear"),
                ("o", "forehand_drop"),
                ("p", "backhand_lift"),
                ("o", "jump_smash"),
            ],
            "o",
            Termination::WinnerShot,
            "p",
        );
        assert_eq!(t, vec![RewardTier::Neutral, RewardTier::Neutral, RewardTier::Mn]);
    }

    #[test]
    fn label_values_follow_config() {
        let cfg = RewardConfig::default();
        assert_eq!(cfg.value(RewardTier::Hp), 5.0);
        assert_eq!(cfg.value(RewardTier::Mp), 2.0);
        assert_eq!(cfg.value(RewardTier::Mn), -2.0);
        assert_eq!(cfg.value(RewardTier::Ln), -5.0);
        assert_eq!(cfg.value(RewardTier::Neutral), 0.0);
    }

    #[test]
    fn open_window_is_pending() {
        let tax = Taxonomy::standard();
        let r = rally_from_names(
            &tax,
            "r",
            &[("p", "backhand_short_serve"), ("o", "forehand_lift"), ("p", "forehand_drop"), ("o", "forehand_drop")],
            "p",
            Termination::WinnerShot,
        )
        .unwrap();
        assert_eq!(tier_at(&r.shots, None, 0), Some(RewardTier::Neutral));
        assert_eq!(tier_at(&r.shots, None, 1), None);
        assert_eq!(tier_at(&r.shots, None, 3), None);
    }

    #[test]
    fn reward_validation() {
        assert!(RewardConfig::default().validated().is_ok());
        assert!(RewardConfig::unit().validated().is_err());
        assert!(RewardConfig::parse_list("5,2,-2,-5").is_ok());
        assert!(RewardConfig::parse_list("5,2,-2").is_err());
        assert!(RewardConfig::parse_list("2,5,-2,-5").is_err());
    }
}
