//! Shot taxonomy and the stimulus/response legality relation.
//!
//! The taxonomy is data, not code: the bundled table in `data/taxonomy.csv`
//! is the default, and a replacement table with extra shots can be loaded
//! at runtime. Shots are referred to everywhere by [`ShotId`], a compact
//! index into the taxonomy whose ordering is the canonical output order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::ShotError;

const BUNDLED_TAXONOMY: &str = include_str!("../data/taxonomy.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Serve,
    Drop,
    Kill,
    Smash,
    Clear,
    Drive,
    Lift,
    Block,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Serve,
        Category::Drop,
        Category::Kill,
        Category::Smash,
        Category::Clear,
        Category::Drive,
        Category::Lift,
        Category::Block,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Serve => "serve",
            Category::Drop => "drop",
            Category::Kill => "kill",
            Category::Smash => "smash",
            Category::Clear => "clear",
            Category::Drive => "drive",
            Category::Lift => "lift",
            Category::Block => "block",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown shot category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Forehand,
    Backhand,
    Neutral,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Forehand => "forehand",
            Side::Backhand => "backhand",
            Side::Neutral => "neutral",
        }
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forehand" => Ok(Side::Forehand),
            "backhand" => Ok(Side::Backhand),
            "neutral" => Ok(Side::Neutral),
            other => Err(format!("unknown shot side `{other}`")),
        }
    }
}

/// Index of a shot within its [`Taxonomy`]. Ordering follows taxonomy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShotId(u8);

impl ShotId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One entry of the taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotType {
    pub id: String,
    pub category: Category,
    pub side: Side,
}

/// Closed, ordered set of shot types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    shots: Vec<ShotType>,
    by_name: HashMap<String, ShotId>,
}

impl Taxonomy {
    /// The bundled 21-shot badminton taxonomy.
    pub fn standard() -> Arc<Taxonomy> {
        static STANDARD: OnceLock<Arc<Taxonomy>> = OnceLock::new();
        STANDARD
            .get_or_init(|| Arc::new(Taxonomy::from_csv(BUNDLED_TAXONOMY).expect("bundled taxonomy is valid")))
            .clone()
    }

    /// Parses a `id,category,side` table. `#` lines and blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Taxonomy, ShotError> {
        let mut shots = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [id, category, side] = fields.as_slice() else {
                return Err(ShotError::Taxonomy(format!("line {}: expected `id,category,side`", lineno + 1)));
            };
            let category = category.parse().map_err(|e| ShotError::Taxonomy(format!("line {}: {e}", lineno + 1)))?;
            let side = side.parse().map_err(|e| ShotError::Taxonomy(format!("line {}: {e}", lineno + 1)))?;
            shots.push(ShotType { id: id.to_string(), category, side });
        }
        Taxonomy::new(shots)
    }

    pub fn new(shots: Vec<ShotType>) -> Result<Taxonomy, ShotError> {
        if shots.is_empty() {
            return Err(ShotError::Taxonomy("taxonomy is empty".into()));
        }
        if shots.len() > u8::MAX as usize {
            return Err(ShotError::Taxonomy("too many shot types".into()));
        }
        let mut by_name = HashMap::new();
        for (i, shot) in shots.iter().enumerate() {
            let valid_name = !shot.id.is_empty()
                && shot.id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !valid_name {
                return Err(ShotError::Taxonomy(format!("invalid shot id `{}`", shot.id)));
            }
            if by_name.insert(shot.id.clone(), ShotId(i as u8)).is_some() {
                return Err(ShotError::Taxonomy(format!("duplicate shot id `{}`", shot.id)));
            }
        }
        let taxonomy = Taxonomy { shots, by_name };
        if !taxonomy.iter().any(|s| taxonomy.category(s) == Category::Serve) {
            return Err(ShotError::Taxonomy("taxonomy has no serve".into()));
        }
        // Every stimulus needs at least one hard-legal answer.
        for stimulus in taxonomy.iter() {
            if !taxonomy.iter().any(|r| taxonomy.is_hard_legal(r, stimulus)) {
                return Err(ShotError::Taxonomy(format!("shot `{}` has no legal response", taxonomy.name(stimulus))));
            }
        }
        Ok(taxonomy)
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// All shots in taxonomy order.
    pub fn iter(&self) -> impl Iterator<Item = ShotId> + '_ {
        (0..self.shots.len()).map(|i| ShotId(i as u8))
    }

    pub fn parse(&self, name: &str) -> Result<ShotId, ShotError> {
        self.by_name.get(name).copied().ok_or_else(|| ShotError::UnknownShot {
            name: name.to_string(),
            valid: self.shots.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join(", "),
        })
    }

    pub fn get(&self, id: ShotId) -> &ShotType {
        &self.shots[id.index()]
    }

    pub fn name(&self, id: ShotId) -> &str {
        &self.shots[id.index()].id
    }

    pub fn category(&self, id: ShotId) -> Category {
        self.shots[id.index()].category
    }

    pub fn is_serve(&self, id: ShotId) -> bool {
        self.category(id) == Category::Serve
    }

    pub fn serves(&self) -> impl Iterator<Item = ShotId> + '_ {
        self.iter().filter(|&s| self.is_serve(s))
    }

    pub fn shots(&self) -> &[ShotType] {
        &self.shots
    }

    /// Hard rules only: no serve as a response, no smash off a smash, no
    /// block off a block.
    pub fn is_hard_legal(&self, response: ShotId, stimulus: ShotId) -> bool {
        let r = self.category(response);
        let s = self.category(stimulus);
        if r == Category::Serve {
            return false;
        }
        !(r == s && matches!(r, Category::Smash | Category::Block))
    }

    pub fn hard_legal_responses(&self, stimulus: ShotId) -> impl Iterator<Item = ShotId> + '_ {
        self.iter().filter(move |&r| self.is_hard_legal(r, stimulus))
    }
}

/// Hard legality plus a configurable set of soft (stimulus, response)
/// category bans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalityMatrix {
    taxonomy: Arc<Taxonomy>,
    soft: BTreeSet<(Category, Category)>,
}

/// The default-on soft rule: drops are not smashed.
pub const DROP_TO_SMASH: (Category, Category) = (Category::Drop, Category::Smash);

impl LegalityMatrix {
    /// Hard rules plus the default soft rule set.
    pub fn new(taxonomy: Arc<Taxonomy>) -> Self {
        Self { taxonomy, soft: BTreeSet::from([DROP_TO_SMASH]) }
    }

    pub fn standard() -> Self {
        Self::new(Taxonomy::standard())
    }

    /// Hard rules only.
    pub fn hard_only(taxonomy: Arc<Taxonomy>) -> Self {
        Self { taxonomy, soft: BTreeSet::new() }
    }

    /// Enables or disables a soft ban of `response` categories after `stimulus` categories.
    pub fn with_soft_rule(mut self, stimulus: Category, response: Category, enabled: bool) -> Self {
        if enabled {
            self.soft.insert((stimulus, response));
        } else {
            self.soft.remove(&(stimulus, response));
        }
        self
    }

    pub fn soft_rules(&self) -> &BTreeSet<(Category, Category)> {
        &self.soft
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn is_hard_legal(&self, response: ShotId, stimulus: ShotId) -> bool {
        self.taxonomy.is_hard_legal(response, stimulus)
    }

    /// Whether the response breaks only a soft rule.
    pub fn violates_soft_rule(&self, response: ShotId, stimulus: ShotId) -> bool {
        let key = (self.taxonomy.category(stimulus), self.taxonomy.category(response));
        self.soft.contains(&key)
    }

    pub fn is_legal_response(&self, response: ShotId, stimulus: ShotId) -> bool {
        self.is_hard_legal(response, stimulus) && !self.violates_soft_rule(response, stimulus)
    }

    /// Legal responses in taxonomy order. Falls back to the hard-legal set
    /// if the soft rules would leave nothing.
    pub fn legal_responses(&self, stimulus: ShotId) -> Vec<ShotId> {
        let legal: Vec<ShotId> = self.taxonomy.iter().filter(|&r| self.is_legal_response(r, stimulus)).collect();
        if legal.is_empty() {
            self.taxonomy.hard_legal_responses(stimulus).collect()
        } else {
            legal
        }
    }
}
