//! Shot-by-shot match logs: data model, validation and the rally-log text format.
//!
//! A rally log is UTF-8, one record per line, `#` comments ignored:
//!
//! ```text
//! player id=xp name="Player P"
//! match id=m01 date=2011-03-14 players=xp,xo
//! rally match=m01 id=r001 server=xp shots=xp:backhand_short_serve,xo:forehand_drop winner=xp end=unforced_error
//! ```
//!
//! See `docs/rally-log.md` for the full grammar.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;
use crate::shot::{LegalityMatrix, ShotId, Taxonomy};

pub const LOG_HEADER: &str = "# rally-log v1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self, String> {
        let id = id.into();
        if id.is_empty() {
            return Err("player id is empty".into());
        }
        if !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(format!("invalid player id `{id}`"));
        }
        Ok(PlayerId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotEvent {
    pub actor: PlayerId,
    pub shot: ShotId,
    pub index: usize,
}

impl ShotEvent {
    pub fn new(actor: PlayerId, shot: ShotId, index: usize) -> Self {
        Self { actor, shot, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WinnerShot,
    ForcedError,
    UnforcedError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::WinnerShot => "winner_shot",
            Termination::ForcedError => "forced_error",
            Termination::UnforcedError => "unforced_error",
        }
    }

    pub fn is_error(self) -> bool {
        !matches!(self, Termination::WinnerShot)
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "winner_shot" => Ok(Termination::WinnerShot),
            "forced_error" => Ok(Termination::ForcedError),
            "unforced_error" => Ok(Termination::UnforcedError),
            other => {
                Err(format!("unknown termination `{other}` (expected winner_shot, forced_error or unforced_error)"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RallyOutcome {
    pub winner: PlayerId,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rally {
    pub rally_id: String,
    pub server: PlayerId,
    pub shots: Vec<ShotEvent>,
    pub outcome: RallyOutcome,
    /// Set number, carried through the format but unused by any model.
    pub set: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub match_id: String,
    pub players: [PlayerId; 2],
    pub date: NaiveDate,
    pub rallies: Vec<Rally>,
}

impl Match {
    pub fn new(match_id: impl Into<String>, players: [PlayerId; 2], date: NaiveDate) -> Self {
        Self { match_id: match_id.into(), players, date, rallies: Vec::new() }
    }

    pub fn involves(&self, a: &PlayerId, b: &PlayerId) -> bool {
        (&self.players[0] == a && &self.players[1] == b) || (&self.players[0] == b && &self.players[1] == a)
    }
}

/// A non-fatal finding during ingestion, typically a soft-rule violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: Option<usize>,
    pub rally_id: String,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "rally `{}`: {}", self.rally_id, self.message)
    }
}

/// Checks a (possibly incomplete) shot sequence against the rally rules.
///
/// Returns soft-rule warnings on success.
pub fn validate_shots(
    shots: &[ShotEvent],
    players: &[PlayerId; 2],
    matrix: &LegalityMatrix,
) -> Result<Vec<String>, String> {
    let tax = matrix.taxonomy();
    let mut warnings = Vec::new();
    for (i, ev) in shots.iter().enumerate() {
        if ev.index != i {
            return Err(format!("shot index {} found at position {i}", ev.index));
        }
        if !players.contains(&ev.actor) {
            return Err(format!("actor `{}` at index {i} is not a match player", ev.actor));
        }
        if i == 0 {
            if !tax.is_serve(ev.shot) {
                return Err(format!("rally must open with a serve, found `{}` at index 0", tax.name(ev.shot)));
            }
            continue;
        }
        let prev = &shots[i - 1];
        if prev.actor == ev.actor {
            return Err(format!("alternation violated at index {i}"));
        }
        if tax.is_serve(ev.shot) {
            return Err(format!("serve `{}` at index {i}; serves only open a rally", tax.name(ev.shot)));
        }
        if !matrix.is_hard_legal(ev.shot, prev.shot) {
            return Err(format!(
                "illegal response at index {i}: `{}` cannot answer `{}`",
                tax.name(ev.shot),
                tax.name(prev.shot)
            ));
        }
        if matrix.violates_soft_rule(ev.shot, prev.shot) {
            warnings.push(format!(
                "soft rule: `{}` played off `{}` at index {i}",
                tax.name(ev.shot),
                tax.name(prev.shot)
            ));
        }
    }
    Ok(warnings)
}

/// Checks the outcome against the final shot.
pub fn validate_outcome(shots: &[ShotEvent], outcome: &RallyOutcome, players: &[PlayerId; 2]) -> Result<(), String> {
    if !players.contains(&outcome.winner) {
        return Err(format!("winner `{}` is not a match player", outcome.winner));
    }
    let last = shots.last().ok_or("rally has no shots")?;
    match outcome.termination {
        Termination::WinnerShot if last.actor != outcome.winner => Err(format!(
            "outcome inconsistent: winner_shot but last shot played by `{}`, not winner `{}`",
            last.actor, outcome.winner
        )),
        t if t.is_error() && last.actor == outcome.winner => {
            Err(format!("outcome inconsistent: {} but last shot played by winner `{}`", t.as_str(), outcome.winner))
        }
        _ => Ok(()),
    }
}

impl Rally {
    pub fn validate(&self, players: &[PlayerId; 2], matrix: &LegalityMatrix) -> Result<Vec<String>, String> {
        let first = self.shots.first().ok_or("rally has no shots")?;
        if first.actor != self.server {
            return Err(format!("server `{}` does not play the first shot (played by `{}`)", self.server, first.actor));
        }
        let warnings = validate_shots(&self.shots, players, matrix)?;
        validate_outcome(&self.shots, &self.outcome, players)?;
        Ok(warnings)
    }

    pub fn last_actor(&self) -> &PlayerId {
        &self.shots.last().expect("validated rally is non-empty").actor
    }
}

/// A validated collection of matches plus the taxonomy and legality used to check it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    legality: LegalityMatrix,
    players: Vec<Player>,
    matches: Vec<Match>,
}

/// Result of parsing a rally log.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: Vec<Warning>,
}

impl Dataset {
    pub fn empty(legality: LegalityMatrix) -> Self {
        Self { legality, players: Vec::new(), matches: Vec::new() }
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        self.legality.taxonomy()
    }

    pub fn legality(&self) -> &LegalityMatrix {
        &self.legality
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    pub fn player(&self, id: &str) -> Option<&Player> {
        self.players.iter().find(|p| p.id.as_str() == id)
    }

    pub fn require_player(&self, id: &str) -> Result<&Player, DataError> {
        self.player(id).ok_or_else(|| DataError::UnknownPlayer(id.to_string()))
    }

    pub fn rally_count(&self) -> usize {
        self.matches.iter().map(|m| m.rallies.len()).sum()
    }

    pub fn shot_count(&self) -> usize {
        self.matches.iter().flat_map(|m| &m.rallies).map(|r| r.shots.len()).sum()
    }

    /// Registers a player. Re-registering the same id with a different name is an error.
    pub fn with_player(mut self, player: Player) -> Result<Self, DataError> {
        self.register_player(player, None)?;
        Ok(self)
    }

    fn register_player(&mut self, player: Player, line: Option<usize>) -> Result<(), DataError> {
        match self.players.iter().find(|p| p.id == player.id) {
            Some(existing) if existing.display_name != player.display_name => Err(DataError::Dataset {
                line,
                message: format!(
                    "player `{}` has conflicting names `{}` and `{}`",
                    player.id, existing.display_name, player.display_name
                ),
            }),
            Some(_) => Ok(()),
            None => {
                self.players.push(player);
                Ok(())
            }
        }
    }

    fn ensure_player(&mut self, id: &PlayerId) {
        if !self.players.iter().any(|p| &p.id == id) {
            self.players.push(Player { id: id.clone(), display_name: id.to_string() });
        }
    }

    /// Returns a new dataset with `m` appended. Every rally is validated.
    pub fn add_match(&self, m: Match) -> Result<Dataset, DataError> {
        let mut next = self.clone();
        next.push_match(m, None)?;
        Ok(next)
    }

    fn push_match(&mut self, m: Match, line: Option<usize>) -> Result<Vec<Warning>, DataError> {
        if m.players[0] == m.players[1] {
            return Err(DataError::Dataset {
                line,
                message: format!("match `{}` lists the same player twice", m.match_id),
            });
        }
        if self.matches.iter().any(|x| x.match_id == m.match_id) {
            return Err(DataError::Dataset { line, message: format!("duplicate match id `{}`", m.match_id) });
        }
        let mut warnings = Vec::new();
        let mut ids = HashSet::new();
        for rally in &m.rallies {
            if !ids.insert(rally.rally_id.as_str()) {
                return Err(DataError::Validation {
                    line,
                    rally_id: rally.rally_id.clone(),
                    message: "duplicate rally id".into(),
                });
            }
            for message in self.check_rally(&m, rally, line)? {
                warnings.push(Warning { line, rally_id: rally.rally_id.clone(), message });
            }
        }
        for p in &m.players {
            self.ensure_player(p);
        }
        self.matches.push(m);
        Ok(warnings)
    }

    fn check_rally(&self, m: &Match, rally: &Rally, line: Option<usize>) -> Result<Vec<String>, DataError> {
        rally.validate(&m.players, &self.legality).map_err(|message| DataError::Validation {
            line,
            rally_id: rally.rally_id.clone(),
            message,
        })
    }

    /// Returns a new dataset with `rally` appended to match `match_id`.
    pub fn append_rally(&self, match_id: &str, rally: Rally) -> Result<Dataset, DataError> {
        let mut next = self.clone();
        next.push_rally(match_id, rally, None)?;
        Ok(next)
    }

    fn push_rally(&mut self, match_id: &str, rally: Rally, line: Option<usize>) -> Result<Vec<String>, DataError> {
        let idx = self
            .matches
            .iter()
            .position(|m| m.match_id == match_id)
            .ok_or_else(|| DataError::Dataset { line, message: format!("unknown match `{match_id}`") })?;
        let m = &self.matches[idx];
        if m.rallies.iter().any(|r| r.rally_id == rally.rally_id) {
            return Err(DataError::Validation {
                line,
                rally_id: rally.rally_id,
                message: format!("duplicate rally id in match `{match_id}`"),
            });
        }
        let warnings = self.check_rally(m, &rally, line)?;
        self.matches[idx].rallies.push(rally);
        Ok(warnings)
    }

    /// Concatenates two datasets built over the same taxonomy.
    pub fn merge(&self, other: &Dataset) -> Result<Dataset, DataError> {
        if self.taxonomy() != other.taxonomy() {
            return Err(DataError::Dataset { line: None, message: "datasets use different taxonomies".into() });
        }
        let mut next = self.clone();
        for p in &other.players {
            next.register_player(p.clone(), None)?;
        }
        for m in &other.matches {
            next.push_match(m.clone(), None)?;
        }
        Ok(next)
    }

    /// Counts of shots played by `player`, one entry per taxonomy shot.
    pub fn shot_frequencies(&self, player: &str) -> Result<BTreeMap<ShotId, u64>, DataError> {
        if !self.matches.is_empty() {
            self.require_player(player)?;
        }
        let mut counts: BTreeMap<ShotId, u64> = self.taxonomy().iter().map(|s| (s, 0)).collect();
        for ev in self.matches.iter().flat_map(|m| &m.rallies).flat_map(|r| &r.shots) {
            if ev.actor.as_str() == player {
                *counts.entry(ev.shot).or_default() += 1;
            }
        }
        Ok(counts)
    }

    /// Content digest of the canonical serialization.
    pub fn version(&self) -> String {
        let digest = Sha256::digest(self.to_log_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn load(path: impl AsRef<Path>, legality: &LegalityMatrix) -> Result<Loaded, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Dataset::parse_log(&text, legality)
    }

    /// Loads and merges several rally logs in order.
    pub fn load_all<P: AsRef<Path>>(paths: &[P], legality: &LegalityMatrix) -> Result<Loaded, DataError> {
        let mut dataset = Dataset::empty(legality.clone());
        let mut warnings = Vec::new();
        for path in paths {
            let loaded = Dataset::load(path, legality).map_err(|e| match e {
                e @ DataError::Io { .. } => e,
                other => DataError::Dataset { line: None, message: format!("{}: {other}", path.as_ref().display()) },
            })?;
            dataset = dataset.merge(&loaded.dataset)?;
            warnings.extend(loaded.warnings);
        }
        Ok(Loaded { dataset, warnings })
    }

    pub fn parse_log(text: &str, legality: &LegalityMatrix) -> Result<Loaded, DataError> {
        let records = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .map(|(n, l)| tokenize(l).map(|r| (n, r)).map_err(|message| DataError::Parse { line: n, message }))
            .collect::<Result<Vec<_>, _>>()?;

        let mut dataset = Dataset::empty(legality.clone());
        // Declared players first so names resolve regardless of position.
        for (line, rec) in records.iter().filter(|(_, r)| r.kind == "player") {
            let player = parse_player(rec).map_err(|message| DataError::Parse { line: *line, message })?;
            dataset.register_player(player, Some(*line))?;
        }

        let mut warnings = Vec::new();
        for (line, rec) in &records {
            let line = *line;
            match rec.kind.as_str() {
                "player" => {}
                "match" => {
                    let m = parse_match(rec).map_err(|message| DataError::Parse { line, message })?;
                    warnings.extend(dataset.push_match(m, Some(line))?);
                }
                "rally" => {
                    let (match_id, rally) = parse_rally(rec, dataset.taxonomy()).map_err(|e| e.at_line(line))?;
                    let rally_id = rally.rally_id.clone();
                    for message in dataset.push_rally(&match_id, rally, Some(line))? {
                        warnings.push(Warning { line: Some(line), rally_id: rally_id.clone(), message });
                    }
                }
                other => return Err(DataError::Parse { line, message: format!("unknown record kind `{other}`") }),
            }
        }
        Ok(Loaded { dataset, warnings })
    }

    /// Canonical rally-log serialization.
    pub fn to_log_string(&self) -> String {
        let tax = self.taxonomy();
        let mut out = String::new();
        out.push_str(LOG_HEADER);
        out.push('\n');
        for p in &self.players {
            out.push_str(&format!("player id={} name={}\n", p.id, quote(&p.display_name)));
        }
        for m in &self.matches {
            out.push_str(&format!(
                "match id={} date={} players={},{}\n",
                m.match_id,
                m.date.format("%Y-%m-%d"),
                m.players[0],
                m.players[1]
            ));
            for r in &m.rallies {
                let shots: Vec<String> = r.shots.iter().map(|e| format!("{}:{}", e.actor, tax.name(e.shot))).collect();
                out.push_str(&format!(
                    "rally match={} id={} server={} shots={} winner={} end={}",
                    m.match_id,
                    r.rally_id,
                    r.server,
                    shots.join(","),
                    r.outcome.winner,
                    r.outcome.termination.as_str()
                ));
                if let Some(set) = r.set {
                    out.push_str(&format!(" set={set}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

struct Record {
    kind: String,
    fields: Vec<(String, String)>,
}

impl Record {
    fn get(&self, key: &str) -> Result<&str, String> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| format!("`{}` record missing field `{key}`", self.kind))
    }

    fn optional(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), String> {
        let mut seen = HashSet::new();
        for (k, _) in &self.fields {
            if !allowed.contains(&k.as_str()) {
                return Err(format!("`{}` record has unknown field `{k}`", self.kind));
            }
            if !seen.insert(k) {
                return Err(format!("`{}` record repeats field `{k}`", self.kind));
            }
        }
        Ok(())
    }
}

fn tokenize(line: &str) -> Result<Record, String> {
    let mut chars = line.chars().peekable();
    let mut kind = String::new();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            break;
        }
        kind.push(c);
        chars.next();
    }
    let mut fields = Vec::new();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        loop {
            match chars.next() {
                Some('=') => break,
                Some(c) if c.is_whitespace() => return Err(format!("field `{key}` has no value")),
                Some(c) => key.push(c),
                None => return Err(format!("field `{key}` has no value")),
            }
        }
        if key.is_empty() {
            return Err("empty field name".into());
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(c @ ('"' | '\\')) => value.push(c),
                        _ => return Err(format!("bad escape in field `{key}`")),
                    },
                    Some(c) => value.push(c),
                    None => return Err(format!("unterminated quote in field `{key}`")),
                }
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace()) {
                return Err(format!("junk after quoted value of `{key}`"));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        fields.push((key, value));
    }
    Ok(Record { kind, fields })
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn parse_player(rec: &Record) -> Result<Player, String> {
    rec.check_keys(&["id", "name"])?;
    let id = PlayerId::new(rec.get("id")?)?;
    let display_name = rec.optional("name").map(str::to_string).unwrap_or_else(|| id.to_string());
    Ok(Player { id, display_name })
}

fn parse_match(rec: &Record) -> Result<Match, String> {
    rec.check_keys(&["id", "date", "players"])?;
    let id = rec.get("id")?;
    if id.is_empty() {
        return Err("empty match id".into());
    }
    let date = NaiveDate::parse_from_str(rec.get("date")?, "%Y-%m-%d")
        .map_err(|e| format!("bad date `{}`: {e}", rec.get("date").unwrap_or_default()))?;
    let players = rec.get("players")?;
    let (a, b) = players.split_once(',').ok_or_else(|| format!("`players` must be `a,b`, got `{players}`"))?;
    Ok(Match::new(id, [PlayerId::new(a)?, PlayerId::new(b)?], date))
}

enum RallyParseError {
    Parse(String),
    Validation { rally_id: String, message: String },
    Shot(crate::error::ShotError),
}

impl RallyParseError {
    fn at_line(self, line: usize) -> DataError {
        match self {
            RallyParseError::Parse(message) => DataError::Parse { line, message },
            RallyParseError::Validation { rally_id, message } => {
                DataError::Validation { line: Some(line), rally_id, message }
            }
            RallyParseError::Shot(e) => DataError::Parse { line, message: e.to_string() },
        }
    }
}

impl From<String> for RallyParseError {
    fn from(s: String) -> Self {
        RallyParseError::Parse(s)
    }
}

fn parse_rally(rec: &Record, tax: &Taxonomy) -> Result<(String, Rally), RallyParseError> {
    rec.check_keys(&["match", "id", "server", "shots", "winner", "end", "set"])?;
    let match_id = rec.get("match")?.to_string();
    let rally_id = rec.get("id")?.to_string();
    if rally_id.is_empty() {
        return Err(RallyParseError::Parse("empty rally id".into()));
    }
    let server = PlayerId::new(rec.get("server")?)?;
    let shots_field = rec.get("shots")?;
    if shots_field.is_empty() {
        return Err(RallyParseError::Validation { rally_id, message: "rally has no shots".into() });
    }
    let mut shots = Vec::new();
    for (i, token) in shots_field.split(',').enumerate() {
        let (actor, shot) =
            token.split_once(':').ok_or_else(|| format!("shot token `{token}` must be `actor:shot_id`"))?;
        let shot = tax.parse(shot).map_err(RallyParseError::Shot)?;
        shots.push(ShotEvent::new(PlayerId::new(actor)?, shot, i));
    }
    let winner = PlayerId::new(rec.get("winner")?)?;
    let termination = rec.get("end")?.parse::<Termination>()?;
    let set = rec.optional("set").map(|s| s.parse::<u32>().map_err(|_| format!("bad set number `{s}`"))).transpose()?;
    let rally = Rally { rally_id, server, shots, outcome: RallyOutcome { winner, termination }, set };
    Ok((match_id, rally))
}

/// Builds a rally from `(actor, shot-name)` pairs. Mostly a convenience for tests and fixtures.
pub fn rally_from_names(
    tax: &Taxonomy,
    rally_id: &str,
    shots: &[(&str, &str)],
    winner: &str,
    termination: Termination,
) -> Result<Rally, DataError> {
    let events = shots
        .iter()
        .enumerate()
        .map(|(i, (actor, shot))| {
            let actor = PlayerId::new(*actor).map_err(|message| DataError::Dataset { line: None, message })?;
            Ok(ShotEvent::new(actor, tax.parse(shot)?, i))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let server = events.first().map(|e| e.actor.clone()).ok_or_else(|| DataError::Validation {
        line: None,
        rally_id: rally_id.into(),
        message: "rally has no shots".into(),
    })?;
    let winner = PlayerId::new(winner).map_err(|message| DataError::Dataset { line: None, message })?;
    Ok(Rally {
        rally_id: rally_id.to_string(),
        server,
        shots: events,
        outcome: RallyOutcome { winner, termination },
        set: None,
    })
}
