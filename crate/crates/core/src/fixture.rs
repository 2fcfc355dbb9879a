//! Deterministic synthetic match data.
//!
//! Two players, three matches. Each player answers each incoming shot from
//! a small personal repertoire of at most three legal replies, so models
//! built from the output are sparse enough to read. Rallies end on a
//! winner or an error with probabilities that depend on the category of
//! the last shot; the winner of a rally serves the next one.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::matchlog::{Dataset, Match, Player, PlayerId, Rally, RallyOutcome, ShotEvent, Termination};
use crate::shot::{Category, LegalityMatrix, ShotId};

pub const FIXTURE_SEED: u64 = 20_190_501;
pub const FOCAL_ID: &str = "xp";
pub const OPPONENT_ID: &str = "xo";

/// The committed output of [`generate`] with [`FixtureSpec::default`].
pub const BUNDLED_FIXTURE: &str = include_str!("../data/fixture.rally");

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub matches: usize,
    pub rallies_per_match: usize,
    /// Longest rally; the shot at the cap is an error.
    pub max_len: usize,
    pub repertoire: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self { seed: FIXTURE_SEED, matches: 3, rallies_per_match: 110, max_len: 24, repertoire: 3 }
    }
}

struct Style {
    id: PlayerId,
    serves: Vec<(ShotId, f64)>,
    /// Indexed by stimulus.
    replies: Vec<Vec<(ShotId, f64)>>,
}

fn pick(rng: &mut ChaCha8Rng, options: &[(ShotId, f64)]) -> ShotId {
    options.choose_weighted(rng, |o| o.1).expect("non-empty repertoire with positive weights").0
}

fn style(rng: &mut ChaCha8Rng, id: PlayerId, matrix: &LegalityMatrix, repertoire: usize) -> Style {
    let tax = matrix.taxonomy();
    let mut weights = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(1..=6) as f64).collect() };
    let serves: Vec<ShotId> = tax.serves().collect();
    let serve_w = weights(serves.len());
    let serves = serves.into_iter().zip(serve_w).collect();
    let mut replies = Vec::with_capacity(tax.len());
    for s in tax.iter() {
        let mut legal = matrix.legal_responses(s);
        legal.shuffle(rng);
        legal.truncate(repertoire);
        legal.sort();
        let w: Vec<f64> = legal.iter().map(|_| rng.gen_range(1..=6) as f64).collect();
        replies.push(legal.into_iter().zip(w).collect());
    }
    Style { id, serves, replies }
}

/// Chance that a shot of this category wins the rally outright, and that it is an error.
fn end_chances(c: Category) -> (f64, f64) {
    match c {
        Category::Serve => (0.01, 0.02),
        Category::Smash => (0.22, 0.08),
        Category::Kill => (0.30, 0.06),
        Category::Drop => (0.07, 0.06),
        Category::Drive => (0.05, 0.05),
        Category::Block | Category::Lift | Category::Clear => (0.03, 0.04),
    }
}

fn rally(
    rng: &mut ChaCha8Rng,
    id: String,
    server: usize,
    styles: &[Style; 2],
    matrix: &LegalityMatrix,
    max_len: usize,
) -> Rally {
    let tax = matrix.taxonomy();
    let mut shots: Vec<ShotEvent> = Vec::new();
    let mut turn = server;
    loop {
        let me = &styles[turn];
        let shot = match shots.last() {
            None => pick(rng, &me.serves),
            Some(prev) => pick(rng, &me.replies[prev.shot.index()]),
        };
        shots.push(ShotEvent::new(me.id.clone(), shot, shots.len()));
        let (win, err) = end_chances(tax.category(shot));
        let forced =
            shots.len() >= 2 && matches!(tax.category(shots[shots.len() - 2].shot), Category::Smash | Category::Kill);
        let roll: f64 = rng.gen();
        let other = styles[1 - turn].id.clone();
        let outcome = if shots.len() >= max_len || roll < err {
            let termination = if forced { Termination::ForcedError } else { Termination::UnforcedError };
            Some(RallyOutcome { winner: other, termination })
        } else if roll < err + win {
            Some(RallyOutcome { winner: me.id.clone(), termination: Termination::WinnerShot })
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Rally { rally_id: id, server: styles[server].id.clone(), shots, outcome, set: None };
        }
        turn = 1 - turn;
    }
}

/// Generates the synthetic dataset described by `spec`.
pub fn generate(spec: &FixtureSpec, matrix: &LegalityMatrix) -> Result<Dataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xp = PlayerId::new(FOCAL_ID).expect("valid id");
    let xo = PlayerId::new(OPPONENT_ID).expect("valid id");
    let styles =
        [style(&mut rng, xp.clone(), matrix, spec.repertoire), style(&mut rng, xo.clone(), matrix, spec.repertoire)];
    let mut dataset = Dataset::empty(matrix.clone())
        .with_player(Player { id: xp.clone(), display_name: "Player P".into() })?
        .with_player(Player { id: xo.clone(), display_name: "Player O".into() })?;
    let first_day = NaiveDate::from_ymd_opt(2019, 5, 1).expect("valid date");
    for mi in 0..spec.matches {
        let mut m =
            Match::new(format!("m{}", mi + 1), [xp.clone(), xo.clone()], first_day + chrono::Days::new(7 * mi as u64));
        let mut server = mi % 2;
        for ri in 0..spec.rallies_per_match {
            let mut r = rally(&mut rng, format!("r{:03}", ri + 1), server, &styles, matrix, spec.max_len);
            r.set = Some(1 + (3 * ri / spec.rallies_per_match.max(1)) as u32);
            server = if r.outcome.winner == xp { 0 } else { 1 };
            m.rallies.push(r);
        }
        dataset = dataset.add_match(m)?;
    }
    Ok(dataset)
}

/// The bundled fixture, parsed.
pub fn bundled() -> Dataset {
    Dataset::parse_log(BUNDLED_FIXTURE, &LegalityMatrix::standard()).expect("bundled fixture is valid").dataset
}
