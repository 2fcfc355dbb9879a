use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;

use rally_core::{
    Dataset, LegalityMatrix, Match, PlayerId, Rally, RallyOutcome, ShotEvent, ShotId, Taxonomy, Termination,
};

use crate::oracle::hard_legal;

pub const TERMINATIONS: [Termination; 3] =
    [Termination::WinnerShot, Termination::ForcedError, Termination::UnforcedError];

pub fn pid(s: &str) -> PlayerId {
    PlayerId::new(s).expect("valid id")
}

/// Random legal shot sequence of `len` shots between `server` and `receiver`.
///
/// `palette` limits the shots in play so counts pile up on a few pairs.
pub fn random_shots<R: Rng>(
    rng: &mut R,
    tax: &Taxonomy,
    server: &PlayerId,
    receiver: &PlayerId,
    len: usize,
    palette: &[ShotId],
) -> Vec<ShotEvent> {
    let serves: Vec<ShotId> = tax.serves().collect();
    let mut shots: Vec<ShotEvent> = Vec::with_capacity(len);
    for i in 0..len {
        let actor = if i % 2 == 0 { server } else { receiver };
        let shot = match shots.last() {
            None => *serves.choose(rng).expect("taxonomy has serves"),
            Some(prev) => {
                let options: Vec<ShotId> = palette.iter().copied().filter(|&r| hard_legal(tax, r, prev.shot)).collect();
                *options.choose(rng).expect("palette answers every shot")
            }
        };
        shots.push(ShotEvent::new(actor.clone(), shot, i));
    }
    shots
}

/// A rally with a random outcome consistent with its last shot.
pub fn random_rally<R: Rng>(
    rng: &mut R,
    tax: &Taxonomy,
    id: String,
    players: &[PlayerId; 2],
    max_len: usize,
    palette: &[ShotId],
) -> Rally {
    let s = rng.gen_range(0..2);
    let len = rng.gen_range(1..=max_len);
    let shots = random_shots(rng, tax, &players[s], &players[1 - s], len, palette);
    let termination = *TERMINATIONS.choose(rng).expect("non-empty");
    let last = shots.last().expect("len >= 1").actor.clone();
    let winner = if termination == Termination::WinnerShot {
        last
    } else if last == players[0] {
        players[1].clone()
    } else {
        players[0].clone()
    };
    Rally { rally_id: id, server: players[s].clone(), shots, outcome: RallyOutcome { winner, termination }, set: None }
}

/// A random palette: every non-serve shot kept with probability 1/2, plus
/// one shot from each answer class so every stimulus has a legal reply.
pub fn random_palette<R: Rng>(rng: &mut R, tax: &Taxonomy) -> Vec<ShotId> {
    let mut palette: Vec<ShotId> = tax.iter().filter(|&s| !tax.is_serve(s) && rng.gen_bool(0.5)).collect();
    for must in ["forehand_drop", "forehand_long_clear"] {
        let id = tax.parse(must).expect("bundled shot");
        if !palette.contains(&id) {
            palette.push(id);
        }
    }
    palette.sort();
    palette
}

/// Random two-player dataset, rallies split across `matches` matches.
pub fn random_dataset<R: Rng>(rng: &mut R, matches: usize, rallies: usize, max_len: usize) -> Dataset {
    let matrix = LegalityMatrix::standard();
    let tax = matrix.taxonomy().clone();
    let players = [pid("a"), pid("b")];
    let palette = random_palette(rng, &tax);
    let mut d = Dataset::empty(matrix);
    let day = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    for mi in 0..matches {
        let mut m = Match::new(format!("g{mi}"), players.clone(), day);
        for ri in 0..rallies / matches.max(1) {
            m.rallies.push(random_rally(rng, &tax, format!("r{ri}"), &players, max_len, &palette));
        }
        d = d.add_match(m).expect("generated rallies are valid");
    }
    d
}

/// `times` copies of every match, with match ids suffixed by the copy number.
pub fn duplicate(d: &Dataset, times: usize) -> Dataset {
    let mut out = Dataset::empty(d.legality().clone());
    for p in d.players() {
        out = out.with_player(p.clone()).expect("same players");
    }
    for c in 0..times {
        for m in d.matches() {
            let mut copy = m.clone();
            copy.match_id = format!("{}-{c}", m.match_id);
            out = out.add_match(copy).expect("copies are valid");
        }
    }
    out
}
