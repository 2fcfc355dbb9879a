#![allow(dead_code)]

use std::path::PathBuf;

use rally_coach::{CreateRequest, SessionConfig, SessionStore};
use rally_core::{fixture, Dataset, LegalityMatrix, PolicyRegistry, Rally, Taxonomy};
use rally_testkit::gen::{pid, random_rally};
use rand::Rng;

pub fn core_data(name: &str) -> Dataset {
    let path = format!("{}/../core/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    Dataset::load(path, &LegalityMatrix::standard()).unwrap().dataset
}

pub fn store(dir: Option<PathBuf>) -> SessionStore {
    SessionStore::open(
        vec![("fixture".into(), fixture::bundled()), ("smash".into(), core_data("smash_responses.rally"))],
        SessionConfig::default(),
        PolicyRegistry::default(),
        dir,
    )
    .unwrap()
}

pub fn request(dataset: &str) -> CreateRequest {
    CreateRequest { dataset: Some(dataset.into()), focal: "xp".into(), opponent: "xo".into(), config: None }
}

/// A random legal rally between the fixture players.
pub fn live_rally<R: Rng>(rng: &mut R, i: usize, max_len: usize) -> Rally {
    let tax = Taxonomy::standard();
    let palette: Vec<_> = tax.iter().filter(|&s| !tax.is_serve(s)).collect();
    random_rally(rng, &tax, format!("x{i}"), &[pid("xp"), pid("xo")], max_len, &palette)
}

/// Records every shot of `rally` and closes it.
pub fn play(store: &SessionStore, id: &str, rally: &Rally) {
    let tax = Taxonomy::standard();
    for e in &rally.shots {
        store.record_shot(id, e.actor.as_str(), tax.name(e.shot)).unwrap();
    }
    store.rally_end(id, rally.outcome.winner.as_str(), rally.outcome.termination).unwrap();
}
