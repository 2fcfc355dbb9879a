use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rally_core::fixture;
use rally_core::model::Matchup;
use rally_core::policy::{BEST_OWN_UTILITY, MOST_PROBABLE};
use rally_core::recommend::best_response;
use rally_core::simulate::{choose_focal, parse_seed, simulate, SimConfig};
use rally_core::{
    backward_induce, expand_tree, Dataset, GameNode, LegalityMatrix, PolicyRegistry, RewardConfig, Role, SimError,
};
use rally_testkit::gen::random_dataset;
use rally_testkit::oracle::{path_value, resolve, tree_paths, Counts, PathOracle};

fn fixture_matchup(rewards: RewardConfig) -> (Dataset, Matchup) {
    let d = fixture::bundled();
    let mu = Matchup::build(&d, "xp", "xo", rewards, 0.0).unwrap();
    (d, mu)
}

fn run(mu: &Matchup, seed: &str, cfg: &SimConfig) -> Result<rally_core::Rollout, SimError> {
    let seed = parse_seed(seed, mu)?;
    simulate(mu, &seed, cfg, &PolicyRegistry::default(), &LegalityMatrix::standard())
}

fn key(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

#[test]
fn lookahead_matches_path_enumeration_on_fixture() {
    let (d, mu) = fixture_matchup(RewardConfig::default());
    let rd = RewardConfig::default();
    let (p, o) = (Counts::count(&d, "xp", "xo", &rd, 0.0), Counts::count(&d, "xo", "xp", &rd, 0.0));
    let oracle = PathOracle { focal: &p, opponent: &o };
    let matrix = LegalityMatrix::standard();
    let mut stimuli: Vec<Option<usize>> = vec![None];
    stimuli.extend(d.taxonomy().iter().map(|s| Some(s.index())));
    for depth in 1..=3 {
        for role in [Role::Focal, Role::Opponent] {
            for &s in &stimuli {
                let tree = expand_tree(&mu, s.map(|i| p.shot(i)), role, depth, &matrix);
                let ind = backward_induce(&tree);
                let best = oracle.best(s, role, depth);
                let line: Vec<usize> = ind.line.iter().map(|l| l.shot.index()).collect();
                assert_eq!(line, best.iter().map(|b| b.shot).collect::<Vec<_>>(), "depth {depth} {role:?} {s:?}");
                let (vf, vo) = path_value(&best);
                assert_eq!(key(ind.value.focal), key(vf));
                assert_eq!(key(ind.value.opponent), key(vo));
                assert_eq!(tree_paths(&tree).len(), oracle.paths(s, role, depth).len());
            }
        }
    }
}

fn randomize(node: &mut GameNode, rng: &mut ChaCha8Rng) {
    for c in &mut node.children {
        c.incoming_utility = rng.gen_range(-1.0..1.0);
        // Coarse values so exact ties come up.
        if rng.gen_bool(0.3) {
            c.incoming_utility = (c.incoming_utility * 4.0).round() / 4.0;
        }
        randomize(c, rng);
    }
}

#[test]
fn induction_matches_enumeration_under_random_utilities() {
    let (d, mu) = fixture_matchup(RewardConfig::default());
    let matrix = LegalityMatrix::standard();
    let trees: Vec<GameNode> = d
        .taxonomy()
        .iter()
        .flat_map(|s| [Role::Focal, Role::Opponent].map(|r| expand_tree(&mu, Some(s), r, 3, &matrix)))
        .filter(|t| t.max_branching() <= 5)
        .collect();
    assert!(trees.len() >= 20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for tree in &trees {
        for _ in 0..10 {
            let mut t = tree.clone();
            randomize(&mut t, &mut rng);
            let ind = backward_induce(&t);
            let best = resolve(tree_paths(&t)).unwrap();
            assert_eq!(
                ind.line.iter().map(|l| l.shot.index()).collect::<Vec<_>>(),
                best.iter().map(|b| b.shot).collect::<Vec<_>>()
            );
            let (vf, vo) = path_value(&best);
            assert_eq!((key(ind.value.focal), key(ind.value.opponent)), (key(vf), key(vo)));
        }
    }
}

#[test]
fn tree_size_is_bounded_by_branching() {
    let (d, mu) = fixture_matchup(RewardConfig::default());
    let matrix = LegalityMatrix::standard();
    for s in d.taxonomy().iter() {
        let t = expand_tree(&mu, Some(s), Role::Focal, 3, &matrix);
        let b = t.max_branching();
        assert!(t.descendant_count() <= b + b * b + b * b * b);
        let supported = |n: &GameNode| n.children.iter().all(|c| c.incoming_support > 0);
        if supported(&t) && t.children.iter().all(supported) {
            // Fixture repertoires hold at most three answers per shot.
            assert!(b <= 3, "{}", d.taxonomy().name(s));
            assert!(t.descendant_count() <= 3 + 9 + 27);
        }
    }
}

#[test]
fn depth_one_with_unit_rewards_is_best_response() {
    let matrix = LegalityMatrix::standard();
    let mut datasets = vec![fixture::bundled()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    datasets.extend((0..10).map(|_| random_dataset(&mut rng, 1, 60, 10)));
    for d in &datasets {
        let (f, o) = (d.players()[0].id.as_str(), d.players()[1].id.as_str());
        let mu = Matchup::build(d, f, o, RewardConfig::unit(), 0.0).unwrap();
        for s in d.taxonomy().iter() {
            let chosen = choose_focal(&mu, Some(s), 1, &matrix).best.unwrap();
            let top = best_response(&mu.focal, s, 1, &matrix).top().unwrap().shot;
            assert_eq!(chosen, top);
        }
    }
}

#[test]
fn rollout_is_deterministic_and_legal() {
    let (_, mu) = fixture_matchup(RewardConfig::default());
    for policy in [BEST_OWN_UTILITY, MOST_PROBABLE] {
        for live_update in [false, true] {
            let cfg = SimConfig { step_limit: 12, opponent_policy: policy.into(), live_update, ..SimConfig::default() };
            let a = run(&mu, "p:backhand_short_serve,o:forehand_lift", &cfg).unwrap();
            let b = run(&mu, "p:backhand_short_serve,o:forehand_lift", &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.rows().len(), 12);
            let seq = a.sequence();
            for w in seq.windows(2) {
                assert_ne!(w[0].0, w[1].0);
                assert!(LegalityMatrix::standard().is_legal_response(w[1].1, w[0].1));
            }
        }
    }
}

#[test]
fn rollout_without_updates_is_eventually_periodic() {
    let (_, mu) = fixture_matchup(RewardConfig::default());
    let cfg = SimConfig { step_limit: 200, ..SimConfig::default() };
    let r = run(&mu, "p:backhand_short_serve", &cfg).unwrap();
    let states: Vec<_> = r.moves.iter().map(|m| (m.agent, m.shot)).collect();
    let mut first_seen = HashMap::new();
    let (start, period) = states
        .iter()
        .enumerate()
        .find_map(|(i, s)| first_seen.insert(*s, i).map(|j| (j, i - j)))
        .expect("a state repeats");
    for i in start..states.len() - period {
        assert_eq!(states[i], states[i + period]);
    }
}

#[test]
fn seed_must_be_a_valid_prefix() {
    let (_, mu) = fixture_matchup(RewardConfig::default());
    let cfg = SimConfig::default();
    assert!(matches!(run(&mu, "", &cfg), Err(SimError::Seed(_))));
    assert!(matches!(run(&mu, "p:forehand_drop", &cfg), Err(SimError::Seed(_))));
    assert!(matches!(run(&mu, "p:backhand_short_serve,p:forehand_drop", &cfg), Err(SimError::Seed(_))));
    assert!(matches!(run(&mu, "x:backhand_short_serve", &cfg), Err(SimError::Seed(_))));
    assert!(matches!(run(&mu, "p:backhand_short_serve,o:backhand_long_serve", &cfg), Err(SimError::Seed(_))));
    let bad_policy = SimConfig { opponent_policy: "random".into(), ..SimConfig::default() };
    assert!(matches!(run(&mu, "p:backhand_short_serve", &bad_policy), Err(SimError::UnknownPolicy { .. })));
    let zero = SimConfig { step_limit: 0, ..SimConfig::default() };
    assert!(matches!(run(&mu, "p:backhand_short_serve", &zero), Err(SimError::Config(_))));
}

#[test]
fn opponent_serve_seed() {
    let (_, mu) = fixture_matchup(RewardConfig::default());
    let cfg = SimConfig { step_limit: 3, ..SimConfig::default() };
    let r = run(&mu, "xo:backhand_long_serve", &cfg).unwrap();
    assert_eq!(r.focal_predictions(), 3);
    assert_eq!(r.moves.first().unwrap().agent, Role::Focal);
    assert_eq!(r.moves.last().unwrap().agent, Role::Opponent);
}
