//! Acceptance suite. Each criterion runs against its time limit and prints
//! one PASS/FAIL line; the process exits non-zero if any fails.

mod common;

use std::cmp::Reverse;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rally_core::model::{ConditionalModel, Matchup, Observation};
use rally_core::recommend::{best_response, opening_recommendation, recommendation_table};
use rally_core::simulate::{choose_focal, parse_seed, simulate, SimConfig};
use rally_core::{
    backward_induce, expand_tree, fixture, label_rewards, Dataset, GameNode, LegalityMatrix, Match, PolicyRegistry,
    RewardConfig, RewardTier, Role, Taxonomy,
};
use rally_testkit::gen::{duplicate, pid, random_dataset, random_palette, random_rally};
use rally_testkit::oracle::{self, path_value, resolve, soft_legal, tree_paths, Counts, Tier};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn key(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../core/tests/golden/{name}", env!("CARGO_MANIFEST_DIR")))
        .unwrap_or_else(|e| panic!("golden file {name}: {e}"))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut datasets = vec![(fixture::bundled(), "xp", "xo")];
    datasets.extend((0..100).map(|_| (random_dataset(&mut rng, 2, 60, 12), "a", "b")));
    let mut checked = 0;
    for (d, p, o) in &datasets {
        let tax = d.taxonomy();
        for alpha in [0.0, 0.5, 1.0] {
            for (r, s) in [(p, o), (o, p)] {
                let m = ConditionalModel::build(d, r, s, RewardConfig::default(), alpha).map_err(|e| e.to_string())?;
                let c = Counts::count(d, r, s, &RewardConfig::default(), alpha);
                let observed: Vec<usize> = m.observed_stimuli().iter().map(|s| s.index()).collect();
                ensure!(observed == c.stimuli(), "observed stimuli differ from the count oracle");
                for st in m.observed_stimuli() {
                    let total: f64 = tax.iter().map(|x| m.prob(x, st)).sum();
                    ensure!((total - 1.0).abs() <= 1e-9, "sum {total} for {} at alpha {alpha}", tax.name(st));
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} stimulus distributions"))
}

/// Linear scan for the best soft-legal answer: utility, then support, then taxonomy order.
fn brute_argmax(c: &Counts, s: usize) -> Option<usize> {
    (0..c.tax.len())
        .filter(|&r| soft_legal(&c.tax, c.shot(r), c.shot(s)))
        .max_by_key(|&r| (key(c.utility(r, s)), c.cell(r, s).n, Reverse(r)))
}

fn argmax() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let matrix = LegalityMatrix::standard();
    let mut checked = 0;
    for _ in 0..50 {
        let d = random_dataset(&mut rng, 2, 60, 12);
        let alpha = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
        let m = ConditionalModel::build(&d, "a", "b", RewardConfig::default(), alpha).map_err(|e| e.to_string())?;
        let c = Counts::count(&d, "a", "b", &RewardConfig::default(), alpha);
        for s in d.taxonomy().iter() {
            let got = best_response(&m, s, 1, &matrix).top().map(|b| b.shot.index());
            ensure!(got == brute_argmax(&c, s.index()), "stimulus {}: {got:?}", d.taxonomy().name(s));
            checked += 1;
        }
    }
    Ok(format!("{checked} stimulus/model pairs"))
}

fn same_tier(a: RewardTier, b: Tier) -> bool {
    matches!(
        (a, b),
        (RewardTier::Hp, Tier::Hp)
            | (RewardTier::Mp, Tier::Mp)
            | (RewardTier::Mn, Tier::Mn)
            | (RewardTier::Ln, Tier::Ln)
            | (RewardTier::Neutral, Tier::Neutral)
    )
}

fn reward_labels() -> Outcome {
    let cfg = RewardConfig::default();
    ensure!((cfg.hp, cfg.mp, cfg.mn, cfg.ln) == (5.0, 2.0, -2.0, -5.0), "default tiers {cfg:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let tax = Taxonomy::standard();
    let players = [pid("a"), pid("b")];
    let mut seen = [0usize; 5];
    let rallies = 12_000;
    for i in 0..rallies {
        let palette = random_palette(&mut rng, &tax);
        let r = random_rally(&mut rng, &tax, format!("r{i}"), &players, 6, &palette);
        let actors: Vec<&str> = r.shots.iter().map(|e| e.actor.as_str()).collect();
        for focal in &players {
            let labels = label_rewards(&r, focal, &cfg);
            let idx: Vec<usize> = (0..actors.len()).filter(|&t| actors[t] == focal.as_str()).collect();
            ensure!(labels.len() == idx.len(), "rally {i}: {} labels for {} shots", labels.len(), idx.len());
            for (l, &t) in labels.iter().zip(&idx) {
                let want = oracle::tier(&actors, t, r.outcome.winner.as_str(), r.outcome.termination);
                ensure!(same_tier(l.tier, want), "rally {i} shot {t}: {:?} vs {want:?}", l.tier);
                ensure!(l.value == oracle::tier_value(want, &cfg), "rally {i} shot {t}: value {}", l.value);
                seen[want as usize] += 1;
            }
        }
    }
    ensure!(seen.iter().all(|&n| n > 0), "some tier never came up: {seen:?}");
    Ok(format!("{rallies} rallies, tiers hp/mp/mn/ln/neutral = {seen:?}"))
}

fn randomize(node: &mut GameNode, rng: &mut ChaCha8Rng) {
    for c in &mut node.children {
        c.incoming_utility = rng.gen_range(-1.0..1.0);
        if rng.gen_bool(0.3) {
            c.incoming_utility = (c.incoming_utility * 4.0).round() / 4.0;
        }
        randomize(c, rng);
    }
}

fn backward_induction() -> Outcome {
    let d = fixture::bundled();
    let mu = Matchup::build(&d, "xp", "xo", RewardConfig::default(), 0.0).map_err(|e| e.to_string())?;
    let matrix = LegalityMatrix::standard();
    let roots = std::iter::once(None).chain(d.taxonomy().iter().map(Some));
    let trees: Vec<GameNode> = roots
        .flat_map(|s| [Role::Focal, Role::Opponent].map(|r| expand_tree(&mu, s, r, 3, &matrix)))
        .filter(|t| t.max_branching() <= 5)
        .collect();
    ensure!(trees.len() >= 20, "only {} fixture trees", trees.len());
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for round in 0..100 {
        for (ti, tree) in trees.iter().enumerate() {
            let mut t = tree.clone();
            randomize(&mut t, &mut rng);
            let ind = backward_induce(&t);
            let best = resolve(tree_paths(&t)).ok_or("tree without paths")?;
            let line: Vec<usize> = ind.line.iter().map(|l| l.shot.index()).collect();
            ensure!(line == best.iter().map(|b| b.shot).collect::<Vec<_>>(), "round {round} tree {ti}: line differs");
            let (vf, vo) = path_value(&best);
            ensure!(
                (key(ind.value.focal), key(ind.value.opponent)) == (key(vf), key(vo)),
                "round {round} tree {ti}: value differs"
            );
        }
    }
    Ok(format!("{} trees x 100 assignments", trees.len()))
}

fn degeneracy() -> Outcome {
    let d = fixture::bundled();
    let mu = Matchup::build(&d, "xp", "xo", RewardConfig::unit(), 0.0).map_err(|e| e.to_string())?;
    let matrix = LegalityMatrix::standard();
    for s in d.taxonomy().iter() {
        let chosen = choose_focal(&mu, Some(s), 1, &matrix).best;
        let top = best_response(&mu.focal, s, 1, &matrix).top().map(|b| b.shot);
        ensure!(chosen == top, "stimulus {}: {chosen:?} vs {top:?}", d.taxonomy().name(s));
    }
    let chosen = choose_focal(&mu, None, 1, &matrix).best;
    let top = opening_recommendation(&mu.focal, 1).top().map(|b| b.shot);
    ensure!(chosen == top, "serve choice {chosen:?} vs {top:?}");
    Ok(format!("{} stimuli plus the serve", d.taxonomy().len()))
}

fn incremental_vs_batch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let rd = RewardConfig::default();
    let players = [pid("a"), pid("b")];
    let mut live_rallies = 0;
    for seq in 0..200 {
        let base = random_dataset(&mut rng, 1, 20, 10);
        let tax = base.taxonomy().clone();
        let palette = random_palette(&mut rng, &tax);
        let mut mu = Matchup::build(&base, "a", "b", rd, 0.0).map_err(|e| e.to_string())?;
        let mut all =
            base.add_match(Match::new("live", players.clone(), base.matches()[0].date)).map_err(|e| e.to_string())?;
        for i in 0..rng.gen_range(1..12) {
            let r = random_rally(&mut rng, &tax, format!("l{i}"), &players, 10, &palette);
            // Every prefix of a rally in progress must be accepted.
            for n in 1..=r.shots.len() {
                mu.update_live(&Observation {
                    match_id: "live",
                    rally_id: &r.rally_id,
                    shots: &r.shots[..n],
                    outcome: None,
                })
                .map_err(|e| e.to_string())?;
            }
            mu = mu
                .update_live(&Observation {
                    match_id: "live",
                    rally_id: &r.rally_id,
                    shots: &r.shots,
                    outcome: Some(&r.outcome),
                })
                .map_err(|e| e.to_string())?;
            all = all.append_rally("live", r).map_err(|e| e.to_string())?;
            live_rallies += 1;
        }
        let batch = Matchup::build(&all, "a", "b", rd, 0.0).map_err(|e| e.to_string())?;
        ensure!(mu == batch, "sequence {seq}: live model differs from rebuild");
        for (live, rebuilt) in [(&mu.focal, &batch.focal), (&mu.opponent, &batch.opponent)] {
            let counts = |m: &ConditionalModel| m.pairs().map(|(r, s, st)| (r, s, st.n_played())).collect::<Vec<_>>();
            ensure!(counts(live) == counts(rebuilt), "sequence {seq}: pair counts differ");
        }
    }
    Ok(format!("200 sequences, {live_rallies} live rallies"))
}

fn fixture_outputs(d: &Dataset) -> Result<(String, String, String, rally_core::Rollout, Matchup), String> {
    let matrix = LegalityMatrix::standard();
    let mu = Matchup::build(d, "xp", "xo", RewardConfig::default(), 0.0).map_err(|e| e.to_string())?;
    let tax = d.taxonomy();
    let t1 = recommendation_table(&mu.focal, 2, &matrix).to_csv(tax);
    let t2 = recommendation_table(&mu.opponent, 2, &matrix).to_csv(tax);
    let cfg = SimConfig { depth: 3, step_limit: 10, live_update: false, ..SimConfig::default() };
    let seed = parse_seed("p:backhand_short_serve", &mu).map_err(|e| e.to_string())?;
    let rollout = simulate(&mu, &seed, &cfg, &PolicyRegistry::default(), &matrix).map_err(|e| e.to_string())?;
    let table = rollout.to_table(tax, &mu.focal.responder().display_name, &mu.opponent.responder().display_name);
    Ok((t1, t2, table, rollout, mu))
}

fn golden_reproduction() -> Outcome {
    let (t1, t2, table, rollout, mu) = fixture_outputs(&fixture::bundled())?;
    ensure!(t1 == golden("table1_xp_vs_xo.csv"), "table 1 differs from golden");
    ensure!(t2 == golden("table2_xo_vs_xp.csv"), "table 2 differs from golden");
    ensure!(table == golden("rollout_backhand_short_serve_10.txt"), "rollout differs from golden");
    ensure!(rollout.rows().len() == 10, "{} rollout rows", rollout.rows().len());
    let seq = rollout.sequence();
    let tax = mu.taxonomy();
    ensure!(tax.is_serve(seq[0].1) && seq[0].0 == Role::Focal, "rollout does not open with the focal serve");
    for (i, w) in seq.windows(2).enumerate() {
        ensure!(w[0].0 != w[1].0, "shot {} repeats the actor", i + 2);
        ensure!(oracle::soft_legal(tax, w[1].1, w[0].1), "shot {} is illegal", i + 2);
    }
    Ok(format!("3 files, {} rollout shots legal", seq.len()))
}

fn scale_invariance() -> Outcome {
    let d = fixture::bundled();
    let (t1, t2, table, ..) = fixture_outputs(&d)?;
    let (u1, u2, utable, ..) = fixture_outputs(&duplicate(&d, 3))?;
    ensure!(t1 == u1 && t2 == u2, "recommendation tables change under x3");
    ensure!(table == utable, "rollout changes under x3");
    Ok("tables and rollout unchanged under x3".into())
}

fn service_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let tax = Taxonomy::standard();
    let (ids, before) = {
        let s = common::store(Some(dir.path().to_path_buf()));
        let mut ids = Vec::new();
        for n in 0..20 {
            let id = s
                .create(common::request(if n % 4 == 3 { "smash" } else { "fixture" }))
                .map_err(|e| e.to_string())?
                .id
                .clone();
            for i in 0..rng.gen_range(1..6) {
                let r = common::live_rally(&mut rng, i, 8);
                common::play(&s, &id, &r);
                if rng.gen_bool(0.3) {
                    // Reopen the rally and close it again.
                    s.undo(&id).map_err(|e| e.to_string())?;
                    s.rally_end(&id, r.outcome.winner.as_str(), r.outcome.termination).map_err(|e| e.to_string())?;
                }
            }
            // Leave some sessions mid-rally.
            let open = common::live_rally(&mut rng, 99, 5);
            for e in open.shots.iter().take(rng.gen_range(0..4)) {
                s.record_shot(&id, e.actor.as_str(), tax.name(e.shot)).map_err(|e| e.to_string())?;
            }
            ids.push(id);
        }
        let before: Vec<String> = ids
            .iter()
            .map(|id| s.get(id).map(|x| x.advise().to_json(&tax).to_string()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        (ids, before)
        // The store is dropped here without any shutdown step.
    };
    let s = common::store(Some(dir.path().to_path_buf()));
    ensure!(s.ids().len() == 20, "{} sessions reloaded", s.ids().len());
    for (id, want) in ids.iter().zip(&before) {
        let got = s.get(id).map_err(|e| e.to_string())?.advise().to_json(&tax).to_string();
        ensure!(&got == want, "session {id}: advice differs after reload");
    }
    Ok("20 sessions, advice identical after reload".into())
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "normalization", limit: secs(5), run: normalization },
        Criterion { name: "argmax oracle", limit: secs(5), run: argmax },
        Criterion { name: "reward-label oracle", limit: secs(10), run: reward_labels },
        Criterion { name: "backward-induction oracle", limit: secs(10), run: backward_induction },
        Criterion { name: "depth-1 degeneracy", limit: secs(1), run: degeneracy },
        Criterion { name: "incremental vs batch", limit: secs(5), run: incremental_vs_batch },
        Criterion { name: "golden reproduction", limit: secs(2), run: golden_reproduction },
        Criterion { name: "scale invariance", limit: None, run: scale_invariance },
        Criterion { name: "service replay", limit: secs(10), run: service_replay },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let took = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        let limit = c.limit.map_or("no limit".to_string(), |l| format!("limit {l:?}"));
        match result {
            Ok(detail) => println!("PASS  {:<26} {:>9.3?} ({limit})  {detail}", c.name, took),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<26} {:>9.3?} ({limit})  {why}", c.name, took);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
