use std::collections::BTreeMap;
use std::sync::Arc;

use rally_core::{Category, Dataset, GameNode, RewardConfig, Role, ShotId, Taxonomy, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Hp,
    Mp,
    Mn,
    Ln,
    Neutral,
}

/// Tier of shot `t` from how many shots follow it and how the rally ended.
pub fn tier(actors: &[&str], t: usize, winner: &str, termination: Termination) -> Tier {
    let after = actors.len() - 1 - t;
    let decisive = termination == Termination::WinnerShot;
    let mine = winner == actors[t];
    match (after, decisive, mine) {
        (0, true, _) => Tier::Hp,
        (0, false, _) => Tier::Ln,
        (1, true, false) => Tier::Mn,
        (2, true, true) => Tier::Mp,
        _ => Tier::Neutral,
    }
}

pub fn tier_value(t: Tier, r: &RewardConfig) -> f64 {
    match t {
        Tier::Hp => r.hp,
        Tier::Mp => r.mp,
        Tier::Mn => r.mn,
        Tier::Ln => r.ln,
        Tier::Neutral => r.neutral,
    }
}

pub fn hard_legal(tax: &Taxonomy, r: ShotId, s: ShotId) -> bool {
    let (rc, sc) = (tax.category(r), tax.category(s));
    rc != Category::Serve
        && !(rc == Category::Smash && sc == Category::Smash)
        && !(rc == Category::Block && sc == Category::Block)
}

pub fn soft_legal(tax: &Taxonomy, r: ShotId, s: ShotId) -> bool {
    hard_legal(tax, r, s) && !(tax.category(s) == Category::Drop && tax.category(r) == Category::Smash)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cell {
    pub n: u64,
    pub won: u64,
    pub reward: f64,
}

/// Plain counts of one player's answers to the other's shots.
#[derive(Debug, Clone)]
pub struct Counts {
    pub tax: Arc<Taxonomy>,
    pub alpha: f64,
    /// Keyed by (response index, stimulus index).
    pub cells: BTreeMap<(usize, usize), Cell>,
    pub openers: BTreeMap<usize, Cell>,
}

impl Counts {
    pub fn count(d: &Dataset, responder: &str, stimulator: &str, rewards: &RewardConfig, alpha: f64) -> Counts {
        let tax = d.taxonomy().clone();
        let mut cells: BTreeMap<(usize, usize), Cell> = BTreeMap::new();
        let mut openers: BTreeMap<usize, Cell> = BTreeMap::new();
        for m in d.matches() {
            let ids = [m.players[0].as_str(), m.players[1].as_str()];
            if !(ids.contains(&responder) && ids.contains(&stimulator)) {
                continue;
            }
            for r in &m.rallies {
                let actors: Vec<&str> = r.shots.iter().map(|e| e.actor.as_str()).collect();
                for t in 0..actors.len() {
                    if actors[t] != responder {
                        continue;
                    }
                    let tr = tier(&actors, t, r.outcome.winner.as_str(), r.outcome.termination);
                    let cell = if t == 0 {
                        openers.entry(r.shots[0].shot.index()).or_default()
                    } else {
                        cells.entry((r.shots[t].shot.index(), r.shots[t - 1].shot.index())).or_default()
                    };
                    cell.n += 1;
                    cell.won += u64::from(matches!(tr, Tier::Hp | Tier::Mp));
                    cell.reward += tier_value(tr, rewards);
                }
            }
        }
        Counts { tax, alpha, cells, openers }
    }

    pub fn shot(&self, i: usize) -> ShotId {
        self.tax.iter().nth(i).expect("index in range")
    }

    pub fn cell(&self, r: usize, s: usize) -> Cell {
        self.cells.get(&(r, s)).copied().unwrap_or_default()
    }

    pub fn total(&self, s: usize) -> u64 {
        (0..self.tax.len()).map(|r| self.cell(r, s).n).sum()
    }

    pub fn prob(&self, r: usize, s: usize) -> f64 {
        if !hard_legal(&self.tax, self.shot(r), self.shot(s)) {
            return 0.0;
        }
        let legal = (0..self.tax.len()).filter(|&x| hard_legal(&self.tax, self.shot(x), self.shot(s))).count();
        let denom = self.total(s) as f64 + self.alpha * legal as f64;
        if denom == 0.0 {
            0.0
        } else {
            (self.cell(r, s).n as f64 + self.alpha) / denom
        }
    }

    pub fn utility(&self, r: usize, s: usize) -> f64 {
        let c = self.cell(r, s);
        if c.n == 0 {
            return 0.0;
        }
        self.prob(r, s) * (c.won as f64 / c.n as f64)
    }

    pub fn edge_utility(&self, r: usize, s: usize) -> f64 {
        let c = self.cell(r, s);
        if c.n == 0 {
            return 0.0;
        }
        self.utility(r, s) * (c.reward / c.n as f64)
    }

    fn opener_edge_utility(&self, serve: usize) -> f64 {
        let total: u64 = self.openers.values().map(|c| c.n).sum();
        let serves = self.tax.serves().count();
        let c = self.openers.get(&serve).copied().unwrap_or_default();
        let denom = total as f64 + self.alpha * serves as f64;
        if c.n == 0 || denom == 0.0 {
            return 0.0;
        }
        (c.n as f64 + self.alpha) / denom * (c.won as f64 / c.n as f64) * (c.reward / c.n as f64)
    }

    /// Stimuli answered at least once, in taxonomy order.
    pub fn stimuli(&self) -> Vec<usize> {
        (0..self.tax.len()).filter(|&s| self.total(s) > 0).collect()
    }

    /// All legal answers to `s`, best first.
    pub fn ranked(&self, s: usize, soft: bool) -> Vec<usize> {
        let tax = &self.tax;
        let mut scored: Vec<(i64, u64, usize)> = (0..tax.len())
            .filter(|&r| {
                if soft {
                    soft_legal(tax, self.shot(r), self.shot(s))
                } else {
                    hard_legal(tax, self.shot(r), self.shot(s))
                }
            })
            .map(|r| (-grid(self.utility(r, s)), self.cell(r, s).n, r))
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        scored.into_iter().map(|x| x.2).collect()
    }

    /// Recommendation table as `stimulus,suggestion_1,…` CSV.
    pub fn table_csv(&self, k: usize) -> String {
        let mut out = String::from("stimulus");
        for i in 1..=k {
            out += &format!(",suggestion_{i}");
        }
        out.push('\n');
        for s in self.stimuli() {
            let ranked = self.ranked(s, true);
            out += self.tax.name(self.shot(s));
            for i in 0..k {
                out.push(',');
                if let Some(&r) = ranked.get(i) {
                    out += self.tax.name(self.shot(r));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn grid(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub role: Role,
    pub shot: usize,
    pub utility: f64,
    pub support: u64,
}

fn role_value(path: &[Step], from: usize, role: Role) -> f64 {
    let mut v = 0.0;
    for step in path[from..].iter().rev() {
        if step.role == role {
            v += step.utility;
        }
    }
    v
}

/// Collapses a full list of root-to-leaf paths to the one both players
/// would follow, deepest decision first.
pub fn resolve(mut paths: Vec<Vec<Step>>) -> Option<Vec<Step>> {
    let longest = paths.iter().map(Vec::len).max()?;
    for level in (0..longest).rev() {
        let mut groups: BTreeMap<Vec<usize>, Vec<Step>> = BTreeMap::new();
        let mut keep: Vec<Vec<Step>> = Vec::new();
        for p in paths {
            if p.len() <= level {
                keep.push(p);
                continue;
            }
            let prefix: Vec<usize> = p[..level].iter().map(|s| s.shot).collect();
            match groups.get(&prefix) {
                None => {
                    groups.insert(prefix, p);
                }
                Some(best) => {
                    let role = p[level].role;
                    let mine = (grid(role_value(&p, level, role)), p[level].support, p[level].shot);
                    let theirs = (grid(role_value(best, level, role)), best[level].support, best[level].shot);
                    let better = mine.0 > theirs.0
                        || (mine.0 == theirs.0 && (mine.1 > theirs.1 || (mine.1 == theirs.1 && mine.2 < theirs.2)));
                    if better {
                        groups.insert(prefix, p);
                    }
                }
            }
        }
        keep.extend(groups.into_values());
        paths = keep;
    }
    paths.into_iter().next()
}

/// Every root-to-leaf path of an expanded tree.
pub fn tree_paths(root: &GameNode) -> Vec<Vec<Step>> {
    fn walk(node: &GameNode, prefix: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
        if node.children.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for c in &node.children {
            prefix.push(Step {
                role: node.agent,
                shot: c.incoming.expect("child has a shot").index(),
                utility: c.incoming_utility,
                support: c.incoming_support,
            });
            walk(c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(root, &mut Vec::new(), &mut out);
    out
}

/// Total per-role value of a resolved path.
pub fn path_value(path: &[Step]) -> (f64, f64) {
    (role_value(path, 0, Role::Focal), role_value(path, 0, Role::Opponent))
}

/// Lookahead over a pair of count tables by enumerating every line of play.
pub struct PathOracle<'a> {
    pub focal: &'a Counts,
    pub opponent: &'a Counts,
}

impl PathOracle<'_> {
    fn moves(&self, role: Role, stimulus: Option<usize>) -> Vec<Step> {
        let c = if role == Role::Focal { self.focal } else { self.opponent };
        let tax = &c.tax;
        let all: Vec<(usize, f64, u64)> = match stimulus {
            None => tax
                .serves()
                .map(|s| (s.index(), c.opener_edge_utility(s.index()), c.openers.get(&s.index()).map_or(0, |x| x.n)))
                .collect(),
            Some(s) => (0..tax.len())
                .filter(|&r| soft_legal(tax, c.shot(r), c.shot(s)))
                .map(|r| (r, c.edge_utility(r, s), c.cell(r, s).n))
                .collect(),
        };
        let seen: Vec<_> = all.iter().copied().filter(|m| m.2 > 0).collect();
        let chosen = if seen.is_empty() { all.into_iter().map(|m| (m.0, 0.0, 0)).collect() } else { seen };
        chosen.into_iter().map(|(shot, utility, support)| Step { role, shot, utility, support }).collect()
    }

    pub fn paths(&self, stimulus: Option<usize>, role: Role, depth: usize) -> Vec<Vec<Step>> {
        let mut paths: Vec<Vec<Step>> = vec![Vec::new()];
        for level in 0..depth {
            let to_act = if level % 2 == 0 { role } else { role.other() };
            paths = paths
                .into_iter()
                .flat_map(|p| {
                    let last = p.last().map(|s| s.shot).or(stimulus);
                    self.moves(to_act, last).into_iter().map(move |m| {
                        let mut q = p.clone();
                        q.push(m);
                        q
                    })
                })
                .collect();
        }
        paths
    }

    pub fn best(&self, stimulus: Option<usize>, role: Role, depth: usize) -> Vec<Step> {
        resolve(self.paths(stimulus, role, depth)).expect("at least one legal move")
    }

    /// Alternating rollout with both players choosing by lookahead, until
    /// the focal player has `focal_shots` shots counting the seed.
    /// Returns the predicted shots only.
    pub fn rollout(&self, seed: &[(Role, usize)], depth: usize, focal_shots: usize) -> Vec<(Role, usize)> {
        let mut last = *seed.last().expect("non-empty seed");
        let mut out = Vec::new();
        let mut done = seed.iter().filter(|s| s.0 == Role::Focal).count();
        loop {
            let to_act = last.0.other();
            if to_act == Role::Focal && done >= focal_shots {
                break;
            }
            let step = self.best(Some(last.1), to_act, depth)[0];
            if to_act == Role::Focal {
                done += 1;
            }
            last = (to_act, step.shot);
            out.push(last);
        }
        out
    }
}
