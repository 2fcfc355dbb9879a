//! Best-response recommendations: for an incoming shot, rank the legal
//! answers by P(answer | shot) · P_success(answer | shot).

use serde::Serialize;

use crate::matchlog::PlayerId;
use crate::model::ConditionalModel;
use crate::ranking::better_first;
use crate::shot::{LegalityMatrix, ShotId, Taxonomy};

pub const DEFAULT_K: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityBreakdown {
    pub shot: ShotId,
    pub p: f64,
    pub p_success: f64,
    pub utility: f64,
    pub support: u64,
}

/// Which model a recommendation came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelRef {
    pub responder: PlayerId,
    pub stimulator: PlayerId,
    pub version: String,
}

impl ModelRef {
    pub fn of(m: &ConditionalModel) -> Self {
        Self { responder: m.responder().id.clone(), stimulator: m.stimulator().id.clone(), version: m.fingerprint() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    /// `None` when choosing how to open a rally.
    pub stimulus: Option<ShotId>,
    pub ranked: Vec<UtilityBreakdown>,
    pub model_ref: ModelRef,
}

impl Recommendation {
    pub fn top(&self) -> Option<&UtilityBreakdown> {
        self.ranked.first()
    }
}

fn rank(mut rows: Vec<UtilityBreakdown>, k: usize) -> Vec<UtilityBreakdown> {
    rows.sort_by(|a, b| better_first((a.utility, a.support, a.shot), (b.utility, b.support, b.shot)));
    rows.truncate(k.max(1));
    rows
}

fn breakdowns(m: &ConditionalModel, stimulus: ShotId, matrix: &LegalityMatrix) -> Vec<UtilityBreakdown> {
    matrix
        .legal_responses(stimulus)
        .into_iter()
        .map(|shot| {
            let p = m.prob(shot, stimulus);
            let p_success = m.success_rate(shot, stimulus);
            UtilityBreakdown { shot, p, p_success, utility: p * p_success, support: m.support(shot, stimulus) }
        })
        .collect()
}

/// Top-`k` legal answers to `stimulus`.
///
/// Unseen answers carry `support == 0` and zero utility, so they sort after
/// every shot with evidence.
pub fn best_response(m: &ConditionalModel, stimulus: ShotId, k: usize, matrix: &LegalityMatrix) -> Recommendation {
    best_response_with_ref(m, stimulus, k, matrix, ModelRef::of(m))
}

fn best_response_with_ref(
    m: &ConditionalModel,
    stimulus: ShotId,
    k: usize,
    matrix: &LegalityMatrix,
    model_ref: ModelRef,
) -> Recommendation {
    Recommendation { stimulus: Some(stimulus), ranked: rank(breakdowns(m, stimulus, matrix), k), model_ref }
}

/// The responder's predicted answer to `own_shot`, given the opponent's model.
pub fn predict_opponent(
    m_opponent: &ConditionalModel,
    own_shot: ShotId,
    k: usize,
    matrix: &LegalityMatrix,
) -> Recommendation {
    best_response(m_opponent, own_shot, k, matrix)
}

/// Ranked serves for opening a rally, from the responder's own serving record.
pub fn opening_recommendation(m: &ConditionalModel, k: usize) -> Recommendation {
    let tax = m.taxonomy();
    let rows = tax
        .serves()
        .map(|shot| {
            let p = m.opener_prob(shot);
            let p_success = m.opener_success_rate(shot);
            UtilityBreakdown { shot, p, p_success, utility: p * p_success, support: m.opener_support(shot) }
        })
        .collect();
    Recommendation { stimulus: None, ranked: rank(rows, k), model_ref: ModelRef::of(m) }
}

/// One row per stimulus the responder has faced.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationTable {
    pub k: usize,
    pub rows: Vec<Recommendation>,
    pub model_ref: ModelRef,
}

pub fn recommendation_table(m: &ConditionalModel, k: usize, matrix: &LegalityMatrix) -> RecommendationTable {
    let model_ref = ModelRef::of(m);
    let rows =
        m.observed_stimuli().into_iter().map(|s| best_response_with_ref(m, s, k, matrix, model_ref.clone())).collect();
    RecommendationTable { k: k.max(1), rows, model_ref }
}

impl RecommendationTable {
    /// `stimulus,suggestion_1,…,suggestion_k`; short rows leave trailing cells empty.
    pub fn to_csv(&self, tax: &Taxonomy) -> String {
        let mut out = String::from("stimulus");
        for i in 1..=self.k {
            out.push_str(&format!(",suggestion_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(stimulus_name(tax, row.stimulus));
            for i in 0..self.k {
                out.push(',');
                if let Some(b) = row.ranked.get(i) {
                    out.push_str(tax.name(b.shot));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self, tax: &Taxonomy) -> String {
        let mut header = vec!["Opponent's shot".to_string()];
        header.extend((1..=self.k).map(|i| format!("suggestion {i}")));
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![stimulus_name(tax, row.stimulus).to_string()];
                cells.extend((0..self.k).map(|i| match row.ranked.get(i) {
                    Some(b) if b.support == 0 => format!("{} (no data)", tax.name(b.shot)),
                    Some(b) => tax.name(b.shot).to_string(),
                    None => String::new(),
                }));
                cells
            })
            .collect();
        render_grid(&header, &body)
    }

    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "responder": self.model_ref.responder,
            "stimulator": self.model_ref.stimulator,
            "model_version": self.model_ref.version,
            "k": self.k,
            "rows": self.rows.iter().map(|r| r.to_json(tax)).collect::<Vec<_>>(),
        })
    }
}

impl Recommendation {
    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "stimulus": self.stimulus.map(|s| tax.name(s)),
            "ranked": self.ranked.iter().map(|b| b.to_json(tax)).collect::<Vec<_>>(),
            "model_ref": self.model_ref,
        })
    }
}

impl UtilityBreakdown {
    pub fn to_json(&self, tax: &Taxonomy) -> serde_json::Value {
        serde_json::json!({
            "shot": tax.name(self.shot),
            "p": self.p,
            "p_success": self.p_success,
            "utility": self.utility,
            "support": self.support,
        })
    }
}

fn stimulus_name(tax: &Taxonomy, s: Option<ShotId>) -> &str {
    s.map_or("(rally start)", |s| tax.name(s))
}

/// Plain-text grid with `|` separators.
pub fn render_grid(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> =
            (0..cols).map(|i| format!("{:<w$}", cells.get(i).map_or("", |c| c.as_str()), w = widths[i])).collect();
        format!("| {} |\n", padded.join(" | ")).replace(" \n", "\n")
    };
    let rule = format!("|{}|\n", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|"));
    let mut out = line(header);
    out.push_str(&rule);
    for row in rows {
        out.push_str(&line(row));
    }
    out
}
