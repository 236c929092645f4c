//! File formats: program JSON, vocabulary export, factor reports, CSV
//! tables. All numeric formatting goes through Rust's shortest-roundtrip
//! `Display`, so identical values always serialize to identical bytes.

use algforge_core::ir::{from_text, to_text, Cond, Pointer, Program};
use algforge_core::landscape::{FactorVector, FACTOR_NAMES};
use algforge_core::trainer::TrainLog;
use algforge_core::vocab::{TokenKind, Vocabulary, COUNT_FRACTIONS, N_GRID, P_GRID};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// JSON mirror of a snippet, field for field with the text form.
#[derive(Serialize, Deserialize)]
pub struct SnippetJson {
    pub component: String,
    pub params: Vec<f64>,
    pub pointer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fork_offset: Option<u8>,
    pub condition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct ProgramJson {
    pub text: String,
    pub snippets: Vec<SnippetJson>,
}

pub fn program_to_json(program: &Program) -> ProgramJson {
    let snippets = program
        .snippets()
        .iter()
        .map(|s| {
            let (pointer, fork_offset) = match s.pointer {
                Pointer::Forward => ("forward", None),
                Pointer::Iterate => ("iterate", None),
                Pointer::Fork(k) => ("fork", Some(k)),
            };
            let (condition, count_fraction, event) = match s.condition {
                Cond::Once => ("once", None, None),
                Cond::CountFrac(f) => ("count", Some(f), None),
                Cond::Event(e) => ("event", None, Some(e.name().to_string())),
            };
            SnippetJson {
                component: s.component.name().to_string(),
                params: s.params.clone(),
                pointer: pointer.to_string(),
                fork_offset,
                condition: condition.to_string(),
                count_fraction,
                event,
            }
        })
        .collect();
    ProgramJson {
        text: to_text(program),
        snippets,
    }
}

/// Load a program from its canonical text file.
pub fn load_program(path: &std::path::Path) -> Result<Program> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    from_text(text.trim()).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Vocabulary dump: index, kind, name and decoded value per token.
pub fn vocab_export(vocab: &Vocabulary) -> serde_json::Value {
    let tokens: Vec<serde_json::Value> = vocab
        .iter()
        .map(|(id, kind)| match kind {
            TokenKind::Component(c) => json!({
                "index": id.0,
                "kind": "component",
                "name": c.name(),
                "category": match c.category() {
                    algforge_core::vocab::Category::Choose => "choose",
                    algforge_core::vocab::Category::Search => "search",
                    algforge_core::vocab::Category::Select => "select",
                },
                "param_kinds": c
                    .param_kinds()
                    .iter()
                    .map(|k| match k {
                        algforge_core::vocab::ParamKind::NFrac => "n-grid",
                        algforge_core::vocab::ParamKind::PFrac => "p-grid",
                    })
                    .collect::<Vec<_>>(),
            }),
            TokenKind::NValue(i) => json!({
                "index": id.0,
                "kind": "n_value",
                "name": format!("n_{}", N_GRID[i as usize]),
                "value": N_GRID[i as usize],
            }),
            TokenKind::PValue(i) => json!({
                "index": id.0,
                "kind": "p_value",
                "name": format!("p_{}", P_GRID[i as usize]),
                "value": P_GRID[i as usize],
            }),
            TokenKind::Pointer(p) => json!({
                "index": id.0,
                "kind": "pointer",
                "name": p.name(),
            }),
            TokenKind::ForkOffset(k) => json!({
                "index": id.0,
                "kind": "fork_offset",
                "name": format!("offset_{k}"),
                "value": k,
            }),
            TokenKind::CondOnce => json!({
                "index": id.0,
                "kind": "condition",
                "name": "once",
            }),
            TokenKind::CondCount(i) => json!({
                "index": id.0,
                "kind": "condition",
                "name": format!("count_{}", COUNT_FRACTIONS[i as usize]),
                "value": COUNT_FRACTIONS[i as usize],
            }),
            TokenKind::CondEvent(e) => json!({
                "index": id.0,
                "kind": "condition",
                "name": format!("event_{}", e.name()),
            }),
            TokenKind::Begin => json!({"index": id.0, "kind": "begin", "name": "begin"}),
            TokenKind::End => json!({"index": id.0, "kind": "end", "name": "end"}),
        })
        .collect();
    json!({"size": vocab.len(), "tokens": tokens})
}

/// Factor report in JSON, names in fixed table order.
pub fn features_json(problem_key: &str, seed: u64, fv: &FactorVector) -> serde_json::Value {
    let mut factors = serde_json::Map::new();
    for (name, value) in FACTOR_NAMES.iter().zip(fv.values.iter()) {
        factors.insert(name.to_string(), json!(value));
    }
    json!({
        "problem_key": problem_key,
        "seed": seed,
        "factors": factors,
    })
}

/// Factor report as two CSV lines (header and values).
pub fn features_csv(problem_key: &str, seed: u64, fv: &FactorVector) -> String {
    let mut header = String::from("problem_key,seed");
    let mut row = format!("{problem_key},{seed}");
    for (name, value) in FACTOR_NAMES.iter().zip(fv.values.iter()) {
        header.push(',');
        header.push_str(name);
        row.push(',');
        row.push_str(&value.to_string());
    }
    format!("{header}\n{row}\n")
}

/// Training log CSV: one row per epoch.
pub fn train_log_csv(log: &TrainLog) -> String {
    let mut out = String::from(
        "epoch,mean_reward,max_reward,baseline,loss,len_1,len_2,len_3,len_4,len_5,len_6\n",
    );
    for row in &log.rows {
        out.push_str(&format!(
            "{},{},{},{},{}",
            row.epoch, row.mean_reward, row.max_reward, row.baseline, row.loss
        ));
        for h in row.snippet_hist {
            out.push_str(&format!(",{h}"));
        }
        out.push('\n');
    }
    out
}

/// One evaluation run for the CSV report.
pub struct RunRecord {
    pub program_id: String,
    pub problem: String,
    pub run: usize,
    pub best_fitness: f64,
    pub fe_used: usize,
    pub wall_ms: f64,
}

pub const RUN_RECORD_HEADER: &str = "program_id,problem,run,best_fitness,fe_used,wall_ms\n";

pub fn run_records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUN_RECORD_HEADER);
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.program_id, r.problem, r.run, r.best_fitness, r.fe_used, r.wall_ms
        ));
    }
    out
}
