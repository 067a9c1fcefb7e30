use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::run::run_subtest;
use crate::gateway::{Completer, ExplanationRules};
use crate::model::{ExamItem, PromptProtocol, SamplingConfig};
use crate::stats::{chi2_independence, ChiSquareResult, ContingencyTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub index: usize,
    pub protocol: PromptProtocol,
    pub sampling: SamplingConfig,
    pub correct: u64,
    pub incorrect: u64,
    pub percent: Option<f64>,
    /// Set when the configuration failed; it is left out of the table.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n_questions: usize,
    pub configs: Vec<ConfigScore>,
    /// Population standard deviation of percent scores over completed
    /// configurations.
    pub score_std_dev: Option<f64>,
    pub mean_percent: Option<f64>,
    pub table: Option<ContingencyTable>,
    pub chi_square: Option<ChiSquareResult>,
    pub notes: Vec<String>,
}

/// Evaluate every protocol x sampling configuration on the same questions,
/// without a ceiling, and test whether correctness depends on the
/// configuration. Configurations run on up to `max_parallel` threads.
pub fn run_sweep<C: Completer + ?Sized>(
    items: &[ExamItem],
    protocols: &[PromptProtocol],
    samplings: &[SamplingConfig],
    completer: &C,
    max_parallel: usize,
) -> SweepReport {
    let grid: Vec<(PromptProtocol, SamplingConfig)> = protocols
        .iter()
        .flat_map(|p| samplings.iter().map(move |s| (p.clone(), s.clone())))
        .collect();
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(grid.len()));
    let rules = ExplanationRules::default();
    std::thread::scope(|scope| {
        for _ in 0..max_parallel.clamp(1, grid.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((protocol, sampling)) = grid.get(i) else { break };
                let mut score = ConfigScore {
                    index: i,
                    protocol: protocol.clone(),
                    sampling: sampling.clone(),
                    correct: 0,
                    incorrect: 0,
                    percent: None,
                    error: None,
                };
                match run_subtest(items, protocol, sampling, 0, completer, &rules) {
                    Ok(run) => {
                        score.correct = u64::from(run.raw_score);
                        score.incorrect = run.outcomes.len() as u64 - score.correct;
                        score.percent = Some(100.0 * score.correct as f64 / run.outcomes.len() as f64);
                    }
                    Err(aborted) => {
                        log::warn!("sweep config {i} skipped: {}", aborted.error);
                        score.error = Some(aborted.error.to_string());
                    }
                }
                done.lock().expect("sweep lock").push(score);
            });
        }
    });
    let mut configs = done.into_inner().expect("sweep lock");
    configs.sort_by_key(|c| c.index);
    summarize(items.len(), configs)
}

fn summarize(n_questions: usize, configs: Vec<ConfigScore>) -> SweepReport {
    let mut notes = Vec::new();
    let ok: Vec<&ConfigScore> = configs.iter().filter(|c| c.error.is_none()).collect();
    let failed = configs.len() - ok.len();
    if failed > 0 {
        notes.push(format!("{failed} configuration(s) failed and were skipped"));
    }
    let percents: Vec<f64> = ok.iter().filter_map(|c| c.percent).collect();
    let (mean_percent, score_std_dev) = if percents.is_empty() {
        (None, None)
    } else {
        let m = percents.iter().sum::<f64>() / percents.len() as f64;
        let var = percents.iter().map(|p| (p - m).powi(2)).sum::<f64>() / percents.len() as f64;
        (Some(m), Some(var.sqrt()))
    };
    let (table, chi_square) = if ok.len() < 2 {
        notes.push("fewer than two completed configurations; no independence test".into());
        (None, None)
    } else {
        let mut table = ContingencyTable::new(ok.iter().map(|c| vec![c.correct, c.incorrect]).collect())
            .expect("at least 2x2");
        table.row_labels = ok.iter().map(|c| format!("config-{}", c.index)).collect();
        table.col_labels = vec!["correct".into(), "incorrect".into()];
        let chi = match chi2_independence(&table, 1) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("independence test unavailable: {e}"));
                None
            }
        };
        (Some(table), chi)
    };
    SweepReport { n_questions, configs, score_std_dev, mean_percent, table, chi_square, notes }
}
