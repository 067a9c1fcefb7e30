//! Run-directory reports.
//!
//! A run directory holds `questions.jsonl`, `responses.jsonl` and
//! `outcomes.jsonl`, and optionally `human_outcomes.jsonl` (paired human
//! scores, enabling the TD test), `pre_annotations.jsonl` and `run.json`
//! (a [`ReportConfig`]). Rendering writes `report.json`,
//! `plot_series.json` and `age_test_{exact,at_most}.json`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{
    annotate_questions, build_design_matrix, load_pre_annotations, FeatureSources, FeatureVector, LexiconTagger,
    REGRESSOR_NAMES,
};
use crate::model::{
    jsonl, DefQuestion, ExamItem, LmResponse, ModelError, Outcome, TestKind, TestMode, WcQuestion,
};
use crate::stats::{
    age_profile, chi2_independence, estimate_human_mean, fit_lpm_with, AgeProfile, AgeProfileConfig,
    ChiSquareResult, ContingencyTable, LpmFit, LpmOptions, PerAge, ScoredItem, StatsError,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("run directory {dir} is missing: {}", missing.join(", "))]
    MissingInputs { dir: String, missing: Vec<String> },
    #[error("join error: {0}")]
    Join(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QuestionLine {
    Item(ExamItem),
    Wc(WcQuestion),
    Def(DefQuestion),
}

/// Read questions written either as tagged exam items or as bare Word
/// Classes / Definitions records.
pub fn read_questions(path: &Path) -> Result<Vec<ExamItem>, ModelError> {
    let lines: Vec<QuestionLine> = jsonl::read(path)?;
    Ok(lines
        .into_iter()
        .map(|l| match l {
            QuestionLine::Item(i) => i,
            QuestionLine::Wc(q) => ExamItem::Wc(q),
            QuestionLine::Def(q) => ExamItem::Def(q),
        })
        .collect())
}

/// Expected human correctness from the default annotation chain:
/// 15% disagreement over 108 items, alpha 0.05, knowledge prior 0.5, six
/// answer options.
pub fn default_mu() -> f64 {
    estimate_human_mean(0.15, 108, 0.05, 0.5, 6).expect("valid default chain")
}

/// Expected disagreement between two independent humans with mean `mu`.
pub fn default_gamma(mu: f64) -> f64 {
    2.0 * mu * (1.0 - mu)
}

/// Pair outcomes with question AoA (and human scores when given).
/// Outcomes for questions without an AoA or with a non-binary score are
/// skipped and their ids returned.
pub fn scored_items(
    questions: &[ExamItem],
    outcomes: &[Outcome],
    human: Option<&[Outcome]>,
) -> Result<(Vec<ScoredItem>, Vec<String>), ReportError> {
    let by_id: HashMap<&str, &ExamItem> = questions.iter().map(|q| (q.id(), q)).collect();
    let human: Option<HashMap<&str, u8>> = human.map(|h| h.iter().map(|o| (o.question_id.as_str(), o.h)).collect());
    let mut items = Vec::with_capacity(outcomes.len());
    let mut skipped = Vec::new();
    for o in outcomes {
        let q = by_id
            .get(o.question_id.as_str())
            .ok_or_else(|| ReportError::Join(format!("outcome for unknown question {:?}", o.question_id)))?;
        let h_human = match &human {
            Some(m) => Some(
                *m.get(o.question_id.as_str())
                    .ok_or_else(|| ReportError::Join(format!("no human outcome for {:?}", o.question_id)))?,
            ),
            None => None,
        };
        match q.aoa() {
            Some(aoa) if o.h <= 1 && h_human.is_none_or(|h| h <= 1) => {
                items.push(ScoredItem { aoa, h_lm: o.h, h_human })
            }
            _ => skipped.push(o.question_id.clone()),
        }
    }
    Ok((items, skipped))
}

/// Every integer age from the youngest to the oldest bucket present.
pub fn default_age_grid(items: &[ScoredItem]) -> Vec<u32> {
    match (items.iter().map(ScoredItem::age_bucket).min(), items.iter().map(ScoredItem::age_bucket).max()) {
        (Some(lo), Some(hi)) => (lo..=hi).collect(),
        _ => Vec::new(),
    }
}

/// The age-test document: the profile as pretty JSON plus a newline. The
/// CLI and the run report both write exactly these bytes.
pub fn age_test_json(items: &[ScoredItem], config: &AgeProfileConfig) -> Result<String, StatsError> {
    let profile = age_profile(items, config)?;
    Ok(age_profile_json(&profile))
}

fn age_profile_json(profile: &AgeProfile) -> String {
    let mut s = serde_json::to_string_pretty(profile).expect("profile serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Means-test mu; the default annotation chain when absent.
    #[serde(default)]
    pub mu: Option<f64>,
    /// TD-test gamma; `2 mu (1 - mu)` when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Age grid; every age between the youngest and oldest bucket when absent.
    #[serde(default)]
    pub ages: Option<Vec<u32>>,
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { alpha: 0.05, mu: None, gamma: None, ages: None }
    }
}

impl ReportConfig {
    pub fn age_test_config(&self, items: &[ScoredItem], mode: TestMode, test: TestKind) -> AgeProfileConfig {
        let mu = self.mu.unwrap_or_else(default_mu);
        AgeProfileConfig {
            mode,
            test,
            alpha: self.alpha,
            ages: self.ages.clone().unwrap_or_else(|| default_age_grid(items)),
            mu: PerAge::Constant(mu),
            gamma: PerAge::Constant(self.gamma.unwrap_or_else(|| default_gamma(mu))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub age: u32,
    pub n: u64,
    pub correct: u64,
    pub accuracy: f64,
}

pub fn accuracy_by_age(items: &[ScoredItem], ages: &[u32], mode: TestMode) -> Vec<AccuracyRow> {
    ages.iter()
        .filter_map(|&age| {
            let bucket: Vec<&ScoredItem> =
                items.iter().filter(|it| crate::stats::profile::in_bucket(it.age_bucket(), age, mode)).collect();
            if bucket.is_empty() {
                return None;
            }
            let correct = bucket.iter().filter(|it| it.h_lm == 1).count() as u64;
            let n = bucket.len() as u64;
            Some(AccuracyRow { age, n, correct, accuracy: correct as f64 / n as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByMode<T> {
    pub exact: T,
    pub at_most: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub feature: String,
    pub table: ContingencyTable,
    /// Error rate per feature level, in table row order.
    pub error_rates: Vec<f64>,
    pub result: Option<ChiSquareResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub n_rows: usize,
    pub excluded: Vec<(String, String)>,
    pub chi_square: Vec<FeatureTest>,
    pub lpm: Option<LpmFit>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ReportConfig,
    pub mu: f64,
    pub gamma: f64,
    pub n_questions: usize,
    pub n_responses: usize,
    pub n_outcomes: usize,
    pub skipped_outcomes: Vec<String>,
    pub accuracy: ByMode<Vec<AccuracyRow>>,
    pub age_tests: ByMode<AgeProfile>,
    pub td_tests: Option<ByMode<AgeProfile>>,
    pub min_aligned_age: ByMode<Option<u32>>,
    pub analysis: Option<Analysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub accuracy: Vec<Series>,
    pub p_values: Vec<Series>,
    pub lpm_coefficients: Vec<(String, f64, f64)>,
    pub feature_error_rates: Vec<(String, Vec<String>, Vec<f64>)>,
}

fn feature_levels(f: &FeatureVector) -> Vec<(&'static str, String)> {
    let yn = |b: bool| if b { "yes".to_string() } else { "no".to_string() };
    vec![
        ("h1_adv_adj", yn(f.has_adv_or_adj)),
        ("h2_distinct_pos", yn(f.distinct_pos())),
        ("h3_hard_relation", yn(f.relation_hard)),
        ("h4_morph_class", f.morph_class.map_or("unknown".to_string(), |m| m.as_str().to_string())),
        ("h5_explains", yn(f.has_explanation)),
        ("relation", f.relation.as_str().to_string()),
    ]
}

/// Chi-squared battery (feature level x correct/incorrect) and the LPM
/// over the H1-H6 design matrix, Bonferroni-adjusted within each.
pub fn analyze(features: &[FeatureVector], outcomes: &[Outcome]) -> Result<Analysis, ReportError> {
    let dm = build_design_matrix(outcomes, features).map_err(|e| ReportError::Join(e.to_string()))?;
    let by_id: HashMap<&str, &FeatureVector> = features.iter().map(|f| (f.question_id.as_str(), f)).collect();
    let mut notes = Vec::new();
    let mut columns: BTreeMap<&'static str, Vec<(String, &'static str)>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.h <= 1) {
        let f = by_id[o.question_id.as_str()];
        let outcome = if o.h == 1 { "correct" } else { "incorrect" };
        for (name, level) in feature_levels(f) {
            columns.entry(name).or_default().push((level, outcome));
        }
    }
    let n_tests = columns.len() as u32;
    let mut chi_square = Vec::new();
    for (name, pairs) in columns {
        let table = match ContingencyTable::from_pairs(pairs.iter().map(|(l, o)| (l.as_str(), *o))) {
            Ok(t) => t,
            Err(e) => {
                notes.push(format!("{name}: {e}"));
                continue;
            }
        };
        let incorrect_col = table.col_labels.iter().position(|c| c == "incorrect");
        let error_rates = table
            .counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                incorrect_col.map_or(0.0, |j| row[j] as f64 / total as f64)
            })
            .collect();
        let (result, note) = match chi2_independence(&table, n_tests) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        chi_square.push(FeatureTest { feature: name.to_string(), table, error_rates, result, note });
    }
    let lpm = if dm.rows.is_empty() {
        notes.push("no complete design rows; LPM skipped".into());
        None
    } else {
        let options = LpmOptions {
            names: REGRESSOR_NAMES.iter().map(|s| s.to_string()).collect(),
            ..LpmOptions::default()
        };
        match fit_lpm_with(&dm.x(), &dm.y(), &options) {
            Ok(fit) => Some(fit),
            Err(e) => {
                notes.push(format!("LPM: {e}"));
                None
            }
        }
    };
    Ok(Analysis { n_rows: dm.rows.len(), excluded: dm.excluded, chi_square, lpm, notes })
}

struct RunInputs {
    questions: Vec<ExamItem>,
    responses: Vec<LmResponse>,
    outcomes: Vec<Outcome>,
    human: Option<Vec<Outcome>>,
    config: ReportConfig,
    pre: Option<HashMap<String, crate::features::PreAnnotation>>,
}

fn load_inputs(dir: &Path) -> Result<RunInputs, ReportError> {
    let required = ["questions.jsonl", "responses.jsonl", "outcomes.jsonl"];
    let missing: Vec<String> =
        required.iter().filter(|f| !dir.join(f).is_file()).map(|f| f.to_string()).collect();
    if !missing.is_empty() {
        return Err(ReportError::MissingInputs { dir: dir.display().to_string(), missing });
    }
    let optional = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
    let config = match optional("run.json") {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|source| ModelError::Io { path: p.display().to_string(), source })?;
            serde_json::from_str(&text).map_err(|e| ModelError::invalid("run.json", e.to_string()))?
        }
        None => ReportConfig::default(),
    };
    Ok(RunInputs {
        questions: read_questions(&dir.join("questions.jsonl"))?,
        responses: jsonl::read(&dir.join("responses.jsonl"))?,
        outcomes: jsonl::read(&dir.join("outcomes.jsonl"))?,
        human: optional("human_outcomes.jsonl").map(|p| jsonl::read(&p)).transpose()?,
        config,
        pre: optional("pre_annotations.jsonl").map(|p| load_pre_annotations(&p)).transpose()?,
    })
}

/// Build the report for a run directory without writing anything.
pub fn build_run_report(dir: &Path) -> Result<(RunReport, PlotSeries), ReportError> {
    let run = load_inputs(dir)?;
    let (items, skipped) = scored_items(&run.questions, &run.outcomes, run.human.as_deref())?;
    if items.is_empty() {
        return Err(ReportError::Stats(StatsError::NoData));
    }
    let cfg = &run.config;
    let exact_cfg = cfg.age_test_config(&items, TestMode::Exact, TestKind::Means);
    let at_most_cfg = cfg.age_test_config(&items, TestMode::AtMost, TestKind::Means);
    let ages = exact_cfg.ages.clone();
    let age_tests = ByMode { exact: age_profile(&items, &exact_cfg)?, at_most: age_profile(&items, &at_most_cfg)? };
    let td_tests = if run.human.is_some() {
        Some(ByMode {
            exact: age_profile(&items, &cfg.age_test_config(&items, TestMode::Exact, TestKind::Td))?,
            at_most: age_profile(&items, &cfg.age_test_config(&items, TestMode::AtMost, TestKind::Td))?,
        })
    } else {
        None
    };
    let accuracy = ByMode {
        exact: accuracy_by_age(&items, &ages, TestMode::Exact),
        at_most: accuracy_by_age(&items, &ages, TestMode::AtMost),
    };

    let wc: Vec<WcQuestion> = run
        .questions
        .iter()
        .filter_map(|q| match q {
            ExamItem::Wc(w) => Some(w.clone()),
            _ => None,
        })
        .collect();
    let analysis = if wc.is_empty() {
        None
    } else {
        let wc_ids: std::collections::HashSet<&str> = wc.iter().map(|q| q.id.as_str()).collect();
        let responses: Vec<LmResponse> =
            run.responses.iter().filter(|r| wc_ids.contains(r.question_id.as_str())).cloned().collect();
        let outcomes: Vec<Outcome> =
            run.outcomes.iter().filter(|o| wc_ids.contains(o.question_id.as_str())).cloned().collect();
        let tagger = LexiconTagger::new();
        let src = FeatureSources { pre: run.pre.as_ref(), tagger: &tagger, lexicon: None };
        let features = annotate_questions(&wc, &responses, &src).map_err(|e| ReportError::Join(e.to_string()))?;
        Some(analyze(&features, &outcomes)?)
    };

    let mu = at_most_cfg.mu.get(0).expect("constant");
    let gamma = at_most_cfg.gamma.get(0).expect("constant");
    let report = RunReport {
        config: cfg.clone(),
        mu,
        gamma,
        n_questions: run.questions.len(),
        n_responses: run.responses.len(),
        n_outcomes: run.outcomes.len(),
        skipped_outcomes: skipped,
        min_aligned_age: ByMode {
            exact: age_tests.exact.min_aligned_age,
            at_most: age_tests.at_most.min_aligned_age,
        },
        accuracy,
        age_tests,
        td_tests,
        analysis,
    };
    let plots = plot_series(&report);
    Ok((report, plots))
}

fn plot_series(r: &RunReport) -> PlotSeries {
    let acc = |name: &str, rows: &[AccuracyRow]| Series {
        name: name.into(),
        points: rows.iter().map(|x| (f64::from(x.age), x.accuracy)).collect(),
    };
    let pv = |name: &str, p: &AgeProfile| Series {
        name: name.into(),
        points: p.rows.iter().map(|x| (x.age_years, x.p_value)).collect(),
    };
    let mut p_values = vec![pv("means_exact", &r.age_tests.exact), pv("means_at_most", &r.age_tests.at_most)];
    if let Some(td) = &r.td_tests {
        p_values.push(pv("td_exact", &td.exact));
        p_values.push(pv("td_at_most", &td.at_most));
    }
    let analysis = r.analysis.as_ref();
    PlotSeries {
        accuracy: vec![acc("exact", &r.accuracy.exact), acc("at_most", &r.accuracy.at_most)],
        p_values,
        lpm_coefficients: analysis
            .and_then(|a| a.lpm.as_ref())
            .map(|f| f.names.iter().zip(&f.beta_hat).zip(&f.std_errors).map(|((n, b), s)| (n.clone(), *b, *s)).collect())
            .unwrap_or_default(),
        feature_error_rates: analysis
            .map(|a| {
                a.chi_square
                    .iter()
                    .map(|t| (t.feature.clone(), t.table.row_labels.clone(), t.error_rates.clone()))
                    .collect()
            })
            .unwrap_or_default(),
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), ReportError> {
    fs::write(&path, contents).map_err(|source| ReportError::Write { path: path.display().to_string(), source })
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Render a run directory: writes `report.json`, `plot_series.json` and
/// `age_test_exact.json` / `age_test_at_most.json`. Output bytes depend
/// only on the inputs.
pub fn render_run_report(dir: &Path) -> Result<RunReport, ReportError> {
    let (report, plots) = build_run_report(dir)?;
    write_file(dir.join("report.json"), &pretty(&report))?;
    write_file(dir.join("plot_series.json"), &pretty(&plots))?;
    write_file(dir.join("age_test_exact.json"), &age_profile_json(&report.age_tests.exact))?;
    write_file(dir.join("age_test_at_most.json"), &age_profile_json(&report.age_tests.at_most))?;
    Ok(report)
}
