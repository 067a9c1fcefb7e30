//! Python bindings. Scalar results come back as Python numbers; structured
//! reports come back as JSON strings for `json.loads`.

use std::collections::HashMap;
use std::path::Path;

use agealign_core::exam::{ExamSession, NextItem, SessionStatus};
use agealign_core::gateway::StubCompleter;
use agealign_core::model::{jsonl, ExamItem, NormTable, PromptProtocol, SamplingConfig, TestKind, TestMode};
use agealign_core::report::{age_test_json, default_mu, render_run_report, ReportConfig};
use agealign_core::stats::{self, EnergyEstimator, ScoredItem, Sided};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[pyclass(frozen, get_all)]
struct BinomialTest {
    statistic: f64,
    n: u64,
    p_value: f64,
    alpha: f64,
    reject: bool,
}

impl From<stats::BinomialTest> for BinomialTest {
    fn from(t: stats::BinomialTest) -> Self {
        BinomialTest { statistic: t.statistic, n: t.n, p_value: t.p_value, alpha: t.alpha, reject: t.reject }
    }
}

#[pymethods]
impl BinomialTest {
    fn __repr__(&self) -> String {
        format!("BinomialTest(n={}, p_value={:.6}, reject={})", self.n, self.p_value, self.reject)
    }
}

/// Pr(Bin(n, mu) <= correct).
#[pyfunction]
#[pyo3(signature = (correct, n, mu, alpha=0.05))]
fn means_test(correct: u64, n: u64, mu: f64, alpha: f64) -> PyResult<BinomialTest> {
    stats::means_test(correct, n, mu, alpha).map(Into::into).map_err(value_err)
}

/// Pr(Bin(n, gamma) >= disagreements).
#[pyfunction]
#[pyo3(signature = (disagreements, n, gamma, alpha=0.05))]
fn td_test(disagreements: u64, n: u64, gamma: f64, alpha: f64) -> PyResult<BinomialTest> {
    stats::td_test(disagreements, n, gamma, alpha).map(Into::into).map_err(value_err)
}

#[pyfunction]
fn test_divergence(human: Vec<u8>, lm: Vec<u8>) -> PyResult<f64> {
    stats::test_divergence(&human, &lm).map_err(value_err)
}

/// `(lower, upper)` Hoeffding interval around `p_hat`.
#[pyfunction]
#[pyo3(signature = (p_hat, n, alpha=0.05, two_sided=true))]
fn hoeffding_bound(p_hat: f64, n: u64, alpha: f64, two_sided: bool) -> PyResult<(f64, f64)> {
    if n == 0 {
        return Err(value_err("n must be positive"));
    }
    let i = stats::hoeffding_bound(p_hat, n, alpha, if two_sided { Sided::Two } else { Sided::One });
    Ok((i.lower, i.upper))
}

#[pyfunction]
fn guessing_correction(p: f64, n_options: u32) -> PyResult<f64> {
    stats::guessing_correction(p, n_options).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (disagreement_rate, n_items, alpha=0.05, p_know=0.5, n_options=6, hoeffding=true))]
fn estimate_human_mean(
    disagreement_rate: f64,
    n_items: u64,
    alpha: f64,
    p_know: f64,
    n_options: u32,
    hoeffding: bool,
) -> PyResult<f64> {
    stats::estimate_human_mean_with(disagreement_rate, n_items, alpha, p_know, n_options, hoeffding)
        .map(|e| e.mu)
        .map_err(value_err)
}

/// `(statistic, df, p_value, adjusted_p)`.
#[pyfunction]
#[pyo3(signature = (table, n_tests=1))]
fn chi2_independence(table: Vec<Vec<u64>>, n_tests: u32) -> PyResult<(f64, u64, f64, f64)> {
    let t = stats::ContingencyTable::new(table).map_err(value_err)?;
    let r = stats::chi2_independence(&t, n_tests).map_err(value_err)?;
    Ok((r.statistic, r.df, r.p_value, r.adjusted_p))
}

#[pyfunction]
#[pyo3(signature = (a, b, estimator="unbiased"))]
fn energy_distance(a: Vec<i64>, b: Vec<i64>, estimator: &str) -> PyResult<f64> {
    let est = match estimator {
        "unbiased" => EnergyEstimator::Unbiased,
        "plug_in" | "plug-in" => EnergyEstimator::PlugIn,
        other => return Err(value_err(format!("unknown estimator {other:?}"))),
    };
    stats::energy_distance_with(&a, &b, est).map_err(value_err)
}

#[pyfunction]
fn coarsening_k(n: usize) -> usize {
    stats::coarsening_k(n)
}

/// `(labels, centroids)`.
#[pyfunction]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let r = stats::kmeans(&points, k, seed).map_err(value_err)?;
    Ok((r.labels, r.centroids))
}

/// Linear probability model with HC0 errors, as a JSON object.
#[pyfunction]
fn fit_lpm(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<String> {
    stats::fit_lpm(&x, &y).map(|f| to_json(&f)).map_err(value_err)
}

#[pyfunction]
fn simulate_human(lm: Vec<u8>, rho: f64, mu: f64, seed: u64) -> PyResult<Vec<u8>> {
    stats::simulate_human(&lm, rho, mu, seed).map_err(value_err)
}

/// Per-age test table as JSON. `mu` and `gamma` default to the standard
/// annotation chain and `2 mu (1 - mu)`.
#[pyfunction]
#[pyo3(signature = (aoa, h_lm, mode="exact", test="means", h_human=None, mu=None, gamma=None, ages=None, alpha=0.05))]
#[allow(clippy::too_many_arguments)]
fn age_profile(
    aoa: Vec<f64>,
    h_lm: Vec<u8>,
    mode: &str,
    test: &str,
    h_human: Option<Vec<u8>>,
    mu: Option<f64>,
    gamma: Option<f64>,
    ages: Option<Vec<u32>>,
    alpha: f64,
) -> PyResult<String> {
    let mode: TestMode = mode.parse().map_err(value_err)?;
    let test: TestKind = test.parse().map_err(value_err)?;
    if aoa.len() != h_lm.len() || h_human.as_ref().is_some_and(|h| h.len() != aoa.len()) {
        return Err(value_err("aoa, h_lm and h_human must have equal length"));
    }
    let items: Vec<ScoredItem> = aoa
        .iter()
        .enumerate()
        .map(|(i, &a)| ScoredItem { aoa: a, h_lm: h_lm[i], h_human: h_human.as_ref().map(|h| h[i]) })
        .collect();
    let config = ReportConfig { alpha, mu, gamma, ages }.age_test_config(&items, mode, test);
    age_test_json(&items, &config).map_err(value_err)
}

#[pyfunction]
fn default_human_mean() -> f64 {
    default_mu()
}

/// Age equivalent string (`year:month`, `< y`, `y:m+`).
#[pyfunction]
fn lookup_age(norms_json: &str, subtest: &str, raw_score: u32) -> PyResult<String> {
    let table = NormTable::from_json(norms_json).map_err(value_err)?;
    agealign_core::exam::lookup_age_equivalent(&table, subtest, raw_score).map(|a| a.to_string()).map_err(value_err)
}

/// Write report.json and plot data into a run directory; returns the report JSON.
#[pyfunction]
fn render_report(run_dir: &str) -> PyResult<String> {
    render_run_report(Path::new(run_dir)).map(|r| to_json(&r)).map_err(value_err)
}

/// A clinician-scored session answered by canned replies.
#[pyclass]
struct Session {
    inner: ExamSession,
    completer: StubCompleter,
}

#[pymethods]
impl Session {
    /// `items_jsonl`: exam items, one JSON object per line. `canned`: reply
    /// text by question id.
    #[new]
    #[pyo3(signature = (id, subtest, items_jsonl, canned, ceiling_k=4, model="stub"))]
    fn new(
        id: &str,
        subtest: &str,
        items_jsonl: &str,
        canned: HashMap<String, String>,
        ceiling_k: u32,
        model: &str,
    ) -> PyResult<Self> {
        let items: Vec<ExamItem> = jsonl::parse(items_jsonl.as_bytes(), "items").map_err(value_err)?;
        let protocol = match items.first() {
            Some(ExamItem::Def(_)) => PromptProtocol::definitions(),
            _ => PromptProtocol::slp(),
        };
        let inner = ExamSession::create(id, subtest, items, protocol, SamplingConfig::nucleus(model), ceiling_k)
            .map_err(value_err)?;
        Ok(Session { inner, completer: StubCompleter::from_map(canned) })
    }

    /// Current presentation as JSON, or `{"state": "done", ..}`.
    fn next(&mut self) -> PyResult<String> {
        let next: NextItem = self.inner.next(&self.completer).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(to_json(&next))
    }

    #[pyo3(signature = (question_id, h, note=None, tag=None))]
    fn score(&mut self, question_id: &str, h: u8, note: Option<String>, tag: Option<String>) -> PyResult<String> {
        let status = self.inner.record_score(question_id, h, note, tag).map_err(value_err)?;
        Ok(status_name(status))
    }

    #[getter]
    fn status(&self) -> String {
        status_name(self.inner.status())
    }

    #[getter]
    fn raw_score(&self) -> u32 {
        self.inner.raw_score()
    }

    fn report(&self) -> String {
        to_json(&self.inner.report())
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }
}

fn status_name(s: SessionStatus) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[pymodule]
fn agealign(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BinomialTest>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(means_test, m)?)?;
    m.add_function(wrap_pyfunction!(td_test, m)?)?;
    m.add_function(wrap_pyfunction!(test_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_bound, m)?)?;
    m.add_function(wrap_pyfunction!(guessing_correction, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_human_mean, m)?)?;
    m.add_function(wrap_pyfunction!(default_human_mean, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_independence, m)?)?;
    m.add_function(wrap_pyfunction!(energy_distance, m)?)?;
    m.add_function(wrap_pyfunction!(coarsening_k, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lpm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_human, m)?)?;
    m.add_function(wrap_pyfunction!(age_profile, m)?)?;
    m.add_function(wrap_pyfunction!(lookup_age, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
