use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agealign_core::builder::{build_def_test, build_wc_large, load_aoa_lexicon, load_wax, BuilderConfig, Lexicon};
use agealign_core::exam::{lookup_age_equivalent, order_by_pair_aoa, run_subtest, run_sweep, SessionStore};
use agealign_core::features::{annotate_questions, load_pre_annotations, FeatureSources, FeatureVector, LexiconTagger};
use agealign_core::gateway::{Completer, ExplanationRules, HttpCompleter, StubCompleter, DEFAULT_API_KEY_VAR};
use agealign_core::model::{
    jsonl, normalize_score, ExamItem, NormTable, Outcome, PromptProtocol, ProtocolName, SamplingConfig, TestKind,
    TestMode,
};
use agealign_core::report::{
    analyze, default_age_grid, default_gamma, default_mu, read_questions, render_run_report, scored_items,
    age_test_json, ReportConfig,
};
use agealign_core::stats::{
    coarsen, coarsening_k, energy_distance_with, simulation_experiment, EnergyEstimator, ScoredItem,
    SimulationConfig,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "agealign", version, about = "Age-normed word tests for language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a question set.
    #[command(subcommand)]
    Build(BuildCmd),
    /// Administer questions to a model and score the answers.
    Administer(AdministerArgs),
    /// Score the same questions under a grid of prompt/sampling configurations.
    Sweep(SweepArgs),
    /// Look up the age equivalent of a raw score.
    Age(AgeArgs),
    /// Compute per-question features.
    Annotate(AnnotateArgs),
    /// Per-age alignment tests.
    AgeTest(AgeTestArgs),
    /// Chi-square battery and linear probability model over features.
    Analyze(AnalyzeArgs),
    /// Simulated-human experiment over a grid of correlations.
    Simulate(SimulateArgs),
    /// Energy distance between two sets of response embeddings.
    Energy(EnergyArgs),
    /// Render report.json and plot data for a run directory.
    Report(ReportArgs),
    /// Serve the session HTTP API.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum BuildCmd {
    /// Word Classes questions from association records.
    Wc {
        #[arg(long)]
        wax: PathBuf,
        #[arg(long)]
        aoa: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Definitions questions from the lexicon.
    Def {
        #[arg(long)]
        aoa: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Completion endpoint URL.
    #[arg(long, conflicts_with = "stub")]
    endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_VAR)]
    api_key_env: String,
    /// JSONL of canned `{question_id, text}` replies instead of a live model.
    #[arg(long)]
    stub: Option<PathBuf>,
}

impl ModelArgs {
    fn completer(&self) -> Result<Arc<dyn Completer>> {
        match (&self.endpoint, &self.stub) {
            (Some(url), None) => {
                let key = std::env::var(&self.api_key_env).ok();
                if key.is_none() {
                    log::warn!("{} is not set; sending requests without a credential", self.api_key_env);
                }
                Ok(Arc::new(HttpCompleter::new(url.clone(), key)))
            }
            (None, Some(path)) => Ok(Arc::new(StubCompleter::from_file(path)?)),
            _ => bail!("pass exactly one of --endpoint or --stub"),
        }
    }
}

#[derive(Args)]
struct AdministerArgs {
    #[arg(long)]
    questions: PathBuf,
    /// slp, qa, comp or custom (with --template).
    #[arg(long, default_value = "slp")]
    protocol: String,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0.95)]
    top_p: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 256)]
    max_tokens: u32,
    /// Consecutive errors that end the test; 0 disables the rule.
    #[arg(long, default_value_t = 4)]
    ceiling: u32,
    /// Keep file order under the ceiling rule instead of easiest pair AoA first.
    #[arg(long)]
    keep_order: bool,
    /// Responses JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Outcomes JSONL; `outcomes.jsonl` next to --out by default.
    #[arg(long)]
    outcomes: Option<PathBuf>,
    #[command(flatten)]
    model_args: ModelArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    questions: PathBuf,
    /// JSON `{"protocols": [..], "samplings": [..]}`; protocols are names or
    /// `{name, template}` objects.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 4)]
    parallel: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model_args: ModelArgs,
}

#[derive(Args)]
struct AgeArgs {
    #[arg(long)]
    norms: PathBuf,
    #[arg(long)]
    subtest: String,
    #[arg(long)]
    score: u32,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    pre: Option<PathBuf>,
    /// AoA lexicon CSV, for morphology counts and part-of-speech hints.
    #[arg(long)]
    aoa: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    AtMost,
}

impl From<ModeArg> for TestMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => TestMode::Exact,
            ModeArg::AtMost => TestMode::AtMost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Means,
    Td,
}

/// A number, or `None` for `auto`.
#[derive(Clone, Copy, Debug)]
struct Auto(Option<f64>);

fn parse_auto(s: &str) -> Result<Auto, String> {
    if s == "auto" {
        return Ok(Auto(None));
    }
    s.parse::<f64>().map(|v| Auto(Some(v))).map_err(|e| format!("{s:?}: {e}"))
}

#[derive(Clone, Debug)]
struct AgeGrid(Vec<u32>);

/// `3..15` (inclusive) or `3,4,8`.
fn parse_ages(s: &str) -> Result<AgeGrid, String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let hi: u32 = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{b:?}: {e}"))?;
        return Ok(AgeGrid((lo..=hi).collect()));
    }
    s.split(',').map(|t| t.trim().parse().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>().map(AgeGrid)
}

#[derive(Args)]
struct AgeTestArgs {
    #[arg(long)]
    outcomes: PathBuf,
    /// Questions carrying pair AoA; `questions.jsonl` next to --outcomes by default.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Paired human outcomes, required for the TD test.
    #[arg(long)]
    human: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "means")]
    test: TestArg,
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    mu: Auto,
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    gamma: Auto,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_parser = parse_ages)]
    ages: Option<AgeGrid>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Feature vectors from `annotate`.
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    rho_grid: Vec<f64>,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    mu: Auto,
    #[arg(long, value_enum, default_value = "at-most")]
    mode: ModeArg,
    #[arg(long, value_parser = parse_ages)]
    ages: Option<AgeGrid>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Unbiased,
    PlugIn,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    embeddings_a: PathBuf,
    #[arg(long)]
    embeddings_b: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "unbiased")]
    estimator: EstimatorArg,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Norm table for age equivalents in session reports.
    #[arg(long)]
    norms: Option<PathBuf>,
    /// Environment variable holding a shared bearer token.
    #[arg(long)]
    token_env: Option<String>,
    #[command(flatten)]
    model_args: ModelArgs,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(cmd) => build(cmd),
        Command::Administer(a) => administer(a),
        Command::Sweep(a) => sweep(a),
        Command::Age(a) => age(a),
        Command::Annotate(a) => annotate(a),
        Command::AgeTest(a) => age_test(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Energy(a) => energy(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    }
}

/// Write `text` to `out`, or stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn build(cmd: BuildCmd) -> Result<()> {
    let (n, warnings, out) = match cmd {
        BuildCmd::Wc { wax, aoa, seed, out } => {
            let (lexicon, mut warnings) = load_aoa_lexicon(&aoa)?;
            let records = load_wax(&wax)?;
            let built = build_wc_large(&records, &lexicon, &BuilderConfig::wc(seed))?;
            jsonl::write(&out, &built.items)?;
            warnings.extend(built.warnings);
            (built.items.len(), warnings, out)
        }
        BuildCmd::Def { aoa, seed, out } => {
            let (lexicon, mut warnings) = load_aoa_lexicon(&aoa)?;
            let built = build_def_test(&lexicon, &BuilderConfig::def(seed))?;
            jsonl::write(&out, &built.items)?;
            warnings.extend(built.warnings);
            (built.items.len(), warnings, out)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    eprintln!("wrote {n} questions to {} ({} warnings)", out.display(), warnings.len());
    Ok(())
}

fn protocol_for(name: &str, template: Option<String>, items: &[ExamItem]) -> Result<PromptProtocol> {
    let name: ProtocolName = name.parse()?;
    let protocol = match (name, template) {
        (ProtocolName::Custom, Some(t)) => PromptProtocol::custom(t),
        (ProtocolName::Custom, None) => bail!("--protocol custom needs --template"),
        (_, Some(_)) => bail!("--template is only used with --protocol custom"),
        // Definitions items have one prompt for every built-in protocol.
        (_, None) if matches!(items.first(), Some(ExamItem::Def(_))) => PromptProtocol::definitions(),
        (n, None) => PromptProtocol::builtin(n).expect("built-in protocol"),
    };
    protocol.validate_for(matches!(items.first(), Some(ExamItem::Def(_))))?;
    Ok(protocol)
}

fn administer(a: AdministerArgs) -> Result<()> {
    let mut items = read_questions(&a.questions)?;
    if a.ceiling > 0 && !a.keep_order {
        order_by_pair_aoa(&mut items);
    }
    let protocol = protocol_for(&a.protocol, a.template.clone(), &items)?;
    let sampling = SamplingConfig { model_id: a.model.clone(), top_p: a.top_p, temperature: a.temperature, max_tokens: a.max_tokens };
    sampling.validate()?;
    let completer = a.model_args.completer()?;
    let outcomes_path = a
        .outcomes
        .clone()
        .unwrap_or_else(|| a.out.parent().unwrap_or(Path::new(".")).join("outcomes.jsonl"));
    let result = run_subtest(&items, &protocol, &sampling, a.ceiling, completer.as_ref(), &ExplanationRules::default());
    let (run, error) = match result {
        Ok(run) => (run, None),
        Err(aborted) => (aborted.partial, Some(aborted.error)),
    };
    jsonl::write(&a.out, &run.responses)?;
    jsonl::write(&outcomes_path, &run.outcomes)?;
    eprintln!(
        "{} of {} questions administered, raw score {}{}",
        run.outcomes.len(),
        items.len(),
        run.raw_score,
        if run.stopped_early { " (ceiling reached)" } else { "" }
    );
    match error {
        Some(e) => bail!("run aborted after {} questions: {e}", run.outcomes.len()),
        None => Ok(()),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProtocolSpec {
    Name(String),
    Full(PromptProtocol),
}

#[derive(Deserialize)]
struct SweepGrid {
    protocols: Vec<ProtocolSpec>,
    samplings: Vec<SamplingConfig>,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let items = read_questions(&a.questions)?;
    let text = fs::read_to_string(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?;
    let grid: SweepGrid = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.grid.display()))?;
    let protocols = grid
        .protocols
        .into_iter()
        .map(|p| match p {
            ProtocolSpec::Name(n) => protocol_for(&n, None, &items),
            ProtocolSpec::Full(p) => Ok(p),
        })
        .collect::<Result<Vec<_>>>()?;
    for s in &grid.samplings {
        s.validate()?;
    }
    let completer = a.model_args.completer()?;
    let report = run_sweep(&items, &protocols, &grid.samplings, completer.as_ref(), a.parallel);
    emit(a.out.as_deref(), &pretty(&report))
}

fn age(a: AgeArgs) -> Result<()> {
    let norms = NormTable::load(&a.norms)?;
    let max = norms.subtest(&a.subtest)?.max_score;
    let age = lookup_age_equivalent(&norms, &a.subtest, a.score)?;
    let percent = normalize_score(a.score, max)?;
    println!("{}", serde_json::json!({ "subtest": a.subtest, "raw_score": a.score, "max_score": max, "percent": percent, "age": age }));
    Ok(())
}

fn annotate(a: AnnotateArgs) -> Result<()> {
    let questions: Vec<_> = read_questions(&a.questions)?
        .into_iter()
        .filter_map(|q| match q {
            ExamItem::Wc(w) => Some(w),
            _ => None,
        })
        .collect();
    let responses = jsonl::read(&a.responses)?;
    let pre = a.pre.as_deref().map(load_pre_annotations).transpose()?;
    let lexicon: Option<Lexicon> = a.aoa.as_deref().map(load_aoa_lexicon).transpose()?.map(|(l, _)| l);
    let tagger = lexicon.as_ref().map_or_else(LexiconTagger::new, LexiconTagger::from_lexicon);
    let src = FeatureSources { pre: pre.as_ref(), tagger: &tagger, lexicon: lexicon.as_ref() };
    let features = annotate_questions(&questions, &responses, &src)?;
    jsonl::write(&a.out, &features)?;
    eprintln!("wrote {} feature rows to {}", features.len(), a.out.display());
    Ok(())
}

/// Outcomes joined with question AoA; skipped ids are logged.
fn load_scored(outcomes: &Path, questions: Option<&Path>, human: Option<&Path>) -> Result<Vec<ScoredItem>> {
    let questions_path = questions
        .map(Path::to_path_buf)
        .unwrap_or_else(|| outcomes.parent().unwrap_or(Path::new(".")).join("questions.jsonl"));
    let questions = read_questions(&questions_path)?;
    let outcomes: Vec<Outcome> = jsonl::read(outcomes)?;
    let human: Option<Vec<Outcome>> = human.map(jsonl::read).transpose()?;
    let (items, skipped) = scored_items(&questions, &outcomes, human.as_deref())?;
    if !skipped.is_empty() {
        log::warn!("{} outcomes skipped (no AoA or non-binary score)", skipped.len());
    }
    Ok(items)
}

fn age_test(a: AgeTestArgs) -> Result<()> {
    let test = match a.test {
        TestArg::Means => TestKind::Means,
        TestArg::Td => TestKind::Td,
    };
    if test == TestKind::Td && a.human.is_none() {
        bail!("the TD test needs paired human outcomes (--human)");
    }
    let items = load_scored(&a.outcomes, a.questions.as_deref(), a.human.as_deref())?;
    let config = ReportConfig { alpha: a.alpha, mu: a.mu.0, gamma: a.gamma.0, ages: a.ages.map(|g| g.0) };
    let profile = config.age_test_config(&items, a.mode.into(), test);
    emit(a.out.as_deref(), &age_test_json(&items, &profile)?)
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let features: Vec<FeatureVector> = jsonl::read(&a.design)?;
    let outcomes: Vec<Outcome> = jsonl::read(&a.outcomes)?;
    emit(a.out.as_deref(), &pretty(&analyze(&features, &outcomes)?))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let items = load_scored(&a.outcomes, a.questions.as_deref(), None)?;
    let mu = a.mu.0.unwrap_or_else(default_mu);
    let mut config = SimulationConfig::new(a.ages.map_or_else(|| default_age_grid(&items), |g| g.0), mu, a.seed);
    config.rho_grid = a.rho_grid;
    config.trials = a.trials;
    config.alpha = a.alpha;
    config.mode = a.mode.into();
    log::info!("mu {mu:.4}, gamma for reference {:.4}", default_gamma(mu));
    emit(a.out.as_deref(), &pretty(&simulation_experiment(&items, &config)?))
}

/// A JSON array of vectors, or JSONL with one vector (or `{"embedding": [..]}`) per line.
fn read_embeddings(path: &Path) -> Result<Vec<Vec<f64>>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Line {
        Bare(Vec<f64>),
        Wrapped { embedding: Vec<f64> },
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(all) = serde_json::from_str::<Vec<Vec<f64>>>(&text) {
        return Ok(all);
    }
    let lines: Vec<Line> = jsonl::parse(text.as_bytes(), &path.display().to_string())?;
    Ok(lines
        .into_iter()
        .map(|l| match l {
            Line::Bare(v) | Line::Wrapped { embedding: v } => v,
        })
        .collect())
}

fn energy(a: EnergyArgs) -> Result<()> {
    let ea = read_embeddings(&a.embeddings_a)?;
    let eb = read_embeddings(&a.embeddings_b)?;
    if ea.is_empty() || eb.is_empty() {
        bail!("both embedding sets must be non-empty");
    }
    let pooled: Vec<Vec<f64>> = ea.iter().chain(&eb).cloned().collect();
    let clusters = coarsen(&pooled, a.seed)?;
    let (la, lb) = clusters.labels.split_at(ea.len());
    let estimator = match a.estimator {
        EstimatorArg::Unbiased => EnergyEstimator::Unbiased,
        EstimatorArg::PlugIn => EnergyEstimator::PlugIn,
    };
    let distance = energy_distance_with(la, lb, estimator)?;
    println!(
        "{}",
        pretty(&serde_json::json!({
            "n_a": ea.len(),
            "n_b": eb.len(),
            "k": coarsening_k(pooled.len()),
            "converged": clusters.converged,
            "estimator": match a.estimator { EstimatorArg::Unbiased => "unbiased", EstimatorArg::PlugIn => "plug_in" },
            "energy_distance": distance,
        }))
        .trim_end()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let r = render_run_report(&a.run)?;
    eprintln!(
        "wrote report for {} outcomes to {}; minimum aligned age exact {:?}, at most {:?}",
        r.n_outcomes,
        a.run.join("report.json").display(),
        r.min_aligned_age.exact,
        r.min_aligned_age.at_most
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let completer = a.model_args.completer()?;
    let norms = a.norms.as_deref().map(NormTable::load).transpose()?;
    let token = match &a.token_env {
        Some(var) => Some(std::env::var(var).with_context(|| format!("{var} is not set"))?),
        None => None,
    };
    let config = agealign_server::ServerConfig { store: SessionStore::open(&a.data)?, completer, norms, token };
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("serving sessions from {} on http://{addr}", a.data.display());
    rt.block_on(agealign_server::serve(addr, config))?;
    Ok(())
}
