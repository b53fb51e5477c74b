//! The six subcommands, sharing one load-and-featurize path.
//!
//! Every artifact embeds the config echo, corpus hash, and code version,
//! and none carries a timestamp or absolute output path, so rerunning a
//! config produces byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use alphadesk::dsl::{self, AlphaDef};
use alphadesk::env::{run_equal_weighted, BacktestReport, TradingEnv};
use alphadesk::frame::{self, CsvSchema, FeatureFrame, RiskWarnings};
use alphadesk::matrix::{self, AlphaMatrix};
use alphadesk::metrics::MetricReport;
use alphadesk::pipeline;
use alphadesk::ppo::{self, Checkpoint, EvalSummary, MetricAggregate};
use alphadesk::selection::{self, SelectionReport};
use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, BUILTIN_CORPUS};

const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything the subcommands share: the featurized frame, the parsed
/// corpus, and the split boundary.
pub struct Workspace {
    pub config: RunConfig,
    pub frame: FeatureFrame,
    pub warnings: RiskWarnings,
    pub defs: Vec<AlphaDef>,
    pub corpus_hash: String,
    pub boundary: usize,
}

pub fn prepare(config: RunConfig) -> Result<Workspace> {
    let mut frame = frame::load_csv(&config.data_path, &CsvSchema::default())
        .with_context(|| format!("loading {}", config.data_path.display()))?;
    let warnings = pipeline::featurize(&mut frame, &config.risk)?;
    let (defs, corpus_hash) = load_corpus(&config)?;
    let boundary = frame::split_index(frame.len(), config.train_fraction)?;
    Ok(Workspace {
        config,
        frame,
        warnings,
        defs,
        corpus_hash,
        boundary,
    })
}

fn load_corpus(config: &RunConfig) -> Result<(Vec<AlphaDef>, String)> {
    if config.alpha_file == BUILTIN_CORPUS {
        Ok((
            dsl::builtin_alphas(),
            dsl::corpus_sha256(dsl::BUILTIN_ALPHAS),
        ))
    } else {
        let text = fs::read_to_string(&config.alpha_file)
            .with_context(|| format!("reading alpha file {}", config.alpha_file))?;
        let defs = dsl::parse_alpha_file(&text)?;
        Ok((defs, dsl::corpus_sha256(&text)))
    }
}

/// Report preamble shared by every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHeader {
    pub code_version: String,
    pub corpus_hash: String,
    pub n_alphas: usize,
    pub config: RunConfig,
}

impl Workspace {
    fn header(&self) -> RunHeader {
        RunHeader {
            code_version: CODE_VERSION.to_string(),
            corpus_hash: self.corpus_hash.clone(),
            n_alphas: self.defs.len(),
            config: self.config.clone(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn build_matrix(&self) -> Result<AlphaMatrix> {
        Ok(matrix::build_matrix(&self.defs, &self.frame, self.boundary)?)
    }

    fn train_returns(&self) -> Result<Vec<f64>> {
        Ok(pipeline::train_returns(
            &self.frame,
            self.boundary,
            &self.config.risk,
        )?)
    }
}

fn ensure_output_dir(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Shortest round-trip float formatting; NaN cells stay literal so the CSV
/// loader reads them back as missing.
fn fmt(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

// --- features ---------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct FeaturesArtifact {
    pub header: RunHeader,
    pub n_rows: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub train_boundary: usize,
    pub columns: Vec<String>,
    pub fully_masked: Vec<String>,
}

pub fn cmd_features(ws: &Workspace) -> Result<()> {
    ensure_output_dir(&ws.config)?;
    let frame = &ws.frame;
    let columns: Vec<String> = frame.column_names().map(str::to_string).collect();

    let mut csv = String::from("date");
    for c in &columns {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    for t in 0..frame.len() {
        csv.push_str(&frame.dates()[t].format("%Y-%m-%d").to_string());
        for c in &columns {
            csv.push(',');
            csv.push_str(&fmt(frame.require(c)?[t]));
        }
        csv.push('\n');
    }
    let csv_path = ws.out("features.csv");
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let artifact = FeaturesArtifact {
        header: ws.header(),
        n_rows: frame.len(),
        first_date: frame.dates()[0],
        last_date: frame.dates()[frame.len() - 1],
        train_boundary: ws.boundary,
        columns,
        fully_masked: ws.warnings.all_masked.clone(),
    };
    write_json(&ws.out("features_report.json"), &artifact)?;
    println!(
        "wrote {} ({} rows, {} columns) and {}",
        csv_path.display(),
        artifact.n_rows,
        artifact.columns.len(),
        ws.out("features_report.json").display()
    );
    Ok(())
}

// --- eval-alphas ------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalAlphasArtifact {
    pub header: RunHeader,
    pub report: MetricReport,
}

fn run_evaluation(ws: &Workspace, matrix: &AlphaMatrix) -> Result<pipeline::AlphaEvaluation> {
    let returns = ws.train_returns()?;
    Ok(pipeline::evaluate_alphas(
        matrix,
        &returns,
        ws.config.mi_bins,
        &ws.config.boost,
        ws.config.boost_seed,
    )?)
}

pub fn cmd_eval_alphas(ws: &Workspace) -> Result<()> {
    ensure_output_dir(&ws.config)?;
    let matrix = ws.build_matrix()?;
    let eval = run_evaluation(ws, &matrix)?;

    let mut csv = String::from("name,ic,mi,gain_importance,gain_share,div_by_zero\n");
    for row in &eval.report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.name,
            fmt_opt(row.ic),
            fmt(row.mi),
            fmt(row.gain_importance),
            fmt(row.gain_share),
            row.div_by_zero
        ));
    }
    fs::write(ws.out("eval_alphas.csv"), csv)
        .with_context(|| format!("writing {}", ws.out("eval_alphas.csv").display()))?;

    let artifact = EvalAlphasArtifact {
        header: ws.header(),
        report: eval.report,
    };
    write_json(&ws.out("eval_alphas.json"), &artifact)?;
    println!(
        "scored {} alphas ({} dropped) over {} training rows -> {}",
        artifact.report.rows.len(),
        artifact.report.dropped.len(),
        artifact.report.n_train_rows,
        ws.out("eval_alphas.json").display()
    );
    Ok(())
}

// --- select -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub header: RunHeader,
    pub kept: Vec<usize>,
    pub kept_names: Vec<String>,
    pub dropped_by_correlation: Vec<(usize, usize, f64)>,
}

/// Applies the configured selection to the matrix. `All` keeps every
/// column; gain-ranked selection triggers the scoring pass it depends on.
fn resolve_selection(
    ws: &Workspace,
    matrix: &AlphaMatrix,
) -> Result<(Vec<usize>, Vec<String>, Option<SelectionReport>)> {
    match ws.config.selection.method() {
        None => {
            let kept: Vec<usize> = (0..matrix.n_alphas()).collect();
            let names = matrix.names.clone();
            Ok((kept, names, None))
        }
        Some(method) => {
            let gain = if ws.config.selection.needs_gain() {
                Some(run_evaluation(ws, matrix)?.gain.importance)
            } else {
                None
            };
            let report = selection::select(matrix, gain.as_deref(), &method)?;
            let kept = report.kept.clone();
            let names = report.kept_names.clone();
            Ok((kept, names, Some(report)))
        }
    }
}

pub fn cmd_select(ws: &Workspace) -> Result<()> {
    ensure_output_dir(&ws.config)?;
    let matrix = ws.build_matrix()?;
    let (kept, kept_names, report) = resolve_selection(ws, &matrix)?;
    let artifact = SelectionArtifact {
        header: ws.header(),
        kept,
        kept_names,
        dropped_by_correlation: report
            .map(|r| r.dropped_by_correlation)
            .unwrap_or_default(),
    };
    write_json(&ws.out("selection.json"), &artifact)?;
    println!(
        "kept {} of {} alphas -> {}",
        artifact.kept.len(),
        matrix.n_alphas(),
        ws.out("selection.json").display()
    );
    Ok(())
}

// --- train ------------------------------------------------------------

pub fn cmd_train(ws: &Workspace) -> Result<()> {
    ensure_output_dir(&ws.config)?;
    let matrix = ws.build_matrix()?;
    let (kept, kept_names, selection_report) = resolve_selection(ws, &matrix)?;

    let view = pipeline::train_view(&ws.frame, ws.boundary, &ws.config.risk)?;
    let train_cols: Vec<Vec<f64>> = kept
        .iter()
        .map(|&k| matrix.standardized[k][..ws.boundary].to_vec())
        .collect();
    let mut env = TradingEnv::new(
        kept_names.clone(),
        train_cols,
        &view,
        ws.config.env.clone(),
    )?;
    let outcome = ppo::train(&mut env, &ws.config.ppo)?;

    let checkpoint = Checkpoint::from_outcome(
        &outcome,
        ws.config.ppo,
        ws.config.env.clone(),
        kept_names,
        selection_report,
        Some(ws.corpus_hash.clone()),
    );
    let ck_path = ws.config.checkpoint_path();
    checkpoint.save(&ck_path)?;

    let mut curve = String::from("env_steps,mean_reward\n");
    for point in &checkpoint.curve {
        curve.push_str(&format!("{},{}\n", point.env_steps, fmt(point.mean_reward)));
    }
    fs::write(ws.out("training_curve.csv"), curve)
        .with_context(|| format!("writing {}", ws.out("training_curve.csv").display()))?;

    let last = checkpoint.curve.last().map(|p| p.mean_reward);
    println!(
        "trained {} env steps on {} alphas, final rollout mean reward {} -> {}",
        checkpoint.env_steps,
        checkpoint.alpha_names.len(),
        last.map(fmt).unwrap_or_else(|| "n/a".into()),
        ck_path.display()
    );
    if let Some(at) = checkpoint.diverged_at {
        return Err(anyhow!(alphadesk::Error::Diverged { steps: at }).context(format!(
            "training aborted on non-finite parameters; checkpoint holds the last healthy state ({})",
            ck_path.display()
        )));
    }
    Ok(())
}

// --- backtest ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub runs: usize,
    pub cum_return: Option<MetricAggregate>,
    pub sharpe: Option<MetricAggregate>,
    pub max_drawdown: Option<MetricAggregate>,
    pub mean_reward: Option<MetricAggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub path: String,
    pub n_rows_in_window: usize,
    pub cum_return: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BacktestArtifact {
    pub header: RunHeader,
    pub checkpoint_hash: String,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub n_steps: usize,
    pub eval_seeds: Vec<u64>,
    pub summary: Vec<StrategyRow>,
    pub deterministic: EvalSummary,
    pub stochastic: EvalSummary,
    pub equal_weighted: BacktestReport,
    pub buy_and_hold_return: f64,
    pub benchmark: Option<BenchmarkRow>,
}

fn point(v: f64) -> Option<MetricAggregate> {
    Some(MetricAggregate { mean: v, std: 0.0 })
}

fn summary_rows(
    stochastic: &EvalSummary,
    deterministic: &EvalSummary,
    equal_weighted: &BacktestReport,
    buy_and_hold: f64,
    benchmark: Option<&BenchmarkRow>,
) -> Vec<StrategyRow> {
    let mut rows = vec![
        StrategyRow {
            strategy: "ppo_stochastic".into(),
            runs: stochastic.n_runs,
            cum_return: Some(stochastic.cum_return),
            sharpe: stochastic.sharpe,
            max_drawdown: Some(stochastic.max_drawdown),
            mean_reward: Some(stochastic.mean_reward),
        },
        StrategyRow {
            strategy: "ppo_deterministic".into(),
            runs: deterministic.n_runs,
            cum_return: Some(deterministic.cum_return),
            sharpe: deterministic.sharpe,
            max_drawdown: Some(deterministic.max_drawdown),
            mean_reward: Some(deterministic.mean_reward),
        },
        StrategyRow {
            strategy: "equal_weighted".into(),
            runs: 1,
            cum_return: point(equal_weighted.summary.cum_return),
            sharpe: equal_weighted.summary.sharpe.and_then(point),
            max_drawdown: point(equal_weighted.summary.max_drawdown),
            mean_reward: point(equal_weighted.summary.mean_reward),
        },
        StrategyRow {
            strategy: "buy_and_hold".into(),
            runs: 1,
            cum_return: point(buy_and_hold),
            sharpe: None,
            max_drawdown: None,
            mean_reward: None,
        },
    ];
    if let Some(b) = benchmark {
        rows.push(StrategyRow {
            strategy: "market_benchmark".into(),
            runs: 1,
            cum_return: point(b.cum_return),
            sharpe: None,
            max_drawdown: None,
            mean_reward: None,
        });
    }
    rows
}

fn write_summary_csv(path: &Path, rows: &[StrategyRow]) -> Result<()> {
    let mut csv = String::from(
        "strategy,runs,cum_return_mean,cum_return_std,sharpe_mean,sharpe_std,\
         max_drawdown_mean,max_drawdown_std,mean_reward_mean,mean_reward_std\n",
    );
    for r in rows {
        let cell = |a: &Option<MetricAggregate>| -> (String, String) {
            match a {
                Some(m) => (fmt(m.mean), fmt(m.std)),
                None => (String::new(), String::new()),
            }
        };
        let (crm, crs) = cell(&r.cum_return);
        let (shm, shs) = cell(&r.sharpe);
        let (mdm, mds) = cell(&r.max_drawdown);
        let (mrm, mrs) = cell(&r.mean_reward);
        csv.push_str(&format!(
            "{},{},{crm},{crs},{shm},{shs},{mdm},{mds},{mrm},{mrs}\n",
            r.strategy, r.runs
        ));
    }
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn benchmark_return(
    path: &Path,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<BenchmarkRow> {
    let series = frame::load_close_series(path)?;
    let window: Vec<f64> = series
        .iter()
        .filter(|(d, _)| *d >= start && *d <= end)
        .map(|(_, c)| *c)
        .collect();
    if window.len() < 2 {
        bail!(
            "benchmark {} has {} rows inside the test window {start}..{end}; need at least 2",
            path.display(),
            window.len()
        );
    }
    Ok(BenchmarkRow {
        path: path.display().to_string(),
        n_rows_in_window: window.len(),
        cum_return: window[window.len() - 1] / window[0] - 1.0,
    })
}

pub fn cmd_backtest(ws: &Workspace, checkpoint_override: Option<&Path>) -> Result<()> {
    ensure_output_dir(&ws.config)?;
    let default_path = ws.config.checkpoint_path();
    let ck_path = checkpoint_override.unwrap_or(&default_path);
    let checkpoint = Checkpoint::load(ck_path)
        .with_context(|| format!("loading checkpoint {}", ck_path.display()))?;

    if let Some(stored) = &checkpoint.corpus_hash {
        if *stored != ws.corpus_hash {
            bail!(
                "checkpoint was trained on corpus {stored} but the config resolves to {}; \
                 refusing to evaluate across corpora",
                ws.corpus_hash
            );
        }
    }

    let matrix = ws.build_matrix()?;
    let cols: Vec<Vec<f64>> = checkpoint
        .alpha_names
        .iter()
        .map(|name| {
            matrix
                .index_of(name)
                .map(|k| matrix.standardized[k].clone())
                .ok_or_else(|| {
                    anyhow!("checkpoint alpha `{name}` is not in the current corpus")
                })
        })
        .collect::<Result<_>>()?;

    // the checkpoint's env config governs evaluation; the config file's
    // [env] only shapes training
    let mut env = TradingEnv::new(
        checkpoint.alpha_names.clone(),
        cols,
        &ws.frame,
        checkpoint.env.clone(),
    )?;
    let (warm_start, end) = env.window();
    let start = warm_start.max(ws.boundary);
    if start >= end {
        bail!(
            "test window is empty: usable rows start at {start} but the frame ends at {end}"
        );
    }
    env.set_window(start, end)?;

    let policy = checkpoint.policy()?;
    let deterministic = ppo::evaluate_policy(
        &policy,
        &checkpoint.normalizer,
        &env,
        true,
        &[checkpoint.ppo.seed],
    )?;
    let eval_seeds = ws.config.eval_seeds();
    let stochastic =
        ppo::evaluate_policy(&policy, &checkpoint.normalizer, &env, false, &eval_seeds)?;
    let equal_weighted = run_equal_weighted(&mut env.clone())?;

    // compounding over the window's future returns collapses to a
    // first-to-last close ratio, the natural passive alternative
    let closes = ws.frame.require("C_t")?;
    let buy_and_hold = closes[end] / closes[start] - 1.0;

    let test_start = ws.frame.dates()[start];
    let test_end = ws.frame.dates()[end];
    let benchmark = match &ws.config.benchmark_path {
        Some(p) => Some(benchmark_return(p, test_start, test_end)?),
        None => None,
    };

    let summary = summary_rows(
        &stochastic,
        &deterministic,
        &equal_weighted,
        buy_and_hold,
        benchmark.as_ref(),
    );
    let artifact = BacktestArtifact {
        header: ws.header(),
        checkpoint_hash: checkpoint.sha256()?,
        test_start,
        test_end,
        n_steps: end - start,
        eval_seeds,
        summary,
        deterministic,
        stochastic,
        equal_weighted,
        buy_and_hold_return: buy_and_hold,
        benchmark,
    };
    write_json(&ws.out("backtest.json"), &artifact)?;
    write_summary_csv(&ws.out("backtest_summary.csv"), &artifact.summary)?;
    println!(
        "backtested {} steps ({} .. {}): ppo {} vs equal-weighted {} -> {}",
        artifact.n_steps,
        artifact.test_start,
        artifact.test_end,
        fmt(artifact.stochastic.cum_return.mean),
        fmt(artifact.equal_weighted.summary.cum_return),
        ws.out("backtest.json").display()
    );
    Ok(())
}

// --- report -----------------------------------------------------------

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn agg_cell(a: &Option<MetricAggregate>, with_std: bool) -> String {
    match a {
        None => "-".into(),
        Some(m) if with_std => format!("{} ({})", fmt4(m.mean), fmt4(m.std)),
        Some(m) => fmt4(m.mean),
    }
}

pub fn cmd_report(config: &RunConfig) -> Result<()> {
    let dir = &config.output_dir;
    let backtest: Option<BacktestArtifact> = {
        let p = dir.join("backtest.json");
        if p.exists() {
            Some(read_json(&p)?)
        } else {
            None
        }
    };
    let eval: Option<EvalAlphasArtifact> = {
        let p = dir.join("eval_alphas.json");
        if p.exists() {
            Some(read_json(&p)?)
        } else {
            None
        }
    };
    if backtest.is_none() && eval.is_none() {
        bail!(
            "nothing to report: {} has neither backtest.json nor eval_alphas.json",
            dir.display()
        );
    }

    let header = backtest
        .as_ref()
        .map(|b| &b.header)
        .or(eval.as_ref().map(|e| &e.header))
        .unwrap();

    let mut txt = String::new();
    txt.push_str("alpha weighting run report\n");
    txt.push_str("==========================\n");
    txt.push_str(&format!("code version:  {}\n", header.code_version));
    txt.push_str(&format!(
        "corpus:        {} ({} formulas)\n",
        header.corpus_hash, header.n_alphas
    ));
    txt.push_str(&format!(
        "data:          {}\n",
        header.config.data_path.display()
    ));
    txt.push_str(&format!(
        "train split:   {}\n",
        header.config.train_fraction
    ));
    txt.push_str(&format!("ppo seed:      {}\n", header.config.ppo.seed));

    if let Some(b) = &backtest {
        txt.push_str(&format!(
            "\nstrategy comparison (test {} .. {}, {} steps, {} stochastic runs)\n",
            b.test_start,
            b.test_end,
            b.n_steps,
            b.stochastic.n_runs
        ));
        txt.push_str(&format!(
            "{:<18} {:<18} {:<18} {:<18}\n",
            "strategy", "cum_return", "sharpe", "max_drawdown"
        ));
        for r in &b.summary {
            let with_std = r.runs > 1;
            txt.push_str(&format!(
                "{:<18} {:<18} {:<18} {:<18}\n",
                r.strategy,
                agg_cell(&r.cum_return, with_std),
                agg_cell(&r.sharpe, with_std),
                agg_cell(&r.max_drawdown, with_std),
            ));
        }
        txt.push_str(&format!(
            "\neval seeds: {:?}\ncheckpoint: {}\n",
            b.eval_seeds, b.checkpoint_hash
        ));
    }

    if let Some(e) = &eval {
        let mut rows = e.report.rows.clone();
        rows.sort_by(|a, b| b.gain_share.total_cmp(&a.gain_share));
        txt.push_str(&format!(
            "\ntop alphas by gain share ({} scored, {} dropped)\n",
            e.report.rows.len(),
            e.report.dropped.len()
        ));
        txt.push_str(&format!(
            "{:<6} {:<12} {:>9} {:>9} {:>11}\n",
            "rank", "name", "ic", "mi", "gain_share"
        ));
        for (i, r) in rows.iter().take(10).enumerate() {
            txt.push_str(&format!(
                "{:<6} {:<12} {:>9} {:>9} {:>11}\n",
                i + 1,
                r.name,
                r.ic.map(fmt4).unwrap_or_else(|| "-".into()),
                fmt4(r.mi),
                fmt4(r.gain_share),
            ));
        }
    }

    let txt_path = dir.join("report.txt");
    fs::write(&txt_path, &txt).with_context(|| format!("writing {}", txt_path.display()))?;
    if let Some(b) = &backtest {
        write_summary_csv(&dir.join("report.csv"), &b.summary)?;
    }
    print!("{txt}");
    println!("\nwrote {}", txt_path.display());
    Ok(())
}
