//! Command-line front end: `estimate` for real CSV studies, `simulate` for
//! the Monte Carlo evaluation harness, `match` for standalone balance
//! diagnostics. Options come from flags and/or a flat key=value config file;
//! flags override file values, and the fully resolved configuration is
//! echoed into the report so any run can be reproduced from its own output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use crate::data::{
    load_aux_csv, load_main_csv, load_shared_columns, validate_study, AuxDataset,
    StudyConfig, WorkingFunction,
};
use crate::error::{CalibraError, Result};
use crate::estimators::{bootstrap_inference, cross_fit_estimate};
use crate::learners::{ridge, LearnerSpec};
use crate::matching::match_datasets;
use crate::report::{
    BalanceRow, EstimateReportFile, MatchReportFile, SimulationReportFile,
};
use crate::simgen::{run_monte_carlo, Case, McOptions, Scenario};

#[derive(Parser)]
#[command(
    name = "calibra",
    version,
    about = "Robust mean potential outcome estimation with ensemble calibration and auxiliary-data borrowing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate per-level mean potential outcomes from CSV data.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo evaluation scenario and emit the summary table.
    Simulate(SimulateArgs),
    /// Fit membership scores, match auxiliary to main units, report balance.
    Match(MatchArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct EstimateArgs {
    /// Main-data CSV (outcome, exposure, confounder columns).
    #[arg(long)]
    pub main: Option<PathBuf>,
    /// Auxiliary CSV (outcome and exposure; other columns ignored).
    #[arg(long)]
    pub aux: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub exposure: Option<String>,
    /// Match k auxiliary units per main unit before integration.
    #[arg(long)]
    pub match_ratio: Option<usize>,
    /// Comma-separated covariate columns present in both files.
    #[arg(long, value_delimiter = ',')]
    pub match_cols: Option<Vec<String>>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json, csv, or text.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = auto); CALIBRA_THREADS is the fallback.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub bootstrap_reps: Option<i64>,
    /// Working moment tying the samples together: I or II.
    #[arg(long)]
    pub working_function: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SimulateArgs {
    /// Mean-structure case: 1, 2, or 3.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Auxiliary sample size as a multiple of n.
    #[arg(long)]
    pub aux_mult: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// 2 or 3 exposure levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Outcome-scale heterogeneity between main and auxiliary populations.
    #[arg(long)]
    pub hetero_shift: Option<f64>,
    /// Match auxiliary units 1:k inside each replicate.
    #[arg(long)]
    pub match_ratio: Option<usize>,
    /// Bootstrap every replicate (BSD and coverage columns).
    #[arg(long)]
    pub with_bootstrap: bool,
    #[arg(long)]
    pub bootstrap_reps: Option<i64>,
    #[arg(long)]
    pub oracle_draws: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub working_function: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct MatchArgs {
    #[arg(long)]
    pub main: Option<PathBuf>,
    #[arg(long)]
    pub aux: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub match_cols: Option<Vec<String>>,
    /// Auxiliary units matched per main unit.
    #[arg(long)]
    pub ratio: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl FromStr for OutputFormat {
    type Err = CalibraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(CalibraError::Validation(format!(
                "unknown format '{other}' (expected json, csv, or text)"
            ))),
        }
    }
}

/// Rendered output plus where it was written (stdout when `None`).
#[derive(Debug)]
pub struct RunOutput {
    pub content: String,
    pub out_path: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "main",
    "aux",
    "outcome",
    "exposure",
    "match_ratio",
    "match_cols",
    "out",
    "format",
    "seed",
    "threads",
    "bootstrap_reps",
    "working_function",
    "ps_clip",
    "el_tolerance",
    "el_max_iter",
    "ps_candidates",
    "cm_candidates",
    "ridge_grid_min",
    "ridge_grid_max",
    "ridge_grid_size",
    "ridge_cv_folds",
    "forest_trees",
    "forest_mtry",
    "forest_min_leaf",
    "boost_depth",
    "boost_shrinkage",
    "boost_max_rounds",
    "boost_cv_folds",
    "case",
    "p",
    "n",
    "aux_mult",
    "runs",
    "levels",
    "hetero_shift",
    "oracle_draws",
    "mc_bootstrap",
    "ratio",
];

/// Parse a flat key=value config file ('#' starts a comment). Unknown keys
/// are rejected.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CalibraError::Io(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CalibraError::Validation(format!(
                "config line {} is not key=value: '{raw}'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CalibraError::Validation(format!(
                "unknown config key '{key}' at line {}",
                lineno + 1
            )));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Value resolution with precedence flag > file > default, echoing every
/// resolved value for the provenance block.
struct Resolver {
    file: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    fn new(config: Option<&PathBuf>) -> Result<Self> {
        let file = match config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            file,
            echo: BTreeMap::new(),
        })
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse::<T>().map_err(|_| {
            CalibraError::Validation(format!("config key '{key}': cannot parse '{raw}'"))
        })
    }

    fn get<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => self.parse_value(key, raw)?,
                None => default,
            },
        };
        self.echo.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    fn get_opt<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) if !raw.is_empty() => Some(self.parse_value(key, raw)?),
                _ => None,
            },
        };
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    fn get_required<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.get_opt(key, flag)?.ok_or_else(|| {
            CalibraError::Validation(format!("missing required option '--{key}' (or config key)"))
        })
    }

    fn get_list(&mut self, key: &str, flag: Option<Vec<String>>) -> Result<Option<Vec<String>>> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file.get(key).map(|raw| {
                raw.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
            }),
        };
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.join(","));
        }
        Ok(value)
    }
}

fn resolve_threads(resolver: &mut Resolver, flag: Option<usize>) -> Result<usize> {
    let env_fallback = std::env::var("CALIBRA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let flag = flag.or(env_fallback);
    resolver.get("threads", flag, 0usize)
}

fn bootstrap_reps_from(resolver: &mut Resolver, flag: Option<i64>, default: i64) -> Result<usize> {
    let raw = resolver.get("bootstrap_reps", flag, default)?;
    if raw < 0 {
        return Err(CalibraError::Validation(
            "bootstrap_reps must be >= 0".into(),
        ));
    }
    Ok(raw as usize)
}

fn candidate_list(
    resolver: &mut Resolver,
    key: &str,
    for_ps: bool,
) -> Result<Vec<LearnerSpec>> {
    let names = resolver
        .get(key, None::<String>, "ridge,forest,boost".to_string())?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>();
    let grid_min: f64 = resolver.get("ridge_grid_min", None, 1e-4)?;
    let grid_max: f64 = resolver.get("ridge_grid_max", None, 1e2)?;
    let grid_size: usize = resolver.get("ridge_grid_size", None, 20usize)?;
    let ridge_cv: usize = resolver.get("ridge_cv_folds", None, 5usize)?;
    let trees: usize = resolver.get("forest_trees", None, 1000usize)?;
    let mtry: usize = resolver.get("forest_mtry", None, 0usize)?;
    let min_leaf: usize = resolver.get("forest_min_leaf", None, 5usize)?;
    let depth: usize = resolver.get("boost_depth", None, 3usize)?;
    let shrinkage: f64 = resolver.get("boost_shrinkage", None, 0.1)?;
    let max_rounds: usize = resolver.get("boost_max_rounds", None, 500usize)?;
    let boost_cv: usize = resolver.get("boost_cv_folds", None, 10usize)?;

    let grid = ridge::log_spaced_grid(grid_min, grid_max, grid_size.max(1));
    names
        .iter()
        .map(|name| match name.as_str() {
            "ridge" => Ok(if for_ps {
                LearnerSpec::RidgeMultinomial { grid: grid.clone(), cv_folds: ridge_cv }
            } else {
                LearnerSpec::RidgeRegression { grid: grid.clone(), cv_folds: ridge_cv }
            }),
            "forest" => Ok(LearnerSpec::RandomForest {
                n_trees: trees,
                mtry: if mtry == 0 { None } else { Some(mtry) },
                min_leaf,
            }),
            "boost" => Ok(LearnerSpec::GradientBoosting {
                depth,
                shrinkage,
                max_rounds,
                cv_folds: boost_cv,
            }),
            other => Err(CalibraError::Validation(format!(
                "unknown candidate '{other}' in {key} (expected ridge, forest, boost)"
            ))),
        })
        .collect()
}

fn study_config_from(
    resolver: &mut Resolver,
    levels: usize,
    seed: u64,
    bootstrap_reps: usize,
    working_function: Option<String>,
    match_ratio: Option<usize>,
) -> Result<StudyConfig> {
    let wf: WorkingFunction = resolver
        .get("working_function", working_function, "I".to_string())?
        .parse()?;
    let ps_clip: f64 = resolver.get("ps_clip", None, 1e-3)?;
    let el_tolerance: f64 = resolver.get("el_tolerance", None, 1e-10)?;
    let el_max_iter: usize = resolver.get("el_max_iter", None, 200usize)?;
    let ps_candidates = candidate_list(resolver, "ps_candidates", true)?;
    let cm_candidates = candidate_list(resolver, "cm_candidates", false)?;
    let config = StudyConfig {
        exposure_levels: levels,
        ps_candidates,
        cm_candidates,
        working_function: wf,
        bootstrap_reps,
        seed,
        match_ratio,
        ps_clip,
        el_tolerance,
        el_max_iter,
    };
    config.validate()?;
    Ok(config)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CalibraError::Validation(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn emit(content: String, out: Option<PathBuf>) -> Result<RunOutput> {
    if let Some(path) = &out {
        std::fs::write(path, &content)
            .map_err(|e| CalibraError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(RunOutput {
        content,
        out_path: out,
    })
}

/// The `estimate` workflow: load, validate, optionally match, cross-fit,
/// bootstrap, and write the report.
pub fn run_estimate(args: &EstimateArgs) -> Result<RunOutput> {
    let mut resolver = Resolver::new(args.config.as_ref())?;
    let main_path = resolver.get_required("main", args.main.clone().map(path_string))?;
    let aux_path = resolver.get_opt("aux", args.aux.clone().map(path_string))?;
    let outcome = resolver.get_required("outcome", args.outcome.clone())?;
    let exposure = resolver.get_required("exposure", args.exposure.clone())?;
    let seed: u64 = resolver.get("seed", args.seed, 0)?;
    let threads = resolve_threads(&mut resolver, args.threads)?;
    let format: OutputFormat = resolver
        .get("format", args.format.clone(), "json".to_string())?
        .parse()?;
    let out_path = resolver
        .get_opt("out", args.out.clone().map(path_string))?
        .map(PathBuf::from);
    let bootstrap_reps = bootstrap_reps_from(&mut resolver, args.bootstrap_reps, 100)?;
    let match_ratio = resolver.get_opt("match_ratio", args.match_ratio)?;
    let match_cols = resolver.get_list("match_cols", args.match_cols.clone())?;

    let main = load_main_csv(Path::new(&main_path), &outcome, &exposure)?;
    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    let (aux, have_aux) = match &aux_path {
        Some(path) => {
            let (aux, aux_warnings) =
                load_aux_csv(Path::new(path), &outcome, &exposure, &main.coding)?;
            warnings.extend(aux_warnings);
            (aux, true)
        }
        None => {
            notes.push(
                "auxiliary data not provided; information-borrowing (CMLIB) rows omitted"
                    .to_string(),
            );
            (AuxDataset::empty(), false)
        }
    };

    let config = study_config_from(
        &mut resolver,
        main.levels(),
        seed,
        bootstrap_reps,
        args.working_function.clone(),
        match_ratio,
    )?;
    let validation = validate_study(&main, &aux, &config)?;
    notes.extend(validation.notes.clone());

    // Optional membership matching on covariates present in both files.
    let (aux, balance) = match (match_ratio, match_cols.as_ref()) {
        (Some(k), Some(cols)) if !cols.is_empty() => {
            if !have_aux {
                return Err(CalibraError::Validation(
                    "--match-ratio requires auxiliary data".into(),
                ));
            }
            let main_shared = load_shared_columns(Path::new(&main_path), cols)?;
            let aux_shared = load_shared_columns(Path::new(aux_path.as_ref().unwrap()), cols)?;
            let matched = match_datasets(&main_shared.view(), &aux_shared.view(), k, seed)?;
            if matched.partial {
                warnings.push("auxiliary pool smaller than ratio·n; match is partial".into());
            }
            let kept = &matched.kept_aux_indices;
            let filtered = AuxDataset::new(
                Array1::from_iter(kept.iter().map(|&i| aux.y[i])),
                kept.iter().map(|&i| aux.x[i]).collect(),
            )?;
            notes.push(format!(
                "matched {} of {} auxiliary units at ratio 1:{k}",
                kept.len(),
                aux.len()
            ));
            (filtered, Some(matched.balance))
        }
        (Some(_), _) => {
            return Err(CalibraError::Validation(
                "--match-ratio requires --match-cols".into(),
            ));
        }
        _ => (aux, None),
    };

    let echo = resolver.echo.clone();
    let (output, estimates, diag_notes) = with_pool(threads, || {
        let out = cross_fit_estimate(&main, &aux, &config)?;
        let mut diag_notes = Vec::new();
        if out.clip_fraction > 0.05 {
            diag_notes.push(format!(
                "{:.1}% of propensity predictions hit the clip; positivity may be weak",
                100.0 * out.clip_fraction
            ));
        }
        if config.bootstrap_reps >= 2 {
            let (augmented, boot_diag) = bootstrap_inference(&main, &aux, &config, &out)?;
            if boot_diag.unreliable {
                diag_notes.push(
                    "more than 10% of bootstrap replicates failed; interval estimates unreliable"
                        .to_string(),
                );
            }
            Ok((out, augmented, diag_notes))
        } else {
            let estimates = out.estimates.clone();
            Ok((out, estimates, diag_notes))
        }
    })?;
    warnings.extend(diag_notes);

    let report = EstimateReportFile::build(
        &output,
        &estimates,
        &main.coding.original,
        seed,
        threads,
        echo,
        notes,
        warnings,
        balance,
        have_aux,
    );
    let content = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Text => report.to_text(),
    };
    emit(content, out_path)
}

/// The `simulate` workflow: Monte Carlo study at a scenario design point.
pub fn run_simulate(args: &SimulateArgs) -> Result<RunOutput> {
    let mut resolver = Resolver::new(args.config.as_ref())?;
    let case: Case = resolver
        .get_required("case", args.case.clone())?
        .parse()?;
    let p: usize = resolver.get("p", args.p, 10)?;
    let n: usize = resolver.get("n", args.n, 1000)?;
    let aux_mult: f64 = resolver.get("aux_mult", args.aux_mult, 2.0)?;
    let runs: usize = resolver.get("runs", args.runs, 100)?;
    let levels: usize = resolver.get("levels", args.levels, 2)?;
    let hetero: f64 = resolver.get("hetero_shift", args.hetero_shift, 0.0)?;
    let seed: u64 = resolver.get("seed", args.seed, 0)?;
    let threads = resolve_threads(&mut resolver, args.threads)?;
    let format: OutputFormat = resolver
        .get("format", args.format.clone(), "csv".to_string())?
        .parse()?;
    let out_path = resolver
        .get_opt("out", args.out.clone().map(path_string))?
        .map(PathBuf::from);
    let bootstrap_reps = bootstrap_reps_from(&mut resolver, args.bootstrap_reps, 100)?;
    let mc_bootstrap = resolver.get(
        "mc_bootstrap",
        if args.with_bootstrap { Some(true) } else { None },
        false,
    )?;
    let oracle_draws: usize = resolver.get("oracle_draws", args.oracle_draws, 2_000_000)?;
    let match_ratio = resolver.get_opt("match_ratio", args.match_ratio)?;

    let scenario = Scenario {
        case,
        p,
        n,
        aux_multiplier: aux_mult,
        levels,
        heterogeneity_shift: hetero,
        runs,
        seed,
    };
    let config = study_config_from(
        &mut resolver,
        levels,
        seed,
        bootstrap_reps,
        args.working_function.clone(),
        match_ratio,
    )?;
    let opts = McOptions {
        bootstrap: mc_bootstrap,
        oracle_draws,
    };
    let echo = resolver.echo.clone();
    let table = with_pool(threads, || run_monte_carlo(&scenario, &config, &opts))?;
    let report = SimulationReportFile::build(&table, echo);
    let content = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Text => report.to_text(),
    };
    emit(content, out_path)
}

/// The `match` workflow: balance diagnostics without estimation.
pub fn run_match(args: &MatchArgs) -> Result<RunOutput> {
    let mut resolver = Resolver::new(args.config.as_ref())?;
    let main_path = resolver.get_required("main", args.main.clone().map(path_string))?;
    let aux_path = resolver.get_required("aux", args.aux.clone().map(path_string))?;
    let cols = resolver
        .get_list("match_cols", args.match_cols.clone())?
        .filter(|c| !c.is_empty())
        .ok_or_else(|| CalibraError::Validation("missing required option '--match-cols'".into()))?;
    let ratio: usize = resolver.get("ratio", args.ratio, 1)?;
    let seed: u64 = resolver.get("seed", args.seed, 0)?;
    let format: OutputFormat = resolver
        .get("format", args.format.clone(), "text".to_string())?
        .parse()?;
    let out_path = resolver
        .get_opt("out", args.out.clone().map(path_string))?
        .map(PathBuf::from);

    let main_shared = load_shared_columns(Path::new(&main_path), &cols)?;
    let aux_shared = load_shared_columns(Path::new(&aux_path), &cols)?;
    let result = match_datasets(&main_shared.view(), &aux_shared.view(), ratio, seed)?;
    let report = MatchReportFile {
        schema_version: crate::report::SCHEMA_VERSION,
        n_main: main_shared.nrows(),
        n_aux: aux_shared.nrows(),
        kept: result.kept_aux_indices.len(),
        ratio,
        partial: result.partial,
        balance: result
            .balance
            .iter()
            .map(|b| BalanceRow {
                column: cols[b.column].clone(),
                smd_before: b.smd_before,
                smd_after: b.smd_after,
            })
            .collect(),
        provenance: resolver.echo.clone(),
    };
    let content = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Text => report.to_text(),
    };
    emit(content, out_path)
}

fn path_string(p: PathBuf) -> String {
    p.display().to_string()
}

/// Dispatch a parsed command line.
pub fn run(cli: Cli) -> Result<RunOutput> {
    match cli.command {
        Command::Estimate(args) => run_estimate(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Match(args) => run_match(&args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn config_file_round_trip_and_unknown_key() {
        let f = write_temp("seed=42\n# comment\nbootstrap_reps=10\nworking_function=II\n");
        let map = parse_config_file(f.path()).unwrap();
        assert_eq!(map["seed"], "42");
        assert_eq!(map["working_function"], "II");
        let bad = write_temp("not_a_key=1\n");
        assert!(parse_config_file(bad.path()).is_err());
        let malformed = write_temp("just a line\n");
        assert!(parse_config_file(malformed.path()).is_err());
    }

    #[test]
    fn negative_bootstrap_reps_rejected() {
        let mut resolver = Resolver::new(None).unwrap();
        let err = bootstrap_reps_from(&mut resolver, Some(-1), 100).unwrap_err();
        assert!(err.to_string().contains("bootstrap_reps must be >= 0"));
    }

    #[test]
    fn working_function_from_config() {
        let f = write_temp("working_function=II\n");
        let mut resolver = Resolver::new(Some(&f.path().to_path_buf())).unwrap();
        let cfg = study_config_from(&mut resolver, 2, 0, 0, None, None).unwrap();
        assert_eq!(cfg.working_function, WorkingFunction::FormII);
        // Defaults applied and echoed.
        assert_eq!(resolver.echo["ps_clip"], "0.001");
        assert_eq!(resolver.echo["el_max_iter"], "200");
    }

    #[test]
    fn flags_override_file() {
        let f = write_temp("seed=1\n");
        let mut resolver = Resolver::new(Some(&f.path().to_path_buf())).unwrap();
        let seed: u64 = resolver.get("seed", Some(9u64), 0).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(resolver.echo["seed"], "9");
    }
}
