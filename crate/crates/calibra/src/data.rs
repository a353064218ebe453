//! Dataset containers, CSV ingestion, study configuration, and validation
//! of the identification preconditions that are checkable from data.
//!
//! The main dataset holds a complete-case triple (outcome, exposure,
//! confounders); the auxiliary dataset holds outcome and exposure for units
//! whose confounders were never observed. Exposure codes are re-mapped to a
//! dense `0..=L` range preserving numeric order, with the coding recorded so
//! reports can show original values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CalibraError, Result};
use crate::learners::LearnerSpec;

/// Map between dense exposure levels `0..=L` and the original numeric codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureCoding {
    /// `original[level]` is the raw code that was re-coded to `level`.
    pub original: Vec<i64>,
}

impl ExposureCoding {
    pub fn identity(levels: usize) -> Self {
        ExposureCoding {
            original: (0..levels as i64).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.original.len()
    }

    pub fn dense_of(&self, raw: i64) -> Option<usize> {
        self.original.iter().position(|&v| v == raw)
    }
}

/// Complete-case units: outcome `y`, exposure `x` in `0..=L`, confounders `z`.
#[derive(Debug, Clone)]
pub struct MainDataset {
    pub y: Array1<f64>,
    pub x: Vec<usize>,
    pub z: Array2<f64>,
    pub column_names: Vec<String>,
    pub coding: ExposureCoding,
}

impl MainDataset {
    /// Construct with invariant checks: equal lengths, dense exposure levels
    /// all observed, no missing values, and n large enough that each level
    /// can appear in each cross-fit half.
    pub fn new(
        y: Array1<f64>,
        x: Vec<usize>,
        z: Array2<f64>,
        column_names: Vec<String>,
        coding: ExposureCoding,
    ) -> Result<Self> {
        let n = y.len();
        if x.len() != n || z.nrows() != n {
            return Err(CalibraError::Validation(format!(
                "main dataset length mismatch: y={}, x={}, z rows={}",
                n,
                x.len(),
                z.nrows()
            )));
        }
        if column_names.len() != z.ncols() {
            return Err(CalibraError::Validation(format!(
                "{} confounder names for {} columns",
                column_names.len(),
                z.ncols()
            )));
        }
        let levels = coding.levels();
        if levels < 2 {
            return Err(CalibraError::Validation(
                "exposure must have at least two levels".into(),
            ));
        }
        if n < 2 * levels {
            return Err(CalibraError::Validation(format!(
                "n = {n} is below the floor 2(L+1) = {}",
                2 * levels
            )));
        }
        let mut seen = vec![false; levels];
        for (i, &xi) in x.iter().enumerate() {
            if xi >= levels {
                return Err(CalibraError::Validation(format!(
                    "exposure level {xi} at row {} outside 0..{}",
                    i + 1,
                    levels - 1
                )));
            }
            seen[xi] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CalibraError::Validation(format!(
                "exposure level {missing} never occurs in the main data"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || z.iter().any(|v| !v.is_finite()) {
            return Err(CalibraError::Validation(
                "main dataset contains a non-finite value".into(),
            ));
        }
        Ok(MainDataset {
            y,
            x,
            z,
            column_names,
            coding,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// Number of exposure levels L+1.
    pub fn levels(&self) -> usize {
        self.coding.levels()
    }

    /// Unit counts per exposure level.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.levels()];
        for &xi in &self.x {
            counts[xi] += 1;
        }
        counts
    }

    /// Write back to CSV with original exposure codes; floating-point values
    /// are printed with 17 significant digits so a reload is bit-identical.
    pub fn write_csv(&self, path: &Path, outcome_col: &str, exposure_col: &str) -> Result<()> {
        let mut out = String::new();
        out.push_str(outcome_col);
        out.push(',');
        out.push_str(exposure_col);
        for name in &self.column_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n() {
            let _ = write!(out, "{:.16e},{}", self.y[i], self.coding.original[self.x[i]]);
            for j in 0..self.p() {
                let _ = write!(out, ",{:.16e}", self.z[[i, j]]);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Auxiliary units: outcome and exposure only; confounders unobserved.
#[derive(Debug, Clone)]
pub struct AuxDataset {
    pub y: Array1<f64>,
    pub x: Vec<usize>,
}

impl AuxDataset {
    pub fn new(y: Array1<f64>, x: Vec<usize>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(CalibraError::Validation(format!(
                "auxiliary dataset length mismatch: y={}, x={}",
                y.len(),
                x.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CalibraError::Validation(
                "auxiliary outcome contains a non-finite value".into(),
            ));
        }
        Ok(AuxDataset { y, x })
    }

    pub fn empty() -> Self {
        AuxDataset {
            y: Array1::zeros(0),
            x: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Which working estimating function ties the main and auxiliary samples
/// together: a shared marginal outcome mean, or a shared outcome-on-exposure
/// linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WorkingFunction {
    FormI,
    FormII,
}

impl std::fmt::Display for WorkingFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorkingFunction::FormI => write!(f, "I"),
            WorkingFunction::FormII => write!(f, "II"),
        }
    }
}

impl std::str::FromStr for WorkingFunction {
    type Err = CalibraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "FormI" | "form_i" | "1" => Ok(WorkingFunction::FormI),
            "II" | "ii" | "FormII" | "form_ii" | "2" => Ok(WorkingFunction::FormII),
            other => Err(CalibraError::Validation(format!(
                "unknown working function '{other}' (expected I or II)"
            ))),
        }
    }
}

/// Study-level configuration: candidate learners, working function, bootstrap
/// size, numerical tolerances.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Number of exposure levels L+1 the study expects.
    pub exposure_levels: usize,
    pub ps_candidates: Vec<LearnerSpec>,
    pub cm_candidates: Vec<LearnerSpec>,
    pub working_function: WorkingFunction,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub match_ratio: Option<usize>,
    /// Propensity estimates are clipped into [ps_clip, 1 - ps_clip] before
    /// cross-level renormalization.
    pub ps_clip: f64,
    pub el_tolerance: f64,
    pub el_max_iter: usize,
}

impl StudyConfig {
    /// Defaults mirroring the study design: the three standard candidates for
    /// both nuisances, working function I, 100 bootstrap replicates.
    pub fn default_for_levels(levels: usize) -> Self {
        StudyConfig {
            exposure_levels: levels,
            ps_candidates: vec![
                LearnerSpec::ridge_multinomial_default(),
                LearnerSpec::forest_default(),
                LearnerSpec::boosting_default(),
            ],
            cm_candidates: vec![
                LearnerSpec::ridge_regression_default(),
                LearnerSpec::forest_default(),
                LearnerSpec::boosting_default(),
            ],
            working_function: WorkingFunction::FormI,
            bootstrap_reps: 100,
            seed: 0,
            match_ratio: None,
            ps_clip: 1e-3,
            el_tolerance: 1e-10,
            el_max_iter: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ps_candidates.is_empty() || self.cm_candidates.is_empty() {
            return Err(CalibraError::Validation(
                "at least one propensity and one outcome-mean candidate are required".into(),
            ));
        }
        if !(self.ps_clip > 0.0 && self.ps_clip < 0.5) {
            return Err(CalibraError::Validation(format!(
                "ps_clip must lie in (0, 0.5); got {}",
                self.ps_clip
            )));
        }
        if self.el_tolerance <= 0.0 {
            return Err(CalibraError::Validation(
                "el_tolerance must be positive".into(),
            ));
        }
        if self.el_max_iter == 0 {
            return Err(CalibraError::Validation(
                "el_max_iter must be at least 1".into(),
            ));
        }
        if let Some(k) = self.match_ratio {
            if k < 1 {
                return Err(CalibraError::Validation("match ratio must be >= 1".into()));
            }
        }
        for spec in self.ps_candidates.iter().chain(&self.cm_candidates) {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Outcome of `validate_study`: per-level counts plus human-readable notes.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub level_counts: Vec<usize>,
    pub aux_len: usize,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Smallest per-level main-data count accepted; each cross-fit half then has
/// at least five units of every level.
pub const LEVEL_COUNT_FLOOR: usize = 10;

/// Check the preconditions inspectable from data: per-level support in the
/// main sample and exposure-level compatibility of the auxiliary sample.
pub fn validate_study(
    main: &MainDataset,
    aux: &AuxDataset,
    config: &StudyConfig,
) -> Result<ValidationReport> {
    config.validate()?;
    if config.exposure_levels != main.levels() {
        return Err(CalibraError::Validation(format!(
            "config expects {} exposure levels, data has {}",
            config.exposure_levels,
            main.levels()
        )));
    }
    let counts = main.level_counts();
    for (level, &c) in counts.iter().enumerate() {
        if c < LEVEL_COUNT_FLOOR {
            return Err(CalibraError::Validation(format!(
                "exposure level {level} has only {c} main-data units (floor {LEVEL_COUNT_FLOOR})"
            )));
        }
    }
    for (i, &xi) in aux.x.iter().enumerate() {
        if xi >= main.levels() {
            return Err(CalibraError::Validation(format!(
                "auxiliary exposure level {xi} at row {} is absent from the main data",
                i + 1
            )));
        }
    }
    let mut notes = Vec::new();
    if aux.is_empty() {
        notes.push("auxiliary data empty: CMLIB will equal CML".to_string());
    }
    Ok(ValidationReport {
        level_counts: counts,
        aux_len: aux.len(),
        // Saturation of clipped propensity estimates is only known after the
        // learners run; the estimator fills a warning into the report when
        // more than 5% of predictions hit the clip.
        warnings: Vec::new(),
        notes,
    })
}

fn parse_cell(raw: &str, row: usize, col: &str) -> Result<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(CalibraError::Parse(format!(
            "missing value at row {row}, column {col}"
        )));
    }
    let v: f64 = trimmed.parse().map_err(|_| {
        CalibraError::Parse(format!(
            "non-numeric value '{trimmed}' at row {row}, column {col}"
        ))
    })?;
    if v.is_nan() {
        return Err(CalibraError::Parse(format!(
            "missing value at row {row}, column {col}"
        )));
    }
    Ok(v)
}

fn parse_exposure_cell(raw: &str, row: usize, col: &str) -> Result<i64> {
    let v = parse_cell(raw, row, col)?;
    if !v.is_finite() || v.fract() != 0.0 || v.abs() > 9.0e15 {
        return Err(CalibraError::Parse(format!(
            "exposure must be integer-valued; got '{}' at row {row}, column {col}",
            raw.trim()
        )));
    }
    Ok(v as i64)
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CalibraError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CalibraError::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CalibraError::Parse(format!("row {}: {e}", i + 1)))?;
        rows.push(record.iter().map(|c| c.to_string()).collect());
    }
    if rows.is_empty() {
        return Err(CalibraError::Parse(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(RawTable { headers, rows })
}

fn require_column(table: &RawTable, name: &str, path: &Path) -> Result<usize> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| {
            CalibraError::Parse(format!(
                "{}: column '{name}' not found (have: {})",
                path.display(),
                table.headers.join(", ")
            ))
        })
}

/// Load the main dataset. All columns other than the named outcome and
/// exposure columns are taken positionally as numeric confounders. Exposure
/// values are re-coded to dense `0..=L` preserving numeric order.
pub fn load_main_csv(path: &Path, outcome_col: &str, exposure_col: &str) -> Result<MainDataset> {
    let table = read_table(path)?;
    let y_idx = require_column(&table, outcome_col, path)?;
    let x_idx = require_column(&table, exposure_col, path)?;
    if y_idx == x_idx {
        return Err(CalibraError::Validation(
            "outcome and exposure columns must differ".into(),
        ));
    }
    let z_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&j| j != y_idx && j != x_idx)
        .collect();
    let n = table.rows.len();
    let mut y = Array1::<f64>::zeros(n);
    let mut raw_x = vec![0i64; n];
    let mut z = Array2::<f64>::zeros((n, z_cols.len()));
    for (i, row) in table.rows.iter().enumerate() {
        let r = i + 1;
        y[i] = parse_cell(&row[y_idx], r, outcome_col)?;
        raw_x[i] = parse_exposure_cell(&row[x_idx], r, exposure_col)?;
        for (jj, &j) in z_cols.iter().enumerate() {
            z[[i, jj]] = parse_cell(&row[j], r, &table.headers[j])?;
        }
    }
    let mut codes: Vec<i64> = raw_x.clone();
    codes.sort_unstable();
    codes.dedup();
    let coding = ExposureCoding { original: codes };
    let x: Vec<usize> = raw_x
        .iter()
        .map(|&v| coding.dense_of(v).expect("code present by construction"))
        .collect();
    let column_names: Vec<String> = z_cols
        .iter()
        .map(|&j| table.headers[j].clone())
        .collect();
    MainDataset::new(y, x, z, column_names, coding)
}

/// Load the auxiliary dataset: only the outcome and exposure columns are
/// read; any other columns are deliberately dropped with a warning, since
/// auxiliary confounders are treated as unobserved. Exposure codes must be a
/// subset of the main data's codes (the supplied coding).
pub fn load_aux_csv(
    path: &Path,
    outcome_col: &str,
    exposure_col: &str,
    coding: &ExposureCoding,
) -> Result<(AuxDataset, Vec<String>)> {
    let table = read_table(path)?;
    let y_idx = require_column(&table, outcome_col, path)?;
    let x_idx = require_column(&table, exposure_col, path)?;
    let extra = table.headers.len() - 2;
    let mut warnings = Vec::new();
    if extra > 0 {
        warnings.push(format!(
            "{extra} covariate column{} ignored in auxiliary file (confounders are unobserved there)",
            if extra == 1 { "" } else { "s" }
        ));
    }
    let n = table.rows.len();
    let mut y = Array1::<f64>::zeros(n);
    let mut x = vec![0usize; n];
    for (i, row) in table.rows.iter().enumerate() {
        let r = i + 1;
        y[i] = parse_cell(&row[y_idx], r, outcome_col)?;
        let raw = parse_exposure_cell(&row[x_idx], r, exposure_col)?;
        x[i] = coding.dense_of(raw).ok_or_else(|| {
            CalibraError::Validation(format!(
                "auxiliary exposure code {raw} at row {r} is absent from the main data"
            ))
        })?;
    }
    Ok((AuxDataset::new(y, x)?, warnings))
}

/// Read a named subset of numeric columns (shared covariates for matching).
pub fn load_shared_columns(path: &Path, cols: &[String]) -> Result<Array2<f64>> {
    let table = read_table(path)?;
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| require_column(&table, c, path))
        .collect::<Result<_>>()?;
    let n = table.rows.len();
    let mut out = Array2::<f64>::zeros((n, idx.len()));
    for (i, row) in table.rows.iter().enumerate() {
        for (jj, &j) in idx.iter().enumerate() {
            out[[i, jj]] = parse_cell(&row[j], i + 1, &table.headers[j])?;
        }
    }
    Ok(out)
}

/// Echo of a resolved configuration as sorted key=value lines; used for the
/// report provenance block and the config hash.
pub fn canonical_echo(pairs: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    s
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
    fn loads_four_row_csv() {
        let f = write_temp("y,x,z1,z2\n1.0,0,0.1,0.2\n2.0,1,0.3,0.4\n3.0,0,0.5,0.6\n4.0,1,0.7,0.8\n");
        let d = load_main_csv(f.path(), "y", "x").unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.p(), 2);
        assert_eq!(d.levels(), 2);
        assert_eq!(d.column_names, vec!["z1", "z2"]);
        assert_eq!(d.x, vec![0, 1, 0, 1]);
    }

    #[test]
    fn recodes_sparse_exposure_levels() {
        let f = write_temp("y,x,z\n1,1,0\n2,3,0\n3,1,0\n4,3,0\n");
        let d = load_main_csv(f.path(), "y", "x").unwrap();
        assert_eq!(d.coding.original, vec![1, 3]);
        assert_eq!(d.x, vec![0, 1, 0, 1]);
    }

    #[test]
    fn rejects_missing_value_with_position() {
        let f = write_temp("y,x,z\n1,0,\n2,1,0.5\n3,0,1.0\n4,1,2.0\n");
        let err = load_main_csv(f.path(), "y", "x").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
        assert!(msg.contains("column z"), "{msg}");
    }

    #[test]
    fn rejects_non_numeric_and_nan() {
        let f = write_temp("y,x,z\n1,0,abc\n2,1,0.5\n3,0,1\n4,1,2\n");
        assert!(load_main_csv(f.path(), "y", "x").is_err());
        let f = write_temp("y,x,z\n1,0,NaN\n2,1,0.5\n3,0,1\n4,1,2\n");
        assert!(load_main_csv(f.path(), "y", "x").is_err());
    }

    #[test]
    fn rejects_continuous_exposure() {
        let f = write_temp("y,x,z\n1,0.5,0\n2,1,0\n3,0,0\n4,1,0\n");
        assert!(load_main_csv(f.path(), "y", "x").is_err());
    }

    #[test]
    fn aux_ignores_extra_columns_with_warning() {
        let coding = ExposureCoding::identity(2);
        let f = write_temp("y,x,z1\n1,0,9\n2,1,9\n");
        let (aux, warnings) = load_aux_csv(f.path(), "y", "x", &coding).unwrap();
        assert_eq!(aux.len(), 2);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("1 covariate column ignored"));
    }

    #[test]
    fn aux_level_must_exist_in_main() {
        let coding = ExposureCoding { original: vec![0, 1] };
        let f = write_temp("y,x\n1,2\n");
        assert!(load_aux_csv(f.path(), "y", "x", &coding).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let f = write_temp(
            "y,x,z1,z2\n0.1234567890123456,1,-1.5e-13,3.25\n2.0,3,0.7,0.125\n-7.5,1,1e300,-0.0\n4.0,3,0.1,0.2\n",
        );
        let d = load_main_csv(f.path(), "y", "x").unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(out.path(), "y", "x").unwrap();
        let d2 = load_main_csv(out.path(), "y", "x").unwrap();
        assert_eq!(d.x, d2.x);
        for i in 0..d.n() {
            assert_eq!(d.y[i].to_bits(), d2.y[i].to_bits());
            for j in 0..d.p() {
                assert_eq!(d.z[[i, j]].to_bits(), d2.z[[i, j]].to_bits());
            }
        }
    }

    #[test]
    fn validate_floor_and_aux_subset() {
        let n = 30;
        let y = Array1::from_iter((0..n).map(|i| i as f64));
        let x: Vec<usize> = (0..n).map(|i| if i < 3 { 1 } else { 0 }).collect();
        let z = Array2::zeros((n, 1));
        let main = MainDataset::new(
            y,
            x,
            z,
            vec!["z1".into()],
            ExposureCoding::identity(2),
        )
        .unwrap();
        let cfg = StudyConfig::default_for_levels(2);
        let err = validate_study(&main, &AuxDataset::empty(), &cfg).unwrap_err();
        assert!(err.to_string().contains("level 1"));

        let x2: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let main2 = MainDataset::new(
            Array1::zeros(n),
            x2,
            Array2::zeros((n, 1)),
            vec!["z1".into()],
            ExposureCoding::identity(2),
        )
        .unwrap();
        let rep = validate_study(&main2, &AuxDataset::empty(), &cfg).unwrap();
        assert_eq!(rep.level_counts, vec![15, 15]);
        assert!(rep.notes.iter().any(|s| s.contains("CMLIB will equal CML")));
    }

    #[test]
    fn exposure_recoding_preserves_order() {
        let f = write_temp("y,x,z\n1,10,0\n2,-3,0\n3,7,0\n4,10,0\n5,-3,0\n6,7,0\n");
        let d = load_main_csv(f.path(), "y", "x").unwrap();
        assert_eq!(d.coding.original, vec![-3, 7, 10]);
        assert_eq!(d.x[0], 2);
        assert_eq!(d.x[1], 0);
        assert_eq!(d.x[2], 1);
    }
}
