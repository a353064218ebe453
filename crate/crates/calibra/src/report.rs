//! Report assembly and emission: JSON for machines, CSV for spreadsheets,
//! aligned text for terminals. Machine formats print floats with 17
//! significant digits (lossless round-trip); text tables use 3 decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::data::canonical_echo;
use crate::estimators::{CrossFitOutput, LevelEstimate};
use crate::matching::CovariateBalance;
use crate::simgen::MonteCarloTable;

pub const SCHEMA_VERSION: u32 = 1;

/// FNV-1a over the canonical config echo; cheap, stable across platforms.
pub fn config_hash(pairs: &BTreeMap<String, String>) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical_echo(pairs).as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

fn fmt_machine(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_machine(v: Option<f64>) -> String {
    v.map(fmt_machine).unwrap_or_default()
}

fn fmt_text_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

/// One output row of an estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub level: usize,
    /// Exposure code as it appeared in the input file.
    pub level_code: i64,
    pub method: String,
    pub tau_hat: f64,
    pub bsd: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
    pub n_eff: f64,
    pub el_iterations: usize,
    pub el_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub n: usize,
    pub n_total: usize,
    pub rho_hat: f64,
    pub seed: u64,
    pub threads: usize,
    pub config_hash: String,
    pub working_theta: Vec<f64>,
    pub integration_iterations: usize,
    pub integration_violation: f64,
    pub exposure_codes: Vec<i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// Fully resolved configuration, echoed as sorted key=value pairs;
    /// re-running from these reproduces the report bit for bit.
    pub config: BTreeMap<String, String>,
    /// Chosen hyperparameters per half, per candidate (JSON-encoded view of
    /// the tuning selections).
    pub selected_hyperparameters: serde_json::Value,
}

/// The estimate report: everything the run produced plus what is needed to
/// reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReportFile {
    pub schema_version: u32,
    pub meta: ReportMeta,
    pub records: Vec<ReportRecord>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    pub balance: Option<Vec<CovariateBalance>>,
    pub provenance: Provenance,
}

impl EstimateReportFile {
    pub fn build(
        out: &CrossFitOutput,
        estimates: &[LevelEstimate],
        exposure_codes: &[i64],
        seed: u64,
        threads: usize,
        config_pairs: BTreeMap<String, String>,
        notes: Vec<String>,
        warnings: Vec<String>,
        balance: Option<Vec<CovariateBalance>>,
        include_cmlib: bool,
    ) -> Self {
        let records = estimates
            .iter()
            .filter(|e| include_cmlib || e.method.label() != "CMLIB")
            .map(|e| ReportRecord {
                level: e.level,
                level_code: exposure_codes[e.level],
                method: e.method.label(),
                tau_hat: e.tau_hat,
                bsd: e.bsd,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                p_value: e.p_value,
                n_eff: e.n_eff,
                el_iterations: e.el.iterations,
                el_violation: e.el.violation,
            })
            .collect();
        let selected = serde_json::to_value(&out.selections).unwrap_or(serde_json::Value::Null);
        EstimateReportFile {
            schema_version: SCHEMA_VERSION,
            meta: ReportMeta {
                n: out.n,
                n_total: out.n_total,
                rho_hat: out.rho_hat,
                seed,
                threads,
                config_hash: config_hash(&config_pairs),
                working_theta: out.theta_hat.clone(),
                integration_iterations: out.integration_iterations,
                integration_violation: out.integration_violation,
                exposure_codes: exposure_codes.to_vec(),
            },
            records,
            notes,
            warnings,
            balance,
            provenance: Provenance {
                config: config_pairs,
                selected_hyperparameters: selected,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,level_code,method,tau_hat,bsd,ci_low,ci_high,p_value,n_eff,el_iterations,el_violation\n",
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.level_code,
                r.method,
                fmt_machine(r.tau_hat),
                fmt_opt_machine(r.bsd),
                fmt_opt_machine(r.ci_low),
                fmt_opt_machine(r.ci_high),
                fmt_opt_machine(r.p_value),
                fmt_machine(r.n_eff),
                r.el_iterations,
                fmt_machine(r.el_violation),
            );
        }
        s.push('\n');
        let _ = writeln!(s, "# schema_version={}", self.schema_version);
        let _ = writeln!(s, "# config_hash={}", self.meta.config_hash);
        let _ = writeln!(s, "# seed={}", self.meta.seed);
        for (k, v) in &self.provenance.config {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Mean potential outcome estimates (n = {}, N = {}, rho_hat = {:.3})",
            self.meta.n, self.meta.n_total, self.meta.rho_hat
        );
        let _ = writeln!(
            s,
            "{:<8} {:<14} {:>9} {:>8} {:>8} {:>8} {:>8}",
            "level", "method", "estimate", "BSD", "95%LL", "95%UL", "P-value"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:<8} {:<14} {:>9.3} {:>8} {:>8} {:>8} {:>8}",
                r.level_code,
                r.method,
                r.tau_hat,
                fmt_text_opt(r.bsd),
                fmt_text_opt(r.ci_low),
                fmt_text_opt(r.ci_high),
                fmt_text_opt(r.p_value),
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(
            s,
            "seed {}  config {}  (re-run with these to reproduce exactly)",
            self.meta.seed, self.meta.config_hash
        );
        s
    }
}

/// Simulation-table report with the oracle truth in the provenance block.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReportFile {
    pub schema_version: u32,
    pub runs: usize,
    pub matched: bool,
    pub truth: Vec<TruthRow>,
    pub rows: Vec<SimulationRow>,
    pub config_hash: String,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthRow {
    pub level: usize,
    pub tau_true: f64,
    pub oracle_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRow {
    pub method: String,
    pub level: usize,
    pub bias: f64,
    pub mcsd: Option<f64>,
    pub bsd: Option<f64>,
    pub cp: Option<f64>,
    pub failures: usize,
    pub replicates_used: usize,
}

impl SimulationReportFile {
    pub fn build(table: &MonteCarloTable, config_pairs: BTreeMap<String, String>) -> Self {
        SimulationReportFile {
            schema_version: SCHEMA_VERSION,
            runs: table.runs,
            matched: table.matched,
            truth: table
                .truth
                .iter()
                .map(|(level, tau, se)| TruthRow {
                    level: *level,
                    tau_true: *tau,
                    oracle_se: *se,
                })
                .collect(),
            rows: table
                .rows
                .iter()
                .map(|r| SimulationRow {
                    method: r.method.clone(),
                    level: r.level,
                    bias: r.bias,
                    mcsd: r.mcsd,
                    bsd: r.mean_bsd,
                    cp: r.coverage,
                    failures: r.failures,
                    replicates_used: r.replicates_used,
                })
                .collect(),
            config_hash: config_hash(&config_pairs),
            provenance: config_pairs,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("method,level,bias,mcsd,bsd,cp,failures,replicates_used,tau_true,oracle_se\n");
        for r in &self.rows {
            let t = &self.truth[r.level];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.level,
                fmt_machine(r.bias),
                fmt_opt_machine(r.mcsd),
                fmt_opt_machine(r.bsd),
                fmt_opt_machine(r.cp),
                r.failures,
                r.replicates_used,
                fmt_machine(t.tau_true),
                fmt_machine(t.oracle_se),
            );
        }
        s.push('\n');
        let _ = writeln!(s, "# schema_version={}", self.schema_version);
        let _ = writeln!(s, "# config_hash={}", self.config_hash);
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Monte Carlo evaluation over {} runs", self.runs);
        for t in &self.truth {
            let _ = writeln!(
                s,
                "truth level {}: {:.3} (oracle SE {:.4})",
                t.level, t.tau_true, t.oracle_se
            );
        }
        let _ = writeln!(
            s,
            "{:<6} {:<14} {:>8} {:>8} {:>8} {:>6} {:>6}",
            "level", "method", "bias", "MCSD", "BSD", "CP", "fail"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<6} {:<14} {:>8.3} {:>8} {:>8} {:>6} {:>6}",
                r.level,
                r.method,
                r.bias,
                fmt_text_opt(r.mcsd),
                fmt_text_opt(r.bsd),
                r.cp.map(|c| format!("{c:.0}")).unwrap_or_else(|| "-".into()),
                r.failures,
            );
        }
        let _ = writeln!(s, "config {}", self.config_hash);
        s
    }
}

/// Standalone matching diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct MatchReportFile {
    pub schema_version: u32,
    pub n_main: usize,
    pub n_aux: usize,
    pub kept: usize,
    pub ratio: usize,
    pub partial: bool,
    pub balance: Vec<BalanceRow>,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceRow {
    pub column: String,
    pub smd_before: f64,
    pub smd_after: f64,
}

impl MatchReportFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("column,smd_before,smd_after\n");
        for b in &self.balance {
            let _ = writeln!(
                s,
                "{},{},{}",
                b.column,
                fmt_machine(b.smd_before),
                fmt_machine(b.smd_after)
            );
        }
        let _ = writeln!(s, "\n# kept={} of {} (ratio 1:{})", self.kept, self.n_aux, self.ratio);
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "matched {} of {} auxiliary units to {} main units (ratio 1:{}{})",
            self.kept,
            self.n_aux,
            self.n_main,
            self.ratio,
            if self.partial { ", partial" } else { "" }
        );
        let _ = writeln!(s, "{:<20} {:>12} {:>12}", "column", "SMD before", "SMD after");
        for b in &self.balance {
            let _ = writeln!(
                s,
                "{:<20} {:>12.3} {:>12.3}",
                b.column, b.smd_before, b.smd_after
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_is_order_insensitive_and_value_sensitive() {
        let mut a = BTreeMap::new();
        a.insert("seed".to_string(), "1".to_string());
        a.insert("n".to_string(), "100".to_string());
        let mut b = BTreeMap::new();
        b.insert("n".to_string(), "100".to_string());
        b.insert("seed".to_string(), "1".to_string());
        assert_eq!(config_hash(&a), config_hash(&b));
        b.insert("seed".to_string(), "2".to_string());
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn machine_format_round_trips() {
        for v in [0.1234567890123456, -1.5e-300, 3.0, 0.699] {
            let s = fmt_machine(v);
            let parsed: f64 = s.parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }
}
