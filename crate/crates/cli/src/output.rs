//! Solution records and their serialization.
//!
//! Every solve subcommand writes one `solution.json` under the output
//! directory and prints an aligned summary on stdout. Field order is fixed
//! by the struct definitions, so identical inputs produce identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use robust_crowdsense::hard::{GapCertificate, Pa1Check, SolveStats};
use robust_crowdsense::soft::{LocationFeasibility, LocationSearch, SoftCertificate};

#[derive(Serialize)]
pub struct HardSolution {
    pub problem: &'static str,
    pub t: usize,
    pub l: usize,
    pub epsilon: f64,
    pub objective: f64,
    pub lambda: f64,
    pub policy: Vec<Vec<f64>>,
    pub bids: Vec<Vec<f64>>,
    pub certificate: GapCertificate,
    pub pa1: Pa1Check,
    pub solver: Vec<SolveStats>,
}

#[derive(Serialize)]
pub struct SoftSolution {
    pub problem: &'static str,
    pub t: usize,
    pub l: usize,
    pub beta: f64,
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub policy: Vec<Vec<f64>>,
    pub bids: Vec<Vec<f64>>,
    pub locations: Vec<LocationSearch>,
    pub certificate: SoftCertificate,
    pub pb1: Vec<LocationFeasibility>,
}

#[derive(Serialize)]
pub struct SpecialCaseSolution {
    pub problem: &'static str,
    pub t: usize,
    pub l: usize,
    pub beta: f64,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub clamped: Vec<bool>,
    pub objective: f64,
    pub policy: Vec<Vec<f64>>,
    pub bids: Vec<Vec<f64>>,
    pub certificate: SoftCertificate,
    pub pb1: Vec<LocationFeasibility>,
}

pub fn write_json<T: Serialize>(dir: &Path, value: &T) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut file = fs::File::create(dir.join("solution.json"))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)
}

/// Two-column aligned key/value block.
pub fn print_kv(rows: &[(&str, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:width$}  {v}");
    }
}

pub fn print_policy(label: &str, rows: &[Vec<f64>]) {
    println!("{label}");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        println!("  {}", cells.join("  "));
    }
}
