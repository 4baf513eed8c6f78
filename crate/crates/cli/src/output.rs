//! Run directories: `manifest.json`, `report.json` and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const OUT_ROOT_ENV: &str = "COMBFLOW_OUT_ROOT";
const DEFAULT_ROOT: &str = "combflow-runs";

/// Recorded choices that a reader of the outputs needs to interpret them.
pub const DECISIONS: &[&str] = &[
    "rectangles are half-open [lo, hi)",
    "flat combs move with +e1; the -e1 motion violates the jump balance on vertical edges",
    "flat teeth are 3h x h and tilde-sharp teeth are h x 3h/2 with h = 2^-k",
    "trajectories take the region entered just after a boundary crossing",
    "stripe height of u_n is 2^-(n+1)",
    "mollifier is (35/32)(1 - s^2)^3 per axis with epsilon_nu = 2^-nu",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub claim: String,
    /// `None` for informational rows that carry no pass/fail.
    pub pass: Option<bool>,
    pub value: Value,
    /// `exact` or `float`.
    pub arithmetic: &'static str,
}

#[derive(Debug, Default)]
pub struct Run {
    pub claims: Vec<Claim>,
    pub tables: Vec<(String, String)>,
    pub details: serde_json::Map<String, Value>,
}

impl Run {
    pub fn check(&mut self, claim: &str, pass: bool, value: impl Serialize, arithmetic: &'static str) {
        self.claims.push(Claim { claim: claim.into(), pass: Some(pass), value: to_value(value), arithmetic });
    }

    pub fn note(&mut self, claim: &str, value: impl Serialize, arithmetic: &'static str) {
        self.claims.push(Claim { claim: claim.into(), pass: None, value: to_value(value), arithmetic });
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.push((name.into(), csv));
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.into(), to_value(value));
    }

    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass != Some(false))
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or_else(|e| Value::String(format!("unserializable: {e}")))
}

/// `--out` if given, else `$COMBFLOW_OUT_ROOT/<subcommand>`.
pub fn run_dir(out: Option<&Path>, subcommand: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(std::env::var_os(OUT_ROOT_ENV).unwrap_or_else(|| DEFAULT_ROOT.into())).join(subcommand),
    }
}

pub fn write_run(dir: &Path, subcommand: &str, inputs: Value, run: &Run) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let manifest = json!({
        "subcommand": subcommand,
        "inputs": inputs,
        "versions": {"combflow": env!("CARGO_PKG_VERSION")},
        "decisions": DECISIONS,
        "tables": run.tables.iter().map(|(n, _)| n).collect::<Vec<_>>(),
    });
    let report = json!({
        "subcommand": subcommand,
        "passed": run.passed(),
        "claims": run.claims,
        "details": run.details,
    });
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("json value") + "\n";
    fs::write(dir.join("manifest.json"), pretty(&manifest)).map_err(io)?;
    fs::write(dir.join("report.json"), pretty(&report)).map_err(io)?;
    for (name, csv) in &run.tables {
        fs::write(dir.join(name), csv).map_err(io)?;
    }
    Ok(())
}

/// Builds a CSV string from a header and rows of displayable cells.
pub fn csv_table<R, C>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = Vec<C>>,
    C: ToString,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(ToString::to_string)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}
