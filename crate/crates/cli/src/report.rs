//! Report serialization: the JSON report, its human-readable table and the
//! CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use qtlab::campaign::{Gate, Outcome, ResultRow};
use qtlab::harness::{Exact, Verdict};
use qtlab::suite::IdentityRow;

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: &'a str,
    pub config: Value,
    pub results: &'a [ResultRow],
    pub gates: &'a [Gate],
    pub pass: bool,
    pub seed: Option<u64>,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl<'a> Report<'a> {
    pub fn new(command: &'a str, config: Value, outcome: &'a Outcome, seed: Option<u64>, wall_seconds: Option<f64>) -> Self {
        Self {
            command,
            config,
            results: &outcome.results,
            gates: &outcome.gates,
            pass: outcome.pass(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "{} (version {})", self.command, self.version);
        if !self.results.is_empty() {
            let _ = writeln!(t, "{:<36} {:>14} {:>11} {:>14} {:>8} {:>6}", "result", "estimate", "stderr", "exact", "z", "pass");
        }
        for r in self.results {
            let exact = match r.exact {
                Some(Exact::Finite(v)) => format!("{v:.8}"),
                Some(Exact::Infinite) => "inf".into(),
                None => "-".into(),
            };
            let z = r.z.map(|z| format!("{z:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(t, "{:<36} {:>14.8} {:>11.3e} {:>14} {:>8} {:>6}", r.name, r.estimate, r.stderr, exact, z, r.pass);
        }
        for g in self.gates {
            let measured: Vec<String> = g.verdict.measured.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
            let _ = writeln!(
                t,
                "gate {:<31} {} [{}] {}",
                g.name,
                if g.verdict.pass { "PASS" } else { "FAIL" },
                g.verdict.criterion,
                measured.join(" ")
            );
        }
        if let Some(w) = self.wall_seconds {
            let _ = writeln!(t, "wall time {w:.1} s");
        }
        let _ = writeln!(t, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub identity_name: String,
    pub grid_point: String,
    pub residual: f64,
}

impl From<&IdentityRow> for ResidualRow {
    fn from(r: &IdentityRow) -> Self {
        Self { identity_name: r.identity.clone(), grid_point: r.grid_point.clone(), residual: r.residual }
    }
}

/// One result and one gate per identity: the worst residual against its
/// threshold.
pub fn identity_outcome(rows: &[IdentityRow]) -> Outcome {
    let mut names: Vec<&str> = rows.iter().map(|r| r.identity.as_str()).collect();
    names.dedup();
    let mut out = Outcome::default();
    for name in names {
        let group: Vec<&IdentityRow> = rows.iter().filter(|r| r.identity == name).collect();
        let worst = group.iter().map(|r| r.residual).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        let threshold = group[0].threshold;
        let pass = group.iter().all(|r| r.pass());
        out.results.push(ResultRow {
            name: name.to_string(),
            estimate: worst,
            stderr: 0.0,
            n: group.len(),
            ess: group.len() as f64,
            exact: None,
            z: None,
            pass,
        });
        out.gates.push(Gate {
            name: name.to_string(),
            quality: false,
            verdict: Verdict::new(pass, format!("max residual < {threshold:e}"), vec![("max_residual", worst), ("points", group.len() as f64)]),
        });
    }
    out
}

pub fn write_residual_csv(path: &Path, rows: &[ResidualRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ResultCsvRow<'a> {
    name: &'a str,
    estimate: f64,
    stderr: f64,
    n: usize,
    ess: f64,
    exact: Option<f64>,
    z: Option<f64>,
    pass: bool,
}

pub fn write_result_csv(path: &Path, outcome: &Outcome) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &outcome.results {
        w.serialize(ResultCsvRow {
            name: &r.name,
            estimate: r.estimate,
            stderr: r.stderr,
            n: r.n,
            ess: r.ess,
            exact: r.exact.map(|e| e.finite().unwrap_or(f64::INFINITY)),
            z: r.z,
            pass: r.pass,
        })?;
    }
    w.flush()?;
    Ok(())
}
