//! Machine-readable run reports: JSON (primary) and CSV (table) output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lagroute::netlist::{serialize_instance, Instance};
use lagroute::oracle::ExactResult;
use lagroute::router::{RouterConfig, RoutingSolution, SpeedupRow, WRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical instance serialization; ties every report row to
/// the exact instance it was computed from.
pub fn instance_hash(inst: &Instance) -> String {
    let text = serialize_instance(inst);
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRef {
    pub name: String,
    pub hash: String,
}

/// One result row. `delay_proxy` is a path-cost stand-in, not a timing-model
/// delay; the field name keeps the PROXY label visible in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub method: String,
    pub step: String,
    pub wirelength: f64,
    pub channel_width: u32,
    pub total_violation: f64,
    pub delay_proxy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_w: Option<usize>,
    pub infeasible_at_w_init: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub optimal_wirelength: f64,
    pub min_channel_width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub instance: InstanceRef,
    pub config: RouterConfig,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<WRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<Vec<SpeedupRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
}

impl Report {
    pub fn new(name: &str, inst: &Instance, config: &RouterConfig) -> Self {
        Report {
            tool_version: TOOL_VERSION.to_string(),
            instance: InstanceRef {
                name: name.to_string(),
                hash: instance_hash(inst),
            },
            config: config.clone(),
            rows: Vec::new(),
            history: None,
            speedup: None,
            oracle: None,
        }
    }

    pub fn push_solution(
        &mut self,
        name: &str,
        cfg: &RouterConfig,
        sol: &RoutingSolution,
        wall_time_s: f64,
    ) {
        self.rows.push(ReportRow {
            name: name.to_string(),
            method: cfg.method.to_string(),
            step: cfg.step.to_string(),
            wirelength: sol.wirelength,
            channel_width: sol.channel_width,
            total_violation: sol.total_violation,
            delay_proxy: sol.delay_proxy,
            achieved_w: sol.achieved_w,
            infeasible_at_w_init: sol.infeasible_at_w_init,
            wall_time_s,
        });
    }

    pub fn set_oracle(&mut self, exact: &ExactResult) {
        self.oracle = Some(OracleReport {
            optimal_wirelength: exact.optimal_wirelength,
            min_channel_width: exact.min_channel_width,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with one line per row; history and speedup tables are appended as
    /// separate sections when present.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "name",
            "method",
            "step",
            "wirelength",
            "channel_width",
            "total_violation",
            "delay_proxy",
            "achieved_w",
            "infeasible_at_w_init",
            "wall_time_s",
        ])
        .unwrap();
        for r in &self.rows {
            wtr.write_record([
                r.name.clone(),
                r.method.clone(),
                r.step.clone(),
                r.wirelength.to_string(),
                r.channel_width.to_string(),
                r.total_violation.to_string(),
                r.delay_proxy.to_string(),
                r.achieved_w.map(|w| w.to_string()).unwrap_or_default(),
                r.infeasible_at_w_init.to_string(),
                r.wall_time_s.to_string(),
            ])
            .unwrap();
        }
        let mut out = String::from_utf8(wtr.into_inner().unwrap()).unwrap();
        if let Some(speedup) = &self.speedup {
            out.push_str("\nthreads,wall_time_s,speedup\n");
            for row in speedup {
                out.push_str(&format!(
                    "{},{},{}\n",
                    row.threads, row.wall_time_s, row.speedup
                ));
            }
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}
