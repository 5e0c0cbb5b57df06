//! Run reports: a JSON document, a human table, and a one-record-per-line stream.
//!
//! Wall-clock timings live outside the report body so two runs of the same
//! scenario and seed produce byte-identical reports.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::coupling::{AxiomReport, InequalityReport};
use crate::heat::UnionMetadata;
use crate::lipschitz::{LipschitzTrace, PairKind, SeparationTrace};

pub const TOOL: &str = "ricci-union";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotSummary {
    pub index: usize,
    pub t: f64,
    pub component: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub component: usize,
    /// `None` when no exact solver applies to this field.
    pub sup_error: Option<f64>,
    pub sup_norm_initial: f64,
    pub sup_norm_final: f64,
    pub sup_norm_oracle: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatSection {
    pub nodes_per_component: usize,
    pub snapshots: Vec<SnapshotSummary>,
    pub oracle: Vec<OracleComparison>,
    pub union_metadata: Vec<UnionMetadata>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub label: String,
    pub t: f64,
    pub value: f64,
    pub expected: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub candidate: String,
    pub t: f64,
    /// Unit-sphere angle between the points.
    pub angle: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateVerdict {
    pub name: String,
    pub kappa: f64,
    pub l0: f64,
    pub table_min_margin: f64,
    pub sampled_min_margin: f64,
    pub verdict: bool,
    pub expected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceSection {
    pub example: String,
    pub identities: Vec<IdentityRow>,
    pub margin_table: Vec<MarginRow>,
    pub candidates: Vec<CandidateVerdict>,
    pub inequality: Vec<InequalityReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario_name: String,
    pub seed: u64,
    /// The scenario after command-line overrides, as TOML.
    pub scenario: String,
    pub verdict: bool,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub axioms: Vec<AxiomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inequality: Option<InequalityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat: Option<HeatSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceSection>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    pub fn new(command: &str, scenario_name: &str, seed: u64, scenario: String) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            scenario_name: scenario_name.into(),
            seed,
            scenario,
            verdict: false,
            exit_code: 1,
            checks: Vec::new(),
            axioms: Vec::new(),
            inequality: None,
            separation: None,
            lipschitz: None,
            heat: None,
            reproduce: None,
            timings: Vec::new(),
        }
    }

    /// Set the verdict from the checks: exit 0 iff every check passed.
    pub fn conclude(&mut self) {
        self.verdict = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self.exit_code = if self.verdict { 0 } else { 1 };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn timings_json(&self) -> String {
        let map: serde_json::Map<String, Value> = self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("timings serialize")
    }

    /// One JSON object per line; the final `timings` line is the only nondeterministic one.
    pub fn records(&self) -> String {
        let mut out = String::new();
        let mut push = |v: Value| {
            out.push_str(&v.to_string());
            out.push('\n');
        };
        push(json!({
            "record": "header",
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "scenario": self.scenario,
        }));
        for a in &self.axioms {
            push(json!({"record": "axioms", "data": a}));
        }
        if let Some(r) = &self.inequality {
            for s in &r.samples {
                push(json!({"record": "inequality-sample", "data": s}));
            }
            for p in &r.pairwise {
                push(json!({"record": "inequality-pair", "data": p}));
            }
            push(json!({
                "record": "inequality-summary",
                "min_margin": r.min_margin,
                "verdict": r.verdict,
                "skipped": r.skipped,
                "convention_note": r.convention_note,
            }));
        }
        if let Some(s) = &self.separation {
            for (t, v) in s.times.iter().zip(&s.values) {
                push(json!({"record": "separation", "t": t, "min_cross_separation": v}));
            }
        }
        if let Some(l) = &self.lipschitz {
            for (i, t) in l.times.iter().enumerate() {
                push(json!({
                    "record": "lipschitz",
                    "t": t,
                    "lip": l.lip_values[i],
                    "pair": l.achieving_pairs[i],
                    "discretization_gap": l.discretization_gaps[i],
                }));
            }
        }
        if let Some(h) = &self.heat {
            for s in &h.snapshots {
                push(json!({"record": "snapshot", "data": s}));
            }
            for o in &h.oracle {
                push(json!({"record": "oracle", "data": o}));
            }
        }
        if let Some(r) = &self.reproduce {
            for row in &r.identities {
                push(json!({"record": "identity", "data": row}));
            }
            for row in &r.margin_table {
                push(json!({"record": "margin", "data": row}));
            }
            for c in &r.candidates {
                push(json!({"record": "candidate", "data": c}));
            }
        }
        for c in &self.checks {
            push(json!({"record": "check", "data": c}));
        }
        push(json!({"record": "verdict", "verdict": self.verdict, "exit_code": self.exit_code}));
        push(json!({"record": "timings", "seconds": self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>()}));
        out
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} :: {} :: scenario {} (seed {})", self.tool, self.version, self.command, self.scenario_name, self.seed);
        for a in &self.axioms {
            let _ = writeln!(
                s,
                "axioms t={:<10.6} trials={:<6} identity={} symmetry={} triangle={} worst excess={:.3e}",
                a.t, a.trials, a.identity_ok, a.symmetry_ok, a.triangle_ok, a.worst_triangle_excess
            );
        }
        if let Some(r) = &self.inequality {
            let _ = writeln!(
                s,
                "inequality: {} samples, {} skipped, min margin {:.6e}, verdict {}",
                r.samples.len(),
                r.skipped,
                r.min_margin,
                r.verdict
            );
            for p in &r.pairwise {
                let _ = writeln!(s, "  pair {:?}: min margin {:.6e} over {} samples -> {}", p.components, p.min_margin, p.evaluated, p.verdict);
            }
            if let Some(w) = r.worst_sample {
                let w = &r.samples[w];
                let _ = writeln!(s, "  worst: t={:.6} stratum {:?} d/D={:.6} margin {:.6e}", w.t, w.stratum, w.ratio, w.margin);
            }
            let _ = writeln!(s, "  {}", r.convention_note);
        }
        if let Some(sep) = &self.separation {
            let _ = writeln!(
                s,
                "separation floor: {:.6e} -> {:.6e}, non-decreasing {}, strictly increasing {}",
                sep.values.first().copied().unwrap_or(f64::NAN),
                sep.values.last().copied().unwrap_or(f64::NAN),
                sep.non_decreasing,
                sep.strictly_increasing
            );
        }
        if let Some(l) = &self.lipschitz {
            let _ = writeln!(s, "{:>12}  {:>14}  {:<18} {}", "t", "Lip", "pair kind", "flags");
            for (i, t) in l.times.iter().enumerate() {
                let (kind, flag) = match &l.achieving_pairs[i] {
                    Some(p) => (
                        match p.kind {
                            PairKind::WithinComponent => "within-component",
                            PairKind::CrossComponent => "cross-component",
                        },
                        if p.gradient_regime { "gradient-regime" } else { "" },
                    ),
                    None => ("-", ""),
                };
                let _ = writeln!(s, "{t:>12.6}  {:>14.8e}  {kind:<18} {flag}", l.lip_values[i]);
            }
            let _ = writeln!(s, "max uptick {:.3e} (tolerance {:.1e}) -> monotone {}", l.max_uptick, l.tolerance, l.monotone_verdict);
        }
        if let Some(h) = &self.heat {
            let _ = writeln!(s, "heat: {} nodes per component, {} snapshots", h.nodes_per_component, h.snapshots.len());
            for o in &h.oracle {
                match o.sup_error {
                    Some(e) => {
                        let _ = writeln!(s, "  component {}: sup |trotter - oracle| = {:.3e} ({})", o.component, e, o.note);
                    }
                    None => {
                        let _ = writeln!(s, "  component {}: {}", o.component, o.note);
                    }
                }
            }
            for w in h.union_metadata.iter().flat_map(|m| &m.warnings).take(1) {
                let _ = writeln!(s, "  warning: {w}");
            }
        }
        if let Some(r) = &self.reproduce {
            let _ = writeln!(s, "reproduce {}", r.example);
            for row in &r.identities {
                let _ = writeln!(s, "  {:<22} t={:<10.6} value={:<22.15e} expected={:<22.15e} rel err {:.2e}", row.label, row.t, row.value, row.expected, row.rel_error);
            }
            if !r.margin_table.is_empty() {
                let _ = writeln!(s, "  {:<10} {:>8} {:>10} {:>14}", "candidate", "t", "angle", "margin");
                for row in &r.margin_table {
                    let _ = writeln!(s, "  {:<10} {:>8.4} {:>10.5} {:>14.6e}", row.candidate, row.t, row.angle, row.margin);
                }
            }
            for c in &r.candidates {
                let _ = writeln!(
                    s,
                    "  candidate {:<10} kappa={:<5} table min {:.6e}, sampled min {:.6e} -> verdict {} (expected {})",
                    c.name, c.kappa, c.table_min_margin, c.sampled_min_margin, c.verdict, c.expected
                );
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(s, "verdict: {} (exit {})", if self.verdict { "pass" } else { "fail" }, self.exit_code);
        if !self.timings.is_empty() {
            let _ = writeln!(s, "timings:");
            for (k, v) in &self.timings {
                let _ = writeln!(s, "  {k}: {v:.3} s");
            }
        }
        s
    }
}
