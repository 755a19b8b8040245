//! Plot-ready output files. Every file is rendered in memory and replaced
//! atomically, so a reader never sees a partial file.

use std::path::{Path, PathBuf};

use leonet_core::constellation::EpochGeometry;
use leonet_core::estimability::EstimableModel;
use leonet_core::harness::{AblationReport, EdgeRecord, Report, StateRecord};
use leonet_core::observation::ObservationSet;
use leonet_core::solver::IterationRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fsio;

pub const REPORT_JSON: &str = "report.json";
pub const ABLATION_JSON: &str = "ablation.json";
pub const CONFIG_TOML: &str = "config.toml";

/// Trace file of the network solution in a comparison run.
pub const NETWORK_TRACE: &str = "network";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Shortest text that parses back to the same `f64`; exponent form for
/// very small and very large magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

/// Renders a CSV table; the header is always written.
pub fn csv_table<R, I>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fsio::read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn trace_csv(trace: &[IterationRecord]) -> Vec<u8> {
    csv_table(
        &["k", "msd", "avg_grad_norm", "disagreement", "tracking_gap"],
        trace.iter().map(|r| {
            [
                r.k.to_string(),
                opt_num(r.msd),
                num(r.avg_grad_norm),
                num(r.disagreement),
                num(r.tracking_gap),
            ]
        }),
    )
}

pub fn errors_csv(report: &Report) -> Vec<u8> {
    csv_table(
        &["strategy", "node", "orbit_m", "clock_s"],
        report.strategies.iter().flat_map(|s| {
            s.nodes
                .iter()
                .map(|n| [s.name.clone(), n.node.to_string(), num(n.orbit_m), opt_num(n.clock_s)])
        }),
    )
}

pub fn topology_csv(edges: &[EdgeRecord]) -> Vec<u8> {
    csv_table(
        &["t", "l", "q", "weight"],
        edges
            .iter()
            .map(|e| [e.graph.to_string(), e.from.to_string(), e.to.to_string(), num(e.weight)]),
    )
}

pub fn fix_csv(report: &Report) -> Vec<u8> {
    csv_table(
        &["block", "node", "dimension", "success", "success_rate", "residual"],
        report.fix.blocks.iter().map(|b| {
            [
                b.block.to_string(),
                opt(b.node),
                b.dimension.to_string(),
                b.success.to_string(),
                num(b.success_rate),
                num(b.residual),
            ]
        }),
    )
}

pub fn states_csv(states: &[StateRecord]) -> Vec<u8> {
    csv_table(
        &[
            "label",
            "row",
            "node",
            "sat",
            "freq",
            "truth",
            "standalone",
            "network_float",
            "network_fixed",
        ],
        states.iter().map(|s| {
            [
                s.label.clone(),
                s.row.to_string(),
                opt(s.node),
                opt(s.sat),
                opt(s.freq),
                num(s.truth),
                num(s.standalone),
                num(s.network_float),
                num(s.network_fixed),
            ]
        }),
    )
}

pub fn labels_csv(model: &EstimableModel) -> Vec<u8> {
    csv_table(
        &["label", "node", "sat", "freq", "row", "row_name"],
        model.labels.iter().map(|lab| {
            let (node, sat, freq) = lab.indices();
            [
                lab.name(),
                opt(node),
                opt(sat),
                opt(freq),
                lab.row.id().to_string(),
                lab.row.name().to_string(),
            ]
        }),
    )
}

pub fn geometry_csv(geometry: &EpochGeometry) -> Vec<u8> {
    let rows = [("leo", &geometry.leo_states), ("gnss", &geometry.gnss_states)]
        .into_iter()
        .flat_map(|(kind, states)| {
            states.iter().enumerate().map(move |(i, s)| {
                [
                    num(geometry.epoch),
                    format!("{kind}-{i}"),
                    num(s.position.x),
                    num(s.position.y),
                    num(s.position.z),
                    num(s.velocity.x),
                    num(s.velocity.y),
                    num(s.velocity.z),
                ]
            })
        });
    csv_table(&["epoch", "id", "x", "y", "z", "vx", "vy", "vz"], rows)
}

pub fn observations_csv(obs: &ObservationSet) -> Vec<u8> {
    csv_table(
        &["node", "sat", "freq", "type", "value"],
        obs.records().into_iter().map(|(l, g, f, kind, v)| {
            [
                l.to_string(),
                g.to_string(),
                f.to_string(),
                kind.name().to_string(),
                num(v),
            ]
        }),
    )
}

/// Variant names reduced to characters that are safe in a file name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes every `(name, bytes)` pair under `dir`; returns the paths written.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fsio::create_dir(dir)?;
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            fsio::write_bytes(&path, bytes)?;
            Ok(path)
        })
        .collect()
}

/// Files of a comparison run: summary, errors, trace, topology, fixing and states.
pub fn report_files(report: &Report, states: &[StateRecord]) -> Vec<(String, Vec<u8>)> {
    vec![
        (REPORT_JSON.into(), json(report)),
        ("errors.csv".into(), errors_csv(report)),
        (format!("trace_{NETWORK_TRACE}.csv"), trace_csv(&report.trace)),
        ("topology.csv".into(), topology_csv(&report.topology)),
        ("fix.csv".into(), fix_csv(report)),
        ("states.csv".into(), states_csv(states)),
    ]
}

pub fn emit_report(report: &Report, states: &[StateRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    write_files(dir, &report_files(report, states))
}

pub fn ablation_files(report: &AblationReport) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![(ABLATION_JSON.into(), json(report))];
    files.extend(
        report
            .variants
            .iter()
            .map(|v| (format!("trace_{}.csv", file_stem(&v.name)), trace_csv(&v.trace))),
    );
    files
}

pub fn emit_ablation(report: &AblationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    write_files(dir, &ablation_files(report))
}
