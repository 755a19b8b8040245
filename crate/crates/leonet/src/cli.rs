//! Command-line front end. `main` only parses arguments and maps the
//! result to an exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use leonet_core::harness::{
    ablate_scenario, build_scenario, compare_with_states, EdgeRecord, ExperimentConfig, Scenario,
};

use crate::config::{load_config, ConfigFile, Scale};
use crate::emit::{self, CONFIG_TOML};
use crate::error::Result;
use crate::obsbin;

#[derive(Debug, Parser)]
#[command(name = "leonet", version, about = "Decentralized LEO orbit and clock estimation from GNSS observations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment file; keys override the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seeds are limited to the TOML integer range so that every run can
    /// be written back as a configuration file.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Output directory [default: the file's out_dir, else ./out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Preset the configuration file is applied to.
    #[arg(long, global = true, value_enum)]
    pub scale: Option<Scale>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Standalone, network-float and network-fixed solutions of one epoch.
    Compare,
    /// Convergence of the solver variants against the centralized solution.
    Ablate,
    /// Orbits, observations and estimable labels of the scenario.
    Geometry,
    /// Parse and check a configuration without running anything.
    ValidateConfig,
}

/// What a command did, for the caller to print.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub runtime_s: f64,
}

fn out_dir(cli: &Cli, file: &ConfigFile) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn config_file(config: &ExperimentConfig) -> (String, Vec<u8>) {
    (CONFIG_TOML.into(), ConfigFile::describe(config).to_toml().into_bytes())
}

fn edges(scenario: &Scenario) -> Vec<EdgeRecord> {
    let schedule = scenario.schedule(scenario.config.gt.max_iterations);
    schedule
        .graphs
        .iter()
        .zip(&schedule.mixing)
        .flat_map(|(g, w)| {
            g.edges().into_iter().map(move |(l, q)| EdgeRecord {
                graph: g.index,
                from: l,
                to: q,
                weight: w.weight(l, q),
            })
        })
        .collect()
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let start = Instant::now();
    let (config, file) = load_config(cli.config.as_deref(), cli.scale, cli.seed)?;
    let dir = out_dir(cli, &file);
    let mut summary = Vec::new();
    let files = match cli.command {
        Command::ValidateConfig => {
            writeln!(
                summary,
                "config ok: {} LEO nodes, {} GNSS satellites, {} frequencies, seed {}",
                config.leo.total_satellites,
                config.gnss.total_satellites,
                config.frequencies_hz.len(),
                config.seed()
            )
            .ok();
            Vec::new()
        }
        Command::Compare => {
            let scenario = build_scenario(&config)?;
            let (report, states) = compare_with_states(&scenario)?;
            let mut files = emit::report_files(&report, &states);
            files.push(config_file(&config));
            writeln!(summary, "{:<14} {:>12} {:>12}", "strategy", "orbit [m]", "clock [ns]").ok();
            for s in &report.strategies {
                writeln!(summary, "{:<14} {:>12.4} {:>12.4}", s.name, s.orbit_rmse_m, s.clock_rmse_s * 1e9).ok();
            }
            match report.solver.diverged_at {
                Some(k) => writeln!(summary, "solver diverged at iteration {k}").ok(),
                None => writeln!(
                    summary,
                    "{} iterations, {} of {} nodes fixed",
                    report.solver.iterations, report.fix.nodes_fixed, report.scenario.nodes
                )
                .ok(),
            };
            emit::write_files(&dir, &files)?
        }
        Command::Ablate => {
            let scenario = build_scenario(&config)?;
            let report = ablate_scenario(&scenario)?;
            let mut files = emit::ablation_files(&report);
            files.push(config_file(&config));
            for v in &report.variants {
                let reached = v.iterations_to_target.map_or_else(|| "-".into(), |k| k.to_string());
                let note = v.diverged_at.map_or_else(String::new, |k| format!(" (diverged at {k})"));
                writeln!(summary, "{:<12} msd <= {:e} at {reached}{note}", v.name, report.target_msd).ok();
            }
            emit::write_files(&dir, &files)?
        }
        Command::Geometry => {
            let scenario = build_scenario(&config)?;
            let files = vec![
                ("geometry.csv".to_string(), emit::geometry_csv(&scenario.geometry)),
                ("observations.csv".to_string(), emit::observations_csv(&scenario.observations)),
                ("observations.bin".to_string(), obsbin::encode(&scenario.observations)),
                ("labels.csv".to_string(), emit::labels_csv(&scenario.model)),
                ("topology.csv".to_string(), emit::topology_csv(&edges(&scenario))),
                config_file(&config),
            ];
            writeln!(
                summary,
                "{} nodes, {} satellites, {} observations, {} estimable parameters",
                scenario.nodes(),
                scenario.geometry.gnss_states.len(),
                scenario.model.layout.m(),
                scenario.model.rank()
            )
            .ok();
            emit::write_files(&dir, &files)?
        }
    };
    Ok(Outcome {
        summary: String::from_utf8(summary).expect("ascii summary"),
        files,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Path of an emitted file by name.
pub fn find<'a>(files: &'a [PathBuf], name: &str) -> Option<&'a Path> {
    files.iter().find(|p| p.file_name().is_some_and(|f| f == name)).map(PathBuf::as_path)
}
