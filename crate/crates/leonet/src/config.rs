//! TOML experiment files. Keys carry their unit in the name, every key is
//! optional and overrides the chosen preset, and unknown keys are errors.

use std::path::{Path, PathBuf};

use leonet_core::ambiguity::FixPolicy;
use leonet_core::constellation::WalkerConfig;
use leonet_core::estimability::PivotChoice;
use leonet_core::harness::{AblationVariant, ExperimentConfig};
use leonet_core::solver::Preconditioner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// 20 nodes.
    #[default]
    Desk,
    /// 500 nodes.
    Paper,
}

impl Scale {
    pub fn preset(self) -> ExperimentConfig {
        match self {
            Scale::Desk => ExperimentConfig::desk(),
            Scale::Paper => ExperimentConfig::paper(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub leo: WalkerSection,
    #[serde(default)]
    pub gnss: WalkerSection,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub pivots: PivotSection,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub ablation: AblationSection,
    #[serde(default)]
    pub fixing: FixingSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSection {
    pub total_satellites: Option<usize>,
    pub planes: Option<usize>,
    pub sats_per_plane: Option<usize>,
    pub altitude_km: Option<f64>,
    pub inclination_deg: Option<f64>,
    pub phasing: Option<usize>,
    pub raan0_deg: Option<f64>,
    pub epoch0_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub frequencies_mhz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_phase_mm: Option<f64>,
    pub sigma_code_m: Option<f64>,
    pub sigma_doppler_hz: Option<f64>,
    pub sigma_clock_rx_ns: Option<f64>,
    pub sigma_clock_gnss_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub sigma_phase_mm: Option<f64>,
    pub sigma_code_m: Option<f64>,
    pub sigma_doppler_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub sigma_drift_m_per_s: Option<f64>,
    pub sigma_phase_bias_cycles: Option<f64>,
    pub sigma_code_bias_m: Option<f64>,
    pub sigma_iono_m: Option<f64>,
    pub ambiguity_span_cycles: Option<i64>,
    pub sigma_position_m: Option<f64>,
    pub sigma_velocity_m_per_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub epoch_s: Option<f64>,
    pub mask_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PivotPick {
    Lowest,
    Highest,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotSection {
    pub reference_node: Option<usize>,
    pub satellite: Option<PivotPick>,
    pub receiver: Option<PivotPick>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub k_neighbors: Option<usize>,
    pub graphs: Option<usize>,
    pub horizon_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerName {
    Identity,
    Curvature,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub step_size: Option<f64>,
    pub momentum: Option<f64>,
    pub rounds: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub preconditioner: Option<PreconditionerName>,
    pub divergence_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    pub momentum: f64,
    pub rounds: usize,
    pub step_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    pub target_msd: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Replaces the preset list when present.
    pub variants: Option<Vec<VariantSection>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Validated,
    Always,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixingSection {
    pub policy: Option<PolicyName>,
    pub min_success_rate: Option<f64>,
}

fn set<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

/// Applies a value given in units of `unit` SI units. Sub-units divide by
/// an exact power of ten so decimal inputs land on the nearest double.
fn set_scaled(dst: &mut f64, src: Option<f64>, unit: f64) {
    if let Some(v) = src {
        *dst = to_si(v, unit);
    }
}

fn to_si(v: f64, unit: f64) -> f64 {
    if unit < 1.0 {
        v / unit.recip().round()
    } else {
        v * unit
    }
}

/// Shortest decimal `x` in file units with `from_file(x) == v` exactly, so
/// a described configuration resolves back bit for bit.
fn in_units(v: f64, to_file: impl Fn(f64) -> f64, from_file: impl Fn(f64) -> f64) -> f64 {
    let q = to_file(v);
    (0..17)
        .filter_map(|digits| format!("{q:.digits$e}").parse::<f64>().ok())
        .find(|&c| from_file(c) == v)
        .unwrap_or(q)
}

fn scaled(v: f64, unit: f64) -> Option<f64> {
    Some(in_units(v, |x| x / to_si(1.0, unit), |x| to_si(x, unit)))
}

fn pick(p: PivotPick) -> PivotChoice {
    match p {
        PivotPick::Lowest => PivotChoice::Lowest,
        PivotPick::Highest => PivotChoice::Highest,
    }
}

fn pick_name(p: PivotChoice) -> PivotPick {
    match p {
        PivotChoice::Lowest => PivotPick::Lowest,
        PivotChoice::Highest => PivotPick::Highest,
    }
}

impl WalkerSection {
    fn apply(&self, w: &mut WalkerConfig) {
        set(&mut w.total_satellites, self.total_satellites);
        set(&mut w.planes, self.planes);
        set(&mut w.sats_per_plane, self.sats_per_plane);
        set_scaled(&mut w.altitude, self.altitude_km, 1e3);
        set(&mut w.inclination, self.inclination_deg);
        set(&mut w.phasing, self.phasing);
        set(&mut w.raan0, self.raan0_deg.map(f64::to_radians));
        set(&mut w.epoch0, self.epoch0_s);
    }

    fn describe(w: &WalkerConfig) -> Self {
        Self {
            total_satellites: Some(w.total_satellites),
            planes: Some(w.planes),
            sats_per_plane: Some(w.sats_per_plane),
            altitude_km: scaled(w.altitude, 1e3),
            inclination_deg: Some(w.inclination),
            phasing: Some(w.phasing),
            raan0_deg: Some(in_units(w.raan0, f64::to_degrees, f64::to_radians)),
            epoch0_s: Some(w.epoch0),
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path)?, path)
    }

    /// Panics on seeds above `i64::MAX`, which TOML cannot hold.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections are plain tables")
    }

    /// Overlays the file on the preset of `scale` (the file's own scale
    /// when `None`); `seed` overrides the file's seed.
    pub fn resolve(&self, scale: Option<Scale>, seed: Option<u64>) -> ExperimentConfig {
        let mut c = scale.or(self.scale).unwrap_or_default().preset();
        self.leo.apply(&mut c.leo);
        self.gnss.apply(&mut c.gnss);
        if let Some(f) = &self.signal.frequencies_mhz {
            c.frequencies_hz = f.iter().map(|&v| to_si(v, 1e6)).collect();
        }

        let n = &self.noise;
        set_scaled(&mut c.noise.sigma_phase, n.sigma_phase_mm, 1e-3);
        set(&mut c.noise.sigma_code, n.sigma_code_m);
        set(&mut c.noise.sigma_doppler, n.sigma_doppler_hz);
        set_scaled(&mut c.noise.sigma_clock_rx, n.sigma_clock_rx_ns, 1e-9);
        set_scaled(&mut c.noise.sigma_clock_gnss, n.sigma_clock_gnss_ns, 1e-9);
        set(&mut c.noise.rng_seed, seed.or(self.seed));

        let w = &self.weights;
        set_scaled(&mut c.weights.sigma_phase, w.sigma_phase_mm, 1e-3);
        set(&mut c.weights.sigma_code, w.sigma_code_m);
        set(&mut c.weights.sigma_doppler, w.sigma_doppler_hz);

        let t = &self.truth;
        set(&mut c.truth.sigma_drift, t.sigma_drift_m_per_s);
        set(&mut c.truth.sigma_phase_bias, t.sigma_phase_bias_cycles);
        set(&mut c.truth.sigma_code_bias, t.sigma_code_bias_m);
        set(&mut c.truth.sigma_iono, t.sigma_iono_m);
        set(&mut c.truth.ambiguity_span, t.ambiguity_span_cycles);
        set(&mut c.truth.sigma_position, t.sigma_position_m);
        set(&mut c.truth.sigma_velocity, t.sigma_velocity_m_per_s);

        set(&mut c.epoch, self.scenario.epoch_s);
        set(&mut c.mask_deg, self.scenario.mask_deg);

        set(&mut c.pivots.reference, self.pivots.reference_node);
        set(&mut c.pivots.satellite, self.pivots.satellite.map(pick));
        set(&mut c.pivots.receiver, self.pivots.receiver.map(pick));

        set(&mut c.k_neighbors, self.topology.k_neighbors);
        set(&mut c.graph_count, self.topology.graphs);
        set(&mut c.graph_horizon, self.topology.horizon_s);

        let s = &self.solver;
        set(&mut c.gt.step_size, s.step_size);
        set(&mut c.gt.momentum, s.momentum);
        set(&mut c.gt.rounds, s.rounds);
        set(&mut c.gt.max_iterations, s.max_iterations);
        if s.tolerance.is_some() {
            c.gt.tolerance = s.tolerance;
        }
        set(
            &mut c.gt.preconditioner,
            s.preconditioner.map(|p| match p {
                PreconditionerName::Identity => Preconditioner::Identity,
                PreconditionerName::Curvature => Preconditioner::NetworkCurvature,
            }),
        );
        set(&mut c.gt.divergence_factor, s.divergence_factor);

        let a = &self.ablation;
        set(&mut c.ablation.target_msd, a.target_msd);
        set(&mut c.ablation.max_iterations, a.max_iterations);
        if let Some(vs) = &a.variants {
            c.ablation.variants = vs
                .iter()
                .map(|v| AblationVariant::new(&v.name, v.momentum, v.rounds, v.step_scale))
                .collect();
        }

        let threshold = match c.fixing {
            FixPolicy::Validated { min_success_rate } => min_success_rate,
            FixPolicy::Always => 0.999,
        };
        let threshold = self.fixing.min_success_rate.unwrap_or(threshold);
        c.fixing = match self.fixing.policy {
            Some(PolicyName::Always) => FixPolicy::Always,
            Some(PolicyName::Validated) => FixPolicy::Validated {
                min_success_rate: threshold,
            },
            None => match c.fixing {
                FixPolicy::Validated { .. } => FixPolicy::Validated {
                    min_success_rate: threshold,
                },
                FixPolicy::Always => FixPolicy::Always,
            },
        };
        c
    }

    /// Fully populated file that resolves back to `c`.
    pub fn describe(c: &ExperimentConfig) -> Self {
        let (policy, min_success_rate) = match c.fixing {
            FixPolicy::Validated { min_success_rate } => (PolicyName::Validated, Some(min_success_rate)),
            FixPolicy::Always => (PolicyName::Always, None),
        };
        Self {
            scale: None,
            seed: Some(c.noise.rng_seed),
            out_dir: None,
            leo: WalkerSection::describe(&c.leo),
            gnss: WalkerSection::describe(&c.gnss),
            signal: SignalSection {
                frequencies_mhz: c.frequencies_hz.iter().map(|&f| scaled(f, 1e6)).collect(),
            },
            noise: NoiseSection {
                sigma_phase_mm: scaled(c.noise.sigma_phase, 1e-3),
                sigma_code_m: Some(c.noise.sigma_code),
                sigma_doppler_hz: Some(c.noise.sigma_doppler),
                sigma_clock_rx_ns: scaled(c.noise.sigma_clock_rx, 1e-9),
                sigma_clock_gnss_ns: scaled(c.noise.sigma_clock_gnss, 1e-9),
            },
            weights: WeightSection {
                sigma_phase_mm: scaled(c.weights.sigma_phase, 1e-3),
                sigma_code_m: Some(c.weights.sigma_code),
                sigma_doppler_hz: Some(c.weights.sigma_doppler),
            },
            truth: TruthSection {
                sigma_drift_m_per_s: Some(c.truth.sigma_drift),
                sigma_phase_bias_cycles: Some(c.truth.sigma_phase_bias),
                sigma_code_bias_m: Some(c.truth.sigma_code_bias),
                sigma_iono_m: Some(c.truth.sigma_iono),
                ambiguity_span_cycles: Some(c.truth.ambiguity_span),
                sigma_position_m: Some(c.truth.sigma_position),
                sigma_velocity_m_per_s: Some(c.truth.sigma_velocity),
            },
            scenario: ScenarioSection {
                epoch_s: Some(c.epoch),
                mask_deg: Some(c.mask_deg),
            },
            pivots: PivotSection {
                reference_node: Some(c.pivots.reference),
                satellite: Some(pick_name(c.pivots.satellite)),
                receiver: Some(pick_name(c.pivots.receiver)),
            },
            topology: TopologySection {
                k_neighbors: Some(c.k_neighbors),
                graphs: Some(c.graph_count),
                horizon_s: Some(c.graph_horizon),
            },
            solver: SolverSection {
                step_size: Some(c.gt.step_size),
                momentum: Some(c.gt.momentum),
                rounds: Some(c.gt.rounds),
                max_iterations: Some(c.gt.max_iterations),
                tolerance: c.gt.tolerance,
                preconditioner: Some(match c.gt.preconditioner {
                    Preconditioner::Identity => PreconditionerName::Identity,
                    Preconditioner::NetworkCurvature => PreconditionerName::Curvature,
                }),
                divergence_factor: Some(c.gt.divergence_factor),
            },
            ablation: AblationSection {
                target_msd: Some(c.ablation.target_msd),
                max_iterations: Some(c.ablation.max_iterations),
                variants: Some(
                    c.ablation
                        .variants
                        .iter()
                        .map(|v| VariantSection {
                            name: v.name.clone(),
                            momentum: v.momentum,
                            rounds: v.rounds,
                            step_scale: v.step_scale,
                        })
                        .collect(),
                ),
            },
            fixing: FixingSection {
                policy: Some(policy),
                min_success_rate,
            },
        }
    }
}

/// Reads, resolves and validates a configuration. Without a path the
/// preset of `scale` is used.
pub fn load_config(path: Option<&Path>, scale: Option<Scale>, seed: Option<u64>) -> Result<(ExperimentConfig, ConfigFile)> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let config = file.resolve(scale, seed);
    config.validate().map_err(|e| Error::Config {
        path: path.map_or_else(|| PathBuf::from("<preset>"), Path::to_path_buf),
        message: e.to_string(),
    })?;
    Ok((config, file))
}
