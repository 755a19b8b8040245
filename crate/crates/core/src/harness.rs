//! End-to-end experiments: scenario construction, the standalone /
//! network-float / network-fixed comparison and the solver ablation.
//!
//! Everything here is single-threaded with a fixed reduction order, so a
//! configuration and seed always produce the same report.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{fix_ambiguities, fix_solution, BlockReport, FixPolicy, FloatAmbiguities};
use crate::constellation::{build_walker, epoch_geometry, EpochGeometry, OrbitalElements, WalkerConfig};
use crate::error::{Error, Result, StageExt};
use crate::estimability::{
    assemble_design, build_sbasis, deficiency_count, reduce, ClockParam, EstimableModel, Param, PivotRules, SBasis,
    TableRow,
};
use crate::linalg::{Matrix, Vector};
use crate::observation::{
    normal, sample_truth, stream, synthesize_epoch, FrequencyPlan, NoiseSpec, ObservationSet, TruthSpec, TruthState,
    GPS_L1_HZ, GPS_L2_HZ, SPEED_OF_LIGHT, STREAM_PRIOR,
};
use crate::solver::{build_problems, centralized_wls, gt_run, mean, CentralSolution, GtParams, IterationRecord, NodeProblem};
use crate::topology::{graph_sequence, GraphSchedule, GraphSnapshot};

pub const SCHEMA_VERSION: u32 = 1;

pub const STANDALONE: &str = "standalone";
pub const NETWORK_FLOAT: &str = "network-float";
pub const NETWORK_FIXED: &str = "network-fixed";

/// Measurement sigmas the estimator weights with, independent of the
/// simulated noise so that a noiseless run still has a well-posed
/// weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    /// m.
    pub sigma_phase: f64,
    /// m.
    pub sigma_code: f64,
    /// Hz.
    pub sigma_doppler: f64,
}

impl WeightSpec {
    pub fn nominal() -> Self {
        let n = NoiseSpec::nominal();
        Self {
            sigma_phase: n.sigma_phase,
            sigma_code: n.sigma_code,
            sigma_doppler: n.sigma_doppler,
        }
    }

    pub fn as_noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_phase: self.sigma_phase,
            sigma_code: self.sigma_code,
            sigma_doppler: self.sigma_doppler,
            ..NoiseSpec::noiseless(0)
        }
    }
}

/// Solver settings of one ablation variant, relative to the base step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    pub momentum: f64,
    pub rounds: usize,
    /// Multiplies the base step size.
    pub step_scale: f64,
}

impl AblationVariant {
    pub fn new(name: &str, momentum: f64, rounds: usize, step_scale: f64) -> Self {
        Self {
            name: name.into(),
            momentum,
            rounds,
            step_scale,
        }
    }

    pub fn params(&self, base: &GtParams, max_iterations: usize) -> GtParams {
        GtParams {
            step_size: base.step_size * self.step_scale,
            momentum: self.momentum,
            rounds: self.rounds,
            max_iterations,
            tolerance: None,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub target_msd: f64,
    pub max_iterations: usize,
    pub variants: Vec<AblationVariant>,
}

impl Default for AblationSpec {
    /// Vanilla and momentum-only run at a quarter step; consensus-only and
    /// combined at the full step.
    fn default() -> Self {
        Self {
            target_msd: 1e-6,
            max_iterations: 12_000,
            variants: vec![
                AblationVariant::new("vanilla", 0.0, 1, 0.25),
                AblationVariant::new("momentum", 0.7, 1, 0.25),
                AblationVariant::new("consensus", 0.0, 20, 1.0),
                AblationVariant::new("combined", 0.7, 20, 1.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub leo: WalkerConfig,
    pub gnss: WalkerConfig,
    /// Strictly decreasing carrier frequencies, Hz.
    pub frequencies_hz: Vec<f64>,
    /// Simulated noise; its seed drives every random draw.
    pub noise: NoiseSpec,
    pub weights: WeightSpec,
    pub truth: TruthSpec,
    /// s.
    pub epoch: f64,
    pub mask_deg: f64,
    pub k_neighbors: usize,
    pub graph_count: usize,
    /// Span over which the communication snapshots are sampled, s.
    pub graph_horizon: f64,
    pub pivots: PivotRules,
    pub gt: GtParams,
    pub ablation: AblationSpec,
    pub fixing: FixPolicy,
}

impl ExperimentConfig {
    /// 20 LEO nodes observing a 30-satellite GPS-like shell on L1/L2.
    pub fn desk() -> Self {
        Self {
            leo: WalkerConfig::leo_desk(),
            gnss: WalkerConfig::gnss(),
            frequencies_hz: vec![GPS_L1_HZ, GPS_L2_HZ],
            noise: NoiseSpec::nominal(),
            weights: WeightSpec::nominal(),
            truth: TruthSpec::default(),
            epoch: 0.0,
            mask_deg: 0.0,
            k_neighbors: 4,
            graph_count: 3,
            graph_horizon: 1_500.0,
            pivots: PivotRules::default(),
            gt: GtParams::default(),
            ablation: AblationSpec::default(),
            fixing: FixPolicy::default(),
        }
    }

    /// The 500-node shell; otherwise as [`ExperimentConfig::desk`].
    pub fn paper() -> Self {
        Self {
            leo: WalkerConfig::leo_paper(),
            ..Self::desk()
        }
    }

    pub fn seed(&self) -> u64 {
        self.noise.rng_seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.rng_seed = seed;
        self
    }

    /// Every field is zero-noise: measurements and clocks.
    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseSpec::noiseless(self.noise.rng_seed);
        self
    }

    pub fn plan(&self) -> Result<FrequencyPlan> {
        FrequencyPlan::from_frequencies(&self.frequencies_hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.leo.validate()?;
        self.gnss.validate()?;
        self.plan()?;
        self.noise.validate()?;
        self.weights.as_noise().validate_weights()?;
        self.truth.validate()?;
        if !(-90.0..90.0).contains(&self.mask_deg) {
            return Err(Error::InvalidConfig(format!("elevation mask {} deg outside [-90, 90)", self.mask_deg)));
        }
        if !self.epoch.is_finite() {
            return Err(Error::InvalidConfig("epoch must be finite".into()));
        }
        if self.k_neighbors == 0 || self.k_neighbors >= self.leo.total_satellites {
            return Err(Error::InvalidConfig(format!(
                "k_neighbors {} must be in [1, {})",
                self.k_neighbors, self.leo.total_satellites
            )));
        }
        if self.graph_count == 0 {
            return Err(Error::InvalidConfig("graph_count must be >= 1".into()));
        }
        if !(self.graph_horizon >= 0.0) || !self.graph_horizon.is_finite() {
            return Err(Error::InvalidConfig("graph horizon must be finite and >= 0".into()));
        }
        if self.pivots.reference >= self.leo.total_satellites {
            return Err(Error::InvalidConfig(format!(
                "reference node {} does not exist",
                self.pivots.reference
            )));
        }
        self.gt.validate()?;
        let ab = &self.ablation;
        if !(ab.target_msd > 0.0) {
            return Err(Error::InvalidConfig("ablation target MSD must be positive".into()));
        }
        if ab.variants.is_empty() {
            return Err(Error::InvalidConfig("ablation needs at least one variant".into()));
        }
        for (i, v) in ab.variants.iter().enumerate() {
            if ab.variants[..i].iter().any(|o| o.name == v.name) {
                return Err(Error::InvalidConfig(format!("duplicate ablation variant {}", v.name)));
            }
            v.params(&self.gt, ab.max_iterations)
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("variant {}: {e}", v.name)))?;
        }
        if let FixPolicy::Validated { min_success_rate } = self.fixing {
            if !(0.0..=1.0).contains(&min_success_rate) {
                return Err(Error::InvalidConfig(format!(
                    "minimum success rate {min_success_rate} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Everything derived from a configuration before any solver runs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub plan: FrequencyPlan,
    pub leo: Vec<OrbitalElements>,
    pub gnss: Vec<OrbitalElements>,
    pub geometry: EpochGeometry,
    pub truth: TruthState,
    pub observations: ObservationSet,
    pub basis: SBasis,
    pub model: EstimableModel,
    /// Estimable truth split like the solver states.
    pub truth_local: Vec<Vector>,
    pub truth_global: Vector,
    pub problems: Vec<NodeProblem>,
    pub graphs: Vec<GraphSnapshot>,
}

impl Scenario {
    pub fn schedule(&self, max_iterations: usize) -> GraphSchedule {
        GraphSchedule::new(self.graphs.clone(), max_iterations)
    }

    pub fn nodes(&self) -> usize {
        self.problems.len()
    }

    /// Common initial shared state of every solver run.
    pub fn initial_state(&self) -> Vector {
        Vector::zeros(self.truth_global.len())
    }

    /// Positions in node `l`'s local states of parameters matching `pred`.
    pub fn local_positions(&self, l: usize, pred: impl Fn(Param) -> bool) -> Vec<usize> {
        let labels = &self.model.labels;
        self.model.partition.nodes[l]
            .local
            .iter()
            .enumerate()
            .filter(|(_, &c)| pred(labels[c].param))
            .map(|(k, _)| k)
            .collect()
    }

    /// Shared states seen by a node that cannot talk to its peers: the
    /// estimable truth with the satellite clocks perturbed at the broadcast
    /// clock accuracy.
    pub fn standalone_prior(&self) -> Vector {
        let mut rng = stream(self.config.noise.rng_seed, STREAM_PRIOR);
        let sigma = self.config.noise.sigma_clock_gnss * SPEED_OF_LIGHT;
        let mut z = self.truth_global.clone();
        for (k, &c) in self.model.partition.global.iter().enumerate() {
            if let Param::Satellite { param: ClockParam::Clock, .. } = self.model.labels[c].param {
                z[k] += normal(&mut rng) * sigma;
            }
        }
        z
    }
}

pub fn build_scenario(config: &ExperimentConfig) -> Result<Scenario> {
    config.validate().stage("config")?;
    let plan = config.plan().stage("config")?;
    let leo = build_walker(&config.leo).stage("constellation")?;
    let gnss = build_walker(&config.gnss).stage("constellation")?;
    let geometry = epoch_geometry(&leo, &gnss, config.epoch, config.mask_deg).stage("constellation")?;

    let truth = sample_truth(&geometry, &plan, &config.noise, &config.truth);
    let observations = synthesize_epoch(&truth, &geometry, &plan, &config.noise).stage("observation")?;

    let design = assemble_design(&geometry, &plan).stage("estimability")?;
    let basis = build_sbasis(&design.layout, &plan, &config.pivots).stage("estimability")?;
    let model = reduce(&design, &basis).stage("estimability")?;
    let alpha = basis.estimable(&design.layout.raw_vector(&truth));
    let (truth_local, truth_global) = model.partition.split(&alpha);

    let graphs = graph_sequence(
        &leo,
        config.epoch,
        config.graph_horizon,
        config.graph_count,
        config.k_neighbors,
    )
    .stage("topology")?;
    let problems =
        build_problems(&model.partition, &observations, &plan, &config.weights.as_noise()).stage("solver")?;

    Ok(Scenario {
        config: config.clone(),
        plan,
        leo,
        gnss,
        geometry,
        truth,
        observations,
        basis,
        model,
        truth_local,
        truth_global,
        problems,
        graphs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeError {
    pub node: usize,
    /// Norm of the estimable position error, m.
    pub orbit_m: f64,
    /// Estimable receiver clock error, s. Absent for the reference node.
    pub clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub name: String,
    /// RMS over nodes of the position error norm.
    pub orbit_rmse_m: f64,
    /// RMS over non-reference nodes of the clock error.
    pub clock_rmse_s: f64,
    pub nodes: Vec<NodeError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub nodes: usize,
    pub satellites: usize,
    pub frequencies: usize,
    pub observations: usize,
    pub parameters: usize,
    pub deficiency: usize,
    pub estimable: usize,
    pub shared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub diverged_at: Option<usize>,
    pub last: Option<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixSummary {
    pub policy: FixPolicy,
    pub nodes_fixed: usize,
    pub ambiguities_fixed: usize,
    /// Fixed integers that differ from the estimable truth.
    pub wrong_fixes: usize,
    pub blocks: Vec<BlockReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub graph: usize,
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: ScenarioSummary,
    pub strategies: Vec<StrategyResult>,
    pub solver: SolverSummary,
    pub trace: Vec<IterationRecord>,
    pub fix: FixSummary,
    pub topology: Vec<EdgeRecord>,
    /// Wall time, filled in by callers that have a clock. Not serialized so
    /// that reports stay byte-identical across runs.
    #[serde(skip)]
    pub runtime_s: Option<f64>,
}

impl Report {
    pub fn strategy(&self, name: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.name == name)
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        sqrt(sum / n as f64)
    }
}

/// Errors of node-local states against the estimable truth.
pub fn strategy_errors(scenario: &Scenario, name: &str, xs: &[Vector]) -> StrategyResult {
    let nodes: Vec<NodeError> = (0..scenario.nodes())
        .map(|l| {
            let truth = &scenario.truth_local[l];
            let pos = scenario.local_positions(l, |p| matches!(p, Param::Position { .. }));
            let orbit = sqrt(pos.iter().map(|&k| (xs[l][k] - truth[k]) * (xs[l][k] - truth[k])).sum());
            let clock = scenario
                .local_positions(l, |p| matches!(p, Param::Receiver { param: ClockParam::Clock, .. }))
                .first()
                .map(|&k| (xs[l][k] - truth[k]) / SPEED_OF_LIGHT);
            NodeError {
                node: l,
                orbit_m: orbit,
                clock_s: clock,
            }
        })
        .collect();
    StrategyResult {
        name: name.into(),
        orbit_rmse_m: rms(nodes.iter().map(|n| n.orbit_m)),
        clock_rmse_s: rms(nodes.iter().filter_map(|n| n.clock_s)),
        nodes,
    }
}

fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Fixes each node's ambiguities against the float solution and updates the
/// node's remaining local states. Shared states keep their float values.
pub fn fix_network(
    scenario: &Scenario,
    central: &CentralSolution,
    float_xs: &[Vector],
    policy: FixPolicy,
) -> Result<(Vec<Vector>, FixSummary)> {
    let mut xs = float_xs.to_vec();
    let mut summary = FixSummary {
        policy,
        nodes_fixed: 0,
        ambiguities_fixed: 0,
        wrong_fixes: 0,
        blocks: Vec::new(),
    };
    for (l, problem) in scenario.problems.iter().enumerate() {
        let amb = scenario.local_positions(l, |p| matches!(p, Param::Ambiguity { .. }));
        let rest: Vec<usize> = (0..problem.local_width()).filter(|k| !amb.contains(k)).collect();
        let cov = central.node_covariance(problem);
        let float = FloatAmbiguities {
            a_hat: Vector::from_iterator(amb.len(), amb.iter().map(|&k| float_xs[l][k])),
            q_a: submatrix(&cov, &amb, &amb),
        };
        if amb.is_empty() {
            continue;
        }
        let (fixed, blocks) = fix_ambiguities(&float, policy, Some(l), summary.blocks.len());
        summary.blocks.extend(blocks);
        let Some(fixed) = fixed else { continue };
        let b_hat = Vector::from_iterator(rest.len(), rest.iter().map(|&k| float_xs[l][k]));
        let (b, _) = fix_solution(
            &b_hat,
            &submatrix(&cov, &rest, &rest),
            &submatrix(&cov, &rest, &amb),
            &float,
            &fixed,
        )?;
        for (i, &k) in rest.iter().enumerate() {
            xs[l][k] = b[i];
        }
        for (i, &k) in amb.iter().enumerate() {
            xs[l][k] = fixed[i] as f64;
            if libm::round(scenario.truth_local[l][k]) as i64 != fixed[i] {
                summary.wrong_fixes += 1;
            }
        }
        summary.nodes_fixed += 1;
        summary.ambiguities_fixed += amb.len();
    }
    Ok((xs, summary))
}

fn topology_records(scenario: &Scenario, schedule: &GraphSchedule) -> Vec<EdgeRecord> {
    let mut out = Vec::new();
    for (g, w) in schedule.graphs.iter().zip(&schedule.mixing) {
        for (l, q) in g.edges() {
            out.push(EdgeRecord {
                graph: g.index,
                from: l,
                to: q,
                weight: w.weight(l, q),
            });
        }
    }
    debug_assert!(out.iter().all(|e| e.to < scenario.nodes()));
    out
}

/// Standalone, decentralized float and fixed solutions of one scenario.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Report> {
    let scenario = build_scenario(config)?;
    compare_scenario(&scenario)
}

pub fn compare_scenario(scenario: &Scenario) -> Result<Report> {
    compare_with_states(scenario).map(|(report, _)| report)
}

/// One estimable parameter under every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub label: String,
    pub row: usize,
    pub node: Option<usize>,
    pub sat: Option<usize>,
    pub freq: Option<usize>,
    pub truth: f64,
    pub standalone: f64,
    pub network_float: f64,
    pub network_fixed: f64,
}

/// [`compare_scenario`] plus the final estimable states. Shared states are
/// the network average of the node copies.
pub fn compare_with_states(scenario: &Scenario) -> Result<(Report, Vec<StateRecord>)> {
    let config = &scenario.config;
    let central = centralized_wls(&scenario.problems).stage("solver")?;

    let prior = scenario.standalone_prior();
    let standalone: Vec<Vector> = scenario.problems.iter().map(|p| p.local_x(&prior)).collect();

    let schedule = scenario.schedule(config.gt.max_iterations);
    let trace = gt_run(
        &scenario.problems,
        &schedule,
        &config.gt,
        &scenario.initial_state(),
        Some(&central.z),
    )
    .stage("solver")?;

    let (fixed, fix) = if trace.diverged_at.is_none() {
        fix_network(scenario, &central, &trace.xs, config.fixing).stage("ambiguity")?
    } else {
        let none = FixSummary {
            policy: config.fixing,
            nodes_fixed: 0,
            ambiguities_fixed: 0,
            wrong_fixes: 0,
            blocks: Vec::new(),
        };
        (trace.xs.clone(), none)
    };

    let part = &scenario.model.partition;
    let z_net = mean(&trace.zs);
    let columns = [
        part.join(&scenario.truth_local, &scenario.truth_global),
        part.join(&standalone, &prior),
        part.join(&trace.xs, &z_net),
        part.join(&fixed, &z_net),
    ];
    let states = scenario
        .model
        .labels
        .iter()
        .enumerate()
        .map(|(c, lab)| {
            let (node, sat, freq) = lab.indices();
            StateRecord {
                label: lab.name(),
                row: lab.row.id(),
                node,
                sat,
                freq,
                truth: columns[0][c],
                standalone: columns[1][c],
                network_float: columns[2][c],
                network_fixed: columns[3][c],
            }
        })
        .collect();

    let layout = &scenario.model.layout;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        seed: config.seed(),
        scenario: ScenarioSummary {
            nodes: layout.nodes,
            satellites: layout.satellites,
            frequencies: layout.frequencies,
            observations: layout.m(),
            parameters: layout.n(),
            deficiency: deficiency_count(layout.nodes, layout.satellites, layout.frequencies),
            estimable: scenario.model.rank(),
            shared: scenario.model.partition.global_width(),
        },
        strategies: vec![
            strategy_errors(scenario, STANDALONE, &standalone),
            strategy_errors(scenario, NETWORK_FLOAT, &trace.xs),
            strategy_errors(scenario, NETWORK_FIXED, &fixed),
        ],
        solver: SolverSummary {
            iterations: trace.iterations,
            diverged_at: trace.diverged_at,
            last: trace.last().copied(),
        },
        topology: topology_records(scenario, &schedule),
        trace: trace.records,
        fix,
        runtime_s: None,
    };
    Ok((report, states))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    pub step_size: f64,
    pub momentum: f64,
    pub rounds: usize,
    /// First iteration at or below the target MSD.
    pub iterations_to_target: Option<usize>,
    pub diverged_at: Option<usize>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub target_msd: f64,
    pub variants: Vec<VariantResult>,
    #[serde(skip)]
    pub runtime_s: Option<f64>,
}

impl AblationReport {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Every ablation variant on the same data, schedule and initial state,
/// measured against the centralized solution.
pub fn run_ablation(config: &ExperimentConfig) -> Result<AblationReport> {
    let scenario = build_scenario(config)?;
    ablate_scenario(&scenario)
}

pub fn ablate_scenario(scenario: &Scenario) -> Result<AblationReport> {
    let config = &scenario.config;
    let spec = &config.ablation;
    let central = centralized_wls(&scenario.problems).stage("solver")?;
    let schedule = scenario.schedule(spec.max_iterations);
    let z0 = scenario.initial_state();
    let variants = spec
        .variants
        .iter()
        .map(|v| {
            let params = v.params(&config.gt, spec.max_iterations);
            let trace = gt_run(&scenario.problems, &schedule, &params, &z0, Some(&central.z)).stage("solver")?;
            Ok(VariantResult {
                name: v.name.clone(),
                step_size: params.step_size,
                momentum: params.momentum,
                rounds: params.rounds,
                iterations_to_target: trace.iterations_to(spec.target_msd),
                diverged_at: trace.diverged_at,
                trace: trace.records,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        schema_version: SCHEMA_VERSION,
        seed: config.seed(),
        target_msd: spec.target_msd,
        variants,
        runtime_s: None,
    })
}

/// Estimable truth of one table row, for inspection.
pub fn truth_row(scenario: &Scenario, row: TableRow) -> Vec<(String, f64)> {
    let alpha = scenario.model.partition.join(&scenario.truth_local, &scenario.truth_global);
    scenario
        .model
        .labels
        .iter()
        .zip(alpha.iter())
        .filter(|(lab, _)| lab.row == row)
        .map(|(lab, &v)| (lab.name(), v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::desk().validate().unwrap();
        ExperimentConfig::paper().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ExperimentConfig::desk();
        c.k_neighbors = 20;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = ExperimentConfig::desk();
        c.ablation.variants.push(c.ablation.variants[0].clone());
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = ExperimentConfig::desk();
        c.weights.sigma_code = 0.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = ExperimentConfig::desk().noiseless();
        c.validate().unwrap();
    }

    #[test]
    fn errors_carry_their_stage() {
        let mut c = ExperimentConfig::desk();
        c.mask_deg = 89.0;
        let err = build_scenario(&c).unwrap_err();
        match err {
            Error::Stage { stage, .. } => assert!(stage == "estimability" || stage == "constellation"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
