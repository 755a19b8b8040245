//! Ground truth sampling and synthesis of the linearized phase, code and
//! Doppler observables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::EpochGeometry;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const GPS_L1_HZ: f64 = 1_575.42e6;
pub const GPS_L2_HZ: f64 = 1_227.60e6;

/// Carrier wavelengths and the ionospheric scale factors `mu_f = (lambda_f / lambda_1)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPlan {
    wavelengths: Vec<f64>,
    mu: Vec<f64>,
}

impl FrequencyPlan {
    /// Frequencies must be strictly decreasing so that `mu` strictly increases.
    pub fn from_frequencies(frequencies_hz: &[f64]) -> Result<Self> {
        if frequencies_hz.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least two frequencies required, got {}",
                frequencies_hz.len()
            )));
        }
        if frequencies_hz.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidConfig("frequencies must be positive".into()));
        }
        if frequencies_hz.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("frequencies must be strictly decreasing".into()));
        }
        let wavelengths: Vec<f64> = frequencies_hz.iter().map(|f| SPEED_OF_LIGHT / f).collect();
        let l1 = wavelengths[0];
        let mut mu: Vec<f64> = wavelengths.iter().map(|l| (l / l1) * (l / l1)).collect();
        mu[0] = 1.0;
        Ok(Self { wavelengths, mu })
    }

    pub fn gps_l1_l2() -> Self {
        Self::from_frequencies(&[GPS_L1_HZ, GPS_L2_HZ]).expect("static plan")
    }

    pub fn frequencies(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn lambda(&self, f: usize) -> f64 {
        self.wavelengths[f]
    }

    pub fn mu(&self, f: usize) -> f64 {
        self.mu[f]
    }

    /// Ionosphere-free code-bias weights on the first two frequencies.
    pub fn mu_if(&self) -> [f64; 2] {
        let d = self.mu[1] - self.mu[0];
        [self.mu[1] / d, -self.mu[0] / d]
    }

    /// Geometry-free code-bias weights on the first two frequencies.
    pub fn mu_gf(&self) -> [f64; 2] {
        let d = self.mu[1] - self.mu[0];
        [-1.0 / d, 1.0 / d]
    }
}

/// Measurement and clock sigmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_phase: f64,
    pub sigma_code: f64,
    /// Hz, applied directly to the cycle-rate Doppler observable.
    pub sigma_doppler: f64,
    /// Seconds.
    pub sigma_clock_rx: f64,
    /// Seconds.
    pub sigma_clock_gnss: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    /// 1 mm phase, 10 cm code, 0.5 Hz Doppler, 100 ns receiver and 10 ns GNSS clocks.
    pub fn nominal() -> Self {
        Self {
            sigma_phase: 1e-3,
            sigma_code: 0.1,
            sigma_doppler: 0.5,
            sigma_clock_rx: 100e-9,
            sigma_clock_gnss: 10e-9,
            rng_seed: 42,
        }
    }

    pub fn noiseless(rng_seed: u64) -> Self {
        Self {
            sigma_phase: 0.0,
            sigma_code: 0.0,
            sigma_doppler: 0.0,
            sigma_clock_rx: 0.0,
            sigma_clock_gnss: 0.0,
            rng_seed,
        }
    }

    fn sigmas(&self) -> [(&'static str, f64); 5] {
        [
            ("sigma_phase", self.sigma_phase),
            ("sigma_code", self.sigma_code),
            ("sigma_doppler", self.sigma_doppler),
            ("sigma_clock_rx", self.sigma_clock_rx),
            ("sigma_clock_gnss", self.sigma_clock_gnss),
        ]
    }

    /// Sigmas must be finite and nonnegative. Zero turns a noise source off.
    pub fn validate(&self) -> Result<()> {
        for (name, s) in self.sigmas() {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} = {s} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Measurement sigmas usable as weights: strictly positive.
    pub fn validate_weights(&self) -> Result<()> {
        for (name, s) in &self.sigmas()[..3] {
            if !(*s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!("weight {name} = {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Spreads of the truth quantities that the noise model does not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    /// m/s.
    pub sigma_drift: f64,
    /// Cycles.
    pub sigma_phase_bias: f64,
    /// m.
    pub sigma_code_bias: f64,
    /// Ionospheric delays are `|N(0, sigma_iono)|`, m.
    pub sigma_iono: f64,
    /// Ambiguities are uniform integers in `[-span, span]`.
    pub ambiguity_span: i64,
    /// Orbit position perturbation, m.
    pub sigma_position: f64,
    /// Orbit velocity perturbation, m/s.
    pub sigma_velocity: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            sigma_drift: 0.1,
            sigma_phase_bias: 0.5,
            sigma_code_bias: 1.0,
            sigma_iono: 2.0,
            ambiguity_span: 100,
            sigma_position: 10.0,
            sigma_velocity: 0.1,
        }
    }
}

impl TruthSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_drift", self.sigma_drift),
            ("sigma_phase_bias", self.sigma_phase_bias),
            ("sigma_code_bias", self.sigma_code_bias),
            ("sigma_iono", self.sigma_iono),
            ("sigma_position", self.sigma_position),
            ("sigma_velocity", self.sigma_velocity),
        ];
        for (name, s) in fields {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} = {s} must be finite and >= 0")));
            }
        }
        if self.ambiguity_span < 0 {
            return Err(Error::InvalidConfig("ambiguity_span must be >= 0".into()));
        }
        Ok(())
    }
}

/// Clock-like parameters of one receiver or satellite. Clocks in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockTruth {
    pub clock: f64,
    /// m/s.
    pub drift: f64,
    /// Cycles, per frequency.
    pub phase_bias: Vec<f64>,
    /// Meters, per frequency.
    pub code_bias: Vec<f64>,
}

impl ClockTruth {
    fn zero(frequencies: usize) -> Self {
        Self {
            clock: 0.0,
            drift: 0.0,
            phase_bias: vec![0.0; frequencies],
            code_bias: vec![0.0; frequencies],
        }
    }
}

/// Link-indexed vectors follow the node's visibility list.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthState {
    pub receivers: Vec<ClockTruth>,
    pub satellites: Vec<ClockTruth>,
    /// `iono[l][slot]`, meters on the first frequency.
    pub iono: Vec<Vec<f64>>,
    /// `ambiguity[l][f][slot]`, cycles.
    pub ambiguity: Vec<Vec<Vec<i64>>>,
    pub position: Vec<Vector3<f64>>,
    pub velocity: Vec<Vector3<f64>>,
}

impl TruthState {
    /// All-zero truth shaped for `geometry`.
    pub fn zeros(geometry: &EpochGeometry, frequencies: usize) -> Self {
        Self {
            receivers: vec![ClockTruth::zero(frequencies); geometry.nodes()],
            satellites: vec![ClockTruth::zero(frequencies); geometry.satellites()],
            iono: geometry.visible.iter().map(|v| vec![0.0; v.len()]).collect(),
            ambiguity: geometry
                .visible
                .iter()
                .map(|v| vec![vec![0; v.len()]; frequencies])
                .collect(),
            position: vec![Vector3::zeros(); geometry.nodes()],
            velocity: vec![Vector3::zeros(); geometry.nodes()],
        }
    }
}

/// Independent deterministic stream for one purpose.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub(crate) const STREAM_TRUTH: u64 = 1;
pub(crate) const STREAM_PRIOR: u64 = 2;
const STREAM_NODE_NOISE: u64 = 1 << 32;

pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = StandardNormal.sample(rng);
    v
}

fn uniform_int(rng: &mut ChaCha8Rng, span: i64) -> i64 {
    let width = (2 * span + 1) as u64;
    // rejection sampling keeps the draw unbiased
    let zone = u64::MAX - u64::MAX % width;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % width) as i64 - span;
        }
    }
}

pub fn sample_truth(
    geometry: &EpochGeometry,
    plan: &FrequencyPlan,
    noise: &NoiseSpec,
    spec: &TruthSpec,
) -> TruthState {
    let nf = plan.frequencies();
    let mut rng = stream(noise.rng_seed, STREAM_TRUTH);
    let clock = |rng: &mut ChaCha8Rng, sigma_s: f64| ClockTruth {
        clock: normal(rng) * sigma_s * SPEED_OF_LIGHT,
        drift: normal(rng) * spec.sigma_drift,
        phase_bias: (0..nf).map(|_| normal(rng) * spec.sigma_phase_bias).collect(),
        code_bias: (0..nf).map(|_| normal(rng) * spec.sigma_code_bias).collect(),
    };
    let receivers = (0..geometry.nodes())
        .map(|_| clock(&mut rng, noise.sigma_clock_rx))
        .collect();
    let satellites = (0..geometry.satellites())
        .map(|_| clock(&mut rng, noise.sigma_clock_gnss))
        .collect();
    let iono = geometry
        .visible
        .iter()
        .map(|v| v.iter().map(|_| (normal(&mut rng) * spec.sigma_iono).abs()).collect())
        .collect();
    let ambiguity = geometry
        .visible
        .iter()
        .map(|v| {
            (0..nf)
                .map(|_| v.iter().map(|_| uniform_int(&mut rng, spec.ambiguity_span)).collect())
                .collect()
        })
        .collect();
    let mut vec3 = |s: f64| Vector3::new(normal(&mut rng) * s, normal(&mut rng) * s, normal(&mut rng) * s);
    let position = (0..geometry.nodes()).map(|_| vec3(spec.sigma_position)).collect();
    let velocity = (0..geometry.nodes()).map(|_| vec3(spec.sigma_velocity)).collect();
    TruthState {
        receivers,
        satellites,
        iono,
        ambiguity,
        position,
        velocity,
    }
}

/// Observable type within a frequency block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsKind {
    Phase,
    Code,
    Doppler,
}

impl ObsKind {
    pub const ALL: [ObsKind; 3] = [ObsKind::Phase, ObsKind::Code, ObsKind::Doppler];

    pub fn name(self) -> &'static str {
        match self {
            ObsKind::Phase => "phase",
            ObsKind::Code => "code",
            ObsKind::Doppler => "doppler",
        }
    }
}

/// Per-node observation vectors. Within a node: frequency-major, then
/// phase, code, Doppler blocks, then satellites in visibility order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub frequencies: usize,
    pub visible: Vec<Vec<usize>>,
    pub y: Vec<Vector>,
}

impl ObservationSet {
    pub fn nodes(&self) -> usize {
        self.y.len()
    }

    /// Row index of one observation inside `y[l]`.
    pub fn index(&self, l: usize, f: usize, kind: ObsKind, slot: usize) -> usize {
        let gl = self.visible[l].len();
        (f * 3 + kind as usize) * gl + slot
    }

    /// Network vector, node blocks concatenated.
    pub fn stacked(&self) -> Vector {
        let total = self.y.iter().map(|v| v.len()).sum();
        Vector::from_iterator(total, self.y.iter().flat_map(|v| v.iter().copied()))
    }

    /// `(node, satellite, frequency, kind, value)` for every observation.
    pub fn records(&self) -> Vec<(usize, usize, usize, ObsKind, f64)> {
        let mut out = Vec::new();
        for (l, vis) in self.visible.iter().enumerate() {
            for f in 0..self.frequencies {
                for kind in ObsKind::ALL {
                    for (slot, &g) in vis.iter().enumerate() {
                        out.push((l, g, f, kind, self.y[l][self.index(l, f, kind, slot)]));
                    }
                }
            }
        }
        out
    }
}

/// Noise-free value of one observable.
pub fn model_value(
    truth: &TruthState,
    geometry: &EpochGeometry,
    plan: &FrequencyPlan,
    l: usize,
    slot: usize,
    f: usize,
    kind: ObsKind,
) -> f64 {
    let g = geometry.visible[l][slot];
    let u = &geometry.los[l][slot];
    let rx = &truth.receivers[l];
    let tx = &truth.satellites[g];
    let lam = plan.lambda(f);
    let mu = plan.mu(f);
    let iono = truth.iono[l][slot];
    let range = u.dot(&truth.position[l]);
    match kind {
        ObsKind::Phase => {
            range + rx.clock + lam * rx.phase_bias[f] - tx.clock - lam * tx.phase_bias[f] - mu * iono
                + lam * truth.ambiguity[l][f][slot] as f64
        }
        ObsKind::Code => range + rx.clock + rx.code_bias[f] - tx.clock - tx.code_bias[f] + mu * iono,
        ObsKind::Doppler => -(u.dot(&truth.velocity[l]) + rx.drift - tx.drift) / lam,
    }
}

fn check_truth(truth: &TruthState, geometry: &EpochGeometry, nf: usize) -> Result<()> {
    if truth.receivers.len() != geometry.nodes() || truth.satellites.len() != geometry.satellites() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} receivers / {} satellites, geometry {} / {}",
            truth.receivers.len(),
            truth.satellites.len(),
            geometry.nodes(),
            geometry.satellites()
        )));
    }
    for (l, vis) in geometry.visible.iter().enumerate() {
        let iono = truth.iono.get(l).map_or(0, |v| v.len());
        let amb_ok = truth
            .ambiguity
            .get(l)
            .is_some_and(|a| a.len() == nf && a.iter().all(|v| v.len() == vis.len()));
        if iono != vis.len() || !amb_ok {
            let slot = iono.min(vis.len().saturating_sub(1));
            return Err(Error::MissingTruth {
                node: l,
                satellite: vis.get(slot).copied().unwrap_or(0),
            });
        }
    }
    Ok(())
}

pub fn synthesize_epoch(
    truth: &TruthState,
    geometry: &EpochGeometry,
    plan: &FrequencyPlan,
    noise: &NoiseSpec,
) -> Result<ObservationSet> {
    let nf = plan.frequencies();
    check_truth(truth, geometry, nf)?;
    noise.validate()?;
    let mut y = Vec::with_capacity(geometry.nodes());
    for (l, vis) in geometry.visible.iter().enumerate() {
        let mut rng = stream(noise.rng_seed, STREAM_NODE_NOISE + l as u64);
        let mut v = Vec::with_capacity(3 * nf * vis.len());
        for f in 0..nf {
            for kind in ObsKind::ALL {
                let sigma = match kind {
                    ObsKind::Phase => noise.sigma_phase,
                    ObsKind::Code => noise.sigma_code,
                    ObsKind::Doppler => noise.sigma_doppler,
                };
                for slot in 0..vis.len() {
                    let e = normal(&mut rng) * sigma;
                    v.push(model_value(truth, geometry, plan, l, slot, f, kind) + e);
                }
            }
        }
        y.push(Vector::from_vec(v));
    }
    Ok(ObservationSet {
        frequencies: nf,
        visible: geometry.visible.clone(),
        y,
    })
}

/// Diagonal of the node covariance in observation order.
pub fn variances(plan: &FrequencyPlan, noise: &NoiseSpec, g_l: usize) -> Vector {
    let mut v = Vec::with_capacity(3 * plan.frequencies() * g_l);
    for _ in 0..plan.frequencies() {
        for s in [noise.sigma_phase, noise.sigma_code, noise.sigma_doppler] {
            v.extend(core::iter::repeat_n(s * s, g_l));
        }
    }
    Vector::from_vec(v)
}

pub fn covariance(plan: &FrequencyPlan, noise: &NoiseSpec, g_l: usize) -> Matrix {
    Matrix::from_diagonal(&variances(plan, noise, g_l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{visibility, SatelliteState};

    fn one_link() -> EpochGeometry {
        let s = |p: Vector3<f64>| SatelliteState { id: 0, position: p, velocity: Vector3::zeros() };
        visibility(
            0.0,
            vec![s(Vector3::new(6.921e6, 0.0, 0.0))],
            vec![s(Vector3::new(2.6571e7, 1e6, 0.0))],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn plan_constants() {
        let p = FrequencyPlan::gps_l1_l2();
        assert_eq!(p.mu(0), 1.0);
        assert!((p.mu(1) - 1.646944).abs() < 1e-6);
        let [a, b] = p.mu_if();
        assert!((a - 2.5457).abs() < 1e-4 && (b + 1.5457).abs() < 1e-4);
        assert!(FrequencyPlan::from_frequencies(&[1.0e9, 1.2e9]).is_err());
    }

    #[test]
    fn clock_only_link() {
        let geo = one_link();
        let plan = FrequencyPlan::gps_l1_l2();
        let mut truth = TruthState::zeros(&geo, 2);
        let obs = synthesize_epoch(&truth, &geo, &plan, &NoiseSpec::noiseless(1)).unwrap();
        assert!(obs.y[0].iter().all(|&v| v == 0.0));

        truth.receivers[0].clock = 10.0;
        let obs = synthesize_epoch(&truth, &geo, &plan, &NoiseSpec::noiseless(1)).unwrap();
        for f in 0..2 {
            assert_eq!(obs.y[0][obs.index(0, f, ObsKind::Phase, 0)], 10.0);
            assert_eq!(obs.y[0][obs.index(0, f, ObsKind::Code, 0)], 10.0);
            assert_eq!(obs.y[0][obs.index(0, f, ObsKind::Doppler, 0)], 0.0);
        }
    }

    #[test]
    fn iono_only_link() {
        let geo = one_link();
        let plan = FrequencyPlan::gps_l1_l2();
        let mut truth = TruthState::zeros(&geo, 2);
        truth.iono[0][0] = 5.0;
        let obs = synthesize_epoch(&truth, &geo, &plan, &NoiseSpec::noiseless(1)).unwrap();
        assert!((obs.y[0][obs.index(0, 1, ObsKind::Phase, 0)] + 8.2347).abs() < 1e-4);
        assert!((obs.y[0][obs.index(0, 1, ObsKind::Code, 0)] - 8.2347).abs() < 1e-4);
    }

    #[test]
    fn missing_truth_rejected() {
        let geo = one_link();
        let mut truth = TruthState::zeros(&geo, 2);
        truth.iono[0].clear();
        let r = synthesize_epoch(&truth, &geo, &FrequencyPlan::gps_l1_l2(), &NoiseSpec::nominal());
        assert!(matches!(r, Err(Error::MissingTruth { node: 0, .. })));
    }

    #[test]
    fn covariance_layout() {
        let plan1 = FrequencyPlan::gps_l1_l2();
        let n = NoiseSpec::nominal();
        let q = variances(&plan1, &n, 3);
        assert_eq!(q.len(), 18);
        for f in 0..2 {
            for s in 0..3 {
                let base = f * 9;
                assert_eq!(q[base + s], 1e-6);
                assert!((q[base + 3 + s] - 1e-2).abs() < 1e-15);
                assert_eq!(q[base + 6 + s], 0.25);
            }
        }
        let mut n2 = n.clone();
        n2.sigma_phase *= 2.0;
        n2.sigma_code *= 2.0;
        n2.sigma_doppler *= 2.0;
        assert!((variances(&plan1, &n2, 3) - q * 4.0).norm() < 1e-15);
    }

    #[test]
    fn clock_sampler_scale() {
        let s = |id| SatelliteState { id, position: Vector3::new(7e6, 0.0, 0.0), velocity: Vector3::zeros() };
        let geo = visibility(0.0, (0..10_000).map(s).collect(), Vec::new(), 0.0).unwrap();
        let truth = sample_truth(&geo, &FrequencyPlan::gps_l1_l2(), &NoiseSpec::nominal(), &TruthSpec::default());
        let draws: Vec<f64> = truth.receivers.iter().map(|r| r.clock).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((libm::sqrt(var) / 29.979_245_8 - 1.0).abs() < 0.03);
    }

    #[test]
    fn truth_is_deterministic() {
        let geo = one_link();
        let plan = FrequencyPlan::gps_l1_l2();
        let a = sample_truth(&geo, &plan, &NoiseSpec::nominal(), &TruthSpec::default());
        let b = sample_truth(&geo, &plan, &NoiseSpec::nominal(), &TruthSpec::default());
        assert_eq!(a, b);
        assert!(a.iono[0][0] >= 0.0);
        assert!(a.ambiguity[0].iter().flatten().all(|z| z.abs() <= 100));
    }
}
