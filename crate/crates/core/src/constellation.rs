//! Walker-Delta constellations, two-body propagation and per-epoch
//! line-of-sight geometry.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{atan2, cos, sin, sqrt};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earth gravitational parameter, m^3/s^2.
pub const EARTH_MU: f64 = 398_600.441_8e9;
/// Spherical Earth radius used for blockage, m.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerConfig {
    pub total_satellites: usize,
    pub planes: usize,
    pub sats_per_plane: usize,
    /// Altitude above the spherical Earth, m.
    pub altitude: f64,
    /// Degrees.
    pub inclination: f64,
    /// Walker `F` parameter.
    pub phasing: usize,
    /// RAAN of the first plane, rad.
    pub raan0: f64,
    /// Element epoch, s.
    pub epoch0: f64,
}

impl WalkerConfig {
    fn walker(total: usize, planes: usize, altitude: f64, inclination: f64) -> Self {
        Self {
            total_satellites: total,
            planes,
            sats_per_plane: total / planes,
            altitude,
            inclination,
            phasing: 1,
            raan0: 0.0,
            epoch0: 0.0,
        }
    }

    /// 20 LEO nodes, 4 planes of 5, 550 km, 53 deg.
    pub fn leo_desk() -> Self {
        Self::walker(20, 4, 550e3, 53.0)
    }

    /// 500 LEO nodes, 20 planes of 25, 550 km, 53 deg.
    pub fn leo_paper() -> Self {
        Self::walker(500, 20, 550e3, 53.0)
    }

    /// GPS-like shell: 30 satellites, 6 planes, 20,200 km, 55 deg.
    pub fn gnss() -> Self {
        Self::walker(30, 6, 20_200e3, 55.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.planes == 0 || self.sats_per_plane == 0 {
            return Err(Error::InvalidConfig("walker planes and sats_per_plane must be positive".into()));
        }
        if !self.total_satellites.is_multiple_of(self.planes) {
            return Err(Error::InvalidConfig(format!(
                "total_satellites {} is not divisible by planes {}",
                self.total_satellites, self.planes
            )));
        }
        if self.total_satellites != self.planes * self.sats_per_plane {
            return Err(Error::InvalidConfig(format!(
                "total_satellites {} != planes {} x sats_per_plane {}",
                self.total_satellites, self.planes, self.sats_per_plane
            )));
        }
        if !(self.altitude > 0.0) || !self.altitude.is_finite() {
            return Err(Error::InvalidConfig(format!("altitude {} m must be positive", self.altitude)));
        }
        if !(0.0..=180.0).contains(&self.inclination) {
            return Err(Error::InvalidConfig(format!(
                "inclination {} deg outside [0, 180]",
                self.inclination
            )));
        }
        if !self.raan0.is_finite() || !self.epoch0.is_finite() {
            return Err(Error::InvalidConfig("raan0 and epoch0 must be finite".into()));
        }
        Ok(())
    }
}

/// Classical Keplerian elements. Angles in radians, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    /// Mean anomaly at `epoch0`.
    pub mean_anomaly: f64,
    pub epoch0: f64,
}

impl OrbitalElements {
    pub fn mean_motion(&self) -> f64 {
        sqrt(EARTH_MU / (self.semi_major_axis * self.semi_major_axis * self.semi_major_axis))
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub id: usize,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Element sets for every satellite, plane-major.
pub fn build_walker(config: &WalkerConfig) -> Result<Vec<OrbitalElements>> {
    config.validate()?;
    let a = EARTH_RADIUS + config.altitude;
    let inc = config.inclination.to_radians();
    let total = config.total_satellites as f64;
    let mut out = Vec::with_capacity(config.total_satellites);
    for p in 0..config.planes {
        let raan = config.raan0 + 2.0 * PI * p as f64 / config.planes as f64;
        let offset = config.phasing as f64 * 2.0 * PI * p as f64 / total;
        for s in 0..config.sats_per_plane {
            let anomaly = 2.0 * PI * s as f64 / config.sats_per_plane as f64 + offset;
            out.push(OrbitalElements {
                semi_major_axis: a,
                eccentricity: 0.0,
                inclination: inc,
                raan,
                arg_perigee: 0.0,
                mean_anomaly: anomaly,
                epoch0: config.epoch0,
            });
        }
    }
    Ok(out)
}

fn solve_kepler(mean: f64, e: f64) -> f64 {
    if e == 0.0 {
        return mean;
    }
    let mut ecc = if e < 0.8 { mean } else { PI };
    for _ in 0..50 {
        let f = ecc - e * sin(ecc) - mean;
        let step = f / (1.0 - e * cos(ecc));
        ecc -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    ecc
}

/// Two-body state at `epoch`.
pub fn propagate(elements: &OrbitalElements, id: usize, epoch: f64) -> SatelliteState {
    let a = elements.semi_major_axis;
    let e = elements.eccentricity;
    let n = elements.mean_motion();
    let mean = (elements.mean_anomaly + n * (epoch - elements.epoch0)) % (2.0 * PI);
    let ecc = solve_kepler(mean, e);
    let nu = 2.0 * atan2(sqrt(1.0 + e) * sin(ecc / 2.0), sqrt(1.0 - e) * cos(ecc / 2.0));
    let r = a * (1.0 - e * cos(ecc));
    let p = a * (1.0 - e * e);
    let h = sqrt(EARTH_MU * p);

    let u = elements.arg_perigee + nu;
    let (so, co) = (sin(elements.raan), cos(elements.raan));
    let (si, ci) = (sin(elements.inclination), cos(elements.inclination));
    // unit vectors of the orbital frame: radial direction at u = 0 and its
    // in-plane normal
    let px = Vector3::new(co, so, 0.0);
    let py = Vector3::new(-so * ci, co * ci, si);

    let (su, cu) = (sin(u), cos(u));
    let position = (px * cu + py * su) * r;
    let vr = EARTH_MU / h * e * sin(nu);
    let vt = h / r;
    let velocity = (px * cu + py * su) * vr + (px * -su + py * cu) * vt;
    SatelliteState { id, position, velocity }
}

pub fn propagate_all(elements: &[OrbitalElements], epoch: f64) -> Vec<SatelliteState> {
    elements.iter().enumerate().map(|(i, e)| propagate(e, i, epoch)).collect()
}

/// Visible GNSS satellites and LOS vectors for every LEO node at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochGeometry {
    pub epoch: f64,
    pub leo_states: Vec<SatelliteState>,
    pub gnss_states: Vec<SatelliteState>,
    /// Ascending GNSS indices seen by each node.
    pub visible: Vec<Vec<usize>>,
    /// `los[l][k]` is the unit vector from satellite `visible[l][k]` toward node `l`.
    pub los: Vec<Vec<Vector3<f64>>>,
}

impl EpochGeometry {
    pub fn nodes(&self) -> usize {
        self.leo_states.len()
    }

    pub fn satellites(&self) -> usize {
        self.gnss_states.len()
    }

    /// Slot of satellite `g` in node `l`'s visibility list.
    pub fn slot(&self, l: usize, g: usize) -> Option<usize> {
        self.visible[l].binary_search(&g).ok()
    }

    /// Fails if any node sees fewer than `required` satellites.
    pub fn check_min_visibility(&self, required: usize) -> Result<()> {
        for (node, vis) in self.visible.iter().enumerate() {
            if vis.is_empty() {
                return Err(Error::EmptyVisibility { node });
            }
            if vis.len() < required {
                return Err(Error::InsufficientVisibility {
                    node,
                    visible: vis.len(),
                    required,
                });
            }
        }
        Ok(())
    }

    /// Nodes observing satellite `g`, ascending.
    pub fn observers(&self, g: usize) -> Vec<usize> {
        (0..self.nodes()).filter(|&l| self.slot(l, g).is_some()).collect()
    }
}

/// True if the straight segment between `a` and `b` stays outside the Earth sphere.
pub fn line_of_sight(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    let d = b - a;
    let dd = d.dot(&d);
    let t = if dd > 0.0 { (-a.dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t).norm() >= EARTH_RADIUS
}

/// Elevation of `target` above the local horizontal plane at `observer`, rad.
pub fn elevation(observer: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let d = target - observer;
    let s = d.dot(observer) / (d.norm() * observer.norm());
    libm::asin(s.clamp(-1.0, 1.0))
}

pub fn visibility(
    epoch: f64,
    leo_states: Vec<SatelliteState>,
    gnss_states: Vec<SatelliteState>,
    mask_deg: f64,
) -> Result<EpochGeometry> {
    let mask = mask_deg.to_radians();
    let mut visible = Vec::with_capacity(leo_states.len());
    let mut los = Vec::with_capacity(leo_states.len());
    for (l, rx) in leo_states.iter().enumerate() {
        let mut vis = Vec::new();
        let mut dirs = Vec::new();
        for (g, tx) in gnss_states.iter().enumerate() {
            let d = rx.position - tx.position;
            let range = d.norm();
            if range == 0.0 {
                return Err(Error::ZeroRange { receiver: l, satellite: g });
            }
            if line_of_sight(&rx.position, &tx.position) && elevation(&rx.position, &tx.position) >= mask {
                vis.push(g);
                dirs.push(d / range);
            }
        }
        visible.push(vis);
        los.push(dirs);
    }
    Ok(EpochGeometry {
        epoch,
        leo_states,
        gnss_states,
        visible,
        los,
    })
}

/// Propagates both constellations to `epoch` and evaluates visibility.
pub fn epoch_geometry(
    leo: &[OrbitalElements],
    gnss: &[OrbitalElements],
    epoch: f64,
    mask_deg: f64,
) -> Result<EpochGeometry> {
    visibility(epoch, propagate_all(leo, epoch), propagate_all(gnss, epoch), mask_deg)
}
