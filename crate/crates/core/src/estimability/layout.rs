use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::constellation::EpochGeometry;
use crate::observation::{ObsKind, TruthState};
use crate::linalg::Vector;

/// One of the `2 + 2F` clock-like parameters of a receiver or satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClockParam {
    Clock,
    Drift,
    PhaseBias(usize),
    CodeBias(usize),
}

impl ClockParam {
    pub fn offset(self, frequencies: usize) -> usize {
        match self {
            ClockParam::Clock => 0,
            ClockParam::Drift => 1,
            ClockParam::PhaseBias(f) => 2 + f,
            ClockParam::CodeBias(f) => 2 + frequencies + f,
        }
    }

    pub fn from_offset(offset: usize, frequencies: usize) -> Self {
        match offset {
            0 => ClockParam::Clock,
            1 => ClockParam::Drift,
            o if o < 2 + frequencies => ClockParam::PhaseBias(o - 2),
            o => ClockParam::CodeBias(o - 2 - frequencies),
        }
    }

    pub fn all(frequencies: usize) -> impl Iterator<Item = ClockParam> {
        (0..2 + 2 * frequencies).map(move |o| ClockParam::from_offset(o, frequencies))
    }
}

/// A raw (undifferenced) network parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    Position { node: usize, axis: usize },
    Velocity { node: usize, axis: usize },
    Receiver { node: usize, param: ClockParam },
    Satellite { sat: usize, param: ClockParam },
    Iono { node: usize, sat: usize },
    Ambiguity { node: usize, freq: usize, sat: usize },
}

impl Param {
    /// Owning node, `None` for satellite parameters.
    pub fn node(&self) -> Option<usize> {
        match *self {
            Param::Position { node, .. }
            | Param::Velocity { node, .. }
            | Param::Receiver { node, .. }
            | Param::Iono { node, .. }
            | Param::Ambiguity { node, .. } => Some(node),
            Param::Satellite { .. } => None,
        }
    }
}

/// Rows of the table of estimable network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableRow {
    ReceiverPosition,
    ReceiverVelocity,
    ReceiverClock,
    ReceiverClockDrift,
    ReceiverPhaseBias,
    ReceiverCodeBias,
    SatelliteClock,
    SatelliteClockDrift,
    SatellitePhaseBias,
    SatelliteCodeBias,
    Ionosphere,
    Ambiguity,
}

impl TableRow {
    /// 1-based row id.
    pub fn id(self) -> usize {
        self as usize + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            TableRow::ReceiverPosition => "receiver position",
            TableRow::ReceiverVelocity => "receiver velocity",
            TableRow::ReceiverClock => "receiver clock",
            TableRow::ReceiverClockDrift => "receiver clock drift",
            TableRow::ReceiverPhaseBias => "receiver phase bias",
            TableRow::ReceiverCodeBias => "receiver code bias",
            TableRow::SatelliteClock => "satellite clock",
            TableRow::SatelliteClockDrift => "satellite clock drift",
            TableRow::SatellitePhaseBias => "satellite phase bias",
            TableRow::SatelliteCodeBias => "satellite code bias",
            TableRow::Ionosphere => "ionospheric delay",
            TableRow::Ambiguity => "carrier-phase ambiguity",
        }
    }
}

/// Label of one estimable parameter: the retained raw parameter it is
/// anchored on and the table row it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimableLabel {
    pub param: Param,
    pub row: TableRow,
}

impl EstimableLabel {
    pub fn from_param(param: Param) -> Self {
        let row = match param {
            Param::Position { .. } => TableRow::ReceiverPosition,
            Param::Velocity { .. } => TableRow::ReceiverVelocity,
            Param::Receiver { param, .. } => match param {
                ClockParam::Clock => TableRow::ReceiverClock,
                ClockParam::Drift => TableRow::ReceiverClockDrift,
                ClockParam::PhaseBias(_) => TableRow::ReceiverPhaseBias,
                ClockParam::CodeBias(_) => TableRow::ReceiverCodeBias,
            },
            Param::Satellite { param, .. } => match param {
                ClockParam::Clock => TableRow::SatelliteClock,
                ClockParam::Drift => TableRow::SatelliteClockDrift,
                ClockParam::PhaseBias(_) => TableRow::SatellitePhaseBias,
                ClockParam::CodeBias(_) => TableRow::SatelliteCodeBias,
            },
            Param::Iono { .. } => TableRow::Ionosphere,
            Param::Ambiguity { .. } => TableRow::Ambiguity,
        };
        Self { param, row }
    }

    /// `(node, sat, freq)` indices where applicable.
    pub fn indices(&self) -> (Option<usize>, Option<usize>, Option<usize>) {
        let freq_of = |p: ClockParam| match p {
            ClockParam::PhaseBias(f) | ClockParam::CodeBias(f) => Some(f),
            _ => None,
        };
        match self.param {
            Param::Position { node, .. } | Param::Velocity { node, .. } => (Some(node), None, None),
            Param::Receiver { node, param } => (Some(node), None, freq_of(param)),
            Param::Satellite { sat, param } => (None, Some(sat), freq_of(param)),
            Param::Iono { node, sat } => (Some(node), Some(sat), None),
            Param::Ambiguity { node, freq, sat } => (Some(node), Some(sat), Some(freq)),
        }
    }

    pub fn name(&self) -> String {
        const AXES: [&str; 3] = ["x", "y", "z"];
        let clock = |p: ClockParam| match p {
            ClockParam::Clock => String::from("dt"),
            ClockParam::Drift => String::from("dtdot"),
            ClockParam::PhaseBias(f) => format!("delta_f{}", f + 1),
            ClockParam::CodeBias(f) => format!("b_f{}", f + 1),
        };
        match self.param {
            Param::Position { node, axis } => format!("dp_{}[{node}]", AXES[axis]),
            Param::Velocity { node, axis } => format!("dv_{}[{node}]", AXES[axis]),
            Param::Receiver { node, param } => format!("rx_{}[{node}]", clock(param)),
            Param::Satellite { sat, param } => format!("sat_{}[{sat}]", clock(param)),
            Param::Iono { node, sat } => format!("iono[{node},{sat}]"),
            Param::Ambiguity { node, freq, sat } => format!("amb_f{}[{node},{sat}]", freq + 1),
        }
    }
}

/// Column and row indexing of the network model.
///
/// Columns: orbit (6 per node) | receiver clocks | satellite clocks |
/// ionosphere (one per link) | ambiguities (one per link and frequency).
/// Rows: node-major, then frequency, then phase/code/Doppler, then visible
/// satellites ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub nodes: usize,
    pub satellites: usize,
    pub frequencies: usize,
    pub visible: Vec<Vec<usize>>,
    link_offset: Vec<usize>,
    links: usize,
}

impl ParamLayout {
    pub fn new(satellites: usize, frequencies: usize, visible: Vec<Vec<usize>>) -> Self {
        let mut link_offset = Vec::with_capacity(visible.len());
        let mut links = 0;
        for v in &visible {
            link_offset.push(links);
            links += v.len();
        }
        Self {
            nodes: visible.len(),
            satellites,
            frequencies,
            visible,
            link_offset,
            links,
        }
    }

    pub fn from_geometry(geometry: &EpochGeometry, frequencies: usize) -> Self {
        Self::new(geometry.satellites(), frequencies, geometry.visible.clone())
    }

    pub fn clock_width(&self) -> usize {
        2 + 2 * self.frequencies
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn n(&self) -> usize {
        6 * self.nodes + (self.nodes + self.satellites) * self.clock_width() + (1 + self.frequencies) * self.links
    }

    pub fn m(&self) -> usize {
        3 * self.frequencies * self.links
    }

    pub fn slot(&self, l: usize, g: usize) -> Option<usize> {
        self.visible[l].binary_search(&g).ok()
    }

    pub fn orbit(&self, l: usize, k: usize) -> usize {
        6 * l + k
    }

    pub fn receiver(&self, l: usize, p: ClockParam) -> usize {
        6 * self.nodes + l * self.clock_width() + p.offset(self.frequencies)
    }

    pub fn satellite(&self, g: usize, p: ClockParam) -> usize {
        6 * self.nodes + (self.nodes + g) * self.clock_width() + p.offset(self.frequencies)
    }

    fn iono_base(&self) -> usize {
        6 * self.nodes + (self.nodes + self.satellites) * self.clock_width()
    }

    pub fn iono(&self, l: usize, slot: usize) -> usize {
        self.iono_base() + self.link_offset[l] + slot
    }

    pub fn ambiguity(&self, l: usize, f: usize, slot: usize) -> usize {
        self.iono_base() + self.links + self.frequencies * self.link_offset[l] + f * self.visible[l].len() + slot
    }

    pub fn index(&self, p: Param) -> usize {
        match p {
            Param::Position { node, axis } => self.orbit(node, axis),
            Param::Velocity { node, axis } => self.orbit(node, 3 + axis),
            Param::Receiver { node, param } => self.receiver(node, param),
            Param::Satellite { sat, param } => self.satellite(sat, param),
            Param::Iono { node, sat } => self.iono(node, self.slot(node, sat).expect("visible link")),
            Param::Ambiguity { node, freq, sat } => {
                self.ambiguity(node, freq, self.slot(node, sat).expect("visible link"))
            }
        }
    }

    fn node_of_link(&self, link: usize) -> (usize, usize) {
        // an empty node shares its offset with the next node, and the last
        // node at or below `link` is always the nonempty one
        let l = self.link_offset.partition_point(|&o| o <= link) - 1;
        (l, link - self.link_offset[l])
    }

    /// Inverse of [`ParamLayout::index`].
    pub fn param(&self, idx: usize) -> Param {
        let cw = self.clock_width();
        if idx < 6 * self.nodes {
            let (node, k) = (idx / 6, idx % 6);
            return if k < 3 {
                Param::Position { node, axis: k }
            } else {
                Param::Velocity { node, axis: k - 3 }
            };
        }
        let i = idx - 6 * self.nodes;
        if i < self.nodes * cw {
            return Param::Receiver {
                node: i / cw,
                param: ClockParam::from_offset(i % cw, self.frequencies),
            };
        }
        let i = i - self.nodes * cw;
        if i < self.satellites * cw {
            return Param::Satellite {
                sat: i / cw,
                param: ClockParam::from_offset(i % cw, self.frequencies),
            };
        }
        let i = i - self.satellites * cw;
        if i < self.links {
            let (node, slot) = self.node_of_link(i);
            return Param::Iono { node, sat: self.visible[node][slot] };
        }
        let i = i - self.links;
        let (node, _) = self.node_of_link(i / self.frequencies);
        let within = i - self.frequencies * self.link_offset[node];
        let gl = self.visible[node].len();
        Param::Ambiguity {
            node,
            freq: within / gl,
            sat: self.visible[node][within % gl],
        }
    }

    /// First row of node `l`.
    pub fn node_row_offset(&self, l: usize) -> usize {
        3 * self.frequencies * self.link_offset[l]
    }

    pub fn node_rows(&self, l: usize) -> core::ops::Range<usize> {
        let start = self.node_row_offset(l);
        start..start + 3 * self.frequencies * self.visible[l].len()
    }

    pub fn row(&self, l: usize, f: usize, kind: ObsKind, slot: usize) -> usize {
        self.node_row_offset(l) + (3 * f + kind as usize) * self.visible[l].len() + slot
    }

    /// Raw parameter vector of a truth state. Phase biases and ambiguities
    /// in cycles, everything else in meters (or m/s).
    pub fn raw_vector(&self, truth: &TruthState) -> Vector {
        let mut x = Vector::zeros(self.n());
        for l in 0..self.nodes {
            for k in 0..3 {
                x[self.orbit(l, k)] = truth.position[l][k];
                x[self.orbit(l, 3 + k)] = truth.velocity[l][k];
            }
        }
        let nf = self.frequencies;
        let mut clocks = |idx: &dyn Fn(ClockParam) -> usize, c: &crate::observation::ClockTruth| {
            x[idx(ClockParam::Clock)] = c.clock;
            x[idx(ClockParam::Drift)] = c.drift;
            for f in 0..nf {
                x[idx(ClockParam::PhaseBias(f))] = c.phase_bias[f];
                x[idx(ClockParam::CodeBias(f))] = c.code_bias[f];
            }
        };
        for (l, c) in truth.receivers.iter().enumerate() {
            clocks(&|p| self.receiver(l, p), c);
        }
        for (g, c) in truth.satellites.iter().enumerate() {
            clocks(&|p| self.satellite(g, p), c);
        }
        for l in 0..self.nodes {
            for slot in 0..self.visible[l].len() {
                x[self.iono(l, slot)] = truth.iono[l][slot];
                for f in 0..nf {
                    x[self.ambiguity(l, f, slot)] = truth.ambiguity[l][f][slot] as f64;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn index_roundtrip() {
        let lay = ParamLayout::new(4, 2, vec![vec![0, 2], vec![], vec![1, 2, 3]]);
        assert_eq!(lay.n(), 18 + 3 * 6 + 4 * 6 + 5 + 10);
        for i in 0..lay.n() {
            assert_eq!(lay.index(lay.param(i)), i, "column {i}");
        }
        assert_eq!(lay.m(), 30);
        assert_eq!(lay.node_rows(2), 12..30);
        assert_eq!(lay.row(2, 1, ObsKind::Code, 2), 12 + 4 * 3 + 2);
    }
}
