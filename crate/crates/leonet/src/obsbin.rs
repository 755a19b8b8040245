//! Compact little-endian container for an [`ObservationSet`]:
//!
//! ```text
//! "LNOB" | version u16 | frequencies u32 | nodes u32
//! per node: count u32 | count x satellite u32 | 3 * frequencies * count x value f64
//! ```

use std::path::Path;

use leonet_core::linalg::Vector;
use leonet_core::observation::ObservationSet;

use crate::error::{Error, Result};
use crate::fsio;

const MAGIC: &[u8; 4] = b"LNOB";
const VERSION: u16 = 1;

pub fn encode(obs: &ObservationSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(obs.frequencies as u32).to_le_bytes());
    out.extend_from_slice(&(obs.nodes() as u32).to_le_bytes());
    for (vis, y) in obs.visible.iter().zip(&obs.y) {
        out.extend_from_slice(&(vis.len() as u32).to_le_bytes());
        for &g in vis {
            out.extend_from_slice(&(g as u32).to_le_bytes());
        }
        for v in y.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| format!("truncated at byte {}", self.at))?;
        self.at = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ObservationSet, String> {
    let mut c = Cursor { bytes, at: 0 };
    if &c.take::<4>()? != MAGIC {
        return Err("not an observation file".into());
    }
    let version = u16::from_le_bytes(c.take()?);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let frequencies = c.u32()?;
    let nodes = c.u32()?;
    let mut visible = Vec::with_capacity(nodes.min(1 << 16));
    let mut y = Vec::with_capacity(nodes.min(1 << 16));
    for _ in 0..nodes {
        let count = c.u32()?;
        let vis = (0..count).map(|_| c.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
        if vis.windows(2).any(|w| w[0] >= w[1]) {
            return Err("satellite ids must ascend within a node".into());
        }
        let rows = 3 * frequencies * count;
        let vals = (0..rows)
            .map(|_| c.take().map(f64::from_le_bytes))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        visible.push(vis);
        y.push(Vector::from_vec(vals));
    }
    if c.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.at));
    }
    Ok(ObservationSet { frequencies, visible, y })
}

pub fn write_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    fsio::write_bytes(path, &encode(obs))
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    decode(&fsio::read_bytes(path)?).map_err(|message| Error::Format {
        path: path.into(),
        message,
    })
}
