use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Domain, ThermalState, TracePoint};

/// Trace rows as CSV with columns `t,x_beam,W,D,RHF,eta,r_b,d`.
pub fn trace_to_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("t,x_beam,W,D,RHF,eta,r_b,d\n");
    for p in trace {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            p.t, p.x_beam, p.width, p.depth, p.rhf, p.absorptivity, p.radius, p.source_depth
        );
    }
    out
}

/// Sidecar describing a binary field snapshot. The binary holds the listed
/// fields back to back, each `nx·ny·nz` little-endian `f64` values in
/// x-fastest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dims: [usize; 3],
    pub dx: f64,
    pub origin: [f64; 3],
    pub time: f64,
    pub step: u64,
    pub fields: Vec<String>,
    pub byte_order: String,
}

const FIELDS: [&str; 4] = ["temperature", "peak_temperature", "consolidation", "liquid_fraction"];

/// Write `<stem>.bin` and `<stem>.json`.
pub fn write_snapshot(dir: &Path, stem: &str, state: &ThermalState, domain: &Domain) -> Result<()> {
    let mut bytes = Vec::with_capacity(FIELDS.len() * domain.len() * 8);
    for field in [&state.temperature, &state.peak_temperature, &state.consolidation, &state.liquid_fraction] {
        for v in field.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let meta = SnapshotMeta {
        dims: [domain.nx, domain.ny, domain.nz],
        dx: domain.dx,
        origin: domain.origin,
        time: state.time,
        step: state.step,
        fields: FIELDS.iter().map(|s| s.to_string()).collect(),
        byte_order: "little-endian".into(),
    };
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Read a snapshot back as `(meta, fields)`.
pub fn read_snapshot(dir: &Path, stem: &str) -> Result<(SnapshotMeta, Vec<Vec<f64>>)> {
    let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    let n = meta.dims.iter().product::<usize>();
    if bytes.len() != n * 8 * meta.fields.len() {
        return Err(Error::InvalidInput(format!("snapshot {stem} has {} bytes, expected {}", bytes.len(), n * 8 * meta.fields.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let fields = values.chunks(n).map(|c| c.to_vec()).collect();
    Ok((meta, fields))
}
