//! Binary trajectory files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   7 bytes  "KSTRAJ1"
//! version u32
//! n       u64      particles per record
//! records u64      record count the writer intended
//! dt      f64
//! cfg_len u64      length of the embedded SimConfig JSON
//! cfg     bytes    SimConfig as JSON
//! body    records * n * 2 f64  positions, x then y per particle
//! ```
//!
//! A file truncated mid-record is still a valid checkpoint: every complete
//! record before the cut is readable, and record `k` is the state at step
//! `k * record_stride`, so a run can resume from the last full record.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

use super::{ParticleState, SimConfig, Trajectory};

pub const TRAJ_MAGIC: &[u8; 7] = b"KSTRAJ1";
const TRAJ_VERSION: u32 = 1;

/// Contents of a trajectory file. `declared_records` is the writer's header
/// value; `states.len()` may be smaller for a truncated checkpoint.
#[derive(Clone, Debug)]
pub struct TrajectoryFile {
    pub config: SimConfig,
    pub states: Vec<ParticleState>,
    pub declared_records: u64,
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_states(&traj.config, &traj.states, path)
}

pub fn write_states(config: &SimConfig, states: &[ParticleState], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let cfg_json = serde_json::to_vec(config).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(TRAJ_MAGIC)?;
    w.write_all(&TRAJ_VERSION.to_le_bytes())?;
    w.write_all(&(config.n_particles as u64).to_le_bytes())?;
    w.write_all(&(states.len() as u64).to_le_bytes())?;
    w.write_all(&config.dt.to_le_bytes())?;
    w.write_all(&(cfg_json.len() as u64).to_le_bytes())?;
    w.write_all(&cfg_json)?;
    for st in states {
        for p in &st.positions {
            w.write_all(&p.x.to_le_bytes())?;
            w.write_all(&p.y.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Strict read: the body must contain exactly the declared record count.
pub fn read_trajectory(path: &Path) -> Result<TrajectoryFile> {
    let file = read_trajectory_partial(path)?;
    if file.states.len() as u64 != file.declared_records {
        return Err(Error::Format(format!(
            "{}: header declares {} records, found {}",
            path.display(),
            file.declared_records,
            file.states.len()
        )));
    }
    Ok(file)
}

/// Checkpoint read: returns every complete record present, ignoring a
/// truncated tail.
pub fn read_trajectory_partial(path: &Path) -> Result<TrajectoryFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != TRAJ_MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != TRAJ_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let n = read_u64(&mut r)? as usize;
    let declared_records = read_u64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let cfg_len = read_u64(&mut r)? as usize;
    let mut cfg_buf = vec![0u8; cfg_len];
    r.read_exact(&mut cfg_buf)?;
    let config: SimConfig =
        serde_json::from_slice(&cfg_buf).map_err(|e| Error::Format(e.to_string()))?;
    if config.n_particles != n {
        return Err(Error::Format(format!(
            "{}: header n = {n} disagrees with embedded config n = {}",
            path.display(),
            config.n_particles
        )));
    }
    if config.dt != dt {
        return Err(Error::Format(format!(
            "{}: header dt = {dt} disagrees with embedded config dt = {}",
            path.display(),
            config.dt
        )));
    }

    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let record_bytes = n * 2 * 8;
    let available = (body.len() / record_bytes) as u64;
    let count = available.min(declared_records);
    let mut states = Vec::with_capacity(count as usize);
    for k in 0..count {
        let base = k as usize * record_bytes;
        let mut positions = Vec::with_capacity(n);
        for i in 0..n {
            let off = base + i * 16;
            let x = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
            let y = f64::from_le_bytes(body[off + 8..off + 16].try_into().unwrap());
            positions.push(Vec2::new(x, y));
        }
        states.push(ParticleState {
            positions,
            time: (k * config.record_stride as u64) as f64 * dt,
        });
    }
    Ok(TrajectoryFile {
        config,
        states,
        declared_records,
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
