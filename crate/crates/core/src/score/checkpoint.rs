//! TSCM v1 model checkpoint.
//!
//! Layout: 8-byte magic `TSCM0001`, u32 LE descriptor length + UTF-8
//! architecture descriptor, u32 LE level count + f64 LE schedule values,
//! u32 LE parameter count + f32 LE parameters in flat layer order
//! (convnet: w1, b1, level_scale, w2, b2, w3, b3; linear: gains, biases).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{ReconError, Result};

use super::net::ScoreNet;
use super::{ScoreModel, ScoreVariant, SigmaSchedule};

pub const MAGIC: &[u8; 8] = b"TSCM0001";

pub fn save_model(path: impl AsRef<Path>, model: &ScoreModel) -> Result<()> {
    let net = match &model.variant {
        ScoreVariant::Learned(net) => net,
        _ => return Err(ReconError::config("only learned models are checkpointed")),
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let desc = net.descriptor();
    w.write_all(&(desc.len() as u32).to_le_bytes())?;
    w.write_all(desc.as_bytes())?;
    let levels = model.schedule.levels();
    w.write_all(&(levels.len() as u32).to_le_bytes())?;
    for &s in levels {
        w.write_all(&s.to_le_bytes())?;
    }
    let params = net.params_flat();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for &p in &params {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ScoreModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ReconError::format("not a TSCM v1 checkpoint (bad magic)"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let desc_len = u32::from_le_bytes(u32buf) as usize;
    let mut desc = vec![0u8; desc_len];
    r.read_exact(&mut desc)?;
    let desc = String::from_utf8(desc).map_err(|_| ReconError::format("descriptor not UTF-8"))?;
    r.read_exact(&mut u32buf)?;
    let n_levels = u32::from_le_bytes(u32buf) as usize;
    let mut levels = Vec::with_capacity(n_levels);
    let mut f64buf = [0u8; 8];
    for _ in 0..n_levels {
        r.read_exact(&mut f64buf)?;
        levels.push(f64::from_le_bytes(f64buf));
    }
    let schedule = SigmaSchedule::from_levels(levels)?;
    r.read_exact(&mut u32buf)?;
    let n_params = u32::from_le_bytes(u32buf) as usize;
    let mut net = ScoreNet::from_descriptor(&desc, n_levels)?;
    if net.num_params() != n_params {
        return Err(ReconError::format(format!(
            "checkpoint has {} parameters but '{}' with {} levels needs {}",
            n_params,
            desc,
            n_levels,
            net.num_params()
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        r.read_exact(&mut u32buf)?;
        params.push(f32::from_le_bytes(u32buf) as f64);
    }
    net.set_params_flat(&params);
    ScoreModel::learned(net, schedule)
}
