//! Self-describing columnar binary format for posterior draws.
//!
//! Draws dominate disk traffic (one latent coordinate per subject per
//! iteration), so they are stored as raw little-endian doubles behind a
//! small header: magic, version, shape, coordinate names, transform tags,
//! then per-chain blocks (adaptation state, divergence flags, draw matrix).

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use augbin_core::models::Transform;
use augbin_core::sampler::{ChainDraws, PosteriorDraws};

use crate::errors::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"AGBNDRW1";
const VERSION: u16 = 1;

fn transform_tag(t: &Transform) -> (u8, f64) {
    match t {
        Transform::Identity => (0, 0.0),
        Transform::LowerBounded { floor } => (1, *floor),
        Transform::Tanh => (2, 0.0),
        Transform::Logit => (3, 0.0),
    }
}

fn tag_transform(tag: u8, param: f64, at: &str) -> CliResult<Transform> {
    Ok(match tag {
        0 => Transform::Identity,
        1 => Transform::LowerBounded { floor: param },
        2 => Transform::Tanh,
        3 => Transform::Logit,
        other => {
            return Err(CliError::malformed(format!(
                "{at}: unknown transform tag {other}"
            )))
        }
    })
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> CliResult<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let dim = draws.dim() as u32;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(draws.n_draws as u32).to_le_bytes())?;
    w.write_all(&(draws.n_chains() as u32).to_le_bytes())?;
    for name in &draws.names {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
    }
    for t in &draws.transforms {
        let (tag, param) = transform_tag(t);
        w.write_all(&[tag])?;
        w.write_all(&param.to_le_bytes())?;
    }
    for chain in &draws.chains {
        w.write_all(&chain.step_size.to_le_bytes())?;
        for v in &chain.inv_mass_diag {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(chain.max_depth_hits as u32).to_le_bytes())?;
        for d in &chain.divergent {
            w.write_all(&[u8::from(*d)])?;
        }
        for v in &chain.draws {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws(path: &Path) -> CliResult<PosteriorDraws> {
    let at = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
    if &magic != MAGIC {
        return Err(CliError::malformed(format!(
            "{at}: not a draws file (bad magic)"
        )));
    }
    let version = read_u16(&mut r, &at)?;
    if version != VERSION {
        return Err(CliError::malformed(format!(
            "{at}: unsupported draws version {version}"
        )));
    }
    let dim = read_u32(&mut r, &at)? as usize;
    let n_draws = read_u32(&mut r, &at)? as usize;
    let n_chains = read_u32(&mut r, &at)? as usize;
    if dim == 0 || n_chains == 0 {
        return Err(CliError::malformed(format!("{at}: empty draws file")));
    }

    let mut names = Vec::with_capacity(dim);
    for _ in 0..dim {
        let len = read_u16(&mut r, &at)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)
            .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
        names.push(
            String::from_utf8(buf)
                .map_err(|_| CliError::malformed(format!("{at}: name is not UTF-8")))?,
        );
    }
    let mut transforms = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)
            .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
        let param = read_f64(&mut r, &at)?;
        transforms.push(tag_transform(tag[0], param, &at)?);
    }

    let mut chains = Vec::with_capacity(n_chains);
    for _ in 0..n_chains {
        let step_size = read_f64(&mut r, &at)?;
        let mut inv_mass_diag = Vec::with_capacity(dim);
        for _ in 0..dim {
            inv_mass_diag.push(read_f64(&mut r, &at)?);
        }
        let max_depth_hits = read_u32(&mut r, &at)? as usize;
        let mut flags = vec![0u8; n_draws];
        r.read_exact(&mut flags)
            .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
        let mut draws = vec![0.0f64; n_draws * dim];
        let mut buf = vec![0u8; n_draws * dim * 8];
        r.read_exact(&mut buf)
            .map_err(|e| CliError::malformed(format!("{at}: truncated draw block: {e}")))?;
        for (i, chunk) in buf.chunks_exact(8).enumerate() {
            draws[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        chains.push(ChainDraws {
            draws,
            divergent: flags.into_iter().map(|b| b != 0).collect(),
            step_size,
            inv_mass_diag,
            max_depth_hits,
        });
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail).map_err(|e| CliError::malformed(format!("{at}: {e}")))? != 0 {
        return Err(CliError::malformed(format!("{at}: trailing bytes")));
    }
    Ok(PosteriorDraws {
        names,
        transforms,
        n_draws,
        chains,
    })
}

fn read_u16<R: Read>(r: &mut R, at: &str) -> CliResult<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)
        .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, at: &str) -> CliResult<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, at: &str) -> CliResult<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| CliError::malformed(format!("{at}: {e}")))?;
    Ok(f64::from_le_bytes(b))
}
