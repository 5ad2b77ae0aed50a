//! Steering-vector file format (`SVEC`) and its metadata sidecar.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic   b"SVEC"
//! u16     version (= 1)
//! u32     source_model_id length + utf-8 bytes
//! u32     dataset_id length + utf-8 bytes
//! u32     num_layers
//! u32     hidden_dim
//! u32     flags: bit 0 = centered, bits 8..16 = sign convention (0)
//! f32     num_layers x hidden_dim directions
//! f32     num_layers explained_variance values
//! ```
//!
//! A human-readable TOML sidecar is written alongside at `<path>.meta.toml`;
//! it is informational (degenerate-pair counts and the header fields) and is
//! never consulted when reading the binary back.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use crate::error::{Error, Result};

use super::{SignConvention, SteeringVectorSet};

pub const SVEC_MAGIC: [u8; 4] = *b"SVEC";
pub const SVEC_VERSION: u16 = 1;

const FLAG_CENTERED: u32 = 1;

#[derive(Serialize)]
struct Sidecar<'a> {
    source_model_id: &'a str,
    dataset_id: &'a str,
    num_layers: usize,
    hidden_dim: usize,
    centered: bool,
    sign_convention: &'a str,
    explained_variance: &'a [f32],
    degenerate_pairs: &'a [u32],
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.toml");
    PathBuf::from(s)
}

pub fn write_steering_set(set: &SteeringVectorSet, path: &Path) -> Result<()> {
    set.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(&SVEC_MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(SVEC_VERSION).map_err(io)?;
    for s in [&set.source_model_id, &set.dataset_id] {
        w.write_u32::<LittleEndian>(s.len() as u32).map_err(io)?;
        w.write_all(s.as_bytes()).map_err(io)?;
    }
    w.write_u32::<LittleEndian>(set.num_layers as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(set.hidden_dim as u32).map_err(io)?;
    let mut flags = 0u32;
    if set.centered {
        flags |= FLAG_CENTERED;
    }
    // sign convention occupies bits 8..16; only variant 0 exists
    w.write_u32::<LittleEndian>(flags).map_err(io)?;
    for dir in &set.directions {
        for &v in dir {
            w.write_f32::<LittleEndian>(v).map_err(io)?;
        }
    }
    for &ev in &set.explained_variance {
        w.write_f32::<LittleEndian>(ev).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let sidecar = Sidecar {
        source_model_id: &set.source_model_id,
        dataset_id: &set.dataset_id,
        num_layers: set.num_layers,
        hidden_dim: set.hidden_dim,
        centered: set.centered,
        sign_convention: "mean_projection_non_negative",
        explained_variance: &set.explained_variance,
        degenerate_pairs: &set.degenerate_pairs,
    };
    let text = toml::to_string_pretty(&sidecar)
        .map_err(|e| Error::InvalidParam(format!("sidecar serialization: {e}")))?;
    let sc = sidecar_path(path);
    std::fs::write(&sc, text).map_err(|e| Error::io(&sc, e))?;
    Ok(())
}

pub fn read_steering_set(path: &Path) -> Result<SteeringVectorSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if magic != SVEC_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: SVEC_MAGIC,
            found: magic,
        });
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|e| Error::io(path, e))?;
    if version != SVEC_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
            supported: SVEC_VERSION,
        });
    }

    let source_model_id = read_string(&mut r, path, "source_model_id")?;
    let dataset_id = read_string(&mut r, path, "dataset_id")?;
    let num_layers = read_u32(&mut r, path, "num_layers")? as usize;
    let hidden_dim = read_u32(&mut r, path, "hidden_dim")? as usize;
    let flags = read_u32(&mut r, path, "flags")?;
    let sign_bits = (flags >> 8) & 0xff;
    if sign_bits != 0 {
        return Err(Error::CorruptFile {
            path: path.into(),
            detail: format!("unknown sign convention {sign_bits}"),
        });
    }

    let mut directions = Vec::with_capacity(num_layers);
    for l in 0..num_layers {
        let mut dir = vec![0.0f32; hidden_dim];
        r.read_f32_into::<LittleEndian>(&mut dir)
            .map_err(|_| Error::CorruptFile {
                path: path.into(),
                detail: format!("truncated direction block for layer {l}"),
            })?;
        directions.push(dir);
    }
    let mut explained_variance = vec![0.0f32; num_layers];
    r.read_f32_into::<LittleEndian>(&mut explained_variance)
        .map_err(|_| Error::CorruptFile {
            path: path.into(),
            detail: "truncated explained_variance block".into(),
        })?;

    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::CorruptFile {
                path: path.into(),
                detail: "trailing data after explained_variance".into(),
            })
        }
        Err(e) => return Err(Error::io(path, e)),
    }

    let set = SteeringVectorSet {
        source_model_id,
        dataset_id,
        num_layers,
        hidden_dim,
        directions,
        explained_variance,
        centered: flags & FLAG_CENTERED != 0,
        sign_convention: SignConvention::MeanProjectionNonNegative,
        degenerate_pairs: vec![0; num_layers],
    };
    set.validate()?;
    Ok(set)
}

fn read_u32<R: Read>(r: &mut R, path: &Path, field: &str) -> Result<u32> {
    r.read_u32::<LittleEndian>().map_err(|_| Error::CorruptFile {
        path: path.into(),
        detail: format!("truncated {field}"),
    })
}

fn read_string<R: Read>(r: &mut R, path: &Path, field: &str) -> Result<String> {
    let len = read_u32(r, path, field)? as usize;
    if len > 1 << 20 {
        return Err(Error::CorruptFile {
            path: path.into(),
            detail: format!("implausible {field} length {len}"),
        });
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| Error::CorruptFile {
        path: path.into(),
        detail: format!("truncated {field}"),
    })?;
    String::from_utf8(buf).map_err(|_| Error::CorruptFile {
        path: path.into(),
        detail: format!("{field} is not utf-8"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_set(layers: usize, dim: usize, seed: u64) -> SteeringVectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let directions: Vec<Vec<f32>> = (0..layers)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| (x / norm) as f32).collect()
            })
            .collect();
        SteeringVectorSet {
            source_model_id: "toy-src".into(),
            dataset_id: "toy-data".into(),
            num_layers: layers,
            hidden_dim: dim,
            directions,
            explained_variance: (0..layers).map(|l| 0.5 + 0.01 * l as f32).collect(),
            centered: true,
            sign_convention: SignConvention::MeanProjectionNonNegative,
            degenerate_pairs: vec![0; layers],
        }
    }

    #[test]
    fn round_trip_bit_identical() {
        let set = random_set(4, 16, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.svec");
        write_steering_set(&set, &path).unwrap();
        let loaded = read_steering_set(&path).unwrap();
        assert_eq!(loaded.directions, set.directions);
        assert_eq!(loaded.explained_variance, set.explained_variance);
        assert_eq!(loaded.source_model_id, set.source_model_id);
        assert_eq!(loaded.dataset_id, set.dataset_id);
        assert_eq!(loaded.centered, set.centered);
        assert!(sidecar_path(&path).exists());
    }

    #[test]
    fn truncated_body_is_corrupt() {
        let set = random_set(4, 16, 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.svec");
        write_steering_set(&set, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 8).unwrap();
        assert!(matches!(
            read_steering_set(&path),
            Err(Error::CorruptFile { .. })
        ));
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.svec");
        std::fs::write(&path, b"SFWTxxxxxxxx").unwrap();
        assert!(matches!(
            read_steering_set(&path),
            Err(Error::BadMagic { .. })
        ));
    }
}
