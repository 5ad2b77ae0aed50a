//! Toy-model weight file format (`SFWT`).
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic   b"SFWT"
//! u16     version (= 1)
//! u32     model_id length, then that many utf-8 bytes
//! u32 x6  num_layers, hidden_dim, num_heads, head_dim, vocab_size, max_context
//! f32     norm_epsilon
//! f32 blocks, in order:
//!   token_embedding      vocab_size x hidden_dim
//!   position_embedding   max_context x hidden_dim
//!   per layer: attn_norm [h]; wq, wk, wv, wo [h x h];
//!              mlp_norm [h]; w_up [4h x h]; w_down [h x 4h]
//!   final_norm           hidden_dim
//!   lm_head              vocab_size x hidden_dim
//! ```
//!
//! The feed-forward width is not stored: it is fixed at 4 x hidden_dim.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::{LayerWeights, Model, ModelSpec, Weights};

pub const SFWT_MAGIC: [u8; 4] = *b"SFWT";
pub const SFWT_VERSION: u16 = 1;

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(&SFWT_MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(SFWT_VERSION).map_err(io)?;
    let spec = model.spec();
    let id = spec.model_id.as_bytes();
    w.write_u32::<LittleEndian>(id.len() as u32).map_err(io)?;
    w.write_all(id).map_err(io)?;
    for v in [
        spec.num_layers,
        spec.hidden_dim,
        spec.num_heads,
        spec.head_dim,
        spec.vocab_size,
        spec.max_context,
    ] {
        w.write_u32::<LittleEndian>(v as u32).map_err(io)?;
    }
    w.write_f32::<LittleEndian>(spec.norm_epsilon).map_err(io)?;

    let weights = model.weights();
    write_block(&mut w, &weights.token_embedding, path)?;
    write_block(&mut w, &weights.position_embedding, path)?;
    for lw in &weights.layers {
        write_block(&mut w, &lw.attn_norm, path)?;
        write_block(&mut w, &lw.wq, path)?;
        write_block(&mut w, &lw.wk, path)?;
        write_block(&mut w, &lw.wv, path)?;
        write_block(&mut w, &lw.wo, path)?;
        write_block(&mut w, &lw.mlp_norm, path)?;
        write_block(&mut w, &lw.w_up, path)?;
        write_block(&mut w, &lw.w_down, path)?;
    }
    write_block(&mut w, &weights.final_norm, path)?;
    write_block(&mut w, &weights.lm_head, path)?;
    w.flush().map_err(io)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if magic != SFWT_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: SFWT_MAGIC,
            found: magic,
        });
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|e| Error::io(path, e))?;
    if version != SFWT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
            supported: SFWT_VERSION,
        });
    }

    let model_id = read_string(&mut r, path, "model_id")?;
    let mut header = [0usize; 6];
    for v in header.iter_mut() {
        *v = r
            .read_u32::<LittleEndian>()
            .map_err(|_| corrupt(path, "truncated header"))? as usize;
    }
    let norm_epsilon = r
        .read_f32::<LittleEndian>()
        .map_err(|_| corrupt(path, "truncated header"))?;
    let spec = ModelSpec {
        model_id,
        num_layers: header[0],
        hidden_dim: header[1],
        num_heads: header[2],
        head_dim: header[3],
        vocab_size: header[4],
        max_context: header[5],
        norm_epsilon,
    };
    spec.validate()?;

    let h = spec.hidden_dim;
    let f = spec.ffn_dim();
    let token_embedding = read_block(&mut r, spec.vocab_size * h, path, "token_embedding")?;
    let position_embedding =
        read_block(&mut r, spec.max_context * h, path, "position_embedding")?;
    let mut layers = Vec::with_capacity(spec.num_layers);
    for l in 0..spec.num_layers {
        let name = |b: &str| format!("layer {l} {b}");
        layers.push(LayerWeights {
            attn_norm: read_block(&mut r, h, path, &name("attn_norm"))?,
            wq: read_block(&mut r, h * h, path, &name("wq"))?,
            wk: read_block(&mut r, h * h, path, &name("wk"))?,
            wv: read_block(&mut r, h * h, path, &name("wv"))?,
            wo: read_block(&mut r, h * h, path, &name("wo"))?,
            mlp_norm: read_block(&mut r, h, path, &name("mlp_norm"))?,
            w_up: read_block(&mut r, f * h, path, &name("w_up"))?,
            w_down: read_block(&mut r, h * f, path, &name("w_down"))?,
        });
    }
    let final_norm = read_block(&mut r, h, path, "final_norm")?;
    let lm_head = read_block(&mut r, spec.vocab_size * h, path, "lm_head")?;

    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(corrupt(path, "trailing data after lm_head block")),
        Err(e) => return Err(Error::io(path, e)),
    }

    Model::new(
        spec,
        Weights {
            token_embedding,
            position_embedding,
            layers,
            final_norm,
            lm_head,
        },
    )
}

fn write_block<W: Write>(w: &mut W, data: &[f32], path: &Path) -> Result<()> {
    for &v in data {
        w.write_f32::<LittleEndian>(v)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn read_block<R: Read>(r: &mut R, len: usize, path: &Path, name: &str) -> Result<Vec<f32>> {
    let mut out = vec![0.0f32; len];
    r.read_f32_into::<LittleEndian>(&mut out)
        .map_err(|_| Error::CorruptWeights {
            path: path.into(),
            detail: format!("truncated weight block `{name}`"),
        })?;
    Ok(out)
}

fn read_string<R: Read>(r: &mut R, path: &Path, field: &str) -> Result<String> {
    let len = r
        .read_u32::<LittleEndian>()
        .map_err(|_| corrupt(path, &format!("truncated {field} length")))? as usize;
    if len > 1 << 20 {
        return Err(corrupt(path, &format!("implausible {field} length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| corrupt(path, &format!("truncated {field}")))?;
    String::from_utf8(buf).map_err(|_| corrupt(path, &format!("{field} is not utf-8")))
}

fn corrupt(path: &Path, detail: &str) -> Error {
    Error::CorruptFile {
        path: path.into(),
        detail: detail.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::random_model;
    use std::io::Seek;

    #[test]
    fn round_trip_bit_identical() {
        let model = random_model("toy-rt", 2, 16, 4, 32, 17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.spec(), model.spec());
        assert_eq!(loaded.weights(), model.weights());
        assert_eq!(loaded.spec().num_layers, 2);
        assert_eq!(loaded.spec().hidden_dim, 16);
    }

    #[test]
    fn truncated_weight_block_is_corrupt() {
        let model = random_model("toy-tr", 2, 16, 4, 32, 18);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        save_model(&model, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 64).unwrap();
        match load_model(&path) {
            Err(Error::CorruptWeights { detail, .. }) => {
                assert!(detail.contains("truncated weight block"), "{detail}");
            }
            other => panic!("expected corrupt weights, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_version_rejected() {
        let model = random_model("toy-v", 1, 16, 4, 32, 19);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        save_model(&model, &path).unwrap();
        let mut f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.seek(std::io::SeekFrom::Start(4)).unwrap();
        f.write_all(&99u16.to_le_bytes()).unwrap();
        match load_model(&path) {
            Err(Error::UnsupportedVersion { found, .. }) => assert_eq!(found, 99),
            other => panic!("expected unsupported version, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        std::fs::write(&path, b"NOPExxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(load_model(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn inconsistent_header_rejected() {
        let model = random_model("toy-h", 1, 16, 4, 32, 20);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        save_model(&model, &path).unwrap();
        // hidden_dim (header word 1) -> 12, which breaks heads x head_dim
        let id_len = model.spec().model_id.len() as u64;
        let mut f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.seek(std::io::SeekFrom::Start(4 + 2 + 4 + id_len + 4))
            .unwrap();
        f.write_all(&12u32.to_le_bytes()).unwrap();
        assert!(matches!(load_model(&path), Err(Error::SpecInvariant(_))));
    }

    #[test]
    fn trailing_data_rejected() {
        let model = random_model("toy-t", 1, 16, 4, 32, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfwt");
        save_model(&model, &path).unwrap();
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&[0u8; 4]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::CorruptFile { .. })));
    }
}
