//! Checkpoint file format.
//!
//! Little-endian throughout:
//!
//! ```text
//! "DETMCKPT" | version u32
//! config: K u32 | E u32 | H u32 | T u32 | beta_start f64 | beta_end f64 |
//!         kl_weight f64 | mode u8 | eval_path u8 | seed u64
//! vocab:  V u32 | fingerprint_len u32 | fingerprint bytes
//! params: count u32 | count x ( name_len u32 | name | rows u32 | cols u32 | rows*cols f32 )
//! ```

use std::fs;
use std::path::Path;

use super::config::{EvalPath, Mode, ModelConfig};
use super::forward::DiffEtm;
use crate::error::{Error, Result};
use crate::gradcore::{ParamStore, Tensor2D};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DETMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A decoded checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: DiffEtm,
    pub vocab_ref: String,
}

pub fn encode_checkpoint(model: &DiffEtm, vocab_ref: &str) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    for v in [c.num_topics, c.embed_dim, c.hidden_dim, c.diffusion_steps] {
        put_u32(&mut out, v as u32);
    }
    for v in [c.beta_start, c.beta_end, c.kl_weight] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(c.mode.code());
    out.push(c.eval_path.code());
    out.extend_from_slice(&c.seed.to_le_bytes());
    put_u32(&mut out, model.vocab_size as u32);
    put_bytes(&mut out, vocab_ref.as_bytes());
    put_u32(&mut out, model.params.len() as u32);
    for (name, p) in model.params.iter() {
        put_bytes(&mut out, name.as_bytes());
        put_u32(&mut out, p.value.rows() as u32);
        put_u32(&mut out, p.value.cols() as u32);
        for &x in p.value.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(out, bytes.len() as u32);
    out.extend_from_slice(bytes);
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {} (wanted {n} more)", self.pos)),
        }
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| "non-UTF-8 string".to_owned())
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let corrupt = |detail: String| Error::CorruptCheckpoint {
        path: path.to_owned(),
        detail,
    };
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let mut cur = Cursor { bytes, pos: 8 };
    let (config, vocab_size, vocab_ref, params) = (|| {
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!(
                "unsupported format version {version} (this build reads version {CHECKPOINT_VERSION})"
            ));
        }
        let num_topics = cur.u32()? as usize;
        let embed_dim = cur.u32()? as usize;
        let hidden_dim = cur.u32()? as usize;
        let diffusion_steps = cur.u32()? as usize;
        let beta_start = cur.f64()?;
        let beta_end = cur.f64()?;
        let kl_weight = cur.f64()?;
        let mode_code = cur.u8()?;
        let mode = Mode::from_code(mode_code).ok_or_else(|| format!("unknown mode code {mode_code}"))?;
        let path_code = cur.u8()?;
        let eval_path = EvalPath::from_code(path_code).ok_or_else(|| format!("unknown eval path code {path_code}"))?;
        let seed = cur.u64()?;
        let config = ModelConfig {
            num_topics,
            embed_dim,
            hidden_dim,
            diffusion_steps,
            beta_start,
            beta_end,
            kl_weight,
            mode,
            eval_path,
            seed,
        };
        let vocab_size = cur.u32()? as usize;
        let vocab_ref = cur.string()?;
        let count = cur.u32()? as usize;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = cur.string()?;
            let rows = cur.u32()? as usize;
            let cols = cur.u32()? as usize;
            let raw = cur.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or("size overflow")?)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
                .collect();
            let t = Tensor2D::from_vec(rows, cols, data).map_err(|e| e.to_string())?;
            params.insert(name, t).map_err(|e| e.to_string())?;
        }
        if cur.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
        }
        Ok((config, vocab_size, vocab_ref, params))
    })()
    .map_err(corrupt)?;
    let model = DiffEtm::from_params(config, vocab_size, params).map_err(|e| corrupt(e.to_string()))?;
    Ok(Checkpoint { model, vocab_ref })
}

pub fn save_checkpoint(model: &DiffEtm, vocab_ref: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_checkpoint(model, vocab_ref)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
