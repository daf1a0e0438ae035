use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Seq2SeqModel, Transformer, TransformerConfig};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SLGCKPT\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    config: TransformerConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    params: Vec<(String, [usize; 2])>,
}

/// Writes config, vocabularies and parameters. Layout: magic, `u32` version,
/// `u64` metadata length, JSON metadata, then every parameter as
/// little-endian `f64` in store order.
pub fn save_checkpoint(model: &Seq2SeqModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let params = model.net.params();
    let meta = Meta {
        config: model.config().clone(),
        src_vocab: model.src_vocab.clone(),
        tgt_vocab: model.tgt_vocab.clone(),
        params: params.iter().map(|(_, name, m)| (name.to_string(), [m.nrows(), m.ncols()])).collect(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut buf = Vec::with_capacity(meta.len() + 8 * params.numel() + 20);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    for (_, _, m) in params.iter() {
        for v in m.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Seq2SeqModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let meta_end = 20usize.checked_add(meta_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated metadata"))?;
    let meta: Meta = serde_json::from_slice(&bytes[20..meta_end])?;

    let mut net = Transformer::new(meta.config, meta.src_vocab.len(), meta.tgt_vocab.len(), 0)?;
    let store = net.params_mut();
    if store.len() != meta.params.len() {
        return Err(bad("parameter count does not match the architecture"));
    }
    let mut data = bytes[meta_end..].chunks_exact(8);
    if data.len() != store.numel() || !data.remainder().is_empty() {
        return Err(bad("parameter data has the wrong size"));
    }
    for (name, shape) in &meta.params {
        let id = store.id(name).ok_or_else(|| bad(&format!("unknown parameter {name}")))?;
        let m = store.get_mut(id);
        if [m.nrows(), m.ncols()] != *shape {
            return Err(bad(&format!("shape mismatch for {name}")));
        }
        for v in m.iter_mut() {
            *v = f64::from_le_bytes(data.next().unwrap().try_into().unwrap());
        }
    }
    Ok(Seq2SeqModel {
        net,
        src_vocab: meta.src_vocab,
        tgt_vocab: meta.tgt_vocab,
    })
}
