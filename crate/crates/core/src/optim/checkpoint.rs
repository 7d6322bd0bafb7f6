//! Binary checkpoint container.
//!
//! Layout (little endian): magic `OMVAE1`, format version u32, model config as
//! length-prefixed text, tensor count u32, tensor records in the model's fixed
//! visitation order (optionally followed by Adam moments named
//! `adam.m.<param>` / `adam.v.<param>`), then metadata as length-prefixed text.

use std::path::Path;

use super::AdamState;
use crate::binio::{read_file, write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::layers::Parameterized;
use crate::model::{ModelConfig, OmiVaeModel};
use crate::numerics::RngState;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"OMVAE1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: OmiVaeModel,
    pub adam: Option<AdamState>,
    /// Free-form run metadata (phase, seeds, history, ...).
    pub metadata: KvDoc,
}

fn param_names(model: &mut OmiVaeModel) -> Vec<(String, usize)> {
    let mut names = Vec::new();
    model.visit_params("", &mut |n, v, _| names.push((n.to_string(), v.len())));
    names
}

pub fn encode_checkpoint(model: &OmiVaeModel, adam: Option<&AdamState>, metadata: &KvDoc) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.text(&model.config().to_kv().render())?;

    let mut records: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
    model.visit_tensors("", &mut |n, dims, v| records.push((n.to_string(), dims.to_vec(), v.to_vec())));
    let mut meta = metadata.clone();
    if let Some(a) = adam.filter(|a| !a.m.is_empty()) {
        let names = param_names(&mut model.clone());
        if names.len() != a.m.len() {
            return Err(Error::shape("save checkpoint", "optimizer state does not match model"));
        }
        for (prefix, moments) in [("adam.m", &a.m), ("adam.v", &a.v)] {
            for ((name, len), values) in names.iter().zip(moments) {
                if values.len() != *len {
                    return Err(Error::shape("save checkpoint", format!("moment length mismatch for {name}")));
                }
                records.push((format!("{prefix}.{name}"), vec![*len], values.clone()));
            }
        }
    }
    if let Some(a) = adam {
        meta.set("adam.step", a.t);
        meta.set("adam.lr", a.lr);
        meta.set("adam.beta1", a.beta1);
        meta.set("adam.beta2", a.beta2);
        meta.set("adam.eps", a.eps);
    }

    w.len(records.len())?;
    for (name, dims, values) in &records {
        w.tensor(name, dims, values)?;
    }
    w.text(&meta.render())?;
    Ok(w.finish())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.expect_magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let config = ModelConfig::from_kv(&KvDoc::parse(&r.text()?, "checkpoint config")?)?;
    let count = r.len()?;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        tensors.push(r.tensor()?);
    }
    let mut metadata = KvDoc::parse(&r.text()?, "checkpoint metadata")?;
    if !r.at_end() {
        return Err(Error::Format("trailing bytes after metadata".into()));
    }

    let mut model = OmiVaeModel::build(config, &mut RngState::new(0))?;
    let mut it = tensors.into_iter();
    let mut failure = None;
    model.visit_tensors_mut("", &mut |name, dims, values| {
        if failure.is_some() {
            return;
        }
        match it.next() {
            Some(t) if t.name == name && t.dims == dims => values.copy_from_slice(&t.values),
            Some(t) => {
                failure = Some(format!("tensor `{}` {:?} where `{name}` {dims:?} was expected", t.name, t.dims))
            }
            None => failure = Some(format!("missing tensor `{name}`")),
        }
    });
    if let Some(msg) = failure {
        return Err(Error::Format(msg));
    }

    let rest: Vec<_> = it.collect();
    let adam = if metadata.contains("adam.step") {
        let mut a = AdamState::new(metadata.get("adam.lr")?);
        a.t = metadata.get("adam.step")?;
        a.beta1 = metadata.get("adam.beta1")?;
        a.beta2 = metadata.get("adam.beta2")?;
        a.eps = metadata.get("adam.eps")?;
        if !rest.is_empty() {
            let names = param_names(&mut model);
            if rest.len() != 2 * names.len() {
                return Err(Error::Format("incomplete optimizer state".into()));
            }
            let (m, v) = rest.split_at(names.len());
            for (prefix, recs, dst) in [("adam.m", m, &mut a.m), ("adam.v", v, &mut a.v)] {
                for ((name, len), t) in names.iter().zip(recs) {
                    if t.name != format!("{prefix}.{name}") || t.values.len() != *len {
                        return Err(Error::Format(format!("unexpected optimizer tensor `{}`", t.name)));
                    }
                    dst.push(t.values.clone());
                }
            }
        }
        Some(a)
    } else if !rest.is_empty() {
        return Err(Error::Format(format!("unexpected tensor `{}`", rest[0].name)));
    } else {
        None
    };
    for key in ["adam.step", "adam.lr", "adam.beta1", "adam.beta2", "adam.eps"] {
        metadata.remove(key);
    }
    Ok(Checkpoint { model, adam, metadata })
}

pub fn save_checkpoint(path: &Path, model: &OmiVaeModel, adam: Option<&AdamState>, metadata: &KvDoc) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model, adam, metadata)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?)
}
