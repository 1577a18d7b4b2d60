use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Param {
    pub var: Var,
    /// Buffers such as batch-norm running statistics are not trainable.
    pub trainable: bool,
}

/// Named parameters in a deterministic (sorted) order.
///
/// Layers request parameters by name; a name that already exists is reused,
/// so a store loaded from disk rebuilds the same network.
#[derive(Debug)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    rng: ChaCha8Rng,
    dtype: DType,
    device: Device,
}

const BUFFERS_KEY: &str = "__buffers";

impl ParamStore {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            params: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            dtype,
            device: Device::Cpu,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Scalar count across all parameters and buffers.
    pub fn num_elements(&self) -> usize {
        self.params.values().map(|p| p.var.elem_count()).sum()
    }

    fn get_or_insert(
        &mut self,
        name: &str,
        shape: &[usize],
        trainable: bool,
        init: impl FnOnce(&mut ChaCha8Rng, usize) -> Vec<f64>,
    ) -> Result<Tensor> {
        if let Some(p) = self.params.get(name) {
            if p.var.dims() != shape {
                return Err(Error::ShapeMismatch {
                    left: format!("{name} stored as {:?}", p.var.dims()),
                    right: format!("requested {shape:?}"),
                });
            }
            return Ok(p.var.as_tensor().clone());
        }
        let n = shape.iter().product();
        let values = init(&mut self.rng, n);
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.params
            .insert(name.to_string(), Param { var, trainable });
        Ok(out)
    }

    /// Normal(0, sqrt(2 / fan_in)) initialisation.
    pub fn kaiming(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Tensor> {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        self.get_or_insert(name, shape, true, |rng, n| {
            let d = Normal::new(0.0, std).expect("finite std");
            (0..n).map(|_| d.sample(rng)).collect()
        })
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        self.get_or_insert(name, shape, true, |rng, n| {
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        })
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        self.get_or_insert(name, shape, true, |_, n| vec![value; n])
    }

    /// Non-trainable state, returned as a variable so it can be updated in place.
    pub fn buffer(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        self.get_or_insert(name, shape, false, |_, n| vec![value; n])?;
        Ok(self.params[name].var.clone())
    }

    /// Overwrites a stored value in place.
    pub fn set(&self, name: &str, value: &Tensor) -> Result<()> {
        let p = self
            .params
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("no parameter named `{name}`")))?;
        p.var.set(&value.detach().to_dtype(self.dtype)?)?;
        Ok(())
    }

    pub fn trainable_vars(&self) -> Vec<Var> {
        self.params
            .values()
            .filter(|p| p.trainable)
            .map(|p| p.var.clone())
            .collect()
    }

    /// Trainable variables whose names start with `prefix`.
    pub fn trainable_vars_with_prefix(&self, prefix: &str) -> Vec<Var> {
        self.params
            .iter()
            .filter(|(k, p)| p.trainable && k.starts_with(prefix))
            .map(|(_, p)| p.var.clone())
            .collect()
    }

    /// Independent copy of the entries under `prefix`; names keep the prefix.
    pub fn deep_copy_prefix(&self, prefix: &str) -> Result<ParamStore> {
        let mut out = ParamStore {
            params: BTreeMap::new(),
            rng: self.rng.clone(),
            dtype: self.dtype,
            device: self.device.clone(),
        };
        for (k, p) in self.params.iter().filter(|(k, _)| k.starts_with(prefix)) {
            let copy = Var::from_tensor(&p.var.as_tensor().copy()?)?;
            out.params.insert(
                k.clone(),
                Param {
                    var: copy,
                    trainable: p.trainable,
                },
            );
        }
        Ok(out)
    }

    pub fn deep_copy(&self) -> Result<ParamStore> {
        self.deep_copy_prefix("")
    }

    /// Value copies of every entry.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>> {
        self.params
            .iter()
            .map(|(k, p)| Ok((k.clone(), p.var.as_tensor().copy()?)))
            .collect()
    }

    pub fn restore(&self, snapshot: &BTreeMap<String, Tensor>) -> Result<()> {
        for (k, t) in snapshot {
            self.set(k, t)?;
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and f64 values of every entry.
    pub fn checksum(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (k, p) in &self.params {
            h.update(k.as_bytes());
            for d in p.var.dims() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in p
                .var
                .flatten_all()?
                .to_dtype(DType::F64)?
                .to_vec1::<f64>()?
            {
                h.update(v.to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Writes a safetensors file; `metadata` is stored in its header.
    pub fn save(&self, path: &Path, metadata: &BTreeMap<String, String>) -> Result<()> {
        save_stores(&[self], path, metadata)
    }

    /// Moves every entry under `prefix` into a new store.
    pub fn take_prefix(&mut self, prefix: &str) -> ParamStore {
        let keys: Vec<String> = self
            .params
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect();
        let mut out = ParamStore {
            params: BTreeMap::new(),
            rng: self.rng.clone(),
            dtype: self.dtype,
            device: self.device.clone(),
        };
        for k in keys {
            let p = self.params.remove(&k).expect("key listed");
            out.params.insert(k, p);
        }
        out
    }

    /// Reads a store written by [`save_stores`]; returns it with its metadata.
    pub fn load(
        path: &Path,
        seed: u64,
        dtype: DType,
    ) -> Result<(ParamStore, BTreeMap<String, String>)> {
        load_store(path, seed, dtype)
    }
}

/// Writes the union of `stores` to one safetensors file. Names must not collide.
pub fn save_stores(
    stores: &[&ParamStore],
    path: &Path,
    metadata: &BTreeMap<String, String>,
) -> Result<()> {
    let mut blobs = Vec::new();
    for (k, p) in stores.iter().flat_map(|s| s.params.iter()) {
        let flat = p.var.flatten_all()?;
        let (dtype, bytes) = match p.var.dtype() {
            DType::F64 => (
                safetensors::Dtype::F64,
                flat.to_vec1::<f64>()?
                    .iter()
                    .flat_map(|v| v.to_le_bytes())
                    .collect::<Vec<u8>>(),
            ),
            _ => (
                safetensors::Dtype::F32,
                flat.to_dtype(DType::F32)?
                    .to_vec1::<f32>()?
                    .iter()
                    .flat_map(|v| v.to_le_bytes())
                    .collect(),
            ),
        };
        blobs.push((k.clone(), dtype, p.var.dims().to_vec(), bytes));
    }
    let views = blobs
        .iter()
        .map(|(k, dt, shape, bytes)| {
            Ok((
                k.clone(),
                safetensors::tensor::TensorView::new(*dt, shape.clone(), bytes)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut info: HashMap<String, String> = metadata
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let buffers: Vec<&str> = stores
        .iter()
        .flat_map(|s| s.params.iter())
        .filter(|(_, p)| !p.trainable)
        .map(|(k, _)| k.as_str())
        .collect();
    info.insert(BUFFERS_KEY.to_string(), buffers.join(","));
    let bytes = safetensors::serialize(views, Some(info))?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn load_store(
    path: &Path,
    seed: u64,
    dtype: DType,
) -> Result<(ParamStore, BTreeMap<String, String>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)?;
    let mut meta: BTreeMap<String, String> = header
        .metadata()
        .clone()
        .unwrap_or_default()
        .into_iter()
        .collect();
    let buffers: Vec<String> = meta
        .remove(BUFFERS_KEY)
        .map(|s| {
            s.split(',')
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();
    let st = safetensors::SafeTensors::deserialize(&bytes)?;
    let mut store = ParamStore::new(seed, dtype);
    for (name, view) in st.tensors() {
        let data = view.data();
        let values: Vec<f64> = match view.dtype() {
            safetensors::Dtype::F32 => data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            safetensors::Dtype::F64 => data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            other => {
                return Err(Error::Checkpoint(format!(
                    "unsupported dtype {other:?} for `{name}`"
                )))
            }
        };
        let t = Tensor::from_vec(values, view.shape(), &store.device)?.to_dtype(dtype)?;
        let trainable = !buffers.contains(&name);
        store.params.insert(
            name,
            Param {
                var: Var::from_tensor(&t)?,
                trainable,
            },
        );
    }
    Ok((store, meta))
}
