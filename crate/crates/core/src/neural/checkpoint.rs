//! Flat little-endian f64 tensor archive with a JSON shape manifest.
//!
//! `save("run/checkpoint.json")` writes the manifest there and the raw
//! tensor bytes to `run/checkpoint.bin`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Dense, Mlp, SpectralState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in f64 elements from the start of the binary file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub binary: String,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

const FORMAT: &str = "f64-le-v1";

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.insert(name.into(), (shape, data));
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.tensors
            .get(name)
            .map(|(s, d)| (s.as_slice(), d.as_slice()))
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|s| s.as_str())
    }

    fn binary_path(manifest: &Path) -> PathBuf {
        manifest.with_extension("bin")
    }

    pub fn save(&self, manifest_path: impl AsRef<Path>) -> Result<()> {
        let manifest_path = manifest_path.as_ref();
        let bin_path = Self::binary_path(manifest_path);
        let mut bytes = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, (shape, data)) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
            });
            for x in data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            offset += data.len();
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            binary: bin_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            tensors: entries,
            meta: self.meta.clone(),
        };
        std::fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))?;
        Ok(())
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint format `{}`",
                manifest.format
            )));
        }
        let bin_path = manifest_path.with_file_name(&manifest.binary);
        let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidArgument(
                "checkpoint binary is not a whole number of f64".into(),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut archive = TensorArchive {
            tensors: BTreeMap::new(),
            meta: manifest.meta,
        };
        for e in manifest.tensors {
            let len: usize = e.shape.iter().product();
            let end = e.offset + len;
            if end > values.len() {
                return Err(Error::InvalidArgument(format!(
                    "tensor `{}` runs past end of binary",
                    e.name
                )));
            }
            archive
                .tensors
                .insert(e.name, (e.shape, values[e.offset..end].to_vec()));
        }
        Ok(archive)
    }

    /// Stores a network under `prefix`.
    pub fn put_mlp(&mut self, prefix: &str, mlp: &Mlp) {
        self.meta.insert(
            format!("{prefix}.activation"),
            serde_json::to_value(mlp.hidden_activation()).expect("enum serializes"),
        );
        if mlp.output_activation() != Activation::Identity {
            self.meta.insert(
                format!("{prefix}.output_activation"),
                serde_json::to_value(mlp.output_activation()).expect("enum serializes"),
            );
        }
        self.meta.insert(format!("{prefix}.layers"), mlp.layers().len().into());
        for (i, l) in mlp.layers().iter().enumerate() {
            self.insert(
                format!("{prefix}.{i}.weight"),
                vec![l.outputs(), l.inputs()],
                l.weight.iter().copied().collect(),
            );
            self.insert(format!("{prefix}.{i}.bias"), vec![l.outputs()], l.bias.to_vec());
        }
        if let Some(states) = mlp.spectral_states() {
            for (i, s) in states.iter().enumerate() {
                let mut packed = s.u.to_vec();
                packed.extend(s.v.iter());
                packed.push(s.sigma);
                self.insert(format!("{prefix}.{i}.spectral"), vec![packed.len()], packed);
            }
        }
    }

    pub fn get_mlp(&self, prefix: &str) -> Result<Mlp> {
        let n = self
            .meta
            .get(&format!("{prefix}.layers"))
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no network `{prefix}`")))?
            as usize;
        let act: Activation = serde_json::from_value(
            self.meta
                .get(&format!("{prefix}.activation"))
                .cloned()
                .unwrap_or(serde_json::Value::Null),
        )?;
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let (ws, w) = self.get(&format!("{prefix}.{i}.weight"))?;
            let (_, b) = self.get(&format!("{prefix}.{i}.bias"))?;
            if ws.len() != 2 {
                return Err(Error::InvalidArgument(format!("{prefix}.{i}.weight is not a matrix")));
            }
            let weight = Array2::from_shape_vec((ws[0], ws[1]), w.to_vec())
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            layers.push(Dense {
                weight,
                bias: Array1::from(b.to_vec()),
            });
        }
        let out = match self.meta.get(&format!("{prefix}.output_activation")) {
            Some(v) => serde_json::from_value(v.clone())?,
            None => Activation::Identity,
        };
        let mut mlp = Mlp::from_layers(layers, act)?.with_output_activation(out);
        if self.contains(&format!("{prefix}.0.spectral")) {
            let mut states = Vec::with_capacity(n);
            for (i, l) in mlp.layers().iter().enumerate() {
                let (_, packed) = self.get(&format!("{prefix}.{i}.spectral"))?;
                let (o, inp) = (l.outputs(), l.inputs());
                if packed.len() != o + inp + 1 {
                    return Err(Error::dims(o + inp + 1, packed.len(), format!("{prefix}.{i}.spectral")));
                }
                states.push(SpectralState {
                    u: Array1::from(packed[..o].to_vec()),
                    v: Array1::from(packed[o..o + inp].to_vec()),
                    sigma: packed[o + inp],
                });
            }
            mlp.set_spectral_states(Some(states));
        }
        Ok(mlp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_roundtrip_through_files() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let plain = Mlp::new(&[3, 5, 2], Activation::Swish, &mut rng).unwrap();
        let mut sn = Mlp::new(&[2, 4, 8], Activation::Tanh, &mut rng).unwrap();
        sn.enable_spectral_norm(10);
        let mut ar = TensorArchive::new();
        ar.put_mlp("policy", &plain);
        ar.put_mlp("posterior", &sn);
        ar.insert("log_std", vec![2], vec![-0.5, 0.25]);
        ar.meta.insert("note".into(), "hello".into());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        ar.save(&path).unwrap();
        assert!(dir.path().join("checkpoint.bin").exists());
        let back = TensorArchive::load(&path).unwrap();
        assert_eq!(back, ar);
        assert_eq!(back.get_mlp("policy").unwrap(), plain);
        assert_eq!(back.get_mlp("posterior").unwrap(), sn);
        assert!(back.get_mlp("value").is_err());
    }
}
