//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes  "FLEXLPCK"
//! version   u32
//! meta      u32 length + UTF-8 JSON (model kind and shape settings)
//! tables    u32 count, then per table:
//!           u32 name length, name, u64 rows, u64 cols, rows*cols f64
//! adam      u8 flag; when 1: u64 step, f64 lr, beta1, beta2, eps,
//!           then the first and second moments, one matrix per table
//!           (u64 rows, u64 cols, values)
//! ```

use std::fs;
use std::path::Path;

use flexlp_core::autodiff::{AdamConfig, AdamState, ParamSet, Tensor};
use flexlp_core::gnn::GcnModel;
use flexlp_core::sivi::{NoiseSpec, SiviModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"FLEXLPCK";
pub const VERSION: u32 = 1;

/// What the parameter table belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelMeta {
    Gcn,
    Sivi {
        feature_dim: usize,
        noise: NoiseSpec,
        use_labels: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: ModelMeta,
    pub params: ParamSet,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn from_gcn(model: &GcnModel) -> Self {
        Checkpoint {
            meta: ModelMeta::Gcn,
            params: model.params.clone(),
            adam: None,
        }
    }

    pub fn from_sivi(model: &SiviModel) -> Self {
        Checkpoint {
            meta: ModelMeta::Sivi {
                feature_dim: model.feature_dim(),
                noise: model.noise(),
                use_labels: model.uses_labels(),
            },
            params: model.params.clone(),
            adam: None,
        }
    }

    pub fn into_gcn(self) -> Result<GcnModel> {
        match self.meta {
            ModelMeta::Gcn => Ok(GcnModel::from_params(self.params)?),
            ModelMeta::Sivi { .. } => Err(CliError::validation(
                "checkpoint holds a generator, expected a GCN",
            )),
        }
    }

    pub fn into_sivi(self) -> Result<SiviModel> {
        match self.meta {
            ModelMeta::Sivi {
                feature_dim,
                noise,
                use_labels,
            } => Ok(SiviModel::from_params(
                self.params,
                feature_dim,
                noise,
                use_labels,
            )?),
            ModelMeta::Gcn => Err(CliError::validation(
                "checkpoint holds a GCN, expected a generator",
            )),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        put_u32(&mut out, meta.len());
        out.extend_from_slice(&meta);
        put_u32(&mut out, self.params.len());
        for (name, t) in self.params.iter() {
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_matrix(&mut out, t);
        }
        match &self.adam {
            None => out.push(0),
            Some(a) => {
                out.push(1);
                out.extend_from_slice(&a.step.to_le_bytes());
                for x in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for t in a.m.iter().chain(&a.v) {
                    put_matrix(&mut out, t);
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CliError::validation("not a flexlp checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::validation(format!(
                "checkpoint format version {version} is not supported (expected {VERSION})"
            )));
        }
        let meta_len = r.u32()? as usize;
        let meta: ModelMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| CliError::validation(format!("checkpoint metadata: {e}")))?;
        let count = r.u32()? as usize;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| CliError::validation("checkpoint table name is not UTF-8"))?
                .to_string();
            params.push(name, r.matrix()?);
        }
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.u64()?;
                let config = AdamConfig {
                    lr: r.f64()?,
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                };
                let m = (0..count).map(|_| r.matrix()).collect::<Result<Vec<_>>>()?;
                let v = (0..count).map(|_| r.matrix()).collect::<Result<Vec<_>>>()?;
                let shapes_match = params
                    .tensors()
                    .iter()
                    .zip(m.iter().zip(&v))
                    .all(|(p, (a, b))| p.shape() == a.shape() && p.shape() == b.shape());
                if !shapes_match {
                    return Err(CliError::validation(
                        "optimizer moments do not match the parameter shapes",
                    ));
                }
                Some(AdamState { config, step, m, v })
            }
            f => {
                return Err(CliError::validation(format!(
                    "bad optimizer-state flag {f}"
                )))
            }
        };
        if r.pos != bytes.len() {
            return Err(CliError::validation(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { meta, params, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, n: usize) {
    let n = u32::try_from(n).expect("length fits in u32");
    out.extend_from_slice(&n.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CliError::validation("checkpoint is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn matrix(&mut self) -> Result<Tensor> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l <= (self.bytes.len() - self.pos) / 8)
            .ok_or_else(|| CliError::validation("checkpoint is truncated"))?;
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Tensor::from_vec(rows, cols, data)?)
    }
}
