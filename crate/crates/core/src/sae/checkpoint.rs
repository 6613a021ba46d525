//! Self-describing binary checkpoints.
//!
//! Layout: the 8-byte magic `STRATSAE`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header, then every
//! array in header order as little-endian values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::SaeConfig;
use super::error::{Result, SaeError};
use super::model::SaeModel;
use super::normalize::NormStats;
use super::train::OptimizerState;
use crate::optim::Moments;

const MAGIC: &[u8; 8] = b"STRATSAE";
const VERSION: u32 = 1;
pub const FORMAT_TAG: &str = "strata.sae/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    shape: Vec<usize>,
    dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    config: SaeConfig,
    step: u64,
    input_norm: Option<NormStats>,
    target_norm: Option<NormStats>,
    arrays: Vec<ArrayMeta>,
}

/// Model, optimizer state and the normalization used in training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SaeModel,
    pub state: OptimizerState,
    pub input_norm: Option<NormStats>,
    pub target_norm: Option<NormStats>,
}

fn meta(name: &str, shape: &[usize], dtype: &str) -> ArrayMeta {
    ArrayMeta {
        name: name.to_string(),
        shape: shape.to_vec(),
        dtype: dtype.to_string(),
    }
}

impl Checkpoint {
    fn arrays(&self) -> Vec<(ArrayMeta, Vec<f64>)> {
        let m = &self.model;
        let s = &self.state;
        let (we, wd) = (m.w_enc.shape().to_vec(), m.w_dec.shape().to_vec());
        let (be, bd) = (vec![m.b_enc.len()], vec![m.b_dec.len()]);
        let mut out = vec![
            (meta("w_enc", &we, "f64"), m.w_enc.iter().copied().collect()),
            (meta("b_enc", &be, "f64"), m.b_enc.to_vec()),
            (meta("w_dec", &wd, "f64"), m.w_dec.iter().copied().collect()),
            (meta("b_dec", &bd, "f64"), m.b_dec.to_vec()),
        ];
        for (name, shape, mom) in [
            ("w_enc", &we, &s.w_enc),
            ("b_enc", &be, &s.b_enc),
            ("w_dec", &wd, &s.w_dec),
            ("b_dec", &bd, &s.b_dec),
        ] {
            out.push((meta(&format!("adam_m.{name}"), shape, "f64"), mom.m.clone()));
            out.push((meta(&format!("adam_v.{name}"), shape, "f64"), mom.v.clone()));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arrays = self.arrays();
        let mut metas: Vec<ArrayMeta> = arrays.iter().map(|(m, _)| m.clone()).collect();
        metas.push(meta("last_fired", &[self.model.last_fired.len()], "u64"));
        let header = Header {
            format: FORMAT_TAG.to_string(),
            config: self.model.config.clone(),
            step: self.state.step,
            input_norm: self.input_norm.clone(),
            target_norm: self.target_norm.clone(),
            arrays: metas,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, values) in &arrays {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in &self.model.last_fired {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| SaeError::Checkpoint {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        if header.format != FORMAT_TAG {
            return Err(bad(&format!("unknown format tag {:?}", header.format)));
        }
        let issues = header.config.validate();
        if !issues.is_empty() {
            return Err(SaeError::Config(issues));
        }

        let mut cursor = 20 + hlen;
        let mut take = |n: usize| -> Result<&[u8]> {
            let chunk = bytes.get(cursor..cursor + n * 8).ok_or_else(|| bad("truncated array data"))?;
            cursor += n * 8;
            Ok(chunk)
        };
        let mut f64s = Vec::new();
        let mut last_fired = Vec::new();
        for a in &header.arrays {
            let n: usize = a.shape.iter().product();
            let chunk = take(n)?;
            match a.dtype.as_str() {
                "f64" => f64s.push(
                    chunk
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect::<Vec<f64>>(),
                ),
                "u64" => {
                    last_fired = chunk
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect()
                }
                other => return Err(bad(&format!("unknown dtype {other}"))),
            }
        }
        if cursor != bytes.len() {
            return Err(bad("trailing bytes after arrays"));
        }
        if f64s.len() != 12 {
            return Err(bad("expected 12 floating-point arrays"));
        }

        let cfg = header.config;
        let (d_in, d_out, m) = (cfg.input_dim, cfg.out_dim(), cfg.latent_dim());
        let shape_err = |_| bad("array shape disagrees with config");
        let mut it = f64s.into_iter();
        let mut next = || it.next().expect("counted above");
        let w_enc = Array2::from_shape_vec((m, d_in), next()).map_err(shape_err)?;
        let b_enc = Array1::from_vec(next());
        let w_dec = Array2::from_shape_vec((d_out, m), next()).map_err(shape_err)?;
        let b_dec = Array1::from_vec(next());
        if b_enc.len() != m || b_dec.len() != d_out || last_fired.len() != m {
            return Err(bad("array shape disagrees with config"));
        }
        let mut moments = || Moments { m: next(), v: next() };
        let state = OptimizerState {
            step: header.step,
            w_enc: moments(),
            b_enc: moments(),
            w_dec: moments(),
            b_dec: moments(),
        };
        Ok(Self {
            model: SaeModel {
                config: cfg,
                w_enc,
                b_enc,
                w_dec,
                b_dec,
                last_fired,
            },
            state,
            input_norm: header.input_norm,
            target_norm: header.target_norm,
        })
    }

    /// Write via a temporary file in the target directory, then rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let io = |source| SaeError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| SaeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sae::config::SaeVariant;
    use crate::sae::train::SaeTrainer;
    use ndarray::Array2;

    fn trained() -> Checkpoint {
        let cfg = SaeConfig {
            dead_threshold_tokens: Some(3),
            ..SaeConfig::new(4, 2, SaeVariant::TopK, 2)
        };
        let mut t = SaeTrainer::new(cfg).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(r, c)| ((r * 4 + c) as f64).sin());
        for _ in 0..3 {
            t.step(x.view(), None).unwrap();
        }
        Checkpoint {
            model: t.model,
            state: t.state,
            input_norm: Some(NormStats {
                mean: vec![0.1, 0.2, 0.3, 0.4],
                scale: 1.5,
            }),
            target_norm: None,
        }
    }

    #[test]
    fn roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sae.ckpt");
        let ck = trained();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.state.step, 3);
    }

    #[test]
    fn serialization_is_deterministic() {
        assert_eq!(trained().to_bytes(), trained().to_bytes());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = trained().to_bytes();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3], Path::new("x")).unwrap_err();
        assert!(matches!(err, SaeError::Checkpoint { .. }));
        let err = Checkpoint::from_bytes(b"garbage-garbage-garbage", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }
}
