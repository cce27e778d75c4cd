//! Binary checkpoint format for the network and its training state.
//!
//! Layout (all integers little-endian, all tensors 32-bit float):
//!
//! ```text
//! magic      8 bytes  "FDAFNET\0"
//! version    u32      currently 1
//! m, p       u32 u32  architecture dims
//! init_seed  u64      RNG seed used for the initial weights
//! count      u32      number of named tensors
//! tensor     repeated: name_len u16, name utf-8,
//!                      ndim u8, dims u32 x ndim, data f32 x prod(dims)
//! opt_flag   u8       0 = no optimizer state
//! [if 1]     step u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!            first moments f32 x count, second moments f32 x count
//! ```
//!
//! The named tensors are `norm.nu`, `norm.sigma` (length M+2) followed by
//! the network tensors in flat-layout order. Loading validates every shape
//! against the declared dims before use.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::{NetworkDims, NetworkParameters, NormalizationStats};
use crate::training::{AdamParams, OptimizerState};

const MAGIC: &[u8; 8] = b"FDAFNET\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct OptimizerSnapshot {
    pub step: u64,
    pub adam: AdamParams,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerSnapshot {
    pub fn from_state(state: &OptimizerState) -> Self {
        Self {
            step: state.step,
            adam: state.params,
            m: state.m.clone(),
            v: state.v.clone(),
        }
    }

    pub fn into_state(self) -> OptimizerState {
        let mut state = OptimizerState::new(self.m.len(), self.adam);
        state.step = self.step;
        state.m = self.m;
        state.v = self.v;
        state
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub dims: NetworkDims,
    pub init_seed: u64,
    pub stats: NormalizationStats,
    pub params: NetworkParameters,
    pub optimizer: Option<OptimizerSnapshot>,
}

fn write_tensor(w: &mut impl Write, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
    let name_bytes = name.as_bytes();
    w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
    w.write_all(name_bytes)?;
    w.write_all(&[shape.len() as u8])?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_vec(r: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let b = read_exact_vec(r, 2)?;
    Ok(u16::from_le_bytes(b.try_into().unwrap()))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let b = read_exact_vec(r, 4)?;
    Ok(u32::from_le_bytes(b.try_into().unwrap()))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let b = read_exact_vec(r, 8)?;
    Ok(u64::from_le_bytes(b.try_into().unwrap()))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let b = read_exact_vec(r, 8)?;
    Ok(f64::from_le_bytes(b.try_into().unwrap()))
}

fn read_f32_data(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let bytes = read_exact_vec(r, len * 4)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect())
}

fn read_tensor(r: &mut impl Read) -> Result<(String, Vec<usize>, Vec<f64>)> {
    let name_len = read_u16(r)? as usize;
    let name = String::from_utf8(read_exact_vec(r, name_len)?)
        .map_err(|_| Error::Data("tensor name is not utf-8".into()))?;
    let ndim = read_exact_vec(r, 1)?[0] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u32(r)? as usize);
    }
    let len: usize = shape.iter().product();
    let data = read_f32_data(r, len)?;
    Ok((name, shape, data))
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dims.m as u32).to_le_bytes())?;
        w.write_all(&(self.dims.p as u32).to_le_bytes())?;
        w.write_all(&self.init_seed.to_le_bytes())?;

        let specs = self.dims.tensors();
        let count = 2 + specs.len() as u32;
        w.write_all(&count.to_le_bytes())?;
        let f = self.dims.feature_len();
        write_tensor(&mut w, "norm.nu", &[f], &self.stats.nu)?;
        write_tensor(&mut w, "norm.sigma", &[f], &self.stats.sigma)?;
        for spec in &specs {
            let data = &self.params.theta()[spec.offset..spec.offset + spec.len()];
            write_tensor(&mut w, spec.name, &spec.shape, data)?;
        }

        match &self.optimizer {
            None => w.write_all(&[0u8])?,
            Some(opt) => {
                w.write_all(&[1u8])?;
                w.write_all(&opt.step.to_le_bytes())?;
                for v in [
                    opt.adam.learning_rate,
                    opt.adam.beta1,
                    opt.adam.beta2,
                    opt.adam.epsilon,
                ] {
                    w.write_all(&v.to_le_bytes())?;
                }
                for &x in &opt.m {
                    w.write_all(&(x as f32).to_le_bytes())?;
                }
                for &x in &opt.v {
                    w.write_all(&(x as f32).to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let magic = read_exact_vec(&mut r, 8)?;
        if magic != MAGIC {
            return Err(Error::Data(format!(
                "{}: not a checkpoint file",
                path.display()
            )));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let m = read_u32(&mut r)? as usize;
        let p = read_u32(&mut r)? as usize;
        let init_seed = read_u64(&mut r)?;
        let dims = NetworkDims { m, p };

        let count = read_u32(&mut r)? as usize;
        let specs = dims.tensors();
        if count != specs.len() + 2 {
            return Err(Error::Data(format!(
                "checkpoint holds {count} tensors, expected {}",
                specs.len() + 2
            )));
        }

        let f = dims.feature_len();
        let (name, shape, nu) = read_tensor(&mut r)?;
        if name != "norm.nu" || shape != [f] {
            return Err(Error::Data("malformed normalization tensor".into()));
        }
        let (name, shape, sigma) = read_tensor(&mut r)?;
        if name != "norm.sigma" || shape != [f] {
            return Err(Error::Data("malformed normalization tensor".into()));
        }

        let mut theta = vec![0.0; dims.parameter_count()];
        for spec in &specs {
            let (name, shape, data) = read_tensor(&mut r)?;
            if name != spec.name || shape != spec.shape {
                return Err(Error::Data(format!(
                    "tensor {name} {shape:?} does not match expected {} {:?}",
                    spec.name, spec.shape
                )));
            }
            theta[spec.offset..spec.offset + spec.len()].copy_from_slice(&data);
        }
        let params = NetworkParameters::from_theta(dims, theta)?;

        let flag = read_exact_vec(&mut r, 1)?[0];
        let optimizer = if flag == 1 {
            let step = read_u64(&mut r)?;
            let adam = AdamParams {
                learning_rate: read_f64(&mut r)?,
                beta1: read_f64(&mut r)?,
                beta2: read_f64(&mut r)?,
                epsilon: read_f64(&mut r)?,
            };
            let n = dims.parameter_count();
            let m_vec = read_f32_data(&mut r, n)?;
            let v_vec = read_f32_data(&mut r, n)?;
            Some(OptimizerSnapshot {
                step,
                adam,
                m: m_vec,
                v: v_vec,
            })
        } else {
            None
        };

        Ok(Checkpoint {
            dims,
            init_seed,
            stats: NormalizationStats { nu, sigma },
            params,
            optimizer,
        })
    }

    /// Human-readable summary for the inspect subcommand.
    pub fn describe(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "architecture: M={}, P={}, feature length {}",
            self.dims.m,
            self.dims.p,
            self.dims.feature_len()
        );
        let _ = writeln!(out, "parameters: {}", self.dims.parameter_count());
        let _ = writeln!(out, "init seed: {}", self.init_seed);
        let _ = writeln!(
            out,
            "optimizer state: {}",
            match &self.optimizer {
                Some(o) => format!("present (step {})", o.step),
                None => "absent".into(),
            }
        );
        let _ = writeln!(out, "tensors:");
        let _ = writeln!(out, "  norm.nu            [{}]", self.dims.feature_len());
        let _ = writeln!(out, "  norm.sigma         [{}]", self.dims.feature_len());
        for spec in self.dims.tensors() {
            let dims_text = spec
                .shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x");
            let _ = writeln!(out, "  {:<18} [{}]", spec.name, dims_text);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{forward, FeatureVector, RecurrentState};

    fn checkpoint_fixture() -> Checkpoint {
        let dims = NetworkDims { m: 16, p: 4 };
        Checkpoint {
            dims,
            init_seed: 42,
            stats: NormalizationStats {
                nu: (0..dims.feature_len()).map(|i| i as f64 * 0.25).collect(),
                sigma: (0..dims.feature_len()).map(|i| 1.0 + i as f64).collect(),
            },
            params: NetworkParameters::init(dims, 42),
            optimizer: Some(OptimizerSnapshot {
                step: 17,
                adam: AdamParams::default(),
                m: vec![0.5; dims.parameter_count()],
                v: vec![0.25; dims.parameter_count()],
            }),
        }
    }

    #[test]
    fn round_trip_stabilizes_after_one_save() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let ck = checkpoint_fixture();
        ck.save(&p1).unwrap();
        let loaded1 = Checkpoint::load(&p1).unwrap();
        loaded1.save(&p2).unwrap();
        let loaded2 = Checkpoint::load(&p2).unwrap();
        // After the first save all values are f32-representable; a second
        // round trip is lossless.
        assert_eq!(loaded1.params.theta(), loaded2.params.theta());
        assert_eq!(std::fs::read(&p1).unwrap().len(), std::fs::read(&p2).unwrap().len());

        // Bit-identical forward passes from repeated loads.
        let feat = FeatureVector {
            values: vec![0.7; loaded1.dims.feature_len()],
        };
        let state = RecurrentState::zeros(loaded1.dims.p);
        let (a, _) = forward(&loaded1.params, &state, &feat).unwrap();
        let (b, _) = forward(&loaded2.params, &state, &feat).unwrap();
        assert_eq!(a.m_mu, b.m_mu);
        assert_eq!(a.m_e, b.m_e);
    }

    #[test]
    fn optimizer_state_survives() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let ck = checkpoint_fixture();
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let opt = loaded.optimizer.unwrap();
        assert_eq!(opt.step, 17);
        assert_eq!(opt.adam, AdamParams::default());
        assert!(opt.m.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"FDAFNET\0garbage").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        std::fs::write(&path, b"nope").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn shape_validation_catches_dim_mismatch() {
        // Save with one dims header, then corrupt the declared P.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ckpt");
        let ck = checkpoint_fixture();
        ck.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[16] = 99; // P field
        std::fs::write(&path, &bytes).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
