use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderSpec, NnError, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"PHBXENC\0";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_DESCRIPTOR: usize = 1 << 16;
const MAX_NAME: usize = 1 << 10;
const MAX_DIMS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Descriptor {
    step: u64,
    source: String,
    spec: EncoderSpec,
}

/// Optimizer moments for the checkpointed parameters, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointOptimizer {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Encoder weights plus the spec and training provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderCheckpoint {
    pub spec: EncoderSpec,
    pub step: u64,
    pub source: String,
    pub params: Vec<(String, Tensor)>,
    pub optimizer: Option<CheckpointOptimizer>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.buf.len() - self.pos < n {
            return Err(bad("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn put_floats(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl EncoderCheckpoint {
    /// Snapshots `encoder`'s parameters from `store`.
    pub fn capture(store: &ParamStore, encoder: &Encoder, step: u64, source: &str) -> Self {
        let params = encoder.params().into_iter().map(|id| (store.name(id).to_string(), store.get(id).clone())).collect();
        Self { spec: encoder.spec, step, source: source.to_string(), params, optimizer: None }
    }

    /// Also records the Adam moments of the encoder parameters.
    pub fn with_optimizer(mut self, adam: &super::Adam, encoder: &Encoder) -> Self {
        let moments = |bufs: &Vec<Vec<f64>>, id: super::ParamId, len: usize| {
            bufs.get(id.index()).filter(|b| b.len() == len).cloned().unwrap_or_else(|| vec![0.0; len])
        };
        let ids = encoder.params();
        let lens: Vec<usize> = self.params.iter().map(|(_, t)| t.len()).collect();
        self.optimizer = Some(CheckpointOptimizer {
            step: adam.state.step,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            m: ids.iter().zip(&lens).map(|(id, &l)| moments(&adam.state.m, *id, l)).collect(),
            v: ids.iter().zip(&lens).map(|(id, &l)| moments(&adam.state.v, *id, l)).collect(),
        });
        self
    }

    /// Copies the weights into `encoder`'s parameters after checking the spec.
    pub fn apply(&self, store: &mut ParamStore, encoder: &Encoder) -> Result<(), NnError> {
        if self.spec != encoder.spec {
            return Err(bad(format!("spec mismatch: checkpoint {:?} vs encoder {:?}", self.spec, encoder.spec)));
        }
        let ids = encoder.params();
        if ids.len() != self.params.len() {
            return Err(bad(format!("expected {} parameters, found {}", ids.len(), self.params.len())));
        }
        for (id, (_, t)) in ids.iter().zip(&self.params) {
            if store.get(*id).shape() != t.shape() {
                return Err(super::shape_err("checkpoint", store.get(*id).shape(), t.shape()));
            }
        }
        for (id, (_, t)) in ids.iter().zip(&self.params) {
            *store.get_mut(*id) = t.clone();
        }
        Ok(())
    }

    /// Restores moments into `adam` for the encoder's parameters.
    pub fn apply_optimizer(&self, adam: &mut super::Adam, store: &ParamStore, encoder: &Encoder) {
        let Some(o) = &self.optimizer else { return };
        adam.state.step = o.step;
        let n = store.len();
        adam.state.m.resize(n, Vec::new());
        adam.state.v.resize(n, Vec::new());
        for (k, id) in encoder.params().into_iter().enumerate() {
            adam.state.m[id.index()] = o.m[k].clone();
            adam.state.v[id.index()] = o.v[k].clone();
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, NnError> {
        let desc = Descriptor { step: self.step, source: self.source.clone(), spec: self.spec };
        let text = toml::to_string(&desc).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in &self.params {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for d in t.shape() {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            put_floats(&mut out, t.data());
        }
        match &self.optimizer {
            None => out.push(0),
            Some(o) => {
                out.push(1);
                out.extend_from_slice(&o.step.to_le_bytes());
                for x in [o.lr, o.beta1, o.beta2, o.eps] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for (m, v) in o.m.iter().zip(&o.v) {
                    put_floats(&mut out, m);
                    put_floats(&mut out, v);
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        if bytes.len() < CHECKPOINT_MAGIC.len() + 4 {
            return Err(bad("truncated"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let want = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != want {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dlen = r.u32()? as usize;
        if dlen > MAX_DESCRIPTOR {
            return Err(bad("descriptor too long"));
        }
        let text = std::str::from_utf8(r.take(dlen)?).map_err(|_| bad("descriptor is not utf-8"))?;
        let desc: Descriptor = toml::from_str(text).map_err(|e| bad(format!("descriptor: {e}")))?;
        desc.spec.validate()?;
        let count = r.u32()? as usize;
        let mut params = Vec::new();
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            if nlen > MAX_NAME {
                return Err(bad("parameter name too long"));
            }
            let name = std::str::from_utf8(r.take(nlen)?).map_err(|_| bad("name is not utf-8"))?.to_string();
            let ndims = r.u8()? as usize;
            if ndims > MAX_DIMS {
                return Err(bad("too many dimensions"));
            }
            let mut dims = Vec::with_capacity(ndims);
            let mut len: usize = 1;
            for _ in 0..ndims {
                let d = r.u32()? as usize;
                len = len.checked_mul(d).ok_or_else(|| bad("length overflow"))?;
                dims.push(d);
            }
            if len.saturating_mul(8) > r.remaining() {
                return Err(bad("truncated"));
            }
            let data = r.floats(len)?;
            params.push((name, Tensor::new(&dims, data)?));
        }
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
                let mut m = Vec::with_capacity(params.len());
                let mut v = Vec::with_capacity(params.len());
                for (_, t) in &params {
                    m.push(r.floats(t.len())?);
                    v.push(r.floats(t.len())?);
                }
                Some(CheckpointOptimizer { step, lr, beta1, beta2, eps, m, v })
            }
            f => return Err(bad(format!("bad optimizer flag {f}"))),
        };
        if r.remaining() != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { spec: desc.spec, step: desc.step, source: desc.source, params, optimizer })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| bad(e.to_string()))?)
    }

    /// The little-endian weight bytes alone, in parameter order.
    pub fn weight_blob(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (_, t) in &self.params {
            put_floats(&mut out, t.data());
        }
        out
    }
}
