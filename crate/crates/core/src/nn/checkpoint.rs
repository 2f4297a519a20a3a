//! Binary checkpoints: magic, version, model kind, frontend geometry, layer
//! spec, then a little-endian `f64` parameter vector. BNN checkpoints append a
//! variational section and the output head.

use std::path::Path;

use super::{ClassifierModel, Frontend, LayerSpec, Sequential};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BBAUDCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Classifier = 0,
    Bnn = 1,
}

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }
    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Checkpoint(format!("vector of {n} values exceeds file")));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn write_header(w: &mut Writer, kind: ModelKind, frontend: &Frontend) {
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(kind as u8);
    w.u32(frontend.sample_rate());
    w.u32(frontend.clip_len() as u32);
    w.u32(frontend.n_mels() as u32);
}

pub(crate) fn read_header(r: &mut Reader, expected: ModelKind) -> Result<Frontend> {
    if r.bytes(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    if kind != expected as u8 {
        return Err(Error::Checkpoint(format!(
            "model kind {kind} found, expected {}",
            expected as u8
        )));
    }
    let sample_rate = r.u32()?;
    let clip_len = r.u32()? as usize;
    let n_mels = r.u32()? as usize;
    if sample_rate == 0 || clip_len == 0 || n_mels == 0 {
        return Err(Error::Checkpoint("invalid frontend geometry".into()));
    }
    Ok(Frontend::new(sample_rate, clip_len, n_mels))
}

pub(crate) fn write_sequential(w: &mut Writer, net: &Sequential) {
    w.u32(net.layers().len() as u32);
    for l in net.layers() {
        let (tag, a, b, c) = match *l {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => (0u8, in_ch, out_ch, kernel),
            LayerSpec::Relu => (1, 0, 0, 0),
            LayerSpec::MeanPool => (2, 0, 0, 0),
            LayerSpec::Dense { in_dim, out_dim } => (3, in_dim, out_dim, 0),
        };
        w.u8(tag);
        w.u32(a as u32);
        w.u32(b as u32);
        w.u32(c as u32);
    }
    w.f64s(net.params());
}

pub(crate) fn read_sequential(r: &mut Reader) -> Result<Sequential> {
    let n = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let tag = r.u8()?;
        let (a, b, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        layers.push(match tag {
            0 => LayerSpec::Conv1d {
                in_ch: a,
                out_ch: b,
                kernel: c,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::MeanPool,
            3 => LayerSpec::Dense { in_dim: a, out_dim: b },
            t => return Err(Error::Checkpoint(format!("unknown layer tag {t}"))),
        });
    }
    let params = r.f64s()?;
    Sequential::from_parts(layers, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub(crate) fn write_file(path: &Path, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn classifier_to_bytes(model: &ClassifierModel) -> Vec<u8> {
    let mut w = Writer::default();
    write_header(&mut w, ModelKind::Classifier, &model.frontend);
    write_sequential(&mut w, &model.net);
    w.finish()
}

pub fn classifier_from_bytes(bytes: &[u8]) -> Result<ClassifierModel> {
    let mut r = Reader::new(bytes);
    let frontend = read_header(&mut r, ModelKind::Classifier)?;
    let net = read_sequential(&mut r)?;
    r.finish()?;
    Ok(ClassifierModel { frontend, net })
}

pub fn save_classifier(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), classifier_to_bytes(model))
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    classifier_from_bytes(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    #[test]
    fn round_trip_is_exact() {
        let m = ClassifierModel::new(&ModelConfig::default(), 9);
        let bytes = classifier_to_bytes(&m);
        assert_eq!(&bytes[..8], MAGIC);
        let back = classifier_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_corruption() {
        let m = ClassifierModel::new(&ModelConfig::default(), 9);
        let mut bytes = classifier_to_bytes(&m);
        assert!(classifier_from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes.push(0);
        assert!(classifier_from_bytes(&bytes).is_err());
        let mut bad = classifier_to_bytes(&m);
        bad[0] = b'X';
        assert!(classifier_from_bytes(&bad).is_err());
    }
}
