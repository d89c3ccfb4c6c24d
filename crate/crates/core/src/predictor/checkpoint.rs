//! On-disk format for toy UDM parameters.
//!
//! Byte layout:
//!
//! | bytes        | content                                            |
//! |--------------|----------------------------------------------------|
//! | 0..8         | magic `DIFFSRv1`                                   |
//! | 8..16        | header length `H` as little-endian u64             |
//! | 16..16+H     | UTF-8 JSON header ([`CheckpointHeader`])           |
//! | 16+H..       | parameter blob, little-endian f32, `blob_len` values |
//!
//! Each tensor's `offset` and shape in the header index into the blob in units of
//! f32 values, row-major.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::udm::{ToyUdm, ToyUdmConfig};
use crate::error::{ensure, Error, Result};
use crate::schedule::ScheduleEndpoints;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DIFFSRv1";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ToyUdmConfig,
    pub endpoints: ScheduleEndpoints,
    /// True when the blob holds the moving-average parameters.
    pub ema: bool,
    pub sample_rate: u32,
    #[serde(default)]
    pub step: u64,
    #[serde(default)]
    pub adam: Option<AdamSettings>,
    pub tensors: Vec<TensorEntry>,
    pub blob_len: usize,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f32>,
}

impl Checkpoint {
    pub fn from_model(
        model: &ToyUdm<f32>,
        endpoints: ScheduleEndpoints,
        sample_rate: u32,
        ema: bool,
    ) -> Self {
        let params = model.params().to_vec();
        Self {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                config: model.config().clone(),
                endpoints,
                ema,
                sample_rate,
                step: 0,
                adam: None,
                tensors: model.tensors().to_vec(),
                blob_len: params.len(),
            },
            params,
        }
    }

    pub fn with_step(mut self, step: u64) -> Self {
        self.header.step = step;
        self
    }

    pub fn with_adam(mut self, adam: AdamSettings) -> Self {
        self.header.adam = Some(adam);
        self
    }

    pub fn model(&self) -> Result<ToyUdm<f32>> {
        let model = ToyUdm::from_params(self.header.config.clone(), self.params.clone())?;
        ensure!(
            model.tensors() == self.header.tensors.as_slice(),
            "tensor index does not match the layout implied by the config"
        );
        Ok(model)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        let t = self.header.tensors.iter().find(|t| t.name == name)?;
        self.params.get(t.offset..t.offset + t.len())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut blob = Vec::with_capacity(self.params.len() * 4);
        for p in &self.params {
            blob.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&blob)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        ensure!(&magic == CHECKPOINT_MAGIC, "not a checkpoint file (bad magic)");
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        ensure!(len < 1 << 30, "checkpoint header too large: {len} bytes");
        let mut header = vec![0u8; len as usize];
        r.read_exact(&mut header)?;
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        ensure!(
            header.format_version == FORMAT_VERSION,
            "unsupported checkpoint version {}",
            header.format_version
        );
        header.config.validate()?;
        header.endpoints.validate()?;
        let mut blob = Vec::new();
        r.read_to_end(&mut blob)?;
        ensure!(
            blob.len() == header.blob_len * 4,
            "blob holds {} bytes, header declares {} values",
            blob.len(),
            header.blob_len
        );
        for t in &header.tensors {
            ensure!(
                t.offset + t.len() <= header.blob_len,
                "tensor {} exceeds the blob",
                t.name
            );
        }
        let params = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { header, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot open checkpoint {}: {e}", path.display()))
        })?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn round_trip_bytes() {
        let m = ToyUdm::<f32>::init(ToyUdmConfig::default(), &mut seeded(1)).unwrap();
        let ck = Checkpoint::from_model(&m, ScheduleEndpoints::default(), 4000, true).with_step(7);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.header, ck.header);
        assert_eq!(back.params, ck.params);
        assert_eq!(back.model().unwrap().params(), m.params());
        let w = back.tensor("input.weight").unwrap();
        assert_eq!(w.len(), 16);
        assert_eq!(w, &m.params()[..16]);
    }

    #[test]
    fn rejects_corruption() {
        let m = ToyUdm::<f32>::init(ToyUdmConfig::default(), &mut seeded(1)).unwrap();
        let ck = Checkpoint::from_model(&m, ScheduleEndpoints::default(), 4000, false);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 4];
        assert!(Checkpoint::read_from(truncated).is_err());
    }
}
