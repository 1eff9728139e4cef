//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        b"HPCK"
//! version      u32 = 1
//! stages       u32      info_len   u32      mask_hash u64
//! kernel       u8 (0 exact, 1 min-sum)      iterations u32
//! variant      u8 (0 wbp, 1 hyper)          ablation   u8
//! segments     u32
//! per segment: name_len u16, name (utf-8), rank u8, dims u32 × rank,
//!              f64 × Π dims
//! ```
//!
//! Segments: `alpha` and `beta` with dims `[T, n, N]`; hypernetwork
//! checkpoints add `f_widths` (the layer widths of `f` as floats),
//! `f_weights` `[count]` and the rank-0 scalar `c`.

use std::fs;
use std::path::Path;

use crate::bp::Kernel;
use crate::code::PolarCode;
use crate::{Error, Result};

use super::decoder::LearnedParams;
use super::params::{f_spec, HyperParams, WbpParams};
use super::{Ablation, Variant};

const MAGIC: &[u8; 4] = b"HPCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stages: usize,
    pub info_len: usize,
    pub mask_hash: u64,
    pub kernel: Kernel,
    pub ablation: Ablation,
    pub params: LearnedParams,
}

impl Checkpoint {
    pub fn new(code: &PolarCode, kernel: Kernel, ablation: Ablation, params: LearnedParams) -> Self {
        Self {
            stages: code.stages(),
            info_len: code.info_len(),
            mask_hash: code.mask_hash(),
            kernel,
            ablation,
            params,
        }
    }

    pub fn variant(&self) -> Variant {
        match self.params {
            LearnedParams::Wbp(_) => Variant::Wbp,
            LearnedParams::Hyper(_) => Variant::Hyper,
        }
    }

    pub fn iterations(&self) -> usize {
        self.params.iterations()
    }

    /// Fails unless the checkpoint was trained for `code`.
    pub fn check_code(&self, code: &PolarCode) -> Result<()> {
        if self.stages != code.stages()
            || self.info_len != code.info_len()
            || self.mask_hash != code.mask_hash()
        {
            return Err(Error::Checkpoint(format!(
                "trained for n={} k={} (mask {:016x}), code is n={} k={} (mask {:016x})",
                self.stages,
                self.info_len,
                self.mask_hash,
                code.stages(),
                code.info_len(),
                code.mask_hash()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.stages as u32).to_le_bytes());
        out.extend_from_slice(&(self.info_len as u32).to_le_bytes());
        out.extend_from_slice(&self.mask_hash.to_le_bytes());
        out.push(match self.kernel {
            Kernel::Exact => 0,
            Kernel::MinSum => 1,
        });
        out.extend_from_slice(&(self.iterations() as u32).to_le_bytes());
        out.push(match self.variant() {
            Variant::Wbp => 0,
            Variant::Hyper => 1,
        });
        out.push(self.ablation.code());

        let w = self.params.wbp();
        let shape = [w.iterations(), w.stages(), w.block_len()];
        let mut segments: Vec<(&str, Vec<usize>, Vec<f64>)> = vec![
            ("alpha", shape.to_vec(), w.alpha.clone()),
            ("beta", shape.to_vec(), w.beta.clone()),
        ];
        if let LearnedParams::Hyper(h) = &self.params {
            let widths: Vec<f64> = f_spec().widths().iter().map(|&v| v as f64).collect();
            segments.push(("f_widths", vec![widths.len()], widths));
            segments.push(("f_weights", vec![h.f_weights.len()], h.f_weights.clone()));
            segments.push(("c", vec![], vec![h.c]));
        }
        out.extend_from_slice(&(segments.len() as u32).to_le_bytes());
        for (name, dims, data) in segments {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dims.len() as u8);
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = rd.u32()?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let stages = rd.u32()? as usize;
        let info_len = rd.u32()? as usize;
        let mask_hash = rd.u64()?;
        let kernel = match rd.u8()? {
            0 => Kernel::Exact,
            1 => Kernel::MinSum,
            k => return Err(bad(&format!("unknown kernel tag {k}"))),
        };
        let iterations = rd.u32()? as usize;
        let variant = match rd.u8()? {
            0 => Variant::Wbp,
            1 => Variant::Hyper,
            v => return Err(bad(&format!("unknown variant tag {v}"))),
        };
        let ablation = Ablation::from_code(rd.u8()?)
            .ok_or_else(|| bad("unknown ablation tag"))?;
        if !(1..=crate::code::MAX_STAGES).contains(&stages) || info_len > (1 << stages) {
            return Err(bad(&format!("invalid code shape n={stages} k={info_len}")));
        }
        let len = 1usize << stages;
        let count = rd.u32()? as usize;
        let mut segments = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = rd.u16()? as usize;
            let name = std::str::from_utf8(rd.take(name_len)?)
                .map_err(|_| bad("segment name is not utf-8"))?
                .to_string();
            let rank = rd.u8()? as usize;
            let dims: Vec<usize> = (0..rank).map(|_| rd.u32().map(|d| d as usize)).collect::<Result<_>>()?;
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n).map(|_| rd.f64()).collect::<Result<_>>()?;
            segments.push((name, dims, data));
        }
        if rd.pos != bytes.len() {
            return Err(bad("trailing bytes after last segment"));
        }
        let mut take = |name: &str, dims: &[usize]| -> Result<Vec<f64>> {
            let idx = segments
                .iter()
                .position(|(n, _, _)| n == name)
                .ok_or_else(|| bad(&format!("missing segment '{name}'")))?;
            let (_, d, data) = segments.remove(idx);
            if d != dims {
                return Err(bad(&format!("segment '{name}' has shape {d:?}, expected {dims:?}")));
            }
            Ok(data)
        };
        let shape = [iterations, stages, len];
        let alpha = take("alpha", &shape)?;
        let beta = take("beta", &shape)?;
        let wbp = WbpParams::from_parts(iterations, stages, len, alpha, beta)?;
        let params = match variant {
            Variant::Wbp => LearnedParams::Wbp(wbp),
            Variant::Hyper => {
                let spec = f_spec();
                let widths = take("f_widths", &[spec.widths().len()])?;
                if widths.iter().zip(spec.widths()).any(|(&a, &b)| a != b as f64) {
                    return Err(bad(&format!("f widths {widths:?} differ from {:?}", spec.widths())));
                }
                let f_weights = take("f_weights", &[spec.param_count()])?;
                let c = take("c", &[])?[0];
                LearnedParams::Hyper(HyperParams {
                    wbp,
                    f_weights,
                    c,
                    gating: ablation.gating(),
                })
            }
        };
        if let Some((name, _, _)) = segments.first() {
            return Err(bad(&format!("unexpected segment '{name}'")));
        }
        Ok(Self {
            stages,
            info_len,
            mask_hash,
            kernel,
            ablation,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::file(path, e.to_string()))
    }
}

fn bad(msg: &str) -> Error {
    Error::Checkpoint(msg.to_string())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper_checkpoint() -> (PolarCode, Checkpoint) {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        let mut params = HyperParams::init(&code, 2, 5);
        params.wbp.alpha[3] = -0.25;
        params.c = 0.375;
        let ck = Checkpoint::new(&code, Kernel::MinSum, Ablation::Full, LearnedParams::Hyper(params));
        (code, ck)
    }

    #[test]
    fn save_load_save_is_identical() {
        let (code, ck) = hyper_checkpoint();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        back.check_code(&code).unwrap();

        let wbp = Checkpoint::new(
            &code,
            Kernel::Exact,
            Ablation::Full,
            LearnedParams::Wbp(WbpParams::filled(&code, 3, 0.5)),
        );
        let bytes = wbp.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn rejects_other_code() {
        let (_, ck) = hyper_checkpoint();
        let other = PolarCode::from_frozen_mask(vec![false, true, true, true, false, true, false, false]).unwrap();
        assert!(ck.check_code(&other).is_err());
    }

    #[test]
    fn rejects_corruption() {
        let (_, ck) = hyper_checkpoint();
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad_magic).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn no_gating_ablation_restores_flag() {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        let mut params = HyperParams::init(&code, 1, 1);
        params.gating = false;
        let ck = Checkpoint::new(&code, Kernel::MinSum, Ablation::NoGating, LearnedParams::Hyper(params));
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        match back.params {
            LearnedParams::Hyper(h) => assert!(!h.gating),
            _ => panic!("variant changed"),
        }
    }
}
