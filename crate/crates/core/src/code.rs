//! Polar code description, frozen-set construction and encoding.
//!
//! Positions are zero-based throughout. Stage `s` of the factor graph
//! (`0..=n`) corresponds to the one-based stage `s + 1` of the usual
//! notation: stage 0 holds the source bits `u`, stage `n` the channel bits `x`.
//! Between stage `s` and `s + 1` the butterflies pair position `j` with
//! `j + half(s)` where `half(s) = N >> (s + 1)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Largest supported stage count. Keeps `N` comfortably inside memory for
/// the dense message grids.
pub const MAX_STAGES: usize = 16;

/// Default erasure probability of the BEC used for Bhattacharyya construction.
pub const DEFAULT_DESIGN_Z: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    stages: usize,
    frozen: Vec<bool>,
    info: Vec<usize>,
}

impl PolarCode {
    /// Build a code from a frozen mask (`true` = frozen). The mask length
    /// must be a power of two, at least 2.
    pub fn from_frozen_mask(frozen: Vec<bool>) -> Result<Self> {
        let len = frozen.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidCode(format!(
                "block length {len} is not a power of two >= 2"
            )));
        }
        let stages = len.trailing_zeros() as usize;
        if stages > MAX_STAGES {
            return Err(Error::InvalidCode(format!(
                "block length {len} exceeds 2^{MAX_STAGES}"
            )));
        }
        let info = (0..len).filter(|&j| !frozen[j]).collect();
        Ok(Self {
            stages,
            frozen,
            info,
        })
    }

    /// Bhattacharyya-constructed code with the default design parameter.
    pub fn bhattacharyya(stages: usize, info_bits: usize) -> Result<Self> {
        let mask = construct_frozen_set(
            stages,
            info_bits,
            &Construction::Bhattacharyya {
                z0: DEFAULT_DESIGN_Z,
            },
        )?;
        Self::from_frozen_mask(mask)
    }

    /// Stage count `n = log2 N`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Block length `N`.
    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    /// Number of information bits `K`.
    pub fn info_len(&self) -> usize {
        self.info.len()
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.len() as f64
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    #[inline]
    pub fn is_frozen(&self, j: usize) -> bool {
        self.frozen[j]
    }

    pub fn full_rate(&self) -> bool {
        self.info.len() == self.frozen.len()
    }

    /// Information positions in ascending order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    /// Butterfly half-width between stage `s` and `s + 1`.
    #[inline]
    pub fn half(&self, s: usize) -> usize {
        self.len() >> (s + 1)
    }

    /// Scatter information bits into a source word `u` (frozen positions 0).
    pub fn source_word(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.info_len() {
            return Err(Error::LengthMismatch {
                expected: self.info_len(),
                actual: info_bits.len(),
            });
        }
        let mut u = vec![0u8; self.len()];
        for (&pos, &b) in self.info.iter().zip(info_bits) {
            u[pos] = b & 1;
        }
        Ok(u)
    }

    /// Gather the information bits back out of a source word.
    pub fn extract_info(&self, u: &[u8]) -> Vec<u8> {
        self.info.iter().map(|&p| u[p]).collect()
    }

    /// Encode `K` information bits into an `N`-bit codeword `x = u·F^{⊗n}`.
    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        let mut x = self.source_word(info_bits)?;
        polar_transform(&mut x);
        Ok(x)
    }

    /// Bit values on every stage of the factor graph for source word `u`:
    /// element `s` is the vector at stage `s`, element 0 is `u` and element
    /// `n` the codeword.
    pub fn stage_values(&self, u: &[u8]) -> Vec<Vec<u8>> {
        let len = self.len();
        let mut out = Vec::with_capacity(self.stages + 1);
        let mut cur = u.to_vec();
        out.push(cur.clone());
        for s in 0..self.stages {
            let half = len >> (s + 1);
            butterfly_stage(&mut cur, half);
            out.push(cur.clone());
        }
        out
    }

    /// SHA-256 of the frozen mask, truncated to 64 bits. Used to tie
    /// checkpoints to a code.
    pub fn mask_hash(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        let bytes: Vec<u8> = self.frozen.iter().map(|&f| f as u8).collect();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }

    /// Serialize as a code file: a `# polar n=.. k=..` header followed by the
    /// frozen positions, one zero-based index per line.
    pub fn to_code_file(&self) -> String {
        let mut out = format!("# polar n={} k={}\n", self.stages, self.info_len());
        for (j, &f) in self.frozen.iter().enumerate() {
            if f {
                let _ = writeln!(out, "{j}");
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_code_file()).map_err(|e| Error::io(path, e))
    }

    /// Load a code file written by [`PolarCode::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut header = None;
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(h) = parse_header(rest) {
                    header = Some(h);
                    break;
                }
            }
        }
        let (stages, k) = header
            .ok_or_else(|| Error::file(path, "missing '# polar n=<n> k=<k>' header"))?;
        let mask = parse_frozen_list(&text, stages, k).map_err(|r| Error::file(path, r))?;
        Self::from_frozen_mask(mask).map_err(|e| Error::file(path, e.to_string()))
    }
}

fn parse_header(rest: &str) -> Option<(usize, usize)> {
    let mut words = rest.split_whitespace();
    if words.next()? != "polar" {
        return None;
    }
    let mut n = None;
    let mut k = None;
    for w in words {
        if let Some(v) = w.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = w.strip_prefix("k=") {
            k = v.parse().ok();
        }
    }
    Some((n?, k?))
}

/// One pass of butterflies with the given half-width.
#[inline]
fn butterfly_stage(bits: &mut [u8], half: usize) {
    for start in (0..bits.len()).step_by(2 * half) {
        for j in start..start + half {
            bits[j] ^= bits[j + half];
        }
    }
}

/// In-place `x = u·F^{⊗n}` over GF(2). The transform is its own inverse.
pub fn polar_transform(bits: &mut [u8]) {
    let len = bits.len();
    debug_assert!(len.is_power_of_two());
    let mut half = len / 2;
    while half >= 1 {
        butterfly_stage(bits, half);
        half /= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    /// Bhattacharyya parameter recursion over a BEC with initial erasure
    /// probability `z0`.
    Bhattacharyya { z0: f64 },
    /// Bare frozen-position list, one zero-based index per line.
    ExternalFile(std::path::PathBuf),
}

/// Bhattacharyya parameters of all `2^n` synthesized channels, indexed by
/// source position. The most significant index bit picks the first split.
pub fn bhattacharyya_parameters(stages: usize, z0: f64) -> Vec<f64> {
    let mut z = vec![z0];
    for _ in 0..stages {
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    z
}

/// Frozen mask (`true` = frozen) with exactly `2^n − k` frozen positions.
pub fn construct_frozen_set(stages: usize, k: usize, method: &Construction) -> Result<Vec<bool>> {
    if stages == 0 || stages > MAX_STAGES {
        return Err(Error::InvalidCode(format!(
            "stage count {stages} outside 1..={MAX_STAGES}"
        )));
    }
    let len = 1usize << stages;
    if k > len {
        return Err(Error::InvalidCode(format!(
            "k = {k} exceeds block length {len}"
        )));
    }
    match method {
        Construction::Bhattacharyya { z0 } => {
            if !(*z0 > 0.0 && *z0 < 1.0) {
                return Err(Error::InvalidCode(format!(
                    "design erasure probability {z0} outside (0, 1)"
                )));
            }
            Ok(freeze_least_reliable(&bhattacharyya_parameters(stages, *z0), k))
        }
        Construction::ExternalFile(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_frozen_list(&text, stages, k).map_err(|r| Error::file(path, r))
        }
    }
}

/// Freeze the `len − k` positions with the largest Bhattacharyya parameter.
/// Equal parameters freeze the lower index first.
fn freeze_least_reliable(z: &[f64], k: usize) -> Vec<bool> {
    let len = z.len();
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    let mut mask = vec![false; len];
    for &j in &order[..len - k] {
        mask[j] = true;
    }
    mask
}

/// Parse a frozen list (ignoring blank and `#` lines) and validate it against
/// `(n, k)`.
fn parse_frozen_list(text: &str, stages: usize, k: usize) -> std::result::Result<Vec<bool>, String> {
    if stages == 0 || stages > MAX_STAGES {
        return Err(format!("stage count {stages} outside 1..={MAX_STAGES}"));
    }
    let len = 1usize << stages;
    if k > len {
        return Err(format!("k = {k} exceeds block length {len}"));
    }
    let mut mask = vec![false; len];
    let mut prev: Option<usize> = None;
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let idx: usize = line
            .parse()
            .map_err(|_| format!("line {}: '{line}' is not an index", lineno + 1))?;
        if idx >= len {
            return Err(format!("line {}: index {idx} >= N = {len}", lineno + 1));
        }
        if prev.is_some_and(|p| idx <= p) {
            return Err(format!("line {}: indices not strictly ascending", lineno + 1));
        }
        prev = Some(idx);
        mask[idx] = true;
        count += 1;
    }
    if count != len - k {
        return Err(format!(
            "found {count} frozen positions, expected N - K = {}",
            len - k
        ));
    }
    Ok(mask)
}
