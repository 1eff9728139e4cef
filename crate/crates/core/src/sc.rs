//! Successive cancellation (SC) and SC list (SCL) decoders.
//!
//! Both walk the code tree in natural order: the first half of `u` is the
//! left subtree of the root, matching `x = u·F^{⊗n}` without bit reversal.
//! SC is written recursively, SCL iteratively over leaves with per-path
//! LLR and partial-sum buffers, so the two are independent implementations.

use crate::bp::Kernel;
use crate::code::PolarCode;
use crate::{saturate, Error, Result};

fn check_len(code: &PolarCode, llr: &[f64]) -> Result<()> {
    if llr.len() != code.len() {
        return Err(Error::LengthMismatch {
            expected: code.len(),
            actual: llr.len(),
        });
    }
    Ok(())
}

#[inline]
fn decide(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// SC decoding; returns the full source estimate `û` (frozen positions 0).
pub fn sc_decode(code: &PolarCode, llr: &[f64], kernel: Kernel) -> Result<Vec<u8>> {
    check_len(code, llr)?;
    let mut u = vec![0u8; code.len()];
    let channel: Vec<f64> = llr.iter().map(|&v| saturate(v)).collect();
    sc_node(code, &channel, 0, kernel, &mut u);
    Ok(u)
}

/// Decodes the subtree covering `u[offset..offset + llr.len()]` and returns
/// its re-encoded codeword.
fn sc_node(code: &PolarCode, llr: &[f64], offset: usize, kernel: Kernel, u: &mut [u8]) -> Vec<u8> {
    if llr.len() == 1 {
        let bit = if code.is_frozen(offset) { 0 } else { decide(llr[0]) };
        u[offset] = bit;
        return vec![bit];
    }
    let half = llr.len() / 2;
    let (top, bottom) = llr.split_at(half);
    let left: Vec<f64> = top
        .iter()
        .zip(bottom)
        .map(|(&a, &b)| saturate(kernel.apply(a, b)))
        .collect();
    let left_cw = sc_node(code, &left, offset, kernel, u);
    let right: Vec<f64> = top
        .iter()
        .zip(bottom)
        .zip(&left_cw)
        .map(|((&a, &b), &c)| saturate(if c == 0 { b + a } else { b - a }))
        .collect();
    let right_cw = sc_node(code, &right, offset + half, kernel, u);
    let mut cw: Vec<u8> = left_cw.iter().zip(&right_cw).map(|(a, b)| a ^ b).collect();
    cw.extend_from_slice(&right_cw);
    cw
}

#[derive(Debug, Clone)]
struct Path {
    /// `llr[d]` holds the LLRs of the current node at depth `d` (length `N >> d`).
    llr: Vec<Vec<f64>>,
    /// Codeword of the finished left child at depth `d`.
    left_cw: Vec<Vec<u8>>,
    u: Vec<u8>,
    metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    pub bits: Vec<u8>,
    /// Metric of the selected path.
    pub metric: f64,
    /// Final metrics of all surviving paths, in path order.
    pub survivor_metrics: Vec<f64>,
    /// Surviving path count after each information bit.
    pub survivors: Vec<usize>,
}

/// SCL decoding with an LLR-based path metric: a decision against the sign
/// of its leaf LLR costs `|LLR|`. Returns the surviving path with the
/// smallest metric, lower path index on ties.
pub fn scl_decode(code: &PolarCode, llr: &[f64], list_size: usize, kernel: Kernel) -> Result<SclOutput> {
    check_len(code, llr)?;
    if list_size == 0 {
        return Err(Error::Config("list size must be at least 1".into()));
    }
    let n = code.stages();
    let len = code.len();
    let root = Path {
        llr: (0..=n)
            .map(|d| {
                if d == 0 {
                    llr.iter().map(|&v| saturate(v)).collect()
                } else {
                    vec![0.0; len >> d]
                }
            })
            .collect(),
        left_cw: (0..=n).map(|d| vec![0u8; len >> d]).collect(),
        u: vec![0u8; len],
        metric: 0.0,
    };
    let mut paths = vec![root];
    let mut survivors = Vec::with_capacity(code.info_len());

    for phi in 0..len {
        let first = if phi == 0 {
            1
        } else {
            n - phi.trailing_zeros() as usize
        };
        for path in paths.iter_mut() {
            descend(path, phi, first, n, kernel);
        }
        if code.is_frozen(phi) {
            for path in paths.iter_mut() {
                let lam = path.llr[n][0];
                path.metric += penalty(lam, 0);
                commit(path, phi, 0, n);
            }
            continue;
        }
        // Candidates in (path, bit) order; a stable sort keeps that order on ties.
        let mut cands: Vec<(usize, u8, f64)> = Vec::with_capacity(2 * paths.len());
        for (p, path) in paths.iter().enumerate() {
            let lam = path.llr[n][0];
            for bit in [0u8, 1] {
                cands.push((p, bit, path.metric + penalty(lam, bit)));
            }
        }
        cands.sort_by(|a, b| a.2.total_cmp(&b.2));
        cands.truncate(list_size);
        cands.sort_by_key(|&(p, bit, _)| (p, bit));
        paths = cands
            .iter()
            .map(|&(p, bit, metric)| {
                let mut child = paths[p].clone();
                child.metric = metric;
                commit(&mut child, phi, bit, n);
                child
            })
            .collect();
        survivors.push(paths.len());
    }

    let mut best = 0;
    for (i, p) in paths.iter().enumerate() {
        if p.metric < paths[best].metric {
            best = i;
        }
    }
    Ok(SclOutput {
        bits: paths[best].u.clone(),
        metric: paths[best].metric,
        survivor_metrics: paths.iter().map(|p| p.metric).collect(),
        survivors,
    })
}

#[inline]
fn penalty(llr: f64, bit: u8) -> f64 {
    if decide(llr) == bit {
        0.0
    } else {
        llr.abs()
    }
}

/// Refresh LLRs from depth `first` down to the leaf of `phi`. Depth `first`
/// is a right child (unless `phi == 0`), every deeper node a left child.
fn descend(path: &mut Path, phi: usize, first: usize, n: usize, kernel: Kernel) {
    for d in first..=n {
        let half = path.llr[d].len();
        let (upper, lower) = path.llr.split_at_mut(d);
        let parent = &upper[d - 1];
        let node = &mut lower[0];
        let right = phi != 0 && d == first;
        if right {
            let cw = &path.left_cw[d];
            for k in 0..half {
                let (a, b) = (parent[k], parent[k + half]);
                node[k] = saturate(if cw[k] == 0 { b + a } else { b - a });
            }
        } else {
            for k in 0..half {
                node[k] = saturate(kernel.apply(parent[k], parent[k + half]));
            }
        }
    }
}

/// Record decision `bit` for leaf `phi` and push partial sums upwards.
fn commit(path: &mut Path, phi: usize, bit: u8, n: usize) {
    path.u[phi] = bit;
    let mut cw = vec![bit];
    let mut d = n;
    while d > 0 {
        let is_right = (phi >> (n - d)) & 1 == 1;
        if !is_right {
            path.left_cw[d] = cw;
            return;
        }
        let left = &path.left_cw[d];
        let mut parent: Vec<u8> = left.iter().zip(&cw).map(|(a, b)| a ^ b).collect();
        parent.extend_from_slice(&cw);
        cw = parent;
        d -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::noiseless_llr;
    use crate::LLR_SAT;

    #[test]
    fn zero_codeword_noiseless() {
        let code = PolarCode::bhattacharyya(5, 16).unwrap();
        let llr = vec![LLR_SAT; 32];
        assert!(sc_decode(&code, &llr, Kernel::Exact).unwrap().iter().all(|&b| b == 0));
        let out = scl_decode(&code, &llr, 4, Kernel::Exact).unwrap();
        assert!(out.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn full_rate_two_saturated() {
        let code = PolarCode::from_frozen_mask(vec![false, false]).unwrap();
        assert_eq!(sc_decode(&code, &[LLR_SAT, LLR_SAT], Kernel::Exact).unwrap(), vec![0, 0]);
    }

    #[test]
    fn exhaustive_eight_four() {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        for m in 0..16u8 {
            let info: Vec<u8> = (0..4).map(|b| (m >> b) & 1).collect();
            let u = code.source_word(&info).unwrap();
            let llr = noiseless_llr(&code.encode(&info).unwrap());
            for kernel in [Kernel::Exact, Kernel::MinSum] {
                assert_eq!(sc_decode(&code, &llr, kernel).unwrap(), u);
                for list in [1, 2, 4, 8] {
                    assert_eq!(scl_decode(&code, &llr, list, kernel).unwrap().bits, u);
                }
            }
        }
    }

    #[test]
    fn survivor_counts_double_until_full() {
        let code = PolarCode::bhattacharyya(5, 16).unwrap();
        let llr: Vec<f64> = (0..32).map(|j| ((j * 7 % 11) as f64 - 5.0) * 0.4).collect();
        let out = scl_decode(&code, &llr, 8, Kernel::Exact).unwrap();
        let mut prev = 1;
        for &s in &out.survivors {
            assert_eq!(s, (2 * prev).min(8));
            prev = s;
        }
        assert!(out.survivor_metrics.iter().all(|m| m.is_finite() && *m >= 0.0));
        assert_eq!(out.metric, out.survivor_metrics.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn rejects_bad_input() {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        assert!(sc_decode(&code, &[0.0; 4], Kernel::Exact).is_err());
        assert!(scl_decode(&code, &[0.0; 8], 0, Kernel::Exact).is_err());
    }
}
