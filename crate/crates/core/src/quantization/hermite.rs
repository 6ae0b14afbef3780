use std::collections::HashMap;

use crate::linalg::RMat;

/// Values `h_k(x)` for `k = 0..=k_max` of the L²-normalized Hermite functions.
///
/// The recurrence runs on the polynomial part with the Gaussian factor applied
/// at the end; a running log-scale keeps large `k` finite.
pub fn hermite_functions(k_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    let mut log_scale = 0.0_f64;
    let mut prev = 0.0_f64;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut raw = vec![(cur, 0.0); k_max + 1];
    for k in 0..k_max {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
        raw[k + 1] = (cur, log_scale);
    }
    let gauss = -0.5 * x * x;
    for (k, &(v, ls)) in raw.iter().enumerate() {
        out[k] = if v == 0.0 { 0.0 } else { v * (gauss + ls).exp() };
    }
    out
}

/// Table of Hermite functions on sample points: row `k`, column `j`.
pub fn hermite_table(k_max: usize, xs: &[f64]) -> RMat {
    let mut t = RMat::zeros(k_max + 1, xs.len());
    for (j, &x) in xs.iter().enumerate() {
        for (k, v) in hermite_functions(k_max, x).into_iter().enumerate() {
            t[(k, j)] = v;
        }
    }
    t
}

/// Multi-indices `k ∈ N^n` with `|k| ≤ K`, ordered by total degree then
/// lexicographically.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    n: usize,
    k_max: usize,
    indices: Vec<Vec<u16>>,
    lookup: HashMap<Vec<u16>, usize>,
}

impl HermiteBasis {
    pub fn new(n: usize, k_max: usize) -> Self {
        let mut indices = Vec::new();
        for deg in 0..=k_max {
            let mut cur = vec![0u16; n];
            enumerate_degree(n, deg, 0, &mut cur, &mut indices);
        }
        let lookup = indices.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Self {
            n,
            k_max,
            indices,
            lookup,
        }
    }

    /// Default truncation per dimension.
    pub fn default_for(n: usize) -> Self {
        Self::new(n, if n == 1 { 64 } else { 24 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u16>] {
        &self.indices
    }

    pub fn index_of(&self, k: &[u16]) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indices[i].iter().map(|&v| v as usize).sum()
    }

    /// Number of states of degree `≤ K − 2`; they come first in the ordering.
    pub fn interior_len(&self) -> usize {
        let cut = self.k_max.saturating_sub(2);
        self.indices
            .iter()
            .take_while(|k| k.iter().map(|&v| v as usize).sum::<usize>() <= cut)
            .count()
    }
}

fn enumerate_degree(n: usize, remaining: usize, pos: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if pos == n - 1 {
        cur[pos] = remaining as u16;
        out.push(cur.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v as u16;
        enumerate_degree(n, remaining - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}
