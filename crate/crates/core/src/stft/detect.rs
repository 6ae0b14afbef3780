//! Wave-front detection from STFT decay along rays.
//!
//! Per direction θ the cone maximum of `|V(rθ)|` over dyadic radii is fitted
//! against `log r`. The fit is a finite-range heuristic: it separates the
//! desk-scale examples but does not certify the asymptotic order.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::transform::PhaseSpaceField;
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::wavefront::{ConicAtom, ConicSet};

const EXPONENT_CAP: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectParams {
    /// Directions per full turn.
    pub ang_grid: usize,
    pub shells: usize,
    /// Largest radius; `0.4 ×` the smallest phase-space extent when absent.
    pub r_max: Option<f64>,
    /// Cone half-angle in units of `π / ang_grid`.
    pub cone_factor: f64,
    /// Directions with fitted decay order below this are singular.
    pub n_reg: f64,
    /// Values below `floor × max |V|` are excluded from fits.
    pub floor: f64,
    /// Sobolev order for the weighted-tail test; rapid-decay test when absent.
    pub s: Option<f64>,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            ang_grid: 64,
            shells: 5,
            r_max: None,
            cone_factor: 3.0,
            n_reg: 4.0,
            floor: 1e-14,
            s: None,
        }
    }
}

impl DetectParams {
    pub fn cone_half_angle(&self) -> f64 {
        self.cone_factor * PI / self.ang_grid as f64
    }

    pub fn resolution(&self) -> f64 {
        PI / self.ang_grid as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedFan {
    pub dir: Vec<f64>,
    #[serde(rename = "N_hat")]
    pub n_hat: f64,
    pub s_hat: f64,
    pub confidence: f64,
    /// Largest angle from `dir` to a grid direction of the cluster.
    pub spread: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WFReport {
    pub schema: u32,
    pub mode: String,
    pub fans: Vec<DetectedFan>,
    pub radii: Vec<f64>,
    pub cone_half_angle: f64,
    pub params: DetectParams,
    pub directions: usize,
    pub singular_directions: usize,
    /// Directions fitted on fewer than 4 radii.
    pub flagged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isometry_residual: Option<f64>,
}

impl WFReport {
    pub fn is_empty(&self) -> bool {
        self.fans.is_empty()
    }

    /// Fan centres as a conic set with the given angular radius.
    pub fn to_conic_set(&self, n: usize, radius: f64) -> Result<ConicSet> {
        if self.fans.is_empty() {
            return Ok(ConicSet::empty(2 * n));
        }
        let dirs = self.fans.iter().map(|f| DVector::from_vec(f.dir.clone())).collect();
        ConicSet::new(2 * n, vec![ConicAtom::fan(dirs, radius)?], None)
    }
}

/// Equi-angular directions on `S^{2n−1}` in `(x, ξ)` coordinates.
pub fn direction_grid(n: usize, ang_grid: usize) -> Vec<DVector<f64>> {
    match n {
        1 => (0..ang_grid)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / ang_grid as f64;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            // Hopf coordinates pairing (x1, ξ1) and (x2, ξ2)
            let m = (ang_grid / 4).max(1);
            let mut out = Vec::new();
            for j in 0..=m {
                let th = j as f64 * 0.5 * PI / m as f64;
                let (c, s) = (th.cos(), th.sin());
                let k1 = ((ang_grid as f64 * c).round() as usize).max(1);
                let k2 = ((ang_grid as f64 * s).round() as usize).max(1);
                for a in 0..k1 {
                    let p1 = 2.0 * PI * a as f64 / k1 as f64;
                    for b in 0..k2 {
                        let p2 = 2.0 * PI * b as f64 / k2 as f64;
                        out.push(DVector::from_vec(vec![
                            c * p1.cos(),
                            s * p2.cos(),
                            c * p1.sin(),
                            s * p2.sin(),
                        ]));
                    }
                }
            }
            out
        }
    }
}

fn neighbours(dirs: &[DVector<f64>], angle: f64) -> Vec<Vec<usize>> {
    // bucket by chord length so only adjacent cells are compared
    let cos_lim = angle.cos();
    let cell = 2.0 * (0.5 * angle).sin() + 1e-9;
    let key = |d: &DVector<f64>| -> Vec<i32> { d.iter().map(|v| (v / cell).floor() as i32).collect() };
    let mut buckets: HashMap<Vec<i32>, Vec<usize>> = HashMap::new();
    for (i, d) in dirs.iter().enumerate() {
        buckets.entry(key(d)).or_default().push(i);
    }
    let dim = dirs.first().map_or(0, |d| d.len());
    let offsets: Vec<Vec<i32>> = (0..3usize.pow(dim as u32))
        .map(|mut code| {
            (0..dim)
                .map(|_| {
                    let o = (code % 3) as i32 - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let idx: Vec<usize> = (0..dirs.len()).collect();
    crate::par_map(&idx, |&i| {
        let base = key(&dirs[i]);
        let mut out: Vec<usize> = offsets
            .iter()
            .filter_map(|o| {
                let k: Vec<i32> = base.iter().zip(o).map(|(a, b)| a + b).collect();
                buckets.get(&k)
            })
            .flatten()
            .copied()
            .filter(|&j| dirs[i].dot(&dirs[j]) >= cos_lim - 1e-12)
            .collect();
        out.sort_unstable();
        out
    })
}

fn fit_slope(logr: &[f64], logv: &[f64]) -> f64 {
    let k = logr.len() as f64;
    let mr = logr.iter().sum::<f64>() / k;
    let mv = logv.iter().sum::<f64>() / k;
    let num: f64 = logr.iter().zip(logv).map(|(r, v)| (r - mr) * (v - mv)).sum();
    let den: f64 = logr.iter().map(|r| (r - mr).powi(2)).sum();
    num / den
}

/// Gauss-Legendre nodes and weights on [−1, 1] by Golub-Welsch.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = RMat::zeros(k, k);
    for i in 1..k {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

struct Fit {
    n_hat: f64,
    usable: usize,
}

fn fit_direction(values: &[f64], radii: &[f64], cut: f64) -> Fit {
    let last = values.len() - 1;
    let usable: Vec<usize> = (0..values.len()).filter(|&j| values[j] > cut).collect();
    if !usable.contains(&last) {
        // decays below the floor within the radial range
        return Fit {
            n_hat: EXPONENT_CAP,
            usable: usable.len(),
        };
    }
    if usable.len() < 2 {
        return Fit {
            n_hat: 0.0,
            usable: usable.len(),
        };
    }
    let logr: Vec<f64> = usable.iter().map(|&j| radii[j].ln()).collect();
    let logv: Vec<f64> = usable.iter().map(|&j| values[j].ln()).collect();
    Fit {
        n_hat: (-fit_slope(&logr, &logv)).clamp(-EXPONENT_CAP, EXPONENT_CAP),
        usable: usable.len(),
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

fn tangent_basis(c: &DVector<f64>) -> RMat {
    let row = RMat::from_row_slice(1, c.len(), c.as_slice());
    linalg::null_space(&row, 1e-12)
}

pub fn detect_wf(field: &dyn PhaseSpaceField, params: &DetectParams) -> Result<WFReport> {
    let n = field.n();
    if n == 1 && params.ang_grid < 64 {
        return Err(Error::Invalid(format!(
            "ang_grid {} below 64 for n = 1",
            params.ang_grid
        )));
    }
    if params.ang_grid < 16 || params.shells < 3 {
        return Err(Error::Invalid(
            "detector needs ang_grid >= 16 and at least 3 shells".into(),
        ));
    }
    let min_extent = field.extent().into_iter().fold(f64::INFINITY, f64::min);
    let r_max = params.r_max.unwrap_or(0.4 * min_extent);
    if !(r_max > 0.0) || r_max > 0.5 * min_extent {
        return Err(Error::Invalid(format!(
            "largest radius {r_max} outside the resolved half-extent {}",
            0.5 * min_extent
        )));
    }
    let radii: Vec<f64> = (0..params.shells)
        .map(|j| r_max / 2f64.powi((params.shells - 1 - j) as i32))
        .collect();
    let dirs = direction_grid(n, params.ang_grid);
    let nd = dirs.len();
    let nr = radii.len();
    let points: Vec<Vec<f64>> = dirs
        .iter()
        .flat_map(|d| radii.iter().map(move |&r| (d * r).iter().copied().collect()))
        .collect();
    let raw: Vec<f64> = field.eval_many(&points).into_iter().map(|z| z.norm()).collect();
    let vmax = raw.iter().copied().fold(0.0, f64::max);
    let cut = params.floor * vmax;
    let cone_nb = neighbours(&dirs, params.cone_half_angle());
    let cone: Vec<Vec<f64>> = (0..nd)
        .map(|d| {
            (0..nr)
                .map(|j| cone_nb[d].iter().map(|&e| raw[e * nr + j]).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    let fits: Vec<Fit> = cone.iter().map(|v| fit_direction(v, &radii, cut)).collect();
    let flagged = fits.iter().filter(|f| f.usable < 4).count();

    // weighted shell masses for the s-order test
    let s_crit: Option<Vec<f64>> = if params.s.is_some() {
        let (gx, gw) = gauss_legendre(6);
        let mut shell_pts: Vec<(usize, f64, f64)> = Vec::new(); // (shell, r, weight)
        for shell in [nr - 2, nr - 1] {
            let (a, b) = (radii[shell - 1], radii[shell]);
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                shell_pts.push((shell, r, 0.5 * (b - a) * w * r.powi(2 * n as i32 - 1)));
            }
        }
        let pts: Vec<Vec<f64>> = dirs
            .iter()
            .flat_map(|d| {
                shell_pts
                    .iter()
                    .map(move |&(_, r, _)| (d * r).iter().copied().collect())
            })
            .collect();
        let mags: Vec<f64> = field.eval_many(&pts).into_iter().map(|z| z.norm_sqr()).collect();
        let per = shell_pts.len();
        let crit = (0..nd)
            .map(|d| {
                let mass = |s: f64, shell: usize| -> f64 {
                    cone_nb[d]
                        .iter()
                        .map(|&e| {
                            shell_pts
                                .iter()
                                .enumerate()
                                .filter(|(_, p)| p.0 == shell)
                                .map(|(q, &(_, r, w))| w * (1.0 + r * r).powf(s) * mags[e * per + q])
                                .sum::<f64>()
                        })
                        .sum()
                };
                let g = |s: f64| {
                    let (hi, lo) = (mass(s, nr - 1), mass(s, nr - 2));
                    if lo <= 0.0 {
                        f64::INFINITY
                    } else {
                        hi.ln() - lo.ln()
                    }
                };
                let (mut a, mut b) = (-40.0, 40.0);
                if g(a) >= 0.0 {
                    return a;
                }
                if !(g(b) >= 0.0) {
                    return b;
                }
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if g(mid) >= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                b
            })
            .collect();
        Some(crit)
    } else {
        None
    };

    let singular: Vec<bool> = (0..nd)
        .map(|d| match (params.s, &s_crit) {
            (Some(s), Some(crit)) => s >= crit[d],
            _ => fits[d].n_hat < params.n_reg,
        })
        .collect();

    // cluster adjacent singular directions
    let adj_angle = 1.6 * 2.0 * PI / params.ang_grid as f64;
    let adj = neighbours(&dirs, adj_angle);
    let mut parent: Vec<usize> = (0..nd).collect();
    for d in (0..nd).filter(|&d| singular[d]) {
        for &e in adj[d].iter().filter(|&&e| singular[e]) {
            let (a, b) = (find(&mut parent, d), find(&mut parent, e));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for d in (0..nd).filter(|&d| singular[d]) {
        let root = find(&mut parent, d);
        clusters.entry(root).or_default().push(d);
    }

    let log_floor = cut.max(f64::MIN_POSITIVE).ln();
    let score = |dir: &DVector<f64>| -> f64 {
        let pts: Vec<Vec<f64>> = radii.iter().map(|&r| (dir * r).iter().copied().collect()).collect();
        field.eval_many(&pts).iter().map(|z| z.norm().ln().max(log_floor)).sum()
    };
    let mut fans = Vec::new();
    for members in clusters.values() {
        let grid_score = |d: usize| -> f64 { (0..nr).map(|j| raw[d * nr + j].ln().max(log_floor)).sum() };
        let start = *members
            .iter()
            .max_by(|&&a, &&b| grid_score(a).total_cmp(&grid_score(b)))
            .expect("cluster is nonempty");
        let mut centre = dirs[start].clone();
        let mut best = score(&centre);
        let mut step = 2.0 * PI / params.ang_grid as f64;
        for _round in 0..6 {
            let basis = tangent_basis(&centre);
            for t in basis.column_iter() {
                let plus = (&centre + t * step.tan()).normalize();
                let minus = (&centre - t * step.tan()).normalize();
                let (fp, fm) = (score(&plus), score(&minus));
                let curv = fp + fm - 2.0 * best;
                let shift = if curv < 0.0 {
                    (0.5 * (fm - fp) / curv * step).clamp(-step, step)
                } else if fp > fm {
                    step
                } else {
                    -step
                };
                let cand = (&centre + t * shift.tan()).normalize();
                let fc = score(&cand);
                if fc > best {
                    centre = cand;
                    best = fc;
                }
            }
            step /= 2.5;
        }
        let vals: Vec<f64> = {
            let pts: Vec<Vec<f64>> = radii.iter().map(|&r| (&centre * r).iter().copied().collect()).collect();
            field.eval_many(&pts).iter().map(|z| z.norm()).collect()
        };
        let fit = fit_direction(&vals, &radii, cut);
        let nearest = *members
            .iter()
            .max_by(|&&a, &&b| dirs[a].dot(&centre).total_cmp(&dirs[b].dot(&centre)))
            .expect("cluster is nonempty");
        let s_hat = match &s_crit {
            Some(c) => c[nearest],
            None => fit.n_hat - n as f64,
        };
        let spread = members
            .iter()
            .map(|&d| dirs[d].dot(&centre).clamp(-1.0, 1.0).acos())
            .fold(0.0, f64::max);
        let confidence = match params.s {
            Some(s) => (1.0 - (-(s - s_hat).max(0.0)).exp()).clamp(0.0, 1.0),
            None => ((params.n_reg - fit.n_hat) / params.n_reg).clamp(0.0, 1.0),
        };
        fans.push(DetectedFan {
            dir: centre.iter().copied().collect(),
            n_hat: fit.n_hat,
            s_hat,
            confidence,
            spread,
            members: members.len(),
        });
    }
    fans.sort_by(|a, b| {
        a.dir
            .iter()
            .zip(&b.dir)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(WFReport {
        schema: 1,
        mode: if params.s.is_some() { "s-order" } else { "rapid-decay" }.into(),
        fans,
        radii,
        cone_half_angle: params.cone_half_angle(),
        params: *params,
        directions: nd,
        singular_directions: singular.iter().filter(|&&s| s).count(),
        flagged,
        isometry_residual: None,
    })
}
