use serde::{Deserialize, Serialize};

use super::rules::{check_loss, Derived, OrderLedger};
use super::{ConicSet, ANG_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::symplectic::{FlowKind, HamiltonMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Growth order of the datum.
    pub r0: f64,
    /// Loss margin: `μ = 2(n + r0) + eps`.
    pub eps: f64,
    pub ang_tol: f64,
}

impl PropagationParams {
    pub fn for_dimension(n: usize) -> Self {
        Self {
            r0: n as f64 + 0.1,
            eps: 0.1,
            ang_tol: ANG_TOL,
        }
    }
}

fn check_inputs(f: &HamiltonMap, u0: &ConicSet, t: f64) -> Result<()> {
    if u0.dim() != 2 * f.n() {
        return Err(Error::Invalid(format!(
            "initial set lives in R^{} but the Hamilton map acts on R^{}",
            u0.dim(),
            2 * f.n()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Invalid(format!("propagation time {t} must be finite and >= 0")));
    }
    Ok(())
}

/// `(e^{2t Im F}(WF(u0) ∩ S)) ∩ S` with loss `μ = 2(n + r0) + ε`.
pub fn predict_propagation(
    f: &HamiltonMap,
    singular: &RMat,
    u0: &ConicSet,
    t: f64,
    params: PropagationParams,
) -> Result<Derived> {
    check_inputs(f, u0, t)?;
    let n = f.n();
    let threshold = 2.0 * (n as f64 + params.r0);
    let mu = threshold + params.eps;
    check_loss("propagation", mu, threshold)?;
    let flow = f.flow_exp(t, FlowKind::ImaginaryPart).real();
    let cond = linalg::condition_number(&flow);
    let mut cones = Vec::new();
    for c in u0.cores() {
        let cut = c.intersect_subspace(singular, params.ang_tol);
        if cut.is_trivial() {
            continue;
        }
        let moved = cut.map(&flow, Some(cond))?;
        let back = moved.intersect_subspace(singular, params.ang_tol);
        if !back.is_trivial() {
            cones.push(back);
        }
    }
    let mut ledger = OrderLedger::new("propagation");
    ledger.s = u0.order();
    ledger.r0 = Some(params.r0);
    ledger.mu = Some(mu);
    ledger.threshold = Some(threshold);
    ledger.output_order = u0.order().map(|s| s - mu);
    Ok(Derived {
        set: ConicSet::from_cones(2 * n, cones, ledger.output_order),
        ledger,
        notes: vec![format!("flow condition number {cond:.3e}")],
    })
}

/// `e^{−2itF}(WF(u0) ∩ Ker_R Im e^{−2itF})`, acting by the real part on the kernel.
pub fn coarse_prediction(f: &HamiltonMap, u0: &ConicSet, t: f64, tol_rank: f64) -> Result<Derived> {
    check_inputs(f, u0, t)?;
    let n = f.n();
    let flow = f.flow_exp(t, FlowKind::Full);
    let kernel = linalg::null_space(&flow.imag(), tol_rank);
    let re = flow.real();
    let mut cones = Vec::new();
    let mut notes = Vec::new();
    if kernel.ncols() > 0 {
        for c in u0.cores() {
            let cut = c.intersect_subspace(&kernel, ANG_TOL);
            if cut.is_trivial() {
                continue;
            }
            match cut.map(&re, None) {
                Ok(img) if !img.is_trivial() => cones.push(img),
                Ok(_) => {}
                Err(Error::FanRadius(r)) => notes.push(format!("dropped a fan with image radius {r:.3}")),
                Err(e) => return Err(e),
            }
        }
    }
    let mut ledger = OrderLedger::new("coarse-propagation");
    ledger.s = u0.order();
    ledger.output_order = u0.order();
    Ok(Derived {
        set: ConicSet::from_cones(2 * n, cones, None),
        ledger,
        notes,
    })
}
