//! Iterative exploration-input design: linearize the quadratic data terms
//! at a candidate, solve the resulting SDP for minimum-energy amplitudes,
//! re-linearize at the solution, and repeat until the candidate stops
//! moving. A Gaussian credibility-region baseline designer reuses the same
//! loop with the Gram-matrix condition in place of the full data condition.

use std::fmt;

use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::lmi::{
    self, basis_responses, relaxation_point, to_gram_lmi_problem, to_lmi_problem, BasisResponses,
    LmiError, LmiProblem,
};
use crate::lti::SystemModel;
use crate::matkit::Mat;
use crate::sdp::{self, SdpError, SolveStatus, SolverConfig};

#[derive(Debug)]
pub enum DesignError {
    Lmi(LmiError),
    Sdp(SdpError),
    /// The relaxed problem stayed infeasible after all candidate restarts.
    SolverInfeasible { iteration: usize },
    /// The solver gave up inside an outer iteration.
    SolverFailed { iteration: usize, status: SolveStatus },
    /// Amplitude rescaling or profiles need at least one nonzero amplitude.
    ZeroDesign,
    Invalid(String),
}

impl fmt::Display for DesignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignError::Lmi(e) => write!(f, "{e}"),
            DesignError::Sdp(e) => write!(f, "{e}"),
            DesignError::SolverInfeasible { iteration } => {
                write!(f, "relaxed problem infeasible at outer iteration {iteration}")
            }
            DesignError::SolverFailed { iteration, status } => {
                write!(f, "solver returned {status} at outer iteration {iteration}")
            }
            DesignError::ZeroDesign => write!(f, "design has no nonzero amplitude"),
            DesignError::Invalid(m) => write!(f, "invalid design spec: {m}"),
        }
    }
}

impl std::error::Error for DesignError {}

impl From<LmiError> for DesignError {
    fn from(e: LmiError) -> Self {
        DesignError::Lmi(e)
    }
}

impl From<SdpError> for DesignError {
    fn from(e: SdpError) -> Self {
        DesignError::Sdp(e)
    }
}

/// Everything the designer needs: initial model, horizon, frequencies,
/// disturbance energy bound, accuracy goal, stopping tolerance on the
/// candidate distance, and the outer iteration budget.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub model0: SystemModel,
    pub horizon: usize,
    pub freqs: Vec<f64>,
    pub gamma_w: f64,
    pub d_des: Mat,
    /// Outer loop stops once ‖ã − a*‖ falls below this.
    pub tol: f64,
    pub max_outer_iters: usize,
    /// Candidate for the first linearization; `None` selects the default
    /// all-ones vector scaled so its total energy matches `gamma_w`.
    pub initial_candidate: Option<Vec<Vec<f64>>>,
    pub solver: SolverConfig,
}

impl DesignSpec {
    pub fn new(
        model0: SystemModel,
        horizon: usize,
        freqs: Vec<f64>,
        gamma_w: f64,
        d_des: Mat,
    ) -> Self {
        DesignSpec {
            model0,
            horizon,
            freqs,
            gamma_w,
            d_des,
            tol: 1e-4,
            max_outer_iters: 30,
            initial_candidate: None,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self) -> Result<(), DesignError> {
        if self.freqs.is_empty() {
            return Err(DesignError::Invalid("at least one frequency".into()));
        }
        if !(self.tol > 0.0) {
            return Err(DesignError::Invalid("tol must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(DesignError::Invalid("max_outer_iters must be positive".into()));
        }
        if !(self.gamma_w > 0.0) {
            return Err(DesignError::Invalid("gamma_w must be positive".into()));
        }
        let q = self.model0.n_x() * self.model0.n_phi();
        if self.d_des.rows() != q || self.d_des.cols() != q {
            return Err(DesignError::Invalid(format!("goal matrix must be {q}×{q}")));
        }
        if let Some(cand) = &self.initial_candidate {
            if cand.len() != self.freqs.len()
                || cand.iter().any(|a| a.len() != self.model0.n_u())
            {
                return Err(DesignError::Invalid("candidate shape".into()));
            }
        }
        Ok(())
    }

    /// The configured or default initial candidate.
    pub fn candidate(&self) -> Vec<Vec<f64>> {
        match &self.initial_candidate {
            Some(c) => c.clone(),
            None => {
                let l = self.freqs.len();
                let n_u = self.model0.n_u();
                let s = (self.gamma_w / (l * n_u) as f64).sqrt();
                vec![vec![s; n_u]; l]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMethod {
    Nonstochastic,
    StochasticBaseline,
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignMethod::Nonstochastic => write!(f, "nonstochastic"),
            DesignMethod::StochasticBaseline => write!(f, "stochastic-baseline"),
        }
    }
}

/// One outer iteration: optimal objective and how far the solution moved
/// from the candidate it was linearized at.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub objective: f64,
    pub candidate_distance: f64,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub amps: Vec<Vec<f64>>,
    pub gamma_e: f64,
    pub outer_iterations: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub method: DesignMethod,
}

impl DesignResult {
    /// Total squared amplitude Σ‖a_i‖².
    pub fn energy(&self) -> f64 {
        self.amps.iter().flat_map(|a| a.iter().map(|v| v * v)).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let r12 = crate::experiments::round_sig;
        json!({
            "amplitudes": self.amps.iter()
                .map(|a| a.iter().map(|&v| r12(v)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "gamma_e": r12(self.gamma_e),
            "profile": relative_energy_profile(&self.amps).unwrap_or_default()
                .iter().map(|&v| r12(v)).collect::<Vec<_>>(),
            "iterations": self.outer_iterations,
            "history": self.history.iter().map(|h| json!({
                "objective": r12(h.objective),
                "candidate_distance": r12(h.candidate_distance),
            })).collect::<Vec<_>>(),
            "converged": self.converged,
            "method": self.method.to_string(),
        })
    }
}

/// Design exploration amplitudes so the collected data certifies the
/// accuracy goal under any disturbance within the energy bound.
pub fn design_nonstochastic(spec: &DesignSpec) -> Result<DesignResult, DesignError> {
    spec.validate()?;
    let br = basis_responses(&spec.model0, &spec.freqs, spec.horizon)?;
    let d_half = lmi::goal_half(&spec.d_des)?;
    run_loop(spec, &br, DesignMethod::Nonstochastic, |candidate| {
        let rp = relaxation_point(&br, candidate, &d_half)?;
        to_lmi_problem(&br, &rp, spec.gamma_w, &spec.d_des)
    })
}

/// Baseline designer under a Gaussian disturbance story: require the
/// predicted information matrix to dominate the chi-squared credibility
/// threshold, `(Φ̂Φ̂ᵀ)⊗I ⪰ c_δ σ_w² D_des`, relaxed and iterated the same
/// way as the main designer.
pub fn design_stochastic_baseline(
    spec: &DesignSpec,
    sigma_w2: f64,
    delta: f64,
) -> Result<DesignResult, DesignError> {
    spec.validate()?;
    if !(sigma_w2 > 0.0) {
        return Err(DesignError::Invalid("sigma_w2 must be positive".into()));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(DesignError::Invalid("delta must lie in (0,1)".into()));
    }
    let br = basis_responses(&spec.model0, &spec.freqs, spec.horizon)?;
    let q = br.q();
    let c_delta = chi_squared_quantile(q as f64, 1.0 - delta)?;
    let tau = c_delta * sigma_w2;
    run_loop(spec, &br, DesignMethod::StochasticBaseline, |candidate| {
        let (l1, _) = lmi::assemble_phi_x(&br, candidate)?;
        to_gram_lmi_problem(&br, &l1, tau, &spec.d_des)
    })
}

fn run_loop(
    spec: &DesignSpec,
    br: &BasisResponses,
    method: DesignMethod,
    build: impl Fn(&[Vec<f64>]) -> Result<LmiProblem, LmiError>,
) -> Result<DesignResult, DesignError> {
    let mut candidate = spec.candidate();
    let mut history = Vec::new();
    let mut converged = false;
    let mut amps = candidate.clone();
    let mut gamma_e = f64::INFINITY;
    let mut outer = 0;

    while outer < spec.max_outer_iters {
        outer += 1;
        // An infeasible linearization far from a good point is repaired by
        // inflating the candidate and retrying.
        let mut restarts = 0;
        let res = loop {
            let p = build(&candidate)?;
            let r = sdp::solve(&p, &spec.solver)?;
            match r.status {
                SolveStatus::Optimal => break r,
                SolveStatus::Infeasible if restarts < 5 => {
                    restarts += 1;
                    for a in &mut candidate {
                        for v in a.iter_mut() {
                            *v *= 1.5;
                        }
                    }
                }
                SolveStatus::Infeasible => {
                    return Err(DesignError::SolverInfeasible { iteration: outer })
                }
                status => return Err(DesignError::SolverFailed { iteration: outer, status }),
            }
        };
        let a_star = group_amps(&res.z[1..], br.n_u());
        let dist = distance(&candidate, &a_star);
        history.push(IterationRecord { objective: res.objective, candidate_distance: dist });
        gamma_e = res.objective;
        amps = a_star.clone();
        candidate = a_star;
        if dist <= spec.tol {
            converged = true;
            break;
        }
    }
    Ok(DesignResult { amps, gamma_e, outer_iterations: outer, history, converged, method })
}

/// Scale a design so its total squared amplitude matches `target_energy`.
pub fn rescale_to_energy(
    d: &DesignResult,
    target_energy: f64,
) -> Result<DesignResult, DesignError> {
    let energy = d.energy();
    if energy <= 0.0 {
        return Err(DesignError::ZeroDesign);
    }
    let s = (target_energy / energy).sqrt();
    let mut out = d.clone();
    for a in &mut out.amps {
        for v in a.iter_mut() {
            *v *= s;
        }
    }
    out.gamma_e *= s;
    Ok(out)
}

/// Normalized energy distribution ‖a_i‖²/Σ_j‖a_j‖² over the frequencies.
pub fn relative_energy_profile(amps: &[Vec<f64>]) -> Result<Vec<f64>, DesignError> {
    let energies: Vec<f64> = amps.iter().map(|a| a.iter().map(|v| v * v).sum()).collect();
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return Err(DesignError::ZeroDesign);
    }
    Ok(energies.iter().map(|e| e / total).collect())
}

fn group_amps(flat: &[f64], n_u: usize) -> Vec<Vec<f64>> {
    flat.chunks(n_u).map(|c| c.to_vec()).collect()
}

fn distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn chi_squared_quantile(dof: f64, p: f64) -> Result<f64, DesignError> {
    let dist = ChiSquared::new(dof)
        .map_err(|e| DesignError::Invalid(format!("chi-squared dof: {e}")))?;
    Ok(dist.inverse_cdf(p))
}
