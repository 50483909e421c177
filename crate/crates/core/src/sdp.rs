//! Minimize a linear objective over a small variable vector subject to
//! affine positive-semidefinite block constraints.
//!
//! The solver is a primal log-det barrier method: a feasibility phase
//! drives an added slack multiple of the identity negative, then the main
//! phase follows the central path of
//! `t·cᵀz − Σ_b log det F_b(z)`, increasing `t` geometrically until the
//! barrier gap `ν/t` (ν = total block dimension) certifies the requested
//! objective accuracy. Problems here are tiny in the variable count, so the
//! n×n Newton systems are negligible next to the block factorizations.

use std::fmt;

use serde_json::json;

use crate::lmi::LmiProblem;
use crate::matkit::{self, Mat};

#[derive(Debug, Clone, PartialEq)]
pub enum SdpError {
    BadProblem(String),
    Numerical(String),
}

impl fmt::Display for SdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdpError::BadProblem(m) => write!(f, "malformed problem: {m}"),
            SdpError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for SdpError {}

/// Strategy implemented by this solver. Declared in the result output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Barrier,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "barrier")
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Slack on the per-block minimum eigenvalue certificates.
    pub eig_tol: f64,
    /// Strict-feasibility margin used by the feasibility phase.
    pub feas_tol: f64,
    /// Total Newton iteration budget across both phases.
    pub max_iters: usize,
    /// Requested accuracy of the optimal objective.
    pub objective_tol: f64,
    pub strategy: Strategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eig_tol: 1e-7,
            feas_tol: 1e-8,
            max_iters: 5000,
            objective_tol: 1e-6,
            strategy: Strategy::Barrier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Optimal => write!(f, "optimal"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
            SolveStatus::IterationLimit => write!(f, "iteration-limit"),
        }
    }
}

/// Best-effort witness of infeasibility: a unit direction on which the
/// named block stays negative at the best point visited.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    pub block: usize,
    pub direction: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Per-block minimum eigenvalue at `z`.
    pub certificates: Vec<f64>,
    /// Newton iterations spent (both phases).
    pub iterations: usize,
    pub infeasibility: Option<InfeasibilityCertificate>,
    pub strategy: Strategy,
}

impl SolveResult {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "status": self.status.to_string(),
            "z": self.z,
            "objective": self.objective,
            "certificates": self.certificates,
            "iterations": self.iterations,
            "strategy": self.strategy.to_string(),
        });
        if let Some(cert) = &self.infeasibility {
            v["infeasibility"] = json!({
                "block": cert.block,
                "direction": cert.direction,
                "value": cert.value,
            });
        }
        v
    }
}

/// Per-block minimum eigenvalues of the problem evaluated at `z`.
pub fn check_feasible(p: &LmiProblem, z: &[f64]) -> Result<Vec<f64>, SdpError> {
    (0..p.blocks.len())
        .map(|b| {
            matkit::min_eig(&p.eval_block(b, z).symmetrize())
                .map_err(|e| SdpError::Numerical(e.to_string()))
        })
        .collect()
}

const MU: f64 = 20.0;
const CENTER_TOL: f64 = 1e-9;
const MAX_CENTER_STEPS: usize = 80;

/// Minimize the problem's linear objective over its PSD blocks.
///
/// Deterministic: identical problems and configurations produce identical
/// results. An `Optimal` status certifies every block at `-eig_tol` and an
/// objective within roughly `objective_tol` of the barrier's own bound.
pub fn solve(p: &LmiProblem, cfg: &SolverConfig) -> Result<SolveResult, SdpError> {
    validate(p)?;
    let m = p.n_vars();
    let mut iterations = 0usize;

    // Feasibility phase: minimize s over blocks F_b(z) + s·I, starting from
    // z = 0 with s large enough by a Gershgorin bound.
    let mut s0 = 0.0f64;
    for b in &p.blocks {
        s0 = s0.max(-gershgorin_lower(&b.mats[0]));
    }
    let mut zs = vec![0.0; m + 1];
    zs[m] = s0 + 1.0;
    let mut c_ext = vec![0.0; m + 1];
    c_ext[m] = 1.0;
    let margin = cfg.feas_tol.max(1e-12 * (1.0 + s0));

    let phase1 = follow_path(
        p,
        &c_ext,
        true,
        &mut zs,
        cfg,
        &mut iterations,
        Some(-margin),
        cfg.feas_tol,
    )?;
    let strictly_feasible = zs[m] < -margin;
    if !strictly_feasible {
        let z = zs[..m].to_vec();
        let certificates = check_feasible(p, &z)?;
        let infeasibility = worst_direction(p, &z, &certificates)?;
        let status = if phase1 == PathOutcome::IterationLimit {
            SolveStatus::IterationLimit
        } else {
            SolveStatus::Infeasible
        };
        let objective = dot(&p.objective, &z);
        return Ok(SolveResult {
            status,
            z,
            objective,
            certificates,
            iterations,
            infeasibility,
            strategy: cfg.strategy,
        });
    }

    // Main phase from the strictly feasible interior point.
    let mut z = zs[..m].to_vec();
    let outcome = follow_path(
        p,
        &p.objective,
        false,
        &mut z,
        cfg,
        &mut iterations,
        None,
        cfg.objective_tol,
    )?;

    let certificates = check_feasible(p, &z)?;
    let objective = dot(&p.objective, &z);
    let status = match outcome {
        PathOutcome::Converged if certificates.iter().all(|&c| c >= -cfg.eig_tol) => {
            SolveStatus::Optimal
        }
        _ => SolveStatus::IterationLimit,
    };
    Ok(SolveResult {
        status,
        z,
        objective,
        certificates,
        iterations,
        infeasibility: None,
        strategy: cfg.strategy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathOutcome {
    Converged,
    EarlyExit,
    IterationLimit,
}

/// Follow the central path for objective `c` (extended with a slack
/// variable when `slack` is set). Stops when the barrier gap meets
/// `gap_tol`, when the slack coordinate crosses `early_exit`, or when the
/// iteration budget runs out.
#[allow(clippy::too_many_arguments)]
fn follow_path(
    p: &LmiProblem,
    c: &[f64],
    slack: bool,
    z: &mut [f64],
    cfg: &SolverConfig,
    iterations: &mut usize,
    early_exit: Option<f64>,
    gap_tol: f64,
) -> Result<PathOutcome, SdpError> {
    let nu: f64 = p.blocks.iter().map(|b| b.dim as f64).sum();
    let n = z.len();
    let mut t = 1.0;
    loop {
        // Center at the current t.
        let mut centered = false;
        for _ in 0..MAX_CENTER_STEPS {
            if *iterations >= cfg.max_iters {
                return Ok(PathOutcome::IterationLimit);
            }
            if let Some(threshold) = early_exit {
                if z[n - 1] < threshold {
                    return Ok(PathOutcome::EarlyExit);
                }
            }
            *iterations += 1;

            let factors = factor_blocks(p, z, slack)
                .ok_or_else(|| SdpError::Numerical("interior point lost feasibility".into()))?;
            let (g, h) = gradient_hessian(p, z, slack, &factors, t, c);
            let delta = solve_newton(&h, &g)?;
            let lambda2 = -dot(&g, &delta);
            if lambda2 <= 2.0 * CENTER_TOL {
                centered = true;
                break;
            }
            let lambda = lambda2.max(0.0).sqrt();
            let mut alpha = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
            let f_cur = barrier_value(p, z, slack, t, c)
                .ok_or_else(|| SdpError::Numerical("barrier value at infeasible point".into()))?;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> =
                    z.iter().zip(&delta).map(|(zi, di)| zi + alpha * di).collect();
                if let Some(f_trial) = barrier_value(p, &trial, slack, t, c) {
                    if f_trial <= f_cur - 1e-4 * alpha * lambda2 + 1e-12 * f_cur.abs() {
                        z.copy_from_slice(&trial);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Step stalled at numerical precision; treat as centered.
                centered = true;
                break;
            }
        }
        if !centered && *iterations >= cfg.max_iters {
            return Ok(PathOutcome::IterationLimit);
        }
        let scale = dot(c, z).abs().max(1.0);
        if nu / t <= gap_tol * scale {
            return Ok(PathOutcome::Converged);
        }
        t *= MU;
    }
}

struct BlockFactor {
    /// Upper Cholesky factor of the block at the current point.
    r: Mat,
}

fn factor_blocks(p: &LmiProblem, z: &[f64], slack: bool) -> Option<Vec<BlockFactor>> {
    let mut out = Vec::with_capacity(p.blocks.len());
    for b in 0..p.blocks.len() {
        let m = eval_with_slack(p, b, z, slack);
        match matkit::chol_upper(&m) {
            Ok(r) => out.push(BlockFactor { r }),
            Err(_) => return None,
        }
    }
    Some(out)
}

fn eval_with_slack(p: &LmiProblem, b: usize, z: &[f64], slack: bool) -> Mat {
    let m_vars = p.n_vars();
    let mut m = p.eval_block(b, &z[..m_vars]);
    if slack {
        let s = z[m_vars];
        for i in 0..m.rows() {
            let v = m.get(i, i) + s;
            m.set(i, i, v);
        }
    }
    m
}

fn barrier_value(p: &LmiProblem, z: &[f64], slack: bool, t: f64, c: &[f64]) -> Option<f64> {
    let mut val = t * dot(c, z);
    for b in 0..p.blocks.len() {
        let m = eval_with_slack(p, b, z, slack);
        match matkit::chol_upper(&m) {
            Ok(r) => {
                let mut logdet = 0.0;
                for i in 0..r.rows() {
                    logdet += r.get(i, i).ln();
                }
                val -= 2.0 * logdet;
            }
            Err(_) => return None,
        }
    }
    Some(val)
}

/// Gradient and Hessian of the barrier at the current point. For each block
/// with factor `RᵀR = F`, the congruences `W_i = R⁻ᵀ F_i R⁻¹` give
/// `∂ = −tr(W_i)` and `∂² = tr(W_i W_j)`.
fn gradient_hessian(
    p: &LmiProblem,
    z: &[f64],
    slack: bool,
    factors: &[BlockFactor],
    t: f64,
    c: &[f64],
) -> (Vec<f64>, Mat) {
    let n = z.len();
    let m_vars = p.n_vars();
    let mut g: Vec<f64> = c.iter().map(|ci| t * ci).collect();
    let mut h = Mat::zeros(n, n);

    for (b, blk) in p.blocks.iter().enumerate() {
        let r = &factors[b].r;
        // Variables entering this block (skip identically-zero coefficients).
        let mut active: Vec<(usize, Mat)> = Vec::new();
        for i in 0..m_vars {
            let fi = &blk.mats[1 + i];
            if fi.max_abs() > 0.0 {
                let w = congruence(r, fi);
                active.push((i, w));
            }
        }
        if slack {
            let w = congruence(r, &Mat::identity(blk.dim));
            active.push((n - 1, w));
        }
        for (i, wi) in &active {
            let mut tr = 0.0;
            for d in 0..blk.dim {
                tr += wi.get(d, d);
            }
            g[*i] -= tr;
        }
        for a in 0..active.len() {
            for b2 in a..active.len() {
                let (i, wi) = &active[a];
                let (j, wj) = &active[b2];
                let dot_w: f64 =
                    wi.as_slice().iter().zip(wj.as_slice()).map(|(x, y)| x * y).sum();
                let cur = h.get(*i, *j);
                h.set(*i, *j, cur + dot_w);
                if i != j {
                    let cur = h.get(*j, *i);
                    h.set(*j, *i, cur + dot_w);
                }
            }
        }
    }
    (g, h)
}

/// `R⁻ᵀ F R⁻¹` via two triangular solves.
fn congruence(r: &Mat, f: &Mat) -> Mat {
    let half = matkit::solve_upper_t_many(r, f);
    matkit::solve_upper_right_many(r, &half)
}

fn solve_newton(h: &Mat, g: &[f64]) -> Result<Vec<f64>, SdpError> {
    let n = g.len();
    let diag_scale = (0..n).map(|i| h.get(i, i).abs()).fold(0.0f64, f64::max).max(1.0);
    let rhs = Mat::col_vec(&g.iter().map(|v| -v).collect::<Vec<_>>());
    // Variables absent from every block leave zero rows; lift the diagonal
    // until the factorization goes through.
    let mut reg_scale = 1e-10;
    loop {
        let mut reg = h.clone();
        for i in 0..n {
            let v = reg.get(i, i) + reg_scale * diag_scale;
            reg.set(i, i, v);
        }
        match matkit::solve_spd(&reg, &rhs) {
            Ok(sol) => return Ok(sol.as_slice().to_vec()),
            Err(e) if reg_scale < 1.0 => {
                let _ = e;
                reg_scale *= 100.0;
            }
            Err(e) => return Err(SdpError::Numerical(format!("Newton system: {e}"))),
        }
    }
}

fn worst_direction(
    p: &LmiProblem,
    z: &[f64],
    certificates: &[f64],
) -> Result<Option<InfeasibilityCertificate>, SdpError> {
    let mut worst: Option<(usize, f64)> = None;
    for (b, &c) in certificates.iter().enumerate() {
        if worst.map_or(true, |(_, w)| c < w) {
            worst = Some((b, c));
        }
    }
    match worst {
        Some((b, value)) if value < 0.0 => {
            let eig = matkit::sym_eig(&p.eval_block(b, z).symmetrize())
                .map_err(|e| SdpError::Numerical(e.to_string()))?;
            let n = eig.eigenvectors.rows();
            let direction: Vec<f64> = (0..n).map(|r| eig.eigenvectors.get(r, 0)).collect();
            Ok(Some(InfeasibilityCertificate { block: b, direction, value }))
        }
        _ => Ok(None),
    }
}

fn validate(p: &LmiProblem) -> Result<(), SdpError> {
    let m = p.n_vars();
    if m == 0 {
        return Err(SdpError::BadProblem("no decision variables".into()));
    }
    if p.blocks.is_empty() {
        return Err(SdpError::BadProblem("no constraint blocks".into()));
    }
    for (bi, b) in p.blocks.iter().enumerate() {
        if b.mats.len() != m + 1 {
            return Err(SdpError::BadProblem(format!(
                "block {bi} carries {} matrices, expected {}",
                b.mats.len(),
                m + 1
            )));
        }
        for (mi, mat) in b.mats.iter().enumerate() {
            if mat.rows() != b.dim || mat.cols() != b.dim {
                return Err(SdpError::BadProblem(format!(
                    "block {bi} matrix {mi} is {}×{}, expected {}×{}",
                    mat.rows(),
                    mat.cols(),
                    b.dim,
                    b.dim
                )));
            }
            let scale = mat.max_abs().max(1.0);
            if mat.asymmetry() > 1e-8 * scale {
                return Err(SdpError::BadProblem(format!(
                    "block {bi} matrix {mi} is not symmetric"
                )));
            }
            if !mat.is_finite() {
                return Err(SdpError::BadProblem(format!(
                    "block {bi} matrix {mi} has non-finite entries"
                )));
            }
        }
    }
    Ok(())
}

fn gershgorin_lower(m: &Mat) -> f64 {
    let n = m.rows();
    let mut lo = f64::INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        for j in 0..n {
            if i != j {
                radius += m.get(i, j).abs();
            }
        }
        lo = lo.min(m.get(i, i) - radius);
    }
    if lo.is_finite() {
        lo
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{s_energy, LmiBlock};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_block_problem(c: Vec<f64>, mats: Vec<Mat>) -> LmiProblem {
        let dim = mats[0].rows();
        LmiProblem { objective: c, blocks: vec![LmiBlock { dim, mats }] }
    }

    #[test]
    fn bordered_two_by_two() {
        // min γ s.t. [[γ, 3], [3, γ]] ⪰ 0 has optimum γ = 3.
        let f0 = Mat::from_rows(&[&[0.0, 3.0], &[3.0, 0.0]]);
        let f1 = Mat::identity(2);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-4, "objective {}", res.objective);
        assert!(res.certificates.iter().all(|&c| c >= -1e-7));
    }

    #[test]
    fn energy_bound_with_fixed_amplitudes() {
        // min γ_e s.t. S_energy(γ_e, a) ⪰ 0 with ‖a‖ = 5 gives γ_e = 5.
        let amps = vec![vec![3.0], vec![4.0], vec![0.0], vec![0.0], vec![0.0]];
        let f0 = s_energy(0.0, &amps);
        let f1 = Mat::identity(6);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 5.0).abs() < 1e-4, "objective {}", res.objective);
        // first solve example re-evaluated through check_feasible: the active
        // block sits on its boundary
        let eigs = check_feasible(&p, &res.z).unwrap();
        assert!(eigs[0].abs() < 1e-3);
    }

    #[test]
    fn diagonal_shift_problem() {
        // min z s.t. diag(1, −1) + z·diag(0, 1) ⪰ 0 needs z ≥ 1.
        let f0 = Mat::diag(&[1.0, -1.0]);
        let f1 = Mat::diag(&[0.0, 1.0]);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 1.0).abs() < 1e-4, "objective {}", res.objective);
    }

    #[test]
    fn infeasible_problem_reports_certificate() {
        // −I − z·0 can never be PSD.
        let f0 = Mat::identity(2).scale(-1.0);
        let f1 = Mat::zeros(2, 2);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        let cert = res.infeasibility.expect("certificate expected");
        assert_eq!(cert.block, 0);
        assert!(cert.value < 0.0);
        let norm: f64 = cert.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn determinism_bitwise() {
        let amps = vec![vec![1.0], vec![2.0]];
        let f0 = s_energy(0.0, &amps);
        let f1 = Mat::identity(3);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let a = solve(&p, &SolverConfig::default()).unwrap();
        let b = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.z, b.z);
        assert!((a.objective - b.objective).abs() < 1e-12);
    }

    #[test]
    fn monotone_under_relaxation() {
        // Adding ε·I to F₀ can only lower the optimum.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let dim = 3;
            let mut f1 = Mat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..=i {
                    let v = rng.gen::<f64>() - 0.5;
                    f1.set(i, j, v);
                    f1.set(j, i, v);
                }
            }
            // make the problem bounded: z·F1 + F0 with F1 ⪯ −δI ⇒ z bounded…
            // simpler: bound |z| ≤ 3 through a box block.
            let f0 = Mat::identity(dim).scale(-0.2);
            let box0 = Mat::diag(&[3.0, 3.0]);
            let box1 = Mat::diag(&[1.0, -1.0]);
            let p = LmiProblem {
                objective: vec![1.0],
                blocks: vec![
                    LmiBlock { dim, mats: vec![f0.clone(), f1.clone()] },
                    LmiBlock { dim: 2, mats: vec![box0.clone(), box1.clone()] },
                ],
            };
            let res = solve(&p, &SolverConfig::default()).unwrap();
            if res.status != SolveStatus::Optimal {
                continue;
            }
            let relaxed = LmiProblem {
                objective: vec![1.0],
                blocks: vec![
                    LmiBlock {
                        dim,
                        mats: vec![f0.add(&Mat::identity(dim).scale(0.1)), f1.clone()],
                    },
                    LmiBlock { dim: 2, mats: vec![box0, box1] },
                ],
            };
            let res2 = solve(&relaxed, &SolverConfig::default()).unwrap();
            if res2.status == SolveStatus::Optimal {
                assert!(res2.objective <= res.objective + 1e-5);
            }
        }
    }

    #[test]
    fn rejects_malformed_problems() {
        let p = LmiProblem { objective: vec![], blocks: vec![] };
        assert!(matches!(solve(&p, &SolverConfig::default()), Err(SdpError::BadProblem(_))));
        let bad = LmiProblem {
            objective: vec![1.0],
            blocks: vec![LmiBlock {
                dim: 2,
                mats: vec![Mat::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), Mat::identity(2)],
            }],
        };
        assert!(matches!(solve(&bad, &SolverConfig::default()), Err(SdpError::BadProblem(_))));
    }

    /// Grid-plus-refinement oracle over the box |z_i| ≤ 3 for problems with
    /// one or two variables. Stays independent of the barrier path.
    fn grid_oracle(p: &LmiProblem, m: usize) -> Option<f64> {
        let mut lo = vec![-3.0; m];
        let mut hi = vec![3.0; m];
        let steps = 40usize;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _round in 0..5 {
            let mut round_best: Option<(Vec<f64>, f64)> = None;
            let total = (steps + 1).pow(m as u32);
            for idx in 0..total {
                let mut rem = idx;
                let mut z = vec![0.0; m];
                for d in 0..m {
                    let i = rem % (steps + 1);
                    rem /= steps + 1;
                    z[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / steps as f64;
                }
                let feasible = check_feasible(p, &z)
                    .unwrap()
                    .iter()
                    .all(|&e| e >= -1e-9);
                if feasible {
                    let val = dot(&p.objective, &z);
                    if round_best.as_ref().map_or(true, |(_, v)| val < *v) {
                        round_best = Some((z, val));
                    }
                }
            }
            let (zb, vb) = round_best?;
            best = Some((zb.clone(), vb));
            for d in 0..m {
                let step = (hi[d] - lo[d]) / steps as f64;
                lo[d] = (zb[d] - 2.0 * step).max(-3.0);
                hi[d] = (zb[d] + 2.0 * step).min(3.0);
            }
        }
        best.map(|(_, v)| v)
    }

    #[test]
    fn near_optimality_against_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut solved = 0;
        for trial in 0..50 {
            let m = 1 + (trial % 2);
            let dim = 2 + (trial % 4);
            // Strictly feasible by construction at a random interior point.
            let mut fs: Vec<Mat> = Vec::new();
            for _ in 0..m {
                let mut f = Mat::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..=i {
                        let v = rng.gen::<f64>() - 0.5;
                        f.set(i, j, v);
                        f.set(j, i, v);
                    }
                }
                fs.push(f);
            }
            let zstar: Vec<f64> = (0..m).map(|_| 2.0 * (rng.gen::<f64>() - 0.5)).collect();
            let mut r = Mat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..=i {
                    let v = rng.gen::<f64>() - 0.5;
                    r.set(i, j, v);
                    r.set(j, i, v);
                }
            }
            let mut f0 = r.matmul(&r.transpose());
            for i in 0..dim {
                f0.set(i, i, f0.get(i, i) + 0.3);
            }
            for (i, fi) in fs.iter().enumerate() {
                f0.axpy(-zstar[i], fi);
            }
            // Box |z_i| ≤ 3 keeps the oracle's search bounded.
            let mut box0 = Mat::identity(2 * m).scale(3.0);
            let mut box_mats = vec![Mat::zeros(2 * m, 2 * m); m];
            for d in 0..m {
                box_mats[d].set(2 * d, 2 * d, 1.0);
                box_mats[d].set(2 * d + 1, 2 * d + 1, -1.0);
            }
            box0 = box0.symmetrize();
            let mut mats = vec![f0];
            mats.extend(fs);
            let mut bmats = vec![box0];
            bmats.extend(box_mats);
            let c: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
            let p = LmiProblem {
                objective: c,
                blocks: vec![
                    LmiBlock { dim, mats },
                    LmiBlock { dim: 2 * m, mats: bmats },
                ],
            };
            let res = solve(&p, &SolverConfig::default()).unwrap();
            assert_ne!(res.status, SolveStatus::Infeasible, "constructed feasible");
            if res.status != SolveStatus::Optimal {
                continue;
            }
            solved += 1;
            let oracle = grid_oracle(&p, m).expect("oracle found a feasible point");
            assert!(
                res.objective <= oracle + 1e-3,
                "trial {trial}: solver {} vs oracle {}",
                res.objective,
                oracle
            );
            assert!(
                res.objective >= oracle - 1e-2,
                "trial {trial}: solver {} undercuts oracle {} beyond grid resolution",
                res.objective,
                oracle
            );
        }
        assert!(solved >= 45, "only {solved}/50 solved to optimality");
    }

    #[test]
    fn solve_result_json_contains_fields() {
        let f0 = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f1 = Mat::identity(2);
        let p = single_block_problem(vec![1.0], vec![f0, f1]);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        let v = res.to_json();
        assert_eq!(v["status"], "optimal");
        assert_eq!(v["strategy"], "barrier");
        assert!(v["z"].as_array().unwrap().len() == 1);
        assert!(v["certificates"].as_array().unwrap().len() == 1);
        assert!(v["iterations"].as_u64().unwrap() > 0);
    }
}
