//! Assembly of the matrix inequalities behind the exploration design:
//! the input-energy bound, the data sufficiency condition (both as one
//! outer-product form and as its expanded block form), the convex
//! relaxation of the quadratic data terms around a fixed linearization
//! point, and the affine problem description handed to the SDP solver.
//!
//! Throughout, `q = n_x · n_φ` is the parameter dimension; the large
//! constraint block has dimension `q + q²` regardless of the horizon `T`.

use std::fmt;

use serde_json::json;

use crate::estimate::{kron_with_identity, DataRecord};
use crate::lti::{multisine_inputs, simulate, DisturbanceSource, MultisineDesign, SystemModel};
use crate::matkit::{self, Mat};

/// State magnitude above which a basis-response simulation is aborted;
/// reaching it means the initial model is effectively unstable.
const OVERFLOW_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum LmiError {
    /// A basis-response state exceeded the overflow limit (unstable model).
    Overflow { step: usize },
    DimensionMismatch(String),
    /// The goal matrix must be symmetric positive definite.
    NotSpd(String),
    Parse(String),
}

impl fmt::Display for LmiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LmiError::Overflow { step } => {
                write!(f, "basis response overflow at step {step}: initial model unstable?")
            }
            LmiError::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            LmiError::NotSpd(m) => write!(f, "matrix not positive definite: {m}"),
            LmiError::Parse(m) => write!(f, "problem parse error: {m}"),
        }
    }
}

impl std::error::Error for LmiError {}

/// Noise-free unit-amplitude responses of the initial model, one per
/// (frequency, input channel) pair: `Φ̂^{(i,j)}` is n_φ×T and `X̂^{(i,j)}`
/// stacks the successor states. Future data is approximated as the
/// amplitude-weighted sum of these responses.
#[derive(Debug, Clone)]
pub struct BasisResponses {
    freqs: Vec<f64>,
    horizon: usize,
    n_x: usize,
    n_u: usize,
    phi_hats: Vec<Mat>,
    x_hats: Vec<Mat>,
}

impl BasisResponses {
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_phi(&self) -> usize {
        self.n_x + self.n_u
    }

    /// Parameter dimension q = n_x · n_φ.
    pub fn q(&self) -> usize {
        self.n_x * self.n_phi()
    }

    /// Number of amplitude variables L · n_u.
    pub fn n_amps(&self) -> usize {
        self.freqs.len() * self.n_u
    }

    /// Response for frequency `i`, input channel `j`.
    pub fn response(&self, i: usize, j: usize) -> (&Mat, &Mat) {
        let v = i * self.n_u + j;
        (&self.phi_hats[v], &self.x_hats[v])
    }

    fn response_flat(&self, v: usize) -> (&Mat, &Mat) {
        (&self.phi_hats[v], &self.x_hats[v])
    }
}

/// Simulate the initial model open loop with `w = 0`, `x_0 = 0` and a unit
/// cosine on one input channel at a time, recording Φ̂ and X̂ per response.
pub fn basis_responses(
    model0: &SystemModel,
    freqs: &[f64],
    horizon: usize,
) -> Result<BasisResponses, LmiError> {
    if freqs.is_empty() || horizon == 0 {
        return Err(LmiError::DimensionMismatch("need at least one frequency and T ≥ 1".into()));
    }
    let n_u = model0.n_u();
    let mut phi_hats = Vec::with_capacity(freqs.len() * n_u);
    let mut x_hats = Vec::with_capacity(freqs.len() * n_u);
    for &w in freqs {
        for j in 0..n_u {
            let mut amp = vec![0.0; n_u];
            amp[j] = 1.0;
            let design = MultisineDesign::new(horizon, vec![w], vec![amp])
                .map_err(|e| LmiError::DimensionMismatch(e.to_string()))?;
            let inputs = multisine_inputs(&design);
            let traj = simulate(model0, &inputs, &DisturbanceSource::Zero, None)
                .map_err(|e| LmiError::DimensionMismatch(e.to_string()))?;
            for (k, xk) in traj.states.iter().enumerate() {
                if xk.iter().any(|v| v.abs() > OVERFLOW_LIMIT) {
                    return Err(LmiError::Overflow { step: k });
                }
            }
            let rec = crate::lti::pack_data(&traj, 0.0);
            phi_hats.push(rec.phi().clone());
            x_hats.push(rec.x().clone());
        }
    }
    Ok(BasisResponses {
        freqs: freqs.to_vec(),
        horizon,
        n_x: model0.n_x(),
        n_u,
        phi_hats,
        x_hats,
    })
}

/// Amplitude-weighted combination `Φ̂(U_e) = Σ Φ̂^{(i,j)} a_{i,j}` and the
/// matching `X̂(U_e)`.
pub fn assemble_phi_x(br: &BasisResponses, amps: &[Vec<f64>]) -> Result<(Mat, Mat), LmiError> {
    if amps.len() != br.freqs.len() || amps.iter().any(|a| a.len() != br.n_u) {
        return Err(LmiError::DimensionMismatch(format!(
            "expected {} amplitude vectors of length {}",
            br.freqs.len(),
            br.n_u
        )));
    }
    let mut phi = Mat::zeros(br.n_phi(), br.horizon);
    let mut x = Mat::zeros(br.horizon * br.n_x, 1);
    for (i, a) in amps.iter().enumerate() {
        for (j, &aij) in a.iter().enumerate() {
            if aij != 0.0 {
                let (p, xh) = br.response(i, j);
                phi.axpy(aij, p);
                x.axpy(aij, xh);
            }
        }
    }
    Ok((phi, x))
}

/// The stacked coupling matrix
/// `Y = [ D½ᵀ (Xᵀ ⊗ I_q) ; (Φ ⊗ I_{n_x}) ⊗ I_q ]`
/// of shape `(q + q²) × (T · n_x · q)`, materialized explicitly.
pub fn build_y(x: &Mat, phi: &Mat, d_half: &Mat) -> Result<Mat, LmiError> {
    let t = phi.cols();
    if t == 0 || x.cols() != 1 || x.rows() % t != 0 {
        return Err(LmiError::DimensionMismatch("X must stack n_x entries per column of Φ".into()));
    }
    let n_x = x.rows() / t;
    let n_phi = phi.rows();
    let q = n_x * n_phi;
    if d_half.rows() != q || d_half.cols() != q {
        return Err(LmiError::DimensionMismatch(format!(
            "goal square root must be {q}×{q}, got {}×{}",
            d_half.rows(),
            d_half.cols()
        )));
    }
    let width = t * n_x * q;
    let mut y = Mat::zeros(q + q * q, width);
    // Top block: D½ᵀ (Xᵀ ⊗ I_q). Column group c (one per entry of X) holds
    // X[c] · D½ᵀ.
    for c in 0..t * n_x {
        let xv = x.get(c, 0);
        if xv == 0.0 {
            continue;
        }
        for r in 0..q {
            for p in 0..q {
                // (D½ᵀ)[r,p] = D½[p,r]
                y.set(r, c * q + p, xv * d_half.get(p, r));
            }
        }
    }
    // Bottom block: (Φ ⊗ I_{n_x}) ⊗ I_q. Within the block, entry
    // ((g·q + p), (h·q + p)) equals (Φ ⊗ I_{n_x})[g, h].
    for a in 0..n_phi {
        for k in 0..t {
            let v = phi.get(a, k);
            if v == 0.0 {
                continue;
            }
            for i in 0..n_x {
                let g = a * n_x + i;
                let h = k * n_x + i;
                for p in 0..q {
                    y.set(q + g * q + p, h * q + p, v);
                }
            }
        }
    }
    Ok(y)
}

/// Bordered energy matrix
/// `S_energy(γ_e, U_e) = [[γ_e, 1ᵀU_eᵀ], [U_e·1, γ_e·I]]`,
/// positive semidefinite exactly when `Σ‖a_i‖² ≤ γ_e²` and `γ_e ≥ 0`.
pub fn s_energy(gamma_e: f64, amps: &[Vec<f64>]) -> Mat {
    let stacked: Vec<f64> = amps.iter().flatten().copied().collect();
    let n = stacked.len();
    let mut m = Mat::zeros(1 + n, 1 + n);
    m.set(0, 0, gamma_e);
    for (i, &a) in stacked.iter().enumerate() {
        m.set(0, 1 + i, a);
        m.set(1 + i, 0, a);
        m.set(1 + i, 1 + i, gamma_e);
    }
    m
}

/// Data sufficiency matrix on realized data:
/// `blkdiag((ΦΦᵀ)⊗I − γ_w·D_des, 0) + Y Yᵀ`.
/// Positive semidefiniteness of this matrix certifies that the estimate
/// meets the accuracy goal encoded by `D_des`.
pub fn sufficiency_matrix(d: &DataRecord, d_des: &Mat, gamma_w: f64) -> Result<Mat, LmiError> {
    let d_half = goal_half(d_des)?;
    let q = d.n_x() * d.n_phi();
    if d_half.rows() != q {
        return Err(LmiError::DimensionMismatch(format!(
            "goal matrix must be {q}×{q} for this record"
        )));
    }
    let y = build_y(d.x(), d.phi(), &d_half)?;
    let n = q + q * q;
    let mut m = Mat::zeros(n, n);
    m.gemm(1.0, &y, false, &y, true, 0.0);
    let mut gram = Mat::zeros(d.n_phi(), d.n_phi());
    gram.gemm(1.0, d.phi(), false, d.phi(), true, 0.0);
    let top = kron_with_identity(&gram.symmetrize(), d.n_x());
    m.add_block(0, 0, 1.0, &top);
    m.add_block(0, 0, -gamma_w, d_des);
    Ok(m.symmetrize())
}

/// The same condition as [`sufficiency_matrix`] with every block written
/// out explicitly (no intermediate Y), used to cross-check the assembly:
///
/// ```text
/// [ (ΦΦᵀ)⊗I − γ_w·D + D½ᵀ((XᵀX)⊗I_q)D½   D½ᵀ((Xᵀ(Φᵀ⊗I))⊗I_q) ]
/// [ (((Φ⊗I)X)⊗I_q)D½                     ((ΦΦᵀ)⊗I)⊗I_q        ]
/// ```
pub fn sufficiency_matrix_expanded(
    d: &DataRecord,
    d_des: &Mat,
    gamma_w: f64,
) -> Result<Mat, LmiError> {
    let d_half = goal_half(d_des)?;
    let n_x = d.n_x();
    let q = n_x * d.n_phi();
    if d_half.rows() != q {
        return Err(LmiError::DimensionMismatch(format!(
            "goal matrix must be {q}×{q} for this record"
        )));
    }
    let mut gram = Mat::zeros(d.n_phi(), d.n_phi());
    gram.gemm(1.0, d.phi(), false, d.phi(), true, 0.0);
    let gram_i = kron_with_identity(&gram.symmetrize(), n_x);

    let xx: f64 = d.x().as_slice().iter().map(|v| v * v).sum();
    // D½ᵀ ((XᵀX) ⊗ I_q) D½ with XᵀX scalar
    let sandwich = d_half.transpose().matmul(&d_half).scale(xx);

    let n = q + q * q;
    let mut m = Mat::zeros(n, n);
    let mut tl = gram_i.clone();
    tl.axpy(-gamma_w, d_des);
    tl = tl.add(&sandwich);
    m.set_block(0, 0, &tl);

    // Coupling strip: D½ᵀ ((Xᵀ(Φᵀ ⊗ I)) ⊗ I_q); the row vector
    // Xᵀ(Φᵀ ⊗ I) has entries Σ_k Φ[a,k]·X[k·n_x+i].
    let r = cross_vector(d.phi(), d.x());
    let strip = kron_with_identity(&Mat::row_vec(&r), q);
    let top_right = d_half.transpose().matmul(&strip);
    m.set_block(0, q, &top_right);
    m.set_block(q, 0, &top_right.transpose());

    // Bottom-right: ((ΦΦᵀ) ⊗ I_{n_x}) ⊗ I_q
    let br = kron_with_identity(&gram_i, q);
    m.set_block(q, q, &br);
    Ok(m.symmetrize())
}

/// Scalar route to the same condition: the sufficiency matrix is PSD
/// exactly when `(ΦΦᵀ)⊗I ⪰ s·D_des` with
/// `s = γ_w − XᵀX + Xᵀ((Φᵀ(ΦΦᵀ)⁻¹Φ) ⊗ I)X`, provided ΦΦᵀ ≻ 0. Returns
/// the matrix `(ΦΦᵀ)⊗I − s·D_des` whose PSD status encodes the condition.
pub fn sufficiency_scalar_matrix(
    d: &DataRecord,
    d_des: &Mat,
    gamma_w: f64,
) -> Result<Mat, LmiError> {
    let mut gram = Mat::zeros(d.n_phi(), d.n_phi());
    gram.gemm(1.0, d.phi(), false, d.phi(), true, 0.0);
    gram = gram.symmetrize();
    let xx: f64 = d.x().as_slice().iter().map(|v| v * v).sum();
    // Xᵀ((Φᵀ(ΦΦᵀ)⁻¹Φ) ⊗ I)X = tr(C (ΦΦᵀ)⁻¹ Cᵀ) with C = X_mat Φᵀ.
    let c = d.x_mat().matmul(&d.phi().transpose());
    let sol = matkit::solve_spd(&gram, &c.transpose())
        .map_err(|e| LmiError::NotSpd(format!("regressor Gram matrix: {e}")))?;
    let proj: f64 = c
        .as_slice()
        .iter()
        .zip(sol.transpose().as_slice())
        .map(|(a, b)| a * b)
        .sum();
    let s = gamma_w - xx + proj;
    let mut m = kron_with_identity(&gram, d.n_x());
    m.axpy(-s, d_des);
    Ok(m.symmetrize())
}

/// Linearization point for the quadratic data terms: `L₁ = Φ̃` and
/// `L₂ = Ŷ` evaluated at the candidate amplitudes, so the relaxation is
/// tight when the decision variable equals the candidate.
#[derive(Debug, Clone)]
pub struct RelaxationPoint {
    pub l1: Mat,
    pub l2: Mat,
    x_tilde: Mat,
}

impl RelaxationPoint {
    pub fn x_tilde(&self) -> &Mat {
        &self.x_tilde
    }
}

/// Build the linearization point from the basis responses at candidate
/// amplitudes. The goal square root enters the top block of `L₂`, matching
/// the structure of `Y` so that tightness is achievable.
pub fn relaxation_point(
    br: &BasisResponses,
    candidate: &[Vec<f64>],
    d_half: &Mat,
) -> Result<RelaxationPoint, LmiError> {
    let (phi_t, x_t) = assemble_phi_x(br, candidate)?;
    let l2 = build_y(&x_t, &phi_t, d_half)?;
    Ok(RelaxationPoint { l1: phi_t, l2, x_tilde: x_t })
}

/// Relaxed sufficiency condition, affine in (Φ̂, Ŷ):
/// `blkdiag((Φ̂L₁ᵀ + L₁Φ̂ᵀ − L₁L₁ᵀ)⊗I − γ_w·D, 0) + ŶL₂ᵀ + L₂Ŷᵀ − L₂L₂ᵀ`.
/// Dominated by the unrelaxed matrix for every input, with equality at
/// Φ̂ = L₁, Ŷ = L₂.
pub fn s_exploration(
    phi_hat: &Mat,
    y_hat: &Mat,
    rp: &RelaxationPoint,
    gamma_w: f64,
    d_des: &Mat,
) -> Result<Mat, LmiError> {
    if phi_hat.rows() != rp.l1.rows() || phi_hat.cols() != rp.l1.cols() {
        return Err(LmiError::DimensionMismatch("Φ̂ shape differs from L₁".into()));
    }
    if y_hat.rows() != rp.l2.rows() || y_hat.cols() != rp.l2.cols() {
        return Err(LmiError::DimensionMismatch("Ŷ shape differs from L₂".into()));
    }
    let n = y_hat.rows();
    let q = d_des.rows();
    let n_phi = phi_hat.rows();
    if n != q + q * q {
        return Err(LmiError::DimensionMismatch(format!(
            "coupling matrix height {n} does not match q + q² for q={q}"
        )));
    }
    let n_x = q / n_phi;

    let mut top_small = Mat::zeros(n_phi, n_phi);
    top_small.gemm(1.0, phi_hat, false, &rp.l1, true, 0.0);
    top_small.gemm(1.0, &rp.l1, false, phi_hat, true, 1.0);
    top_small.gemm(-1.0, &rp.l1, false, &rp.l1, true, 1.0);

    let mut m = Mat::zeros(n, n);
    m.gemm(1.0, y_hat, false, &rp.l2, true, 0.0);
    m.gemm(1.0, &rp.l2, false, y_hat, true, 1.0);
    m.gemm(-1.0, &rp.l2, false, &rp.l2, true, 1.0);
    m.add_block(0, 0, 1.0, &kron_with_identity(&top_small.symmetrize(), n_x));
    m.add_block(0, 0, -gamma_w, d_des);
    Ok(m.symmetrize())
}

/// Affine PSD-constrained problem: minimize `cᵀz` subject to
/// `F₀ + Σᵢ zᵢ Fᵢ ⪰ 0` per block.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    /// Objective coefficients over the variable vector z.
    pub objective: Vec<f64>,
    /// PSD blocks; each holds F₀ followed by one coefficient matrix per
    /// variable, all symmetric of the block's dimension.
    pub blocks: Vec<LmiBlock>,
}

#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub dim: usize,
    /// `mats[0] = F₀`, `mats[1 + i]` multiplies `z_i`.
    pub mats: Vec<Mat>,
}

impl LmiProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Evaluate block `b` at the point `z`.
    pub fn eval_block(&self, b: usize, z: &[f64]) -> Mat {
        let blk = &self.blocks[b];
        let mut m = blk.mats[0].clone();
        for (i, &zi) in z.iter().enumerate() {
            if zi != 0.0 {
                m.axpy(zi, &blk.mats[1 + i]);
            }
        }
        m
    }

    /// Debug dump: `objective`, `blocks[].dim`, `blocks[].matrices`
    /// (F₀…F_m as row-major flattened arrays).
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "objective": self.objective,
            "blocks": self.blocks.iter().map(|b| json!({
                "dim": b.dim,
                "matrices": b.mats.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, LmiError> {
        let objective: Vec<f64> = v["objective"]
            .as_array()
            .ok_or_else(|| LmiError::Parse("objective must be an array".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| LmiError::Parse("objective entries".into())))
            .collect::<Result<_, _>>()?;
        let n_vars = objective.len();
        let blocks_v = v["blocks"]
            .as_array()
            .ok_or_else(|| LmiError::Parse("blocks must be an array".into()))?;
        let mut blocks = Vec::with_capacity(blocks_v.len());
        for bv in blocks_v {
            let dim = bv["dim"]
                .as_u64()
                .ok_or_else(|| LmiError::Parse("block dim must be an integer".into()))?
                as usize;
            let mats_v = bv["matrices"]
                .as_array()
                .ok_or_else(|| LmiError::Parse("block matrices must be an array".into()))?;
            if mats_v.len() != n_vars + 1 {
                return Err(LmiError::Parse(format!(
                    "block must carry {} matrices, got {}",
                    n_vars + 1,
                    mats_v.len()
                )));
            }
            let mut mats = Vec::with_capacity(mats_v.len());
            for mv in mats_v {
                let flat: Vec<f64> = mv
                    .as_array()
                    .ok_or_else(|| LmiError::Parse("matrix must be a flat array".into()))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| LmiError::Parse("matrix entries".into())))
                    .collect::<Result<_, _>>()?;
                if flat.len() != dim * dim {
                    return Err(LmiError::Parse(format!(
                        "matrix length {} does not match dim {dim}",
                        flat.len()
                    )));
                }
                mats.push(Mat::from_row_major(dim, dim, flat));
            }
            blocks.push(LmiBlock { dim, mats });
        }
        Ok(LmiProblem { objective, blocks })
    }
}

/// Assemble the exploration design problem
/// `min γ_e s.t. S_energy(γ_e, U_e) ⪰ 0, S_exploration(Φ̂(U_e), Ŷ(U_e), L₁, L₂) ⪰ 0`
/// as an affine problem in `z = (γ_e, a_{1,1}, …, a_{L,n_u})`.
///
/// Coefficient matrices are built from the Kronecker block structure of
/// the coupling products rather than from the materialized wide matrices;
/// the two routes agree (see the affinity tests).
pub fn to_lmi_problem(
    br: &BasisResponses,
    rp: &RelaxationPoint,
    gamma_w: f64,
    d_des: &Mat,
) -> Result<LmiProblem, LmiError> {
    let q = br.q();
    if d_des.rows() != q || d_des.cols() != q {
        return Err(LmiError::DimensionMismatch(format!("goal matrix must be {q}×{q}")));
    }
    let d_half = goal_half(d_des)?;
    if rp.l1.rows() != br.n_phi() || rp.l1.cols() != br.horizon {
        return Err(LmiError::DimensionMismatch("relaxation point horizon mismatch".into()));
    }
    let n_amp = br.n_amps();
    let m_vars = 1 + n_amp;
    let mut objective = vec![0.0; m_vars];
    objective[0] = 1.0;

    // Energy block: dimension 1 + L·n_u; γ_e multiplies the identity and
    // each amplitude enters the border.
    let e_dim = 1 + n_amp;
    let mut energy_mats = vec![Mat::zeros(e_dim, e_dim)];
    energy_mats.push(Mat::identity(e_dim));
    for v in 0..n_amp {
        let mut f = Mat::zeros(e_dim, e_dim);
        f.set(0, 1 + v, 1.0);
        f.set(1 + v, 0, 1.0);
        energy_mats.push(f);
    }

    // Exploration block via the structured products.
    let x_dim = q + q * q;
    let dtd = d_half.transpose().matmul(&d_half);
    let l1 = &rp.l1;
    let x_t = &rp.x_tilde;

    // F₀ = blkdiag(−(L₁L₁ᵀ)⊗I − γ_w·D, 0) − L₂L₂ᵀ
    let mut f0 = Mat::zeros(x_dim, x_dim);
    {
        let mut g = Mat::zeros(br.n_phi(), br.n_phi());
        g.gemm(-1.0, l1, false, l1, true, 0.0);
        f0.add_block(0, 0, 1.0, &kron_with_identity(&g.symmetrize(), br.n_x));
        f0.add_block(0, 0, -gamma_w, d_des);
        // −L₂L₂ᵀ: top-left −(X̃ᵀX̃)·D½ᵀD½, strip −D½ᵀ(r̃ ⊗ I_q), bottom
        // −((Φ̃Φ̃ᵀ)⊗I)⊗I_q with r̃ the cross vector of (Φ̃, X̃).
        let xx: f64 = x_t.as_slice().iter().map(|v| v * v).sum();
        f0.add_block(0, 0, -xx, &dtd);
        let r = cross_vector(l1, x_t);
        add_strip(&mut f0, q, &d_half, &r, -1.0);
        let mut g2 = Mat::zeros(br.n_phi(), br.n_phi());
        g2.gemm(1.0, l1, false, l1, true, 0.0);
        add_double_kron(&mut f0, q, br.n_x, &g2.symmetrize(), -1.0);
    }

    let mut mats = vec![f0.symmetrize()];
    // γ_e does not enter the exploration block.
    mats.push(Mat::zeros(x_dim, x_dim));
    for v in 0..n_amp {
        let (phi_v, x_v) = br.response_flat(v);
        let mut f = Mat::zeros(x_dim, x_dim);
        // (Φ̂_v L₁ᵀ + L₁ Φ̂_vᵀ) ⊗ I_{n_x} in the top-left corner
        let mut g = Mat::zeros(br.n_phi(), br.n_phi());
        g.gemm(1.0, phi_v, false, l1, true, 0.0);
        g.gemm(1.0, l1, false, phi_v, true, 1.0);
        f.add_block(0, 0, 1.0, &kron_with_identity(&g.symmetrize(), br.n_x));
        // Y_v L₂ᵀ + L₂ Y_vᵀ:
        //   top-left   2 (X̂_vᵀX̃) · D½ᵀD½
        //   strip      D½ᵀ ((r_v + c_vᵀ) ⊗ I_q) and its transpose
        //   bottom     ((Φ̂_vΦ̃ᵀ + Φ̃Φ̂_vᵀ) ⊗ I_{n_x}) ⊗ I_q
        let xdot: f64 = x_v.as_slice().iter().zip(x_t.as_slice()).map(|(a, b)| a * b).sum();
        f.add_block(0, 0, 2.0 * xdot, &dtd);
        let mut r = cross_vector(l1, x_v);
        let c = cross_vector(phi_v, x_t);
        for (ri, ci) in r.iter_mut().zip(&c) {
            *ri += ci;
        }
        add_strip(&mut f, q, &d_half, &r, 1.0);
        let mut g2 = Mat::zeros(br.n_phi(), br.n_phi());
        g2.gemm(1.0, phi_v, false, l1, true, 0.0);
        g2.gemm(1.0, l1, false, phi_v, true, 1.0);
        add_double_kron(&mut f, q, br.n_x, &g2.symmetrize(), 1.0);
        mats.push(f.symmetrize());
    }

    Ok(LmiProblem {
        objective,
        blocks: vec![
            LmiBlock { dim: e_dim, mats: energy_mats },
            LmiBlock { dim: x_dim, mats },
        ],
    })
}

/// Assemble the Gram-matrix lower-bound problem
/// `min γ_e s.t. S_energy ⪰ 0, (Φ̂(U_e)L₁ᵀ + L₁Φ̂(U_e)ᵀ − L₁L₁ᵀ)⊗I − τ·D ⪰ 0`
/// used by the credibility-region baseline designer with threshold `τ`.
pub fn to_gram_lmi_problem(
    br: &BasisResponses,
    l1: &Mat,
    tau: f64,
    d_des: &Mat,
) -> Result<LmiProblem, LmiError> {
    let q = br.q();
    if d_des.rows() != q || d_des.cols() != q {
        return Err(LmiError::DimensionMismatch(format!("goal matrix must be {q}×{q}")));
    }
    if l1.rows() != br.n_phi() || l1.cols() != br.horizon {
        return Err(LmiError::DimensionMismatch("linearization point shape".into()));
    }
    let n_amp = br.n_amps();
    let m_vars = 1 + n_amp;
    let mut objective = vec![0.0; m_vars];
    objective[0] = 1.0;

    let e_dim = 1 + n_amp;
    let mut energy_mats = vec![Mat::zeros(e_dim, e_dim)];
    energy_mats.push(Mat::identity(e_dim));
    for v in 0..n_amp {
        let mut f = Mat::zeros(e_dim, e_dim);
        f.set(0, 1 + v, 1.0);
        f.set(1 + v, 0, 1.0);
        energy_mats.push(f);
    }

    let mut g0 = Mat::zeros(br.n_phi(), br.n_phi());
    g0.gemm(-1.0, l1, false, l1, true, 0.0);
    let mut f0 = kron_with_identity(&g0.symmetrize(), br.n_x);
    f0.axpy(-tau, d_des);
    let mut mats = vec![f0.symmetrize(), Mat::zeros(q, q)];
    for v in 0..n_amp {
        let (phi_v, _) = br.response_flat(v);
        let mut g = Mat::zeros(br.n_phi(), br.n_phi());
        g.gemm(1.0, phi_v, false, l1, true, 0.0);
        g.gemm(1.0, l1, false, phi_v, true, 1.0);
        mats.push(kron_with_identity(&g.symmetrize(), br.n_x).symmetrize());
    }

    Ok(LmiProblem {
        objective,
        blocks: vec![
            LmiBlock { dim: e_dim, mats: energy_mats },
            LmiBlock { dim: q, mats },
        ],
    })
}

/// Upper Cholesky square root of the goal matrix, with an SPD check.
pub fn goal_half(d_des: &Mat) -> Result<Mat, LmiError> {
    if !d_des.is_square() {
        return Err(LmiError::NotSpd("goal matrix must be square".into()));
    }
    matkit::chol_upper(&d_des.symmetrize())
        .map_err(|e| LmiError::NotSpd(format!("goal matrix: {e}")))
}

/// Cross vector with entries `Σ_k phi[a,k] · x[k·n_x + i]` at index
/// `a·n_x + i`; this is `Xᵀ(Φᵀ ⊗ I_{n_x})` as a plain vector.
fn cross_vector(phi: &Mat, x: &Mat) -> Vec<f64> {
    let t = phi.cols();
    let n_x = x.rows() / t;
    let n_phi = phi.rows();
    let mut r = vec![0.0; n_phi * n_x];
    for a in 0..n_phi {
        for k in 0..t {
            let pv = phi.get(a, k);
            if pv == 0.0 {
                continue;
            }
            for i in 0..n_x {
                r[a * n_x + i] += pv * x.get(k * n_x + i, 0);
            }
        }
    }
    r
}

/// Add `s · D½ᵀ(r ⊗ I_q)` into the off-diagonal strip of the big block and
/// its transpose below: block column c receives `s·r[c]·D½ᵀ`.
fn add_strip(m: &mut Mat, q: usize, d_half: &Mat, r: &[f64], s: f64) {
    for (c, &rc) in r.iter().enumerate() {
        if rc == 0.0 {
            continue;
        }
        for row in 0..q {
            for p in 0..q {
                let v = s * rc * d_half.get(p, row);
                if v != 0.0 {
                    let col = q + c * q + p;
                    m[(row, col)] += v;
                    m[(col, row)] += v;
                }
            }
        }
    }
}

/// Add `s · ((small ⊗ I_{n_x}) ⊗ I_q)` into the bottom-right q²×q² corner.
fn add_double_kron(m: &mut Mat, q: usize, n_x: usize, small: &Mat, s: f64) {
    let n_phi = small.rows();
    for a in 0..n_phi {
        for b in 0..n_phi {
            let v = s * small.get(a, b);
            if v == 0.0 {
                continue;
            }
            for i in 0..n_x {
                let g = a * n_x + i;
                let h = b * n_x + i;
                for p in 0..q {
                    m[(q + g * q + p, q + h * q + p)] += v;
                }
            }
        }
    }
}
