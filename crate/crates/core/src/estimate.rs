//! Least-squares estimation and the non-falsified parameter set under an
//! energy-bounded disturbance.
//!
//! Given stacked data (Φ, X) and a disturbance energy bound γ_w, every
//! parameter vector θ consistent with the data lies in the ellipsoid
//! `(θ − θ̂)ᵀ P_θ⁻¹ (θ − θ̂) ≤ G` centered at the least-squares estimate,
//! with information matrix `P_θ⁻¹ = (ΦΦᵀ) ⊗ I` and data-dependent radius
//! `G = γ_w + ‖θ̂‖²_{P_θ⁻¹} − Σ‖x_{k+1}‖²`.

use std::fmt;

use serde_json::json;

use crate::lti::{LtiError, SystemModel};
use crate::matkit::{self, Mat};

/// Membership slack on quadratic-form comparisons.
pub const TOL_MEMBER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimateError {
    /// ΦΦᵀ is numerically singular: the data is not persistently exciting.
    RankDeficientData { min_eig: f64, tol: f64 },
    Dimension(String),
}

impl fmt::Display for EstimateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateError::RankDeficientData { min_eig, tol } => write!(
                f,
                "rank-deficient data: min eigenvalue {min_eig:.3e} of ΦΦᵀ below {tol:.3e}"
            ),
            EstimateError::Dimension(m) => write!(f, "dimension error: {m}"),
        }
    }
}

impl std::error::Error for EstimateError {}

/// A length-T experiment packaged as the regressor matrix Φ (n_φ×T), the
/// stacked successor states X (T·n_x column), and the energy bound γ_w.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    phi: Mat,
    x: Mat,
    gamma_w: f64,
}

impl DataRecord {
    pub fn new(phi: Mat, x: Mat, gamma_w: f64) -> Self {
        assert!(phi.cols() >= 1, "empty data record");
        assert_eq!(x.cols(), 1, "X must be a column vector");
        assert_eq!(x.rows() % phi.cols(), 0, "X length must be a multiple of T");
        assert!(gamma_w.is_finite(), "gamma_w must be finite");
        DataRecord { phi, x, gamma_w }
    }

    pub fn phi(&self) -> &Mat {
        &self.phi
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w
    }

    pub fn t(&self) -> usize {
        self.phi.cols()
    }

    pub fn n_x(&self) -> usize {
        self.x.rows() / self.t()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.rows()
    }

    pub fn n_u(&self) -> usize {
        self.n_phi() - self.n_x()
    }

    /// Successor states as an n_x×T matrix (column k holds x_{k+1}).
    pub fn x_mat(&self) -> Mat {
        let n_x = self.n_x();
        let t = self.t();
        let mut m = Mat::zeros(n_x, t);
        for k in 0..t {
            for i in 0..n_x {
                m.set(i, k, self.x.get(k * n_x + i, 0));
            }
        }
        m
    }
}

/// Least-squares estimate θ̂ solving the normal equations
/// `((ΦΦᵀ) ⊗ I) θ̂ = (Φ ⊗ I) X`.
///
/// The Kronecker structure is exploited: one n_φ×n_φ Cholesky solve per
/// state row instead of factoring the full n_x·n_φ system.
pub fn ls_estimate(d: &DataRecord) -> Result<Mat, EstimateError> {
    let s = gram(d);
    let n_phi = d.n_phi();
    let tol = 1e-10 * trace(&s) / n_phi as f64;
    let lo = matkit::min_eig(&s).map_err(|e| EstimateError::Dimension(e.to_string()))?;
    if lo <= tol {
        return Err(EstimateError::RankDeficientData { min_eig: lo, tol });
    }
    let x_mat = d.x_mat();
    // Solve (ΦΦᵀ) Mᵀ = Φ X_matᵀ, then θ̂ = vec([Â B̂]) with [Â B̂] = M.
    let rhs = d.phi.matmul(&x_mat.transpose());
    let m_t = matkit::solve_spd(&s, &rhs).map_err(|e| EstimateError::Dimension(e.to_string()))?;
    Ok(matkit::vec_cols(&m_t.transpose()))
}

/// Information matrix `P_θ⁻¹ = (ΦΦᵀ) ⊗ I_{n_x}`.
pub fn info_matrix(d: &DataRecord) -> Mat {
    kron_with_identity(&gram(d), d.n_x())
}

/// Data-dependent radius `G = γ_w + ‖θ̂‖²_{P_θ⁻¹} − Σ‖x_{k+1}‖²` of the
/// non-falsified set. Negative G signals that the energy bound γ_w is
/// inconsistent with the observed data (empty set), which is reported
/// rather than raised.
pub fn fogel_radius(d: &DataRecord, theta_hat: &Mat, p_inv: &Mat) -> f64 {
    let qf = p_inv.quad_form(theta_hat.as_slice());
    let xx: f64 = d.x.as_slice().iter().map(|v| v * v).sum();
    d.gamma_w + qf - xx
}

/// Sum of squared residuals `Σ‖x_{k+1} − [A B] φ_k‖²` at the parameter
/// `theta`, evaluated sample by sample.
pub fn ssr(d: &DataRecord, theta: &Mat) -> f64 {
    let n_x = d.n_x();
    let model = matkit::unvec_cols(theta, n_x, d.n_phi());
    let t = d.t();
    let mut acc = 0.0;
    for k in 0..t {
        let phi_k: Vec<f64> = (0..d.n_phi()).map(|i| d.phi.get(i, k)).collect();
        let pred = model.matvec(&phi_k);
        for i in 0..n_x {
            let r = d.x.get(k * n_x + i, 0) - pred[i];
            acc += r * r;
        }
    }
    acc
}

/// The non-falsified parameter ellipsoid
/// `{θ : (θ − center)ᵀ shape (θ − center) ≤ radius}`.
#[derive(Debug, Clone)]
pub struct ParamEllipsoid {
    pub center: Mat,
    pub shape: Mat,
    pub radius: f64,
}

impl ParamEllipsoid {
    /// Build the set from a data record: least-squares center, Kronecker
    /// information matrix, and the data-dependent radius.
    pub fn from_record(d: &DataRecord) -> Result<Self, EstimateError> {
        let center = ls_estimate(d)?;
        let shape = info_matrix(d);
        let radius = fogel_radius(d, &center, &shape);
        Ok(ParamEllipsoid { center, shape, radius })
    }

    /// A negative radius certifies that no parameter explains the data
    /// under the stated energy bound.
    pub fn is_empty(&self) -> bool {
        self.radius < 0.0
    }

    /// Membership test with slack [`TOL_MEMBER`] on the quadratic form.
    pub fn contains(&self, theta: &Mat) -> bool {
        assert_eq!(theta.rows(), self.center.rows(), "theta dimension mismatch");
        if self.is_empty() {
            return false;
        }
        let diff = theta.sub(&self.center);
        self.shape.quad_form(diff.as_slice()) <= self.radius + TOL_MEMBER
    }

    /// JSON export with `center`, `shape`, `radius`, and problem dims.
    pub fn to_json(&self, n_x: usize, n_u: usize, t: usize) -> serde_json::Value {
        let r12 = crate::experiments::round_sig;
        let center: Vec<f64> = self.center.as_slice().iter().map(|&v| r12(v)).collect();
        let n = self.shape.rows();
        let shape: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| r12(self.shape.get(r, c))).collect())
            .collect();
        json!({
            "center": center,
            "shape": shape,
            "radius": r12(self.radius),
            "dims": { "n_x": n_x, "n_u": n_u, "T": t },
        })
    }
}

/// Exploration-goal check: returns the quadratic form
/// `(θ_tr − θ̂)ᵀ D_des (θ_tr − θ̂)` and whether it is at most one.
pub fn goal_met(theta_hat: &Mat, theta_tr: &Mat, d_des: &Mat) -> (f64, bool) {
    let diff = theta_tr.sub(theta_hat);
    let qf = d_des.quad_form(diff.as_slice());
    (qf, qf <= 1.0 + TOL_MEMBER)
}

/// Least-squares estimate reshaped back into a state-space model, as used
/// to bootstrap a design from a short prior experiment.
pub fn warm_start_estimate(d: &DataRecord) -> Result<SystemModel, EstimateError> {
    let theta = ls_estimate(d)?;
    SystemModel::from_theta(&theta, d.n_x(), d.n_u())
        .map_err(|e: LtiError| EstimateError::Dimension(e.to_string()))
}

fn gram(d: &DataRecord) -> Mat {
    let mut s = Mat::zeros(d.n_phi(), d.n_phi());
    s.gemm(1.0, &d.phi, false, &d.phi, true, 0.0);
    s.symmetrize()
}

fn trace(m: &Mat) -> f64 {
    (0..m.rows()).map(|i| m.get(i, i)).sum()
}

/// `kron(s, I_n)` without forming the identity.
pub fn kron_with_identity(s: &Mat, n: usize) -> Mat {
    let q = s.rows();
    let mut m = Mat::zeros(q * n, s.cols() * n);
    for i in 0..q {
        for j in 0..s.cols() {
            let v = s.get(i, j);
            if v != 0.0 {
                for p in 0..n {
                    m.set(i * n + p, j * n + p, v);
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::example_system;
    use crate::lti::{
        self, multisine_inputs, pack_data, simulate, DisturbanceSource, MultisineDesign,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_record(gamma_w: f64, dist: &DisturbanceSource) -> DataRecord {
        let sys = example_system();
        let d = MultisineDesign::new(
            40,
            vec![0.0, 0.1, 0.2, 0.3, 0.4],
            vec![vec![1.0]; 5],
        )
        .unwrap();
        let u = multisine_inputs(&d);
        let traj = simulate(&sys, &u, dist, None).unwrap();
        pack_data(&traj, gamma_w)
    }

    #[test]
    fn noise_free_data_recovers_parameters() {
        let sys = example_system();
        let rec = example_record(1.0, &DisturbanceSource::Zero);
        let theta = ls_estimate(&rec).unwrap();
        let err = theta.sub(&sys.theta()).max_abs();
        assert!(err < 1e-8, "recovery error {err:.3e}");
    }

    #[test]
    fn scalar_normal_equations_by_hand() {
        // Data {(x_0,u_0)=(0,1), x_1=0.5; (x_1,u_1)=(0.5,0), x_2=0.25}
        // gives ΦΦᵀ = diag(0.25, 1) and θ̂ = (0.5, 0.5)ᵀ.
        let phi = Mat::from_rows(&[&[0.0, 0.5], &[1.0, 0.0]]);
        let x = Mat::col_vec(&[0.5, 0.25]);
        let rec = DataRecord::new(phi, x, 1.0);
        let theta = ls_estimate(&rec).unwrap();
        assert!((theta.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((theta.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicating_columns_keeps_estimate() {
        let rec = example_record(1.0, &DisturbanceSource::RandomEnergyCapped {
            gamma_w: 1.0,
            seed: 4,
        });
        let theta = ls_estimate(&rec).unwrap();
        let phi2 = rec.phi().hconcat(rec.phi());
        let mut xs = rec.x().as_slice().to_vec();
        xs.extend_from_slice(rec.x().as_slice());
        let rec2 = DataRecord::new(phi2, Mat::col_vec(&xs), 1.0);
        let theta2 = ls_estimate(&rec2).unwrap();
        assert!(theta.sub(&theta2).max_abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let phi = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let x = Mat::col_vec(&[0.0, 0.0]);
        let rec = DataRecord::new(phi, x, 1.0);
        match ls_estimate(&rec) {
            Err(EstimateError::RankDeficientData { .. }) => {}
            other => panic!("expected RankDeficientData, got {other:?}"),
        }
    }

    #[test]
    fn info_matrix_identity_and_scaling() {
        let phi = Mat::identity(3);
        let rec = DataRecord::new(phi.clone(), Mat::zeros(6, 1), 1.0);
        assert!(info_matrix(&rec).sub(&Mat::identity(6)).max_abs() < 1e-15);
        let rec_scaled = DataRecord::new(phi.scale(3.0), Mat::zeros(6, 1), 1.0);
        let diff = info_matrix(&rec_scaled).sub(&Mat::identity(6).scale(9.0)).max_abs();
        assert!(diff < 1e-12);
    }

    #[test]
    fn info_matrix_matches_summation_oracle() {
        // P_θ⁻¹ = Σ_k (φ_k ⊗ I)(φ_kᵀ ⊗ I), built term by term.
        let rec = example_record(1.0, &DisturbanceSource::Zero);
        let n_x = rec.n_x();
        let q = rec.n_phi() * n_x;
        let mut acc = Mat::zeros(q, q);
        for k in 0..rec.t() {
            let phi_k =
                Mat::col_vec(&(0..rec.n_phi()).map(|i| rec.phi().get(i, k)).collect::<Vec<_>>());
            let col = matkit::kron(&phi_k, &Mat::identity(n_x));
            let mut term = Mat::zeros(q, q);
            term.gemm(1.0, &col, false, &col, true, 0.0);
            acc = acc.add(&term);
        }
        let direct = info_matrix(&rec);
        let scale = direct.max_abs().max(1.0);
        assert!(acc.sub(&direct).max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn mean_formulas_agree() {
        // Summation form P_θ Σ (φ_kᵀ ⊗ I)ᵀ x_{k+1} vs the solver path.
        let rec = example_record(1.0, &DisturbanceSource::RandomEnergyCapped {
            gamma_w: 0.5,
            seed: 8,
        });
        let n_x = rec.n_x();
        let q = rec.n_phi() * n_x;
        let mut rhs = Mat::zeros(q, 1);
        for k in 0..rec.t() {
            let phi_k =
                Mat::col_vec(&(0..rec.n_phi()).map(|i| rec.phi().get(i, k)).collect::<Vec<_>>());
            let reg = matkit::kron(&phi_k.transpose(), &Mat::identity(n_x));
            let xk: Vec<f64> = (0..n_x).map(|i| rec.x().get(k * n_x + i, 0)).collect();
            let term = reg.transpose().matmul(&Mat::col_vec(&xk));
            rhs = rhs.add(&term);
        }
        let p_inv = info_matrix(&rec);
        let sum_form = matkit::solve_spd(&p_inv, &rhs).unwrap();
        let direct = ls_estimate(&rec).unwrap();
        let scale = direct.max_abs().max(1.0);
        assert!(sum_form.sub(&direct).max_abs() <= 1e-8 * scale);
    }

    #[test]
    fn fogel_radius_equals_gamma_minus_ssr() {
        let gamma_w = 0.75;
        let rec = example_record(
            gamma_w,
            &DisturbanceSource::RandomEnergyCapped { gamma_w, seed: 21 },
        );
        let theta = ls_estimate(&rec).unwrap();
        let p_inv = info_matrix(&rec);
        let g = fogel_radius(&rec, &theta, &p_inv);
        let alt = gamma_w - ssr(&rec, &theta);
        assert!((g - alt).abs() <= 1e-8 * g.abs().max(1.0), "g={g}, alt={alt}");
        assert!(g <= gamma_w + 1e-9);
    }

    #[test]
    fn fogel_radius_noise_free_is_gamma() {
        let rec = example_record(2.5, &DisturbanceSource::Zero);
        let theta = ls_estimate(&rec).unwrap();
        let g = fogel_radius(&rec, &theta, &info_matrix(&rec));
        assert!((g - 2.5).abs() < 1e-7);
    }

    #[test]
    fn fogel_radius_zero_at_boundary() {
        // Setting γ_w exactly to the realized SSR lands the radius at zero.
        let rec0 = example_record(
            1.0,
            &DisturbanceSource::RandomEnergyCapped { gamma_w: 0.3, seed: 5 },
        );
        let theta = ls_estimate(&rec0).unwrap();
        let res = ssr(&rec0, &theta);
        let rec = DataRecord::new(rec0.phi().clone(), rec0.x().clone(), res);
        let g = fogel_radius(&rec, &theta, &info_matrix(&rec));
        assert!(g.abs() < 1e-8 * res.max(1.0));
    }

    #[test]
    fn radius_depends_on_data() {
        let rec = example_record(1.0, &DisturbanceSource::Zero);
        let theta = ls_estimate(&rec).unwrap();
        let p_inv = info_matrix(&rec);
        let g = fogel_radius(&rec, &theta, &p_inv);
        let mut xs = rec.x().as_slice().to_vec();
        xs[3] += 0.25;
        let rec2 = DataRecord::new(rec.phi().clone(), Mat::col_vec(&xs), 1.0);
        let g2 = fogel_radius(&rec2, &theta, &p_inv);
        assert!((g - g2).abs() > 1e-6);
    }

    #[test]
    fn membership_of_center_and_empty_set() {
        let center = Mat::col_vec(&[1.0, 2.0]);
        let shape = Mat::identity(2);
        let e = ParamEllipsoid { center: center.clone(), shape: shape.clone(), radius: 0.5 };
        assert!(e.contains(&center));
        let empty = ParamEllipsoid { center: center.clone(), shape, radius: -1e-12 };
        assert!(empty.is_empty());
        assert!(!empty.contains(&center));
    }

    #[test]
    fn set_equivalence_with_residual_form() {
        // SSR(θ) ≤ γ_w  ⇔  (θ−θ̂)ᵀ P_θ⁻¹ (θ−θ̂) ≤ G, checked on the scalars.
        let gamma_w = 0.6;
        let rec = example_record(
            gamma_w,
            &DisturbanceSource::RandomEnergyCapped { gamma_w, seed: 33 },
        );
        let theta_hat = ls_estimate(&rec).unwrap();
        let p_inv = info_matrix(&rec);
        let g = fogel_radius(&rec, &theta_hat, &p_inv);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let probe = Mat::col_vec(
                &(0..theta_hat.rows())
                    .map(|i| theta_hat.get(i, 0) + 0.02 * (rng.gen::<f64>() - 0.5))
                    .collect::<Vec<_>>(),
            );
            let lhs = ssr(&rec, &probe) - gamma_w;
            let diff = probe.sub(&theta_hat);
            let rhs = p_inv.quad_form(diff.as_slice()) - g;
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "lhs={lhs}, rhs={rhs}");
        }
    }

    #[test]
    fn lemma_membership_over_random_trials() {
        // Any disturbance with energy within the bound leaves the truth inside.
        let sys = example_system();
        let gamma_w = 0.8;
        for seed in 0..50u64 {
            let rec = example_record(
                gamma_w,
                &DisturbanceSource::RandomEnergyCapped { gamma_w, seed },
            );
            let set = ParamEllipsoid::from_record(&rec).unwrap();
            assert!(set.contains(&sys.theta()), "violated at seed {seed}");
        }
    }

    #[test]
    fn goal_met_cases() {
        let theta = example_system().theta();
        let (qf, ok) = goal_met(&theta, &theta, &Mat::identity(20));
        assert_eq!(qf, 0.0);
        assert!(ok);

        let mut off = theta.clone();
        off.set(0, 0, off.get(0, 0) + 0.0257);
        let (qf, ok) = goal_met(&off, &theta, &Mat::identity(20));
        assert!((qf - 0.0257f64.powi(2)).abs() < 1e-12);
        assert!(ok);

        let mut far = theta.clone();
        far.set(0, 0, far.get(0, 0) + 0.6);
        let (qf, ok) = goal_met(&far, &theta, &Mat::identity(20).scale(4.0));
        assert!((qf - 1.44).abs() < 1e-12);
        assert!(!ok);
    }

    #[test]
    fn warm_start_round_trip() {
        let sys = example_system();
        let rec = example_record(1.0, &DisturbanceSource::Zero);
        let model = warm_start_estimate(&rec).unwrap();
        assert!(model.a().sub(sys.a()).max_abs() < 1e-8);
        assert!(model.b().sub(sys.b()).max_abs() < 1e-8);
        // vec then unvec is the identity
        let theta = sys.theta();
        let back = lti::SystemModel::from_theta(&theta, 4, 1).unwrap();
        assert_eq!(back.theta().as_slice(), theta.as_slice());
    }

    #[test]
    fn ellipsoid_json_fields() {
        let rec = example_record(1.0, &DisturbanceSource::Zero);
        let e = ParamEllipsoid::from_record(&rec).unwrap();
        let v = e.to_json(4, 1, rec.t());
        assert_eq!(v["dims"]["n_x"], 4);
        assert_eq!(v["dims"]["T"], 40);
        assert_eq!(v["center"].as_array().unwrap().len(), 20);
        assert_eq!(v["shape"].as_array().unwrap().len(), 20);
        assert!(v["radius"].as_f64().unwrap() > 0.0);
    }
}
