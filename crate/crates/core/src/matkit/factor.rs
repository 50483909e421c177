//! Cholesky factorization and triangular solves.
//!
//! The factor convention is upper-triangular: `chol_upper(S)` returns `R`
//! with `RᵀR = S`, matching the convention used for the goal-shape square
//! root elsewhere in the crate. Factorization and the many-right-hand-side
//! solves are blocked so the bulk of the work runs through the dgemm kernel.

use super::gemm::dgemm_into;
use super::{Mat, MatError, TOL_PD};

const NB: usize = 64;

/// Upper Cholesky factor `R` with `RᵀR = s`.
///
/// Only the upper triangle of `s` is read. Fails with
/// [`MatError::NotPositiveDefinite`] when a pivot falls below the absolute
/// floor [`TOL_PD`].
pub fn chol_upper(s: &Mat) -> Result<Mat, MatError> {
    assert!(s.is_square(), "chol_upper expects a square matrix");
    let n = s.rows();
    let mut a = s.clone();
    let ad = a.as_mut_slice();

    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);

        // Factor the diagonal block in place (up-looking, upper triangle).
        for j in 0..kb {
            let gj = k0 + j;
            let mut d = ad[gj * n + gj];
            for p in 0..j {
                let v = ad[(k0 + p) * n + gj];
                d -= v * v;
            }
            // NaN fails this comparison too, so it cannot flow through.
            if !(d > TOL_PD) {
                return Err(MatError::NotPositiveDefinite { pivot: gj });
            }
            d = d.sqrt();
            ad[gj * n + gj] = d;
            for c in j + 1..kb {
                let gc = k0 + c;
                let mut v = ad[gj * n + gc];
                for p in 0..j {
                    v -= ad[(k0 + p) * n + gj] * ad[(k0 + p) * n + gc];
                }
                ad[gj * n + gc] = v / d;
            }
        }

        let rest = n - k0 - kb;
        if rest > 0 {
            // Panel solve: R[k0.., trailing cols] = R_kkᵀ \ A[k0.., trailing cols].
            for i in 0..kb {
                let gi = k0 + i;
                let d = ad[gi * n + gi];
                for c in 0..rest {
                    let gc = k0 + kb + c;
                    let mut v = ad[gi * n + gc];
                    for p in 0..i {
                        v -= ad[(k0 + p) * n + gi] * ad[(k0 + p) * n + gc];
                    }
                    ad[gi * n + gc] = v / d;
                }
            }
            // Trailing update: A[trail, trail] -= Panelᵀ · Panel.
            let mut panel = vec![0.0; kb * rest];
            for i in 0..kb {
                let src0 = (k0 + i) * n + k0 + kb;
                panel[i * rest..(i + 1) * rest].copy_from_slice(&ad[src0..src0 + rest]);
            }
            let c0 = (k0 + kb) * n + k0 + kb;
            dgemm_into(
                rest,
                kb,
                rest,
                -1.0,
                &panel,
                1,
                rest as isize,
                &panel,
                rest as isize,
                1,
                1.0,
                &mut ad[c0..],
                n as isize,
                1,
            );
        }
        k0 += kb;
    }

    // Zero out the strictly lower triangle.
    for r in 1..n {
        for c in 0..r {
            ad[r * n + c] = 0.0;
        }
    }
    Ok(a)
}

/// Solve `Rᵀ X = B` for `X` given the upper factor `R` (forward substitution).
pub fn solve_upper_t_many(r: &Mat, b: &Mat) -> Mat {
    let n = r.rows();
    assert!(r.is_square() && b.rows() == n, "solve_upper_t_many shape mismatch");
    let m = b.cols();
    let mut x = b.clone();
    let rd = r.as_slice();

    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        if k0 > 0 {
            // X[k0.., :] -= R[0..k0, k0..]ᵀ · X[0..k0, :]
            let (done, todo) = x.as_mut_slice().split_at_mut(k0 * m);
            dgemm_into(
                kb,
                k0,
                m,
                -1.0,
                &rd[k0..],
                1,
                n as isize,
                done,
                m as isize,
                1,
                1.0,
                todo,
                m as isize,
                1,
            );
        }
        let xd = x.as_mut_slice();
        for i in 0..kb {
            let gi = k0 + i;
            let d = rd[gi * n + gi];
            for p in 0..i {
                let gp = k0 + p;
                let l = rd[gp * n + gi];
                if l != 0.0 {
                    let (top, bot) = xd.split_at_mut(gi * m);
                    let src = &top[gp * m..(gp + 1) * m];
                    for (dst, s) in bot[..m].iter_mut().zip(src) {
                        *dst -= l * s;
                    }
                }
            }
            for v in xd[gi * m..(gi + 1) * m].iter_mut() {
                *v /= d;
            }
        }
        k0 += kb;
    }
    x
}

/// Solve `X R = B` for `X` given the upper factor `R` (i.e. `X = B R⁻¹`).
pub fn solve_upper_right_many(r: &Mat, b: &Mat) -> Mat {
    let n = r.rows();
    assert!(r.is_square() && b.cols() == n, "solve_upper_right_many shape mismatch");
    let rows = b.rows();
    let mut x = b.clone();
    let rd = r.as_slice();

    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        // Copy the panel out, update it against finished columns, solve, write back.
        let mut panel = vec![0.0; rows * kb];
        for i in 0..rows {
            let src0 = i * n + k0;
            panel[i * kb..(i + 1) * kb].copy_from_slice(&x.as_slice()[src0..src0 + kb]);
        }
        if k0 > 0 {
            // panel -= X[:, 0..k0] · R[0..k0, k0..k0+kb]
            dgemm_into(
                rows,
                k0,
                kb,
                -1.0,
                x.as_slice(),
                n as isize,
                1,
                &rd[k0..],
                n as isize,
                1,
                1.0,
                &mut panel,
                kb as isize,
                1,
            );
        }
        for j in 0..kb {
            let gj = k0 + j;
            let d = rd[gj * n + gj];
            for p in 0..j {
                let u = rd[(k0 + p) * n + gj];
                if u != 0.0 {
                    for i in 0..rows {
                        panel[i * kb + j] -= u * panel[i * kb + p];
                    }
                }
            }
            for i in 0..rows {
                panel[i * kb + j] /= d;
            }
        }
        for i in 0..rows {
            let dst0 = i * n + k0;
            x.as_mut_slice()[dst0..dst0 + kb].copy_from_slice(&panel[i * kb..(i + 1) * kb]);
        }
        k0 += kb;
    }
    x
}

/// Solve the symmetric positive definite system `s · X = B`.
pub fn solve_spd(s: &Mat, b: &Mat) -> Result<Mat, MatError> {
    let r = chol_upper(s)?;
    let y = solve_upper_t_many(&r, b);
    // Back substitution R X = Y.
    let n = r.rows();
    let m = y.cols();
    let mut x = y;
    let rd = r.as_slice();
    for gi in (0..n).rev() {
        let d = rd[gi * n + gi];
        let xd = x.as_mut_slice();
        for c in 0..m {
            let mut v = xd[gi * m + c];
            for p in gi + 1..n {
                v -= rd[gi * n + p] * xd[p * m + c];
            }
            xd[gi * m + c] = v / d;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::super::tests::TestRng;
    use super::*;

    #[test]
    fn chol_identity_and_scalar() {
        let r = chol_upper(&Mat::identity(5)).unwrap();
        assert!(r.sub(&Mat::identity(5)).max_abs() == 0.0);
        let r = chol_upper(&Mat::from_rows(&[&[4.0]])).unwrap();
        assert_eq!(r.get(0, 0), 2.0);
    }

    #[test]
    fn chol_hand_case() {
        // [[4,2],[2,5]] factors as R = [[2,1],[0,2]]; verified by RᵀR.
        let s = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]);
        let r = chol_upper(&s).unwrap();
        let expect = Mat::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
        assert!(r.sub(&expect).max_abs() < 1e-14);
        assert!(r.transpose().matmul(&r).sub(&s).max_abs() < 1e-14);
    }

    #[test]
    fn chol_rejects_indefinite() {
        let s = Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        match chol_upper(&s) {
            Err(MatError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn chol_reconstructs_random_spd() {
        let mut rng = TestRng::new(42);
        for &n in &[1usize, 3, 17, 64, 130] {
            let s = rng.spd(n);
            let r = chol_upper(&s).unwrap();
            let err = r.transpose().matmul(&r).sub(&s).max_abs();
            let scale = s.max_abs().max(1.0);
            assert!(err <= 1e-10 * scale, "n={n}: reconstruction error {err:.3e}");
            for i in 1..n {
                for j in 0..i {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn triangular_solves_invert_factor() {
        let mut rng = TestRng::new(9);
        for &n in &[4usize, 37, 90, 140] {
            let s = rng.spd(n);
            let r = chol_upper(&s).unwrap();
            let b = rng.mat(n, 13);
            // Rᵀ · (Rᵀ \ B) = B
            let y = solve_upper_t_many(&r, &b);
            let back = r.transpose().matmul(&y);
            assert!(back.sub(&b).max_abs() < 1e-9 * b.max_abs().max(1.0));
            // (B / R) · R = B
            let w = rng.mat(13, n);
            let z = solve_upper_right_many(&r, &w);
            let back = z.matmul(&r);
            assert!(back.sub(&w).max_abs() < 1e-9 * w.max_abs().max(1.0));
        }
    }

    #[test]
    fn spd_solve_round_trip() {
        let mut rng = TestRng::new(5);
        let s = rng.spd(23);
        let b = rng.mat(23, 4);
        let x = solve_spd(&s, &b).unwrap();
        assert!(s.matmul(&x).sub(&b).max_abs() < 1e-8);
    }
}
