//! Symmetric eigendecomposition via Householder tridiagonalization followed
//! by implicit-shift QL iteration (the classic tred2/tql2 pair), with
//! eigenvector accumulation and ascending eigenvalue order.

use super::{sym_tol, Mat, MatError};

/// Eigendecomposition of a symmetric matrix: `S = V diag(λ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal matrix whose columns are the corresponding eigenvectors.
    pub eigenvectors: Mat,
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be symmetric within `1e-9 · ‖s‖_F`; it is symmetrized
/// before decomposition to absorb rounding asymmetry from matrix assembly.
pub fn sym_eig(s: &Mat) -> Result<SymEig, MatError> {
    assert!(s.is_square(), "sym_eig expects a square matrix");
    let tol = sym_tol(s);
    let asym = s.asymmetry();
    if asym > tol {
        return Err(MatError::NotSymmetric { asym, tol });
    }
    let n = s.rows();
    let mut z = s.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return Ok(SymEig { eigenvalues: d, eigenvectors: z });
    }
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, &mut z)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut v = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            v.set(r, dst, z.get(r, src));
        }
    }
    Ok(SymEig { eigenvalues, eigenvectors: v })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(s: &Mat) -> Result<f64, MatError> {
    Ok(sym_eig(s)?.eigenvalues[0])
}

/// Positive-semidefiniteness test: smallest eigenvalue at least `-tol`.
pub fn is_psd(s: &Mat, tol: f64) -> Result<bool, MatError> {
    Ok(min_eig(s)? >= -tol)
}

/// Householder reduction of `z` to tridiagonal form, accumulating the
/// transformation in `z`. Diagonal lands in `d`, subdiagonal in `e[1..]`.
fn tred2(z: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = z.rows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..i {
                scale += z.get(i, k).abs();
            }
            if scale == 0.0 {
                e[i] = z.get(i, l);
            } else {
                for k in 0..i {
                    let v = z.get(i, k) / scale;
                    z.set(i, k, v);
                    h += v * v;
                }
                let f = z.get(i, l);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z.set(i, l, f - g);
                let mut f_acc = 0.0;
                for j in 0..i {
                    z.set(j, i, z.get(i, j) / h);
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z.get(j, k) * z.get(i, k);
                    }
                    for k in j + 1..i {
                        g += z.get(k, j) * z.get(i, k);
                    }
                    e[j] = g / h;
                    f_acc += e[j] * z.get(i, j);
                }
                let hh = f_acc / (h + h);
                for j in 0..i {
                    let f = z.get(i, j);
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = z.get(j, k) - f * e[k] - g * z.get(i, k);
                        z.set(j, k, v);
                    }
                }
            }
        } else {
            e[i] = z.get(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z.get(i, k) * z.get(k, j);
                }
                for k in 0..i {
                    let v = z.get(k, j) - g * z.get(k, i);
                    z.set(k, j, v);
                }
            }
        }
        d[i] = z.get(i, i);
        z.set(i, i, 1.0);
        for j in 0..i {
            z.set(j, i, 0.0);
            z.set(i, j, 0.0);
        }
    }
}

/// Implicit-shift QL iteration on the tridiagonal form, rotating the
/// accumulated transformation so columns of `z` become eigenvectors.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Mat) -> Result<(), MatError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    // Absolute deflation floor: off-diagonals this small relative to the
    // whole matrix perturb eigenvalues by well under the stated tolerance,
    // and exact-zero diagonals would otherwise never deflate.
    let scale = d.iter().chain(e.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = f64::EPSILON * f64::EPSILON * scale + f64::MIN_POSITIVE;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd + floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 80 {
                return Err(MatError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut broke_early = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    broke_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z.get(k, i + 1);
                    z.set(k, i + 1, s * z.get(k, i) + c * f);
                    z.set(k, i, c * z.get(k, i) - s * f);
                }
            }
            if broke_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
