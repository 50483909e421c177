//! Thin safe wrapper around the `matrixmultiply` dgemm kernel.

/// General matrix multiply on strided slices:
/// `c = alpha * a * b + beta * c` with `a` m×k, `b` k×n, `c` m×n.
///
/// Strides are in elements. The caller must pass non-overlapping `a`/`b`
/// versus `c` buffers; slices are length-checked against the strided extent.
#[allow(clippy::too_many_arguments)]
pub fn dgemm_into(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(extent(m, k, rsa, csa) <= a.len());
    debug_assert!(extent(k, n, rsb, csb) <= b.len());
    debug_assert!(extent(m, n, rsc, csc) <= c.len());
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
}
