//! Square-root linear algebra kernels for the Kalman passes.
//!
//! Covariances are never formed directly in the filters; they are carried as
//! lower-triangular factors `L` with `Σ = L·Lᵀ`. Every propagation step then
//! reduces to re-triangularising a stacked factor, done here with Householder
//! reflections. This keeps factors exactly triangular, guarantees positive
//! semi-definiteness by construction, and is backward stable even for the
//! badly scaled covariances produced by high-order integrated Wiener priors.

use nalgebra::{DMatrix, DVector};

pub const LN_2PI: f64 = 1.8378770664093453;

/// In-place Householder QR of `a` (k×n), keeping only the R factor.
///
/// On return the leading `min(k,n)×n` block of `a` is upper triangular with
/// `RᵀR = AᵀA` for the original contents `A`; everything below the diagonal
/// is zeroed. Column-major access throughout.
pub fn qr_r_in_place(a: &mut DMatrix<f64>) {
    let k = a.nrows();
    let n = a.ncols();
    let data = a.as_mut_slice();
    for j in 0..n.min(k) {
        // Householder vector from column j, rows j..k.
        let (colj, tail) = (&mut data[j * k..]).split_at_mut(k);
        let cj = &mut colj[j..];
        let mut norm2 = 0.0;
        for &v in cj.iter() {
            norm2 += v * v;
        }
        if norm2 == 0.0 {
            continue;
        }
        let norm = norm2.sqrt();
        let ajj = cj[0];
        let alpha = if ajj >= 0.0 { -norm } else { norm };
        let v1 = ajj - alpha;
        let vtv = 2.0 * (norm2 - alpha * ajj);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        cj[0] = v1;
        // Apply I - beta v vᵀ to the remaining columns.
        let mut c = j + 1;
        let mut base = 0;
        while c < n {
            let cc = &mut tail[base + j..base + k];
            let mut w = 0.0;
            for (u, x) in cj.iter().zip(cc.iter()) {
                w += u * x;
            }
            let s = beta * w;
            for (u, x) in cj.iter().zip(cc.iter_mut()) {
                *x -= s * u;
            }
            c += 1;
            base += k;
        }
        cj[0] = alpha;
        for v in cj[1..].iter_mut() {
            *v = 0.0;
        }
    }
}

/// Householder QR with column pivoting, keeping only R.
///
/// Columns are permuted so pivot magnitudes are non-increasing; the returned
/// vector maps factor position `j` to the original column index. With junk
/// directions (roundoff-scale rank deficiency) ordered last, guarded
/// triangular solves against R cannot contaminate the well-determined
/// directions.
pub fn qr_r_pivoted_in_place(a: &mut DMatrix<f64>) -> Vec<usize> {
    let k = a.nrows();
    let n = a.ncols();
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..n.min(k) {
        // Pick the column with the largest remaining norm.
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..n {
            let mut norm2 = 0.0;
            for r in j..k {
                let v = a[(r, c)];
                norm2 += v * v;
            }
            if norm2 > best_norm {
                best_norm = norm2;
                best = c;
            }
        }
        if best != j {
            a.swap_columns(j, best);
            perm.swap(j, best);
        }
        if best_norm <= 0.0 {
            break;
        }
        // Householder on column j, rows j..k.
        let mut norm2 = 0.0;
        for r in j..k {
            let v = a[(r, j)];
            norm2 += v * v;
        }
        if norm2 == 0.0 {
            continue;
        }
        let norm = norm2.sqrt();
        let ajj = a[(j, j)];
        let alpha = if ajj >= 0.0 { -norm } else { norm };
        let v1 = ajj - alpha;
        let vtv = 2.0 * (norm2 - alpha * ajj);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        a[(j, j)] = v1;
        for c in (j + 1)..n {
            let mut w = 0.0;
            for r in j..k {
                w += a[(r, j)] * a[(r, c)];
            }
            let s = beta * w;
            for r in j..k {
                let u = a[(r, j)];
                a[(r, c)] -= s * u;
            }
        }
        a[(j, j)] = alpha;
        for r in (j + 1)..k {
            a[(r, j)] = 0.0;
        }
    }
    perm
}

/// Solve `W · (Π Rᵀ R Πᵀ) = B` for `W`, given the pivoted upper factor `R`
/// and its permutation (`perm[j]` is the original index of factor column j).
///
/// Equivalent to `W = B · pinv(Σ)` for `Σ = Π RᵀR Πᵀ`: pivots below
/// `rel_tol · |R₀₀|` are treated as exact zero directions.
pub fn solve_right_gram_pivoted(
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    perm: &[usize],
    rel_tol: f64,
) -> DMatrix<f64> {
    let n = r.ncols();
    let rows = b.nrows();
    debug_assert_eq!(b.ncols(), n);
    let tol = rel_tol * r[(0, 0)].abs();
    // Gather: C = B·Π (column j comes from original column perm[j]).
    let mut c = DMatrix::zeros(rows, n);
    for j in 0..n {
        for i in 0..rows {
            c[(i, j)] = b[(i, perm[j])];
        }
    }
    // C ← C·R⁻¹ (R upper): ascending columns, big pivots first.
    for j in 0..n {
        let piv = r[(j, j)];
        if piv.abs() <= tol {
            for i in 0..rows {
                c[(i, j)] = 0.0;
            }
            continue;
        }
        for i in 0..rows {
            let mut s = c[(i, j)];
            for k2 in 0..j {
                s -= c[(i, k2)] * r[(k2, j)];
            }
            c[(i, j)] = s / piv;
        }
    }
    // C ← C·R⁻ᵀ (lower): descending columns, junk pivots zeroed first.
    for j in (0..n).rev() {
        let piv = r[(j, j)];
        if piv.abs() <= tol {
            for i in 0..rows {
                c[(i, j)] = 0.0;
            }
            continue;
        }
        for i in 0..rows {
            let mut s = c[(i, j)];
            for k2 in (j + 1)..n {
                s -= c[(i, k2)] * r[(j, k2)];
            }
            c[(i, j)] = s / piv;
        }
    }
    // Scatter back: W[:, perm[j]] = C[:, j].
    let mut w = DMatrix::zeros(rows, n);
    for j in 0..n {
        for i in 0..rows {
            w[(i, perm[j])] = c[(i, j)];
        }
    }
    w
}

/// Lower-triangular factor of `M·Mᵀ` for a stacked factor `M` (n×m).
///
/// `mt` must hold `Mᵀ` (m×n) and is destroyed. The result is written to
/// `out` (n×n), sign-normalised so the diagonal is non-negative.
pub fn lower_factor_from_transposed(mt: &mut DMatrix<f64>, out: &mut DMatrix<f64>) {
    qr_r_in_place(mt);
    let n = mt.ncols();
    debug_assert_eq!(out.nrows(), n);
    let rows = mt.nrows().min(n);
    for c in 0..n {
        // Column c of L is row c of R, sign-flipped if the pivot is negative.
        if c >= rows {
            for r in 0..n {
                out[(r, c)] = 0.0;
            }
            continue;
        }
        let flip = mt[(c, c)] < 0.0;
        for r in 0..n {
            let v = if r >= c { mt[(c, r)] } else { 0.0 };
            out[(r, c)] = if flip { -v } else { v };
        }
    }
}

/// Convenience wrapper allocating the workspace: lower factor of `M·Mᵀ`.
pub fn lower_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut mt = m.transpose();
    let mut out = DMatrix::zeros(m.nrows(), m.nrows());
    lower_factor_from_transposed(&mut mt, &mut out);
    out
}

/// Solve `W·L = Y` for `W` in place (`y` becomes `W`), `L` lower triangular.
///
/// Pivots below `rel_tol · max |diag|` are treated as exact zero directions:
/// the corresponding columns of the solution are zeroed instead of divided,
/// which implements the pseudo-inverse on rank-deficient factors. Returns
/// whether any pivot was guarded.
pub fn solve_right_lower_guarded(y: &mut DMatrix<f64>, l: &DMatrix<f64>, rel_tol: f64) -> bool {
    let n = l.nrows();
    debug_assert_eq!(y.ncols(), n);
    let mut max_diag = 0.0_f64;
    for i in 0..n {
        max_diag = max_diag.max(l[(i, i)].abs());
    }
    let tol = rel_tol * max_diag;
    let mut guarded = false;
    let rows = y.nrows();
    for j in (0..n).rev() {
        let piv = l[(j, j)];
        if piv.abs() <= tol {
            guarded = true;
            for r in 0..rows {
                y[(r, j)] = 0.0;
            }
            continue;
        }
        for r in 0..rows {
            let mut s = y[(r, j)];
            for k in (j + 1)..n {
                s -= y[(r, k)] * l[(k, j)];
            }
            y[(r, j)] = s / piv;
        }
    }
    guarded
}

/// Solve `L·x = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Cholesky factor (lower) of a symmetric positive definite matrix.
///
/// Returns `None` if a pivot is not strictly positive.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// log-determinant of `Σ = L·Lᵀ` given its factor: `2 Σ ln L_ii`.
///
/// Returns `None` when a diagonal entry is non-positive.
pub fn ln_det_from_factor(l: &DMatrix<f64>) -> Option<f64> {
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn lower_factor_reconstructs_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, m) in &[(1usize, 1usize), (3, 5), (4, 8), (6, 12), (12, 24), (5, 3)] {
            let m0 = random_matrix(&mut rng, n, m);
            let gram = &m0 * m0.transpose();
            let l = lower_factor(&m0);
            // Triangularity and sign convention.
            for r in 0..n {
                for c in 0..n {
                    if c > r {
                        assert_eq!(l[(r, c)], 0.0);
                    }
                }
                assert!(l[(r, r)] >= 0.0);
            }
            let back = &l * l.transpose();
            assert_relative_eq!(back, gram, epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn lower_factor_of_zero_stack_is_zero() {
        let m = DMatrix::zeros(4, 8);
        let l = lower_factor(&m);
        assert_eq!(l, DMatrix::zeros(4, 4));
    }

    #[test]
    fn guarded_solve_matches_exact_solve_on_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 9);
        let l = lower_factor(&a);
        let y0 = random_matrix(&mut rng, 3, 5);
        let mut w = y0.clone();
        let fired = solve_right_lower_guarded(&mut w, &l, 1e-14);
        assert!(!fired);
        assert_relative_eq!(&w * &l, y0, epsilon = 1e-10);
    }

    #[test]
    fn guarded_solve_zeroes_null_directions() {
        let l = DMatrix::zeros(3, 3);
        let mut y = DMatrix::from_element(2, 3, 1.0);
        let fired = solve_right_lower_guarded(&mut y, &l, 1e-14);
        assert!(fired);
        assert_eq!(y, DMatrix::zeros(2, 3));
    }

    #[test]
    fn pivoted_qr_reconstructs_and_orders_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_matrix(&mut rng, 9, 5);
        let gram = m.transpose() * &m;
        let mut a = m.clone();
        let perm = qr_r_pivoted_in_place(&mut a);
        // Π RᵀR Πᵀ = MᵀM.
        let n = 5;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += a[(k, i)] * a[(k, j)];
                }
                assert_relative_eq!(acc, gram[(perm[i], perm[j])], epsilon = 1e-12);
            }
        }
        for j in 1..n {
            assert!(a[(j, j)].abs() <= a[(j - 1, j - 1)].abs() + 1e-12);
        }
    }

    #[test]
    fn pivoted_gram_solve_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let m = random_matrix(&mut rng, 10, 4);
        let sigma = m.transpose() * &m;
        let b = random_matrix(&mut rng, 3, 4);
        let mut a = m.clone();
        let perm = qr_r_pivoted_in_place(&mut a);
        let r = a.view((0, 0), (4, 4)).clone_owned();
        let w = solve_right_gram_pivoted(&b, &r, &perm, 1e-13);
        assert_relative_eq!(&w * &sigma, b, epsilon = 1e-9, max_relative = 1e-9);
    }

    #[test]
    fn pivoted_gram_solve_consistent_on_singular_input() {
        // Σ rank 1; B constructed inside the row space so the system is
        // consistent and the min-norm solution reproduces it.
        let u = DMatrix::from_column_slice(2, 1, &[0.6, -0.8]);
        let m = &u * u.transpose(); // factor stack with rank 1
        let sigma = &m * m.transpose();
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]) * &sigma;
        let mut a = m.transpose();
        let perm = qr_r_pivoted_in_place(&mut a);
        let r = a.view((0, 0), (2, 2)).clone_owned();
        let w = solve_right_gram_pivoted(&b, &r, &perm, 1e-13);
        assert_relative_eq!(&w * &sigma, b, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_agrees_with_factor_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 6, 6);
        let spd = &a * a.transpose() + DMatrix::identity(6, 6);
        let l = cholesky_lower(&spd).unwrap();
        assert_relative_eq!(&l * l.transpose(), spd, epsilon = 1e-11);
        let ld = ln_det_from_factor(&l).unwrap();
        let det = spd.determinant();
        assert_relative_eq!(ld, det.ln(), epsilon = 1e-9);
    }
}
