//! Solvers for the real Sylvester equation `AX + XB = C`.
//!
//! The production path is Bartels-Stewart: orthogonally reduce `A` and `B`
//! (symmetric eigendecomposition when both are symmetric, real Schur form
//! otherwise), solve the quasi-triangular system block by block, and
//! transform back. Cost is `O(n^3 + m^3)` against `O(n^3 m^3)` for the
//! dense Kronecker formulation, which is kept as a validation oracle.
//!
//! A unique solution exists iff the spectra of `A` and `-B` are disjoint;
//! the callers here supply positive-definite `A` and positive-semidefinite
//! `B`, which guarantees it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scaled spectra-overlap threshold below which the system is reported
/// singular.
const EIGEN_GAP_TOL: f64 = 1e-12;
/// Accepted relative residual for a solve.
const RESIDUAL_BOUND: f64 = 1e-8;
/// Kronecker oracle density limit (`n * m`).
const KRONECKER_LIMIT: usize = 400;

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.norm().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch("A and B must be square".into()));
    }
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "C must be {}x{}, got {}x{}",
            a.nrows(),
            b.nrows(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

fn residual_check(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    let residual = (a * x + x * b - c).norm();
    let bound = RESIDUAL_BOUND * c.norm().max(1.0);
    if residual > bound {
        return Err(Error::SolverResidual { residual, bound });
    }
    Ok(())
}

/// Eigenvalues (as complex pairs) read off a real quasi-triangular matrix.
fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let mut eigs = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)].abs() > 1e-14 * scale {
            let (a, b) = (t[(k, k)], t[(k, k + 1)]);
            let (c, d) = (t[(k + 1, k)], t[(k + 1, k + 1)]);
            let mean = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                eigs.push((mean + r, 0.0));
                eigs.push((mean - r, 0.0));
            } else {
                let im = (-disc).sqrt();
                eigs.push((mean, im));
                eigs.push((mean, -im));
            }
            k += 2;
        } else {
            eigs.push((t[(k, k)], 0.0));
            k += 1;
        }
    }
    eigs
}

fn check_spectra_disjoint(
    eigs_a: &[(f64, f64)],
    eigs_b: &[(f64, f64)],
    scale: f64,
) -> Result<()> {
    for &(ra, ia) in eigs_a {
        for &(rb, ib) in eigs_b {
            let gap = ((ra + rb) * (ra + rb) + (ia + ib) * (ia + ib)).sqrt();
            if gap < EIGEN_GAP_TOL * scale {
                return Err(Error::SingularSystem);
            }
        }
    }
    Ok(())
}

/// Diagonal block boundaries of a real quasi-triangular matrix
/// (1x1 blocks for real eigenvalues, 2x2 for complex pairs).
fn block_starts(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)].abs() > 1e-14 * scale {
            blocks.push((k, 2));
            k += 2;
        } else {
            blocks.push((k, 1));
            k += 1;
        }
    }
    blocks
}

/// Solves `Ta Y + Y Tb = F` with both factors upper quasi-triangular, by
/// sweeping column blocks left to right and row blocks bottom to top; each
/// block pair reduces to a dense system of size at most 4.
fn solve_quasi_triangular(
    ta: &DMatrix<f64>,
    tb: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = ta.nrows();
    let m = tb.nrows();
    let a_blocks = block_starts(ta);
    let b_blocks = block_starts(tb);
    let mut y = DMatrix::zeros(n, m);

    for &(q0, qs) in &b_blocks {
        for &(p0, ps) in a_blocks.iter().rev() {
            // rhs = F_pq - sum_{k>p} Ta[p,k] Y[k,q] - sum_{l<q} Y[p,l] Tb[l,q]
            let mut rhs = f.view((p0, q0), (ps, qs)).clone_owned();
            if p0 + ps < n {
                let coupling = ta.view((p0, p0 + ps), (ps, n - p0 - ps))
                    * y.view((p0 + ps, q0), (n - p0 - ps, qs));
                rhs -= coupling;
            }
            if q0 > 0 {
                let coupling = y.view((p0, 0), (ps, q0)) * tb.view((0, q0), (q0, qs));
                rhs -= coupling;
            }
            // small Sylvester block: App Ypq + Ypq Bqq = rhs, vectorized
            let app = ta.view((p0, p0), (ps, ps));
            let bqq = tb.view((q0, q0), (qs, qs));
            let dim = ps * qs;
            let mut k = DMatrix::zeros(dim, dim);
            for j in 0..qs {
                for i in 0..ps {
                    for ii in 0..ps {
                        k[(j * ps + i, j * ps + ii)] += app[(i, ii)];
                    }
                    for jj in 0..qs {
                        k[(j * ps + i, jj * ps + i)] += bqq[(jj, j)];
                    }
                }
            }
            let mut vec_rhs = nalgebra::DVector::zeros(dim);
            for j in 0..qs {
                for i in 0..ps {
                    vec_rhs[j * ps + i] = rhs[(i, j)];
                }
            }
            let sol = k.lu().solve(&vec_rhs).ok_or(Error::SingularSystem)?;
            for j in 0..qs {
                for i in 0..ps {
                    y[(p0 + i, q0 + j)] = sol[j * ps + i];
                }
            }
        }
    }
    Ok(y)
}

/// Solves `AX + XB = C` given symmetric eigendecompositions
/// `A = Ua diag(la) Ua'` and `B = Ub diag(lb) Ub'`.
///
/// Callers that know the spectra analytically (e.g. a rank-one `B`) can
/// skip the decomposition cost; the transformed-space residual is checked
/// before returning.
pub fn solve_symmetric_prefactored(
    u_a: &DMatrix<f64>,
    lambda_a: &[f64],
    u_b: &DMatrix<f64>,
    lambda_b: &[f64],
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let scale_a = lambda_a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let scale_b = lambda_b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let scale = scale_a.max(scale_b).max(1.0);
    for &la in lambda_a {
        for &lb in lambda_b {
            if (la + lb).abs() < EIGEN_GAP_TOL * scale {
                return Err(Error::SingularSystem);
            }
        }
    }
    let f = u_a.transpose() * c * u_b;
    let y = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] / (lambda_a[i] + lambda_b[j]));
    Ok(u_a * y * u_b.transpose())
}

/// Solves `AX + XB = C` by the Bartels-Stewart algorithm.
///
/// Symmetric inputs take the eigendecomposition fast path; general inputs
/// go through the real Schur form with quasi-triangular back-substitution.
/// Returns an error if the spectra of `A` and `-B` overlap within
/// tolerance or the final residual exceeds `1e-8 * max(||C||_F, 1)`.
pub fn solve_bartels_stewart(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dims(a, b, c)?;
    let scale = a.norm().max(b.norm()).max(1.0);

    let x = if is_symmetric(a) && is_symmetric(b) {
        let ea = a.clone().symmetric_eigen();
        let eb = b.clone().symmetric_eigen();
        let la: Vec<f64> = ea.eigenvalues.iter().cloned().collect();
        let lb: Vec<f64> = eb.eigenvalues.iter().cloned().collect();
        for &va in &la {
            for &vb in &lb {
                if (va + vb).abs() < EIGEN_GAP_TOL * scale {
                    return Err(Error::SingularSystem);
                }
            }
        }
        solve_symmetric_prefactored(&ea.eigenvectors, &la, &eb.eigenvectors, &lb, c)?
    } else {
        let schur_a = a.clone().schur();
        let schur_b = b.clone().schur();
        let (qa, ta) = schur_a.unpack();
        let (qb, tb) = schur_b.unpack();
        check_spectra_disjoint(
            &quasi_triangular_eigenvalues(&ta),
            &quasi_triangular_eigenvalues(&tb),
            scale,
        )?;
        let f = qa.transpose() * c * &qb;
        let y = solve_quasi_triangular(&ta, &tb, &f)?;
        &qa * y * qb.transpose()
    };
    residual_check(a, b, c, &x)?;
    Ok(x)
}

/// Dense Kronecker-product solve of the vectorized system
/// `(I (x) A + B' (x) I) vec(X) = vec(C)`; validation oracle for small
/// instances only.
pub fn solve_kronecker_oracle(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dims(a, b, c)?;
    let n = a.nrows();
    let m = b.nrows();
    if n * m > KRONECKER_LIMIT {
        return Err(Error::InstanceTooLarge(format!(
            "Kronecker oracle limited to n*m <= {KRONECKER_LIMIT}, got {}",
            n * m
        )));
    }
    let dim = n * m;
    let mut k: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for ii in 0..n {
                k[(row, j * n + ii)] += a[(i, ii)];
            }
            for jj in 0..m {
                k[(row, jj * n + i)] += b[(jj, j)];
            }
        }
    }
    let mut rhs = nalgebra::DVector::zeros(dim);
    for j in 0..m {
        for i in 0..n {
            rhs[j * n + i] = c[(i, j)];
        }
    }
    let lu = k.lu();
    if lu.determinant().abs() < f64::MIN_POSITIVE.sqrt() {
        return Err(Error::SingularSystem);
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    Ok(DMatrix::from_fn(n, m, |i, j| sol[j * n + i]))
}
