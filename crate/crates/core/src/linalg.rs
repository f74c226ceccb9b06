//! Thin dense linear-algebra helpers over ndarray-linalg (LAPACK).

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{
    layout::{AllocatedArray, AllocatedArrayMut},
    Eig, EigVals, Factorize, GeneralizedEigenvalue, Lapack, ReciprocalConditionNum, Solve, SVD,
};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

pub fn complexify(a: &Array2<f64>) -> CMat {
    a.mapv(|x| C64::new(x, 0.0))
}

/// Conjugate transpose.
pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn singular_values(a: &CMat) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

pub fn sigma_max(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.iter().copied().fold(0.0, f64::max))
}

pub fn real_sigma_max(a: &Array2<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.svd(false, false)
        .map(|(_, s, _)| s.iter().copied().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Full SVD `a = U diag(s) V^H`, returned as `(U, s, V)` with V (not V^H).
pub fn svd_full(a: &CMat) -> Result<(CMat, Array1<f64>, CMat)> {
    let (u, s, vt) = a.svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no V".into()))?;
    Ok((u, s, adjoint(&vt)))
}

/// Right singular vector of the smallest singular value.
pub fn min_right_singular_vector(a: &CMat) -> Result<(f64, CVec)> {
    let (_, s, v) = svd_full(a)?;
    let k = a.ncols() - 1;
    let sigma = if k < s.len() { s[k] } else { 0.0 };
    Ok((sigma, v.column(k).to_owned()))
}

/// Solve `a x = rhs` column by column, rejecting near-singular `a`
/// (reciprocal condition number below `rcond_min`).
pub fn solve_checked(a: &CMat, rhs: &CMat, rcond_min: f64) -> Option<CMat> {
    let lu = a.factorize().ok()?;
    let rc = lu.rcond().ok()?;
    if !(rc > rcond_min) {
        return None;
    }
    let mut out = CMat::zeros((a.nrows(), rhs.ncols()));
    for (k, col) in rhs.axis_iter(Axis(1)).enumerate() {
        let x = lu.solve(&col.to_owned()).ok()?;
        out.column_mut(k).assign(&x);
    }
    Some(out)
}

/// Minimum-norm least-squares solution of `a x = b` via a truncated SVD.
pub fn lstsq(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let (u, s, vt) = a.svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no V".into()))?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cut = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    let mut x = Array1::<f64>::zeros(a.ncols());
    for (k, &sk) in s.iter().enumerate() {
        if sk > cut {
            let coef = u.column(k).dot(b) / sk;
            x.scaled_add(coef, &vt.row(k));
        }
    }
    Ok(x)
}

/// Orthonormal bases of the left and right nullspaces of a square real
/// matrix, with rank decided by `sigma_i > n * eps * sigma_1`.
pub fn nullspaces(e: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = e.nrows();
    if n == 0 {
        return Ok((Array2::zeros((0, 0)), Array2::zeros((0, 0))));
    }
    let (u, s, vt) = e.svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no V".into()))?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let thresh = n as f64 * f64::EPSILON * smax;
    let rank = s.iter().filter(|&&x| x > thresh).count();
    let left = u.slice(s![.., rank..]).to_owned();
    let right = vt.slice(s![rank.., ..]).t().to_owned();
    Ok((left, right))
}

/// Real matrix acting on `[Re z; Im z]` equivalent to the complex-linear map `a`.
pub fn realify(a: &CMat) -> Array2<f64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((2 * r, 2 * c));
    for i in 0..r {
        for j in 0..c {
            let z = a[[i, j]];
            out[[i, j]] = z.re;
            out[[i, j + c]] = -z.im;
            out[[i + r, j]] = z.im;
            out[[i + r, j + c]] = z.re;
        }
    }
    out
}

pub fn eigenvalues(a: &CMat) -> Result<CVec> {
    if a.is_empty() {
        return Ok(CVec::zeros(0));
    }
    Ok(a.eigvals()?)
}

pub fn real_eigenvalues(a: &Array2<f64>) -> Result<CVec> {
    if a.is_empty() {
        return Ok(CVec::zeros(0));
    }
    Ok(a.eigvals()?)
}

pub fn real_eig(a: &Array2<f64>) -> Result<(CVec, CMat)> {
    Ok(a.eig()?)
}

/// Finite generalized eigenvalues of `a x = lambda b x` (QZ). Eigenvalues
/// with `|beta| <= inf_tol * |alpha|` are treated as infinite and dropped.
pub fn generalized_eigenvalues(a: &Array2<f64>, b: &Array2<f64>, inf_tol: f64) -> Result<Vec<C64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut a = a.as_standard_layout().to_owned();
    let mut b = b.as_standard_layout().to_owned();
    let layout = a.square_layout()?;
    let (vals, _) = f64::eig_generalized(
        false,
        layout,
        a.as_allocated_mut()?,
        b.as_allocated_mut()?,
        None,
    )
    .map_err(|e| Error::EigenSolver(e.to_string()))?;
    Ok(vals
        .into_iter()
        .filter_map(|g| match g {
            GeneralizedEigenvalue::Finite(_, (alpha, beta)) => {
                if beta.norm() <= inf_tol * alpha.norm() || beta.norm() == 0.0 {
                    None
                } else {
                    Some(alpha / beta)
                }
            }
            GeneralizedEigenvalue::Indeterminate(_) => None,
        })
        .collect())
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Embed `block` into `target` at `(row, col)`, adding to existing entries.
pub fn add_block(target: &mut Array2<f64>, row: usize, col: usize, block: ArrayView2<f64>) {
    let (r, c) = block.dim();
    let mut view = target.slice_mut(s![row..row + r, col..col + c]);
    view += &block;
}
