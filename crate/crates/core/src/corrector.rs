//! Gauss-Newton refinement of singular-value peaks.
//!
//! For a parameter-dependent matrix `M(s)` and transfer function
//! `G(s) = C M(s)^{-1} B`, a local maximum `xi` of `sigma_1(G(s))` together
//! with vectors `(u, v)` satisfies
//!
//! ```text
//! [ M(s)      -BB^T/xi ] [u]
//! [ C^TC/xi   -M(s)^*  ] [v] = 0,    |u|^2 + |v|^2 = 2,   Im u_k = 0,
//! Re(v^* dM/ds_l u) = 0  for every parameter s_l.
//! ```
//!
//! Then `B^T v` and `C u` are (unnormalized) right/left singular vectors for
//! `xi`. The system has one more real equation than unknowns and an exact
//! solution, so Gauss-Newton converges quadratically.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, complexify, CMat, CVec, C64};

/// A singular-value peak problem. `s` are the continuous parameters
/// (a frequency, or a set of delay angles).
pub trait PeakSystem {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn matrix(&self, s: &[f64]) -> CMat;
    fn dmatrix(&self, s: &[f64], k: usize) -> CMat;
    fn d2matrix(&self, s: &[f64], k: usize, l: usize) -> CMat;
    /// `B B^T` in the coordinates of `M`.
    fn bbt(&self) -> &Array2<f64>;
    /// `C^T C` in the coordinates of `M`.
    fn ctc(&self) -> &Array2<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    /// Target residual norm.
    pub tol: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self { max_iter: 30, tol: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct PeakSolution {
    pub params: Vec<f64>,
    pub xi: f64,
    pub u: CVec,
    pub v: CVec,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// The structured matrix `H(s, xi)` acting on `(u, v)`.
pub fn hamiltonian_block<P: PeakSystem + ?Sized>(sys: &P, s: &[f64], xi: f64) -> CMat {
    let d = sys.dim();
    let m = sys.matrix(s);
    let mut h = CMat::zeros((2 * d, 2 * d));
    h.slice_mut(s![..d, ..d]).assign(&m);
    h.slice_mut(s![..d, d..]).assign(&complexify(sys.bbt()).mapv(|z| -z / xi));
    h.slice_mut(s![d.., ..d]).assign(&complexify(sys.ctc()).mapv(|z| z / xi));
    h.slice_mut(s![d.., d..]).assign(&adjoint(&m).mapv(|z| -z));
    h
}

/// Starting vectors: the minimizer of `|H x| / |x|`, scaled to `|x|^2 = 2`.
pub fn start_vectors<P: PeakSystem + ?Sized>(sys: &P, s: &[f64], xi: f64) -> Result<(CVec, CVec)> {
    let d = sys.dim();
    let (_, x) = linalg::min_right_singular_vector(&hamiltonian_block(sys, s, xi))?;
    let x = x.mapv(|z| z * std::f64::consts::SQRT_2);
    Ok((x.slice(s![..d]).to_owned(), x.slice(s![d..]).to_owned()))
}

fn gauge(u: &mut CVec, v: &mut CVec) -> usize {
    let k = u
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map_or(0, |(k, _)| k);
    let norm2: f64 = u.iter().chain(v.iter()).map(|z| z.norm_sqr()).sum();
    let phase = if u[k].norm() > 0.0 { u[k].conj() / u[k].norm() } else { C64::new(1.0, 0.0) };
    let scale = (2.0 / norm2.max(f64::MIN_POSITIVE)).sqrt();
    u.mapv_inplace(|z| z * phase * scale);
    v.mapv_inplace(|z| z * phase * scale);
    k
}

struct State {
    u: CVec,
    v: CVec,
    s: Vec<f64>,
    xi: f64,
}

fn residual<P: PeakSystem + ?Sized>(sys: &P, st: &State, k: usize) -> Array1<f64> {
    let d = sys.dim();
    let np = sys.n_params();
    let m = sys.matrix(&st.s);
    let p = complexify(sys.bbt());
    let q = complexify(sys.ctc());
    let r1 = m.dot(&st.u) - p.dot(&st.v).mapv(|z| z / st.xi);
    let r2 = q.dot(&st.u).mapv(|z| z / st.xi) - adjoint(&m).dot(&st.v);
    let mut r = Array1::zeros(4 * d + 2 + np);
    for i in 0..d {
        r[i] = r1[i].re;
        r[d + i] = r1[i].im;
        r[2 * d + i] = r2[i].re;
        r[3 * d + i] = r2[i].im;
    }
    let norm2: f64 = st.u.iter().chain(st.v.iter()).map(|z| z.norm_sqr()).sum();
    r[4 * d] = norm2 - 2.0;
    r[4 * d + 1] = st.u[k].im;
    for l in 0..np {
        let ml = sys.dmatrix(&st.s, l);
        r[4 * d + 2 + l] = conj_dot(&st.v, &ml.dot(&st.u)).re;
    }
    r
}

fn conj_dot(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn jacobian<P: PeakSystem + ?Sized>(sys: &P, st: &State, k: usize) -> Array2<f64> {
    let d = sys.dim();
    let np = sys.n_params();
    let (rows, cols) = (4 * d + 2 + np, 4 * d + np + 1);
    let (cu, cv, cs, cx) = (0, 2 * d, 4 * d, 4 * d + np);
    let xi = st.xi;
    let m = sys.matrix(&st.s);
    let p = complexify(sys.bbt());
    let q = complexify(sys.ctc());
    let mut j = Array2::zeros((rows, cols));

    let put = |j: &mut Array2<f64>, r: usize, c: usize, block: &CMat| {
        let rb = linalg::realify(block);
        j.slice_mut(s![r..r + 2 * d, c..c + 2 * d]).assign(&rb);
    };
    let put_vec = |j: &mut Array2<f64>, r: usize, c: usize, vec: &CVec| {
        for i in 0..d {
            j[[r + i, c]] = vec[i].re;
            j[[r + d + i, c]] = vec[i].im;
        }
    };

    put(&mut j, 0, cu, &m);
    put(&mut j, 0, cv, &p.mapv(|z| -z / xi));
    put(&mut j, 2 * d, cu, &q.mapv(|z| z / xi));
    put(&mut j, 2 * d, cv, &adjoint(&m).mapv(|z| -z));
    let dms: Vec<CMat> = (0..np).map(|l| sys.dmatrix(&st.s, l)).collect();
    for (l, ml) in dms.iter().enumerate() {
        put_vec(&mut j, 0, cs + l, &ml.dot(&st.u));
        put_vec(&mut j, 2 * d, cs + l, &adjoint(ml).dot(&st.v).mapv(|z| -z));
    }
    put_vec(&mut j, 0, cx, &p.dot(&st.v).mapv(|z| z / (xi * xi)));
    put_vec(&mut j, 2 * d, cx, &q.dot(&st.u).mapv(|z| -z / (xi * xi)));

    let rn = 4 * d;
    for i in 0..d {
        j[[rn, cu + i]] = 2.0 * st.u[i].re;
        j[[rn, cu + d + i]] = 2.0 * st.u[i].im;
        j[[rn, cv + i]] = 2.0 * st.v[i].re;
        j[[rn, cv + d + i]] = 2.0 * st.v[i].im;
    }
    j[[rn + 1, cu + d + k]] = 1.0;

    for (l, ml) in dms.iter().enumerate() {
        let row = rn + 2 + l;
        // c = v^* M_l (row vector), w = M_l u
        let c: CVec = adjoint(ml).dot(&st.v).mapv(|z| z.conj());
        let w = ml.dot(&st.u);
        for i in 0..d {
            j[[row, cu + i]] = c[i].re;
            j[[row, cu + d + i]] = -c[i].im;
            j[[row, cv + i]] = w[i].re;
            j[[row, cv + d + i]] = w[i].im;
        }
        for l2 in 0..np {
            let mll = sys.d2matrix(&st.s, l, l2);
            j[[row, cs + l2]] = conj_dot(&st.v, &mll.dot(&st.u)).re;
        }
    }
    j
}

fn norm(r: &Array1<f64>) -> f64 {
    r.dot(r).sqrt()
}

/// Refine a peak from `(s0, xi0)` with starting vectors from
/// [`start_vectors`].
pub fn solve_peak<P: PeakSystem + ?Sized>(sys: &P, s0: &[f64], xi0: f64, opts: GaussNewtonOptions) -> Result<PeakSolution> {
    let (u, v) = start_vectors(sys, s0, xi0)?;
    solve_peak_from(sys, s0, xi0, u, v, opts)
}

pub fn solve_peak_from<P: PeakSystem + ?Sized>(
    sys: &P,
    s0: &[f64],
    xi0: f64,
    mut u: CVec,
    mut v: CVec,
    opts: GaussNewtonOptions,
) -> Result<PeakSolution> {
    let d = sys.dim();
    let np = sys.n_params();
    let k = gauge(&mut u, &mut v);
    let mut st = State { u, v, s: s0.to_vec(), xi: xi0 };
    let mut r = residual(sys, &st, k);
    let mut rn = norm(&r);
    let mut iterations = 0;

    while rn > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(sys, &st, k);
        let step = linalg::lstsq(&jac, &r.mapv(|x| -x))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut trial = State {
                u: st.u.clone(),
                v: st.v.clone(),
                s: st.s.clone(),
                xi: st.xi + t * step[4 * d + np],
            };
            for i in 0..d {
                trial.u[i] += C64::new(step[i], step[d + i]) * t;
                trial.v[i] += C64::new(step[2 * d + i], step[3 * d + i]) * t;
            }
            for l in 0..np {
                trial.s[l] += t * step[4 * d + l];
            }
            if trial.xi > 0.0 && trial.xi.is_finite() {
                let rt = residual(sys, &trial, k);
                let rtn = norm(&rt);
                if rtn < rn || rtn <= opts.tol {
                    st = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let scale = 1.0 + linalg::sigma_max(&sys.matrix(&st.s)).unwrap_or(1.0);
    let converged = rn.is_finite() && rn <= opts.tol.max(1e-10 * scale);
    Ok(PeakSolution { params: st.s, xi: st.xi, u: st.u, v: st.v, iterations, residual: rn, converged })
}

/// Peak vectors at a fixed parameter from the SVD of `G = C M^{-1} B`:
/// `u = M^{-1} B a`, `v = M^{-*} C^T b` with `(a, b)` the dominant right and
/// left singular vectors. These satisfy the first two block equations
/// exactly with `xi = sigma_1(G)`.
pub fn svd_vectors(m: &CMat, b: &Array2<f64>, c: &Array2<f64>) -> Result<(f64, CVec, CVec)> {
    let bc = complexify(b);
    let cc = complexify(c);
    let minv_b = linalg::solve_checked(m, &bc, 1e-15).ok_or_else(|| Error::Linalg("singular M in svd_vectors".into()))?;
    let g = cc.dot(&minv_b);
    let (left, sv, right) = linalg::svd_full(&g)?;
    let xi = sv.first().copied().unwrap_or(0.0);
    let a = right.column(0).to_owned();
    let bl = left.column(0).to_owned();
    let u = minv_b.dot(&a);
    let rhs = adjoint(&cc).dot(&bl).insert_axis(ndarray::Axis(1));
    let v = linalg::solve_checked(&adjoint(m), &rhs, 1e-15)
        .ok_or_else(|| Error::Linalg("singular M in svd_vectors".into()))?
        .column(0)
        .to_owned();
    Ok((xi, u, v))
}

/// Real-valued stationarity residuals `Re(v^* dM/ds_l u)`.
pub fn stationarity<P: PeakSystem + ?Sized>(sys: &P, s: &[f64], u: &CVec, v: &CVec) -> Vec<f64> {
    (0..sys.n_params()).map(|l| conj_dot(v, &sys.dmatrix(s, l).dot(u)).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Scalar `M(s) = 1 + a cos s`-like toy problem: G(s) = 1 / (2 - e^{-js}).
    struct Toy {
        bbt: Array2<f64>,
        ctc: Array2<f64>,
    }

    impl PeakSystem for Toy {
        fn dim(&self) -> usize {
            1
        }
        fn n_params(&self) -> usize {
            1
        }
        fn matrix(&self, s: &[f64]) -> CMat {
            array![[C64::new(2.0, 0.0) - (-crate::linalg::J * s[0]).exp()]]
        }
        fn dmatrix(&self, s: &[f64], _: usize) -> CMat {
            array![[crate::linalg::J * (-crate::linalg::J * s[0]).exp()]]
        }
        fn d2matrix(&self, s: &[f64], _: usize, _: usize) -> CMat {
            array![[(-crate::linalg::J * s[0]).exp()]]
        }
        fn bbt(&self) -> &Array2<f64> {
            &self.bbt
        }
        fn ctc(&self) -> &Array2<f64> {
            &self.ctc
        }
    }

    #[test]
    fn toy_peak_converges_quadratically() {
        let toy = Toy { bbt: array![[1.0]], ctc: array![[1.0]] };
        // |G| peaks at s = 0 with value 1
        let sol = solve_peak(&toy, &[0.3], 1.0 / (2.0 - C64::new(0.0, -0.3).exp()).norm(), GaussNewtonOptions::default()).unwrap();
        assert!(sol.converged, "{sol:?}");
        assert!((sol.xi - 1.0).abs() < 1e-12);
        assert!(sol.params[0].abs() < 1e-10);
        assert!(sol.iterations <= 10);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let toy = Toy { bbt: array![[1.5]], ctc: array![[0.7]] };
        let st = State { u: array![C64::new(0.8, 0.1)], v: array![C64::new(-0.3, 0.6)], s: vec![0.4], xi: 0.9 };
        let j = jacobian(&toy, &st, 0);
        let x0 = [st.u[0].re, st.u[0].im, st.v[0].re, st.v[0].im, st.s[0], st.xi];
        let build = |x: &[f64]| State {
            u: array![C64::new(x[0], x[1])],
            v: array![C64::new(x[2], x[3])],
            s: vec![x[4]],
            xi: x[5],
        };
        let h = 1e-6;
        for c in 0..6 {
            let mut xp = x0;
            let mut xm = x0;
            xp[c] += h;
            xm[c] -= h;
            let fd = (residual(&toy, &build(&xp), 0) - residual(&toy, &build(&xm), 0)) / (2.0 * h);
            for r in 0..fd.len() {
                assert!((fd[r] - j[[r, c]]).abs() < 1e-7, "entry ({r},{c}): fd {} vs {}", fd[r], j[[r, c]]);
            }
        }
    }
}
