//! Spectral discretization of the delay system on `[-tau_max, 0]`.
//!
//! The history segment is represented by its values on the Chebyshev
//! extreme points `theta_0 = 0 > theta_1 > ... > theta_N = -tau_max`. The
//! first block row is the DDAE itself, with delayed states obtained by
//! barycentric interpolation; the remaining block rows impose
//! `d/dt phi(theta_k) = d/dtheta phi(theta_k)` through the Chebyshev
//! differentiation matrix.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, complexify, CMat, C64};
use crate::system::{AsymptoticBlocks, DdaeSystem, NullspaceBases};
use crate::transfer::{FrequencyResponse, POLE_RCOND};

pub const DEFAULT_ORDER: usize = 20;

/// Chebyshev extreme points `cos(pi k / N)`, k = 0..N (descending from 1).
pub fn chebyshev_points(n: usize) -> Vec<f64> {
    (0..=n).map(|k| (PI * k as f64 / n as f64).cos()).collect()
}

/// Chebyshev differentiation matrix on the extreme points.
pub fn chebyshev_diff_matrix(n: usize) -> Array2<f64> {
    let x = chebyshev_points(n);
    let c = |i: usize| {
        let base = if i == 0 || i == n { 2.0 } else { 1.0 };
        if i.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = Array2::zeros((n + 1, n + 1));
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d[[i, j]] = v;
                row_sum += v;
            }
        }
        // negative-sum trick keeps D * 1 = 0 to rounding
        d[[i, i]] = -row_sum;
    }
    d
}

/// Barycentric weights for the Chebyshev extreme points.
pub fn chebyshev_bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * w
            } else {
                w
            }
        })
        .collect()
}

/// Lagrange basis values `l_j(x)` at one point, by the barycentric formula.
pub fn barycentric_row(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    if let Some(k) = nodes.iter().position(|&t| t == x) {
        let mut out = vec![0.0; nodes.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes.iter().zip(weights).map(|(&t, &w)| w / (x - t)).collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    pub en: Array2<f64>,
    pub an: Array2<f64>,
    pub bn: Array2<f64>,
    pub cn: Array2<f64>,
    pub order: usize,
    /// Collocation points in `[-tau_max, 0]`, starting at 0.
    pub mesh: Vec<f64>,
    /// State dimension of the underlying DDAE.
    pub n: usize,
}

pub fn discretize(sys: &DdaeSystem, order: usize) -> Result<DiscretizedSystem> {
    if order < 2 {
        return Err(Error::Invalid(format!("discretization order must be >= 2, got {order}")));
    }
    let n = sys.n();
    let big = (order + 1) * n;
    let tau_max = if sys.m() == 0 { 1.0 } else { sys.tau_max() };
    let cheb = chebyshev_points(order);
    let mesh: Vec<f64> = cheb.iter().map(|t| 0.5 * tau_max * (t - 1.0)).collect();
    let d = chebyshev_diff_matrix(order).mapv(|x| x * 2.0 / tau_max);
    let weights = chebyshev_bary_weights(order);

    let mut en = Array2::zeros((big, big));
    let mut an = Array2::zeros((big, big));
    en.slice_mut(s![..n, ..n]).assign(sys.e());
    for k in n..big {
        en[[k, k]] = 1.0;
    }

    linalg::add_block(&mut an, 0, 0, sys.a()[0].view());
    for (ai, &tau) in sys.a().iter().skip(1).zip(sys.delays().as_slice()) {
        let ell = barycentric_row(&mesh, &weights, -tau);
        for (l, &coef) in ell.iter().enumerate() {
            if coef != 0.0 {
                let mut blk = an.slice_mut(s![..n, l * n..(l + 1) * n]);
                blk.scaled_add(coef, ai);
            }
        }
    }
    for k in 1..=order {
        for l in 0..=order {
            let coef = d[[k, l]];
            for i in 0..n {
                an[[k * n + i, l * n + i]] = coef;
            }
        }
    }

    let mut bn = Array2::zeros((big, sys.n_w()));
    bn.slice_mut(s![..n, ..]).assign(sys.b());
    let mut cn = Array2::zeros((sys.n_z(), big));
    cn.slice_mut(s![.., ..n]).assign(sys.c());

    Ok(DiscretizedSystem { en, an, bn, cn, order, mesh, n })
}

/// `T_N(lambda) = C_N (lambda E_N - A_N)^{-1} B_N`.
pub fn eval_tn(dsys: &DiscretizedSystem, lambda: C64) -> Result<FrequencyResponse> {
    let m = complexify(&dsys.en).mapv(|z| z * lambda) - complexify(&dsys.an);
    let x = linalg::solve_checked(&m, &complexify(&dsys.bn), POLE_RCOND).ok_or(Error::TransmissionPole { lambda })?;
    let matrix: CMat = complexify(&dsys.cn).dot(&x);
    let sigma1 = linalg::sigma_max(&matrix)?;
    Ok(FrequencyResponse { lambda: Some(lambda), matrix, sigma1 })
}

pub fn sigma1_tn(dsys: &DiscretizedSystem, omega: f64) -> f64 {
    eval_tn(dsys, C64::new(0.0, omega)).map_or(f64::INFINITY, |r| r.sigma1)
}

/// Finite eigenvalues of `lambda E_N - A_N`.
pub fn eigenvalues(dsys: &DiscretizedSystem) -> Result<Vec<C64>> {
    let ev = linalg::generalized_eigenvalues(&dsys.an, &dsys.en, 1e-13)?;
    Ok(ev.into_iter().filter(|z| z.norm() < 1e10).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Rightmost real part among the finite eigenvalues of the discretization.
    pub abscissa: f64,
    /// Worst-case spectral radius of the associated delay-difference equation.
    pub delta_radius: f64,
}

/// Abscissa margin: eigenvalues must satisfy `Re lambda < -ABSCISSA_MARGIN`.
pub const ABSCISSA_MARGIN: f64 = 1e-8;

/// Grid points per effective delay angle when maximizing the difference
/// equation's spectral radius.
const RADIUS_GRID: usize = 40;

/// `max_theta rho((U^T A0 V)^{-1} sum U^T A_i V e^{j theta_i})`, by grid
/// search followed by a shrinking coordinate search.
pub fn difference_radius(blocks: &AsymptoticBlocks, exec: Exec) -> Result<f64> {
    let v = blocks.nullity();
    if v == 0 || blocks.effective.is_empty() {
        return Ok(0.0);
    }
    let a0 = complexify(&blocks.a[0]);
    let eye = CMat::eye(v);
    let a0_inv = linalg::solve_checked(&a0, &eye, 1e-14).ok_or(Error::NonCausal { sigma_min: 0.0 })?;
    let eff = &blocks.effective;
    let radius = |angles: &[f64]| -> f64 {
        let mut sum = CMat::zeros((v, v));
        for (&i, &th) in eff.iter().zip(angles) {
            let coef = (linalg::J * th).exp();
            sum.zip_mut_with(&blocks.a[i], |z, &a| *z += coef * a);
        }
        linalg::eigenvalues(&a0_inv.dot(&sum))
            .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    };

    let k = eff.len();
    let ppd = grid_points_for(k, RADIUS_GRID);
    let total = ppd.pow(k as u32);
    let values = exec.map(total, |idx| radius(&grid_angles(idx, k, ppd)));
    let (best_idx, best) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i, v))
        .unwrap_or((0, 0.0));
    let (_, refined) = coordinate_ascent(&radius, grid_angles(best_idx, k, ppd), best, 2.0 * PI / ppd as f64);
    Ok(refined)
}

/// Keep the total grid size manageable in many effective dimensions.
pub(crate) fn grid_points_for(dims: usize, per_dim: usize) -> usize {
    let mut ppd = per_dim.max(2);
    while dims > 1 && (ppd as f64).powi(dims as i32) > 2.0e5 && ppd > 4 {
        ppd -= 1;
    }
    ppd
}

pub(crate) fn grid_angles(mut idx: usize, dims: usize, ppd: usize) -> Vec<f64> {
    let mut out = vec![0.0; dims];
    for slot in out.iter_mut() {
        *slot = 2.0 * PI * (idx % ppd) as f64 / ppd as f64;
        idx /= ppd;
    }
    out
}

/// Derivative-free local maximization by shrinking coordinate steps.
pub(crate) fn coordinate_ascent<F: Fn(&[f64]) -> f64>(f: &F, mut x: Vec<f64>, mut fx: f64, mut step: f64) -> (Vec<f64>, f64) {
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * step;
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

pub fn strong_stability_check(sys: &DdaeSystem, bases: &NullspaceBases, order: usize) -> Result<StabilityReport> {
    let dsys = discretize(sys, order)?;
    stability_of(sys, bases, &dsys, Exec::Parallel)
}

/// Stability report reusing an existing discretization.
pub fn stability_of(sys: &DdaeSystem, bases: &NullspaceBases, dsys: &DiscretizedSystem, exec: Exec) -> Result<StabilityReport> {
    let blocks = AsymptoticBlocks::new(sys, bases);
    let delta_radius = difference_radius(&blocks, exec)?;
    let abscissa = eigenvalues(dsys)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let stable = abscissa < -ABSCISSA_MARGIN && delta_radius < 1.0;
    Ok(StabilityReport { stable, abscissa, delta_radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::system::compute_nullspaces;
    use crate::transfer::{eval_t, sigma1_t};
    use ndarray::array;

    #[test]
    fn diff_matrix_differentiates_polynomials() {
        let n = 8;
        let x = chebyshev_points(n);
        let d = chebyshev_diff_matrix(n);
        let f: Vec<f64> = x.iter().map(|t| t.powi(5) - 2.0 * t).collect();
        for i in 0..=n {
            let df: f64 = (0..=n).map(|j| d[[i, j]] * f[j]).sum();
            assert!((df - (5.0 * x[i].powi(4) - 2.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn barycentric_interpolation_is_exact_for_polynomials() {
        let n = 6;
        let x = chebyshev_points(n);
        let w = chebyshev_bary_weights(n);
        let f = |t: f64| 3.0 * t.powi(6) - t.powi(3) + 0.5;
        let row = barycentric_row(&x, &w, 0.3141);
        let val: f64 = row.iter().zip(&x).map(|(l, &t)| l * f(t)).sum();
        assert!((val - f(0.3141)).abs() < 1e-13);
    }

    #[test]
    fn dimensions_and_embedding() {
        let sys = fixtures::neutral1(1.0, 2.0);
        let d = discretize(&sys, 10).unwrap();
        assert_eq!(d.an.dim(), (22, 22));
        assert_eq!(d.bn.dim(), (22, 1));
        assert_eq!(d.cn.dim(), (1, 22));
        assert_eq!(d.en.slice(s![..2, ..2]), sys.e());
        assert_eq!(d.bn.slice(s![..2, ..]), sys.b());
        // without delays the boundary rows are exactly (E, A0)
        let ode = fixtures::scalar_lag();
        let d = discretize(&ode, 5).unwrap();
        assert_eq!(d.an.slice(s![..1, ..]).iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(d.an[[0, 0]], -1.0);
        // the delayed blocks sum back to A0 + sum A_i (interpolation of a constant)
        let d = discretize(&sys, 10).unwrap();
        let mut total = Array2::<f64>::zeros((2, 2));
        for l in 0..=10 {
            total += &d.an.slice(s![..2, 2 * l..2 * l + 2]);
        }
        let expect = &sys.a()[0] + &sys.a()[1] + &sys.a()[2];
        assert!((total - expect).iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn ode_discretization_is_exact() {
        let sys = DdaeSystem::ode(Array2::eye(2), array![[-1.0, 3.0], [0.0, -2.0]], array![[1.0], [0.5]], array![[1.0, 1.0]]).unwrap();
        let d = discretize(&sys, 4).unwrap();
        for w in [0.0, 0.7, 12.0] {
            let a = eval_tn(&d, C64::new(0.0, w)).unwrap().matrix[[0, 0]];
            let b = eval_t(&sys, C64::new(0.0, w)).unwrap().matrix[[0, 0]];
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn delayed_scalar_closed_form() {
        let d = discretize(&fixtures::delayed_scalar(1.0), 20).unwrap();
        let exact = 1.0 / (C64::new(0.0, 1.0) + C64::new(0.0, -1.0).exp()).norm();
        assert!((sigma1_tn(&d, 1.0) - exact).abs() < 1e-8);
    }

    #[test]
    fn neutral1_converges_with_order() {
        let sys = fixtures::neutral1(1.0, 2.0);
        let exact = sigma1_t(&sys, 1.0);
        let e20 = (sigma1_tn(&discretize(&sys, 20).unwrap(), 1.0) - exact).abs();
        let e40 = (sigma1_tn(&discretize(&sys, 40).unwrap(), 1.0) - exact).abs();
        assert!(e40 * 10.0 <= e20 || e40 < 1e-13, "e20 = {e20:e}, e40 = {e40:e}");
    }

    #[test]
    fn neutral1_difference_radius() {
        let sys = fixtures::neutral1(1.0, 2.0);
        let blocks = AsymptoticBlocks::new(&sys, &compute_nullspaces(&sys));
        let r = difference_radius(&blocks, Exec::Sequential).unwrap();
        assert!((r - 0.5625).abs() < 1e-9, "{r}");
        // independent of the delay values
        let scaled = fixtures::neutral1(0.37, 5.0);
        let r2 = difference_radius(&AsymptoticBlocks::new(&scaled, &compute_nullspaces(&scaled)), Exec::Sequential).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn unstable_ode_is_flagged() {
        let sys = DdaeSystem::ode(array![[1.0]], array![[1.0]], array![[1.0]], array![[1.0]]).unwrap();
        let rep = strong_stability_check(&sys, &compute_nullspaces(&sys), 20).unwrap();
        assert!(!rep.stable);
        assert!((rep.abscissa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixtures_are_stable() {
        for sys in [fixtures::neutral1(1.0, 2.0), fixtures::table1_closed_loop(0.5, &[-3.5878, 1.5017]), fixtures::delayed_scalar(1.0)] {
            let rep = strong_stability_check(&sys, &compute_nullspaces(&sys), 20).unwrap();
            assert!(rep.stable, "{rep:?}");
        }
    }
}
