//! Derivatives of the strong H-infinity norm with respect to the parameters
//! of an affine closed-loop template.
//!
//! At a simple peak with vectors `(u, v)` of the corrector system,
//!
//! ```text
//! d xi / d p = -2 xi^2 Re(v^* dM/dp u) / (v^* B B^T v + u^* C^T C u)
//! ```
//!
//! where `M` is the characteristic matrix at `j omega_hat` (frequency
//! branch) or the asymptotic block matrix at `theta_hat`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interconnect::ParametricDdae;
use crate::levelset::{strong_hinf_with, Branch, NormCertificate, NormOptions};
use crate::linalg::{complexify, CMat, CVec, C64, J};
use crate::system::NullspaceBases;

fn quad(x: &CVec, m: &CMat, y: &CVec) -> C64 {
    x.iter().zip(m.dot(y).iter()).map(|(a, b)| a.conj() * b).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientResult {
    pub grad: Vec<f64>,
    pub branch: Branch,
    /// False at points with several active maximizers; `grad` is then the
    /// formula evaluated at one of them.
    pub smooth: bool,
}

/// Gradient of `cert.value` at the parameter vector the certificate was
/// computed for.
pub fn grad_strong_hinf(template: &ParametricDdae, bases: &NullspaceBases, cert: &NormCertificate) -> Result<GradientResult> {
    let smooth = cert.active_peaks <= 1;
    let grad = gradient_vector(template, bases, cert)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::MissingVectors);
    }
    Ok(GradientResult { grad, branch: cert.branch, smooth })
}

fn gradient_vector(template: &ParametricDdae, bases: &NullspaceBases, cert: &NormCertificate) -> Result<Vec<f64>> {
    let sys = template.base();
    let (u, v) = (&cert.u, &cert.v);
    if cert.value == 0.0 {
        return Ok(vec![0.0; template.n_params()]);
    }
    // coefficient of A_i in M, and the output/input maps in M's coordinates
    let (coefs, b, c, project): (Vec<C64>, _, _, bool) = match cert.branch {
        Branch::Frequency => {
            let w = cert.omega_hat.ok_or(Error::MissingVectors)?;
            let mut coefs = vec![C64::new(-1.0, 0.0)];
            coefs.extend(sys.delays().as_slice().iter().map(|&t| -(-J * w * t).exp()));
            (coefs, sys.b().clone(), sys.c().clone(), false)
        }
        Branch::Asymptotic => {
            let th = cert.theta_hat.as_ref().ok_or(Error::MissingVectors)?;
            let mut coefs = vec![C64::new(-1.0, 0.0)];
            coefs.extend(th.theta.iter().map(|&t| -(-J * t).exp()));
            (coefs, bases.u.t().dot(sys.b()), sys.c().dot(&bases.v), true)
        }
    };
    if u.len() != b.nrows() || v.len() != b.nrows() || u.is_empty() {
        return Err(Error::MissingVectors);
    }
    let bbt = complexify(&b.dot(&b.t()));
    let ctc = complexify(&c.t().dot(&c));
    let denom = quad(v, &bbt, v).re + quad(u, &ctc, u).re;
    if !(denom > 0.0) {
        return Err(Error::MissingVectors);
    }
    let xi = cert.value;

    Ok((0..template.n_params())
        .map(|k| {
            let mut dm = CMat::zeros((u.len(), u.len()));
            for (i, da) in template.derivative(k) {
                let block = if project { bases.u.t().dot(da).dot(&bases.v) } else { da.clone() };
                let coef = coefs[*i];
                dm.zip_mut_with(&block, |z, &a| *z += coef * a);
            }
            -2.0 * xi * xi * quad(v, &dm, u).re / denom
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheck {
    pub value: f64,
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    /// `|g - g_fd| / max(|g_fd|, 1e-12)` in the Euclidean norm.
    pub relative_error: f64,
    pub active_peaks: usize,
    pub smooth: bool,
}

/// Compare the analytic gradient with central differences of step `h`.
pub fn finite_diff_check(template: &ParametricDdae, bases: &NullspaceBases, p: &[f64], h: f64, opts: &NormOptions) -> Result<GradCheck> {
    let eval = |q: &[f64]| -> Result<NormCertificate> { strong_hinf_with(&template.substitute(q)?, bases, opts) };
    let cert = eval(p)?;
    let g = grad_strong_hinf(template, bases, &cert)?;
    let (analytic, smooth) = (g.grad, g.smooth);
    let mut fd = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[k] += h;
        minus[k] -= h;
        fd.push((eval(&plus)?.value - eval(&minus)?.value) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    Ok(GradCheck { value: cert.value, analytic, finite_difference: fd, relative_error: diff / scale, active_peaks: cert.active_peaks, smooth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::interconnect::{closed_loop_template, ControllerStructure};
    use crate::levelset::prepare;
    use crate::system::compute_nullspaces;
    use ndarray::array;

    #[test]
    fn scalar_gain_derivative() {
        // x' = -x + p x + w, z = x: |T|_inf = 1 / (1 - p) for p < 1
        let base = crate::system::DdaeSystem::ode(array![[1.0]], array![[-1.0]], array![[1.0]], array![[1.0]]).unwrap();
        let template = ParametricDdae::new(base, vec![vec![(0, array![[1.0]])]]).unwrap();
        let bases = compute_nullspaces(template.base());
        let p = [0.3];
        let cert = strong_hinf_with(&template.substitute(&p).unwrap(), &bases, &NormOptions::default()).unwrap();
        let g = grad_strong_hinf(&template, &bases, &cert).unwrap();
        assert!(g.smooth);
        assert!((g.grad[0] - 1.0 / 0.49).abs() < 1e-9, "{g:?}");
    }

    #[test]
    fn untouched_parameter_has_zero_component() {
        let base = crate::system::DdaeSystem::ode(array![[1.0]], array![[-1.0]], array![[1.0]], array![[1.0]]).unwrap();
        let template = ParametricDdae::new(base, vec![vec![(0, array![[1.0]])], vec![]]).unwrap();
        let bases = compute_nullspaces(template.base());
        let cert = strong_hinf_with(&template.substitute(&[0.1, 5.0]).unwrap(), &bases, &NormOptions::default()).unwrap();
        assert_eq!(grad_strong_hinf(&template, &bases, &cert).unwrap().grad[1], 0.0);
    }

    #[test]
    fn table1_gradient_matches_finite_differences() {
        let template = closed_loop_template(&fixtures::table1_plant(0.5), &ControllerStructure::static_gain(1, 2)).unwrap();
        let bases = prepare(&template.substitute(&[-3.5878, 1.5017]).unwrap()).unwrap();
        let chk = finite_diff_check(&template, &bases, &[-3.5878, 1.5017], 1e-5, &NormOptions::default()).unwrap();
        assert_eq!(chk.active_peaks, 1);
        assert!(chk.relative_error <= 1e-5, "{chk:?}");
    }

    #[test]
    fn asymptotic_branch_gradient() {
        // scale the neutral coefficient: A2 -> p * A2 changes only T_a
        let sys = fixtures::neutral1(1.0, 1.0);
        let a2 = sys.a()[2].clone();
        let mut a = sys.a().to_vec();
        a[2] = a2.mapv(|x| 0.0 * x);
        let base = sys.with_matrices(a).unwrap();
        let template = ParametricDdae::new(base, vec![vec![(2, a2)]]).unwrap();
        let bases = compute_nullspaces(template.base());
        let opts = NormOptions { check_stability: false, ..Default::default() };
        let cert = strong_hinf_with(&template.substitute(&[1.0]).unwrap(), &bases, &opts).unwrap();
        assert_eq!(cert.branch, Branch::Asymptotic);
        let chk = finite_diff_check(&template, &bases, &[1.0], 1e-6, &opts).unwrap();
        assert!(chk.relative_error <= 1e-5, "{chk:?}");
    }
}
