//! Transfer-function evaluation.
//!
//! * `T(s)   = C (sE - A0 - sum A_i e^{-s tau_i})^{-1} B`
//! * `T_a(s) = -CV (U^T A0 V + sum U^T A_i V e^{-s tau_i})^{-1} U^T B`
//! * `Ta(theta) = CV (-U^T A0 V - sum U^T A_i V e^{-j theta_i})^{-1} U^T B`
//!
//! The last form decouples the delays: `T_a(j w) = Ta(w tau mod 2 pi)`.

use std::f64::consts::TAU;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, complexify, CMat, C64, J};
use crate::system::{AsymptoticBlocks, DdaeSystem, NullspaceBases};

/// Reciprocal condition number below which the resolvent counts as singular.
pub const POLE_RCOND: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    /// Complex frequency, `None` for delay-angle evaluations.
    pub lambda: Option<C64>,
    pub matrix: CMat,
    pub sigma1: f64,
}

impl FrequencyResponse {
    fn new(lambda: Option<C64>, matrix: CMat) -> Result<Self> {
        let sigma1 = linalg::sigma_max(&matrix)?;
        Ok(Self { lambda, matrix, sigma1 })
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(linalg::singular_values(&self.matrix)?.to_vec())
    }
}

/// Angles `theta_i in [0, 2 pi)`, one per delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub theta: Vec<f64>,
}

impl ThetaPoint {
    pub fn new(theta: impl IntoIterator<Item = f64>) -> Self {
        Self { theta: theta.into_iter().map(wrap_angle).collect() }
    }

    pub fn zeros(m: usize) -> Self {
        Self { theta: vec![0.0; m] }
    }

    /// `theta_i = omega tau_i mod 2 pi`.
    pub fn from_frequency(omega: f64, taus: &[f64]) -> Self {
        Self::new(taus.iter().map(|t| omega * t))
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `lambda E - A0 - sum A_i e^{-lambda tau_i}`.
pub fn characteristic_matrix(sys: &DdaeSystem, lambda: C64) -> CMat {
    let mut m = complexify(sys.e()).mapv(|x| x * lambda);
    let taus = sys.delays().as_slice();
    for (i, ai) in sys.a().iter().enumerate() {
        let coef = if i == 0 { C64::new(1.0, 0.0) } else { (-lambda * taus[i - 1]).exp() };
        m.zip_mut_with(ai, |z, &a| *z -= coef * a);
    }
    m
}

/// `d/d omega` of the characteristic matrix at `lambda = j omega`, divided by `j`:
/// `E + sum A_i tau_i e^{-j omega tau_i}`.
pub fn characteristic_slope(sys: &DdaeSystem, omega: f64) -> CMat {
    let mut m = complexify(sys.e());
    for (ai, &tau) in sys.a().iter().skip(1).zip(sys.delays().as_slice()) {
        let coef = (-J * omega * tau).exp() * tau;
        m.zip_mut_with(ai, |z, &a| *z += coef * a);
    }
    m
}

pub fn eval_t(sys: &DdaeSystem, lambda: C64) -> Result<FrequencyResponse> {
    let m = characteristic_matrix(sys, lambda);
    let x = linalg::solve_checked(&m, &complexify(sys.b()), POLE_RCOND)
        .ok_or(Error::TransmissionPole { lambda })?;
    FrequencyResponse::new(Some(lambda), complexify(sys.c()).dot(&x))
}

/// Largest singular value of `T(j omega)`, `+inf` at a pole.
pub fn sigma1_t(sys: &DdaeSystem, omega: f64) -> f64 {
    eval_t(sys, C64::new(0.0, omega)).map_or(f64::INFINITY, |r| r.sigma1)
}

impl AsymptoticBlocks {
    /// `-U^T A0 V - sum U^T A_i V e^{-j theta_i}`.
    pub fn inner_matrix(&self, theta: &[f64]) -> CMat {
        let mut m = complexify(&self.a[0]).mapv(|z| -z);
        for (ai, &th) in self.a.iter().skip(1).zip(theta) {
            let coef = (-J * th).exp();
            m.zip_mut_with(ai, |z, &a| *z -= coef * a);
        }
        m
    }

    pub fn eval_theta(&self, theta: &[f64]) -> Result<FrequencyResponse> {
        if self.nullity() == 0 {
            return Ok(FrequencyResponse { lambda: None, matrix: CMat::zeros((self.c.nrows(), self.b.ncols())), sigma1: 0.0 });
        }
        let inner = self.inner_matrix(theta);
        let x = linalg::solve_checked(&inner, &complexify(&self.b), POLE_RCOND)
            .ok_or_else(|| Error::SingularAsymptotic { theta: theta.to_vec() })?;
        FrequencyResponse::new(None, complexify(&self.c).dot(&x))
    }

    pub fn sigma1_theta(&self, theta: &[f64]) -> f64 {
        self.eval_theta(theta).map_or(f64::INFINITY, |r| r.sigma1)
    }
}

pub fn eval_ta_theta(sys: &DdaeSystem, bases: &NullspaceBases, point: &ThetaPoint) -> Result<FrequencyResponse> {
    if point.theta.len() != sys.m() {
        return Err(Error::Dimension(format!("theta has {} angles for {} delays", point.theta.len(), sys.m())));
    }
    AsymptoticBlocks::new(sys, bases).eval_theta(&point.theta)
}

pub fn eval_ta(sys: &DdaeSystem, bases: &NullspaceBases, lambda: C64) -> Result<FrequencyResponse> {
    let blocks = AsymptoticBlocks::new(sys, bases);
    if blocks.nullity() == 0 {
        return Ok(FrequencyResponse { lambda: Some(lambda), matrix: CMat::zeros((sys.n_z(), sys.n_w())), sigma1: 0.0 });
    }
    let mut inner = complexify(&blocks.a[0]);
    for (ai, &tau) in blocks.a.iter().skip(1).zip(sys.delays().as_slice()) {
        let coef = (-lambda * tau).exp();
        inner.zip_mut_with(ai, |z, &a| *z += coef * a);
    }
    let x = linalg::solve_checked(&inner, &complexify(&blocks.b), POLE_RCOND).ok_or_else(|| {
        Error::SingularAsymptotic { theta: sys.delays().as_slice().iter().map(|t| wrap_angle(lambda.im * t)).collect() }
    })?;
    FrequencyResponse::new(Some(lambda), complexify(&blocks.c).dot(&x).mapv(|z| -z))
}

/// Sampled singular values of `T(j omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub omega: Vec<f64>,
    /// `sigma[k][i]` is the (k+1)-th largest singular value at `omega[i]`.
    pub sigma: Vec<Vec<f64>>,
}

impl SweepTable {
    /// Comma-separated text with a one-line header `omega,sigma1[,sigma2..]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega");
        for k in 0..self.sigma.len() {
            out.push_str(&format!(",sigma{}", k + 1));
        }
        out.push('\n');
        for (i, w) in self.omega.iter().enumerate() {
            out.push_str(&format!("{w:.17e}"));
            for col in &self.sigma {
                out.push_str(&format!(",{:.17e}", col[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Invalid("empty sweep table".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"omega") || cols.len() < 2 {
            return Err(Error::Invalid(format!("bad sweep header {header:?}")));
        }
        let mut table = SweepTable { omega: Vec::new(), sigma: vec![Vec::new(); cols.len() - 1] };
        for line in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Invalid(format!("bad sweep row {line:?}: {e}")))?;
            if vals.len() != cols.len() {
                return Err(Error::Invalid(format!("sweep row has {} columns, header {}", vals.len(), cols.len())));
            }
            table.omega.push(vals[0]);
            for (k, v) in vals[1..].iter().enumerate() {
                table.sigma[k].push(*v);
            }
        }
        Ok(table)
    }

    /// `(omega, sigma_1)` at the largest finite `sigma_1`.
    pub fn max_sigma1(&self) -> Option<(f64, f64)> {
        self.omega
            .iter()
            .zip(&self.sigma[0])
            .filter(|(_, s)| s.is_finite())
            .map(|(&w, &s)| (w, s))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluate the `n_sigma` largest singular values of `T(j omega)` on a grid.
/// Poles are recorded as `+inf`.
pub fn sweep(sys: &DdaeSystem, omegas: &[f64], n_sigma: usize, exec: Exec) -> SweepTable {
    let n_sigma = n_sigma.clamp(1, sys.n_z().min(sys.n_w()).max(1));
    let rows = exec.map(omegas.len(), |i| {
        match eval_t(sys, C64::new(0.0, omegas[i])).and_then(|r| r.singular_values()) {
            Ok(mut s) => {
                s.resize(n_sigma, 0.0);
                s
            }
            Err(_) => vec![f64::INFINITY; n_sigma],
        }
    });
    let mut sigma = vec![Vec::with_capacity(omegas.len()); n_sigma];
    for row in rows {
        for (k, v) in row.into_iter().enumerate() {
            sigma[k].push(v);
        }
    }
    SweepTable { omega: omegas.to_vec(), sigma }
}

/// Real rational-free reference: `C (sI - A)^{-1} B` for a delay-free system.
pub fn ode_transfer(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>, s: C64) -> Option<CMat> {
    let n = a.nrows();
    let m = CMat::from_diag_elem(n, s) - complexify(a);
    linalg::solve_checked(&m, &complexify(b), POLE_RCOND).map(|x| complexify(c).dot(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, neutral1, neutral1_closed_form};
    use crate::system::compute_nullspaces;
    use ndarray::array;

    #[test]
    fn neutral1_at_zero() {
        let sys = neutral1(1.0, 2.0);
        let r = eval_t(&sys, C64::new(0.0, 0.0)).unwrap();
        assert!((r.matrix[[0, 0]] - C64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn neutral1_matches_closed_form() {
        let sys = neutral1(1.0, 2.0);
        for w in log_space(1e-2, 1e3, 100) {
            let s = C64::new(0.0, w);
            let t = eval_t(&sys, s).unwrap().matrix[[0, 0]];
            let exact = neutral1_closed_form(s, 1.0, 2.0);
            assert!((t - exact).norm() <= 1e-12 * exact.norm().max(1.0), "w = {w}");
        }
    }

    #[test]
    fn ode_reduction() {
        let a = array![[-1.0, 2.0], [0.0, -3.0]];
        let b = array![[1.0], [1.0]];
        let c = array![[1.0, 0.5]];
        let sys = DdaeSystem::ode(Array2::eye(2), a.clone(), b.clone(), c.clone()).unwrap();
        for w in [0.0, 0.3, 2.0, 50.0] {
            let s = C64::new(0.0, w);
            let t = eval_t(&sys, s).unwrap().matrix;
            let r = ode_transfer(&a, &b, &c, s).unwrap();
            assert!((t[[0, 0]] - r[[0, 0]]).norm() < 1e-14);
        }
    }

    #[test]
    fn pole_is_reported() {
        let sys = fixtures::scalar_lag();
        assert!(matches!(eval_t(&sys, C64::new(-1.0, 0.0)), Err(Error::TransmissionPole { .. })));
    }

    #[test]
    fn asymptotic_theta_values() {
        let sys = neutral1(1.0, 2.0);
        let nb = compute_nullspaces(&sys);
        let at = |t1: f64, t2: f64| eval_ta_theta(&sys, &nb, &ThetaPoint::new([t1, t2])).unwrap().sigma1;
        assert!((at(0.0, 0.0) - 16.0 / 23.0).abs() < 1e-14);
        assert!((at(0.0, std::f64::consts::PI) - 16.0 / 7.0).abs() < 1e-14);
        let w = eval_ta(&sys, &nb, C64::new(0.0, 0.0)).unwrap().sigma1;
        assert!((w - 16.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn asymptotic_matches_theta_form_on_axis() {
        let sys = neutral1(1.0, 2.0);
        let nb = compute_nullspaces(&sys);
        for w in [0.1, 1.7, 33.0] {
            let a = eval_ta(&sys, &nb, C64::new(0.0, w)).unwrap().matrix;
            let b = eval_ta_theta(&sys, &nb, &ThetaPoint::from_frequency(w, &[1.0, 2.0])).unwrap().matrix;
            assert!((a[[0, 0]] - b[[0, 0]]).norm() < 1e-13);
        }
    }

    #[test]
    fn high_frequency_convergence() {
        let sys = neutral1(1.0, 2.0);
        let nb = compute_nullspaces(&sys);
        let gap = |w: f64| {
            let s = C64::new(0.0, w);
            (eval_t(&sys, s).unwrap().matrix[[0, 0]] - eval_ta(&sys, &nb, s).unwrap().matrix[[0, 0]]).norm()
        };
        let (g4, g5) = (gap(1e4), gap(1e5));
        assert!(g4 < 1e-3 && g5 < 1e-3 && g5 < g4, "{g4} {g5}");
    }

    #[test]
    fn nonsingular_e_has_zero_asymptotic_part() {
        let sys = fixtures::delayed_scalar(1.0);
        let nb = compute_nullspaces(&sys);
        assert_eq!(eval_ta(&sys, &nb, C64::new(0.0, 3.0)).unwrap().sigma1, 0.0);
        assert_eq!(eval_ta_theta(&sys, &nb, &ThetaPoint::zeros(1)).unwrap().sigma1, 0.0);
    }

    #[test]
    fn table1_asymptotic_part_vanishes() {
        let sys = fixtures::table1_closed_loop(0.5, &[-3.5878, 1.5017]);
        let nb = compute_nullspaces(&sys);
        let blocks = AsymptoticBlocks::new(&sys, &nb);
        assert!(blocks.a[1].iter().all(|x| x.abs() < 1e-15));
        assert!(blocks.b.iter().all(|x| x.abs() < 1e-15));
        assert!(eval_ta_theta(&sys, &nb, &ThetaPoint::new([1.3])).unwrap().sigma1 < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let sys = neutral1(1.0, 2.0);
        let table = sweep(&sys, &log_space(0.1, 10.0, 7), 1, Exec::Sequential);
        let back = SweepTable::from_csv(&table.to_csv()).unwrap();
        assert_eq!(back, table);
    }

    proptest::proptest! {
        #[test]
        fn conjugate_symmetry(w in 0.01f64..200.0) {
            let sys = neutral1(1.0, 2.0);
            let p = eval_t(&sys, C64::new(0.0, w)).unwrap().matrix[[0, 0]];
            let m = eval_t(&sys, C64::new(0.0, -w)).unwrap().matrix[[0, 0]];
            proptest::prop_assert!((p - m.conj()).norm() <= 1e-12 * p.norm().max(1.0));
        }

        #[test]
        fn theta_periodicity(t1 in 0.0f64..6.3, t2 in 0.0f64..6.3, k in -3i32..3) {
            let sys = neutral1(1.0, 2.0);
            let blocks = AsymptoticBlocks::new(&sys, &compute_nullspaces(&sys));
            let a = blocks.eval_theta(&[t1, t2]).unwrap().matrix[[0, 0]];
            let b = blocks.eval_theta(&[t1 + TAU * k as f64, t2 - TAU * k as f64]).unwrap().matrix[[0, 0]];
            proptest::prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
