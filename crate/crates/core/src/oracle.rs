//! Brute-force reference computations. Slow, simple, and independent of the
//! level-set machinery; used to validate it.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::discretize::{coordinate_ascent, discretize, grid_angles, stability_of};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, complexify};
use crate::system::{compute_nullspaces, AsymptoticBlocks, DdaeSystem, DelayVector, NullspaceBases};
use crate::transfer::{lin_space, log_space, sigma1_t};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DenseSweepSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub log_spacing: bool,
    /// Grid points per effective delay angle for [`dense_ta`].
    pub theta_points: usize,
}

impl Default for DenseSweepSpec {
    fn default() -> Self {
        Self { omega_min: 1e-3, omega_max: 1e3, points: 4000, log_spacing: true, theta_points: 400 }
    }
}

impl DenseSweepSpec {
    fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.omega_max > self.omega_min) || self.omega_min < 0.0 {
            return Err(Error::Invalid("sweep needs at least 2 points on an increasing nonnegative range".into()));
        }
        let mut g = if self.log_spacing && self.omega_min > 0.0 {
            log_space(self.omega_min, self.omega_max, self.points)
        } else {
            lin_space(self.omega_min, self.omega_max, self.points)
        };
        if g[0] > 0.0 {
            g.insert(0, 0.0);
        }
        Ok(g)
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 * (1.0 + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Lower bound on `sup_omega sigma_1(T(j omega))`: grid maximum refined by
/// golden-section search around the three best local maxima. Returns
/// `(value, omega)`.
pub fn dense_hinf(sys: &DdaeSystem, spec: &DenseSweepSpec, exec: Exec) -> Result<(f64, f64)> {
    let grid = spec.grid()?;
    let f = |w: f64| sigma1_t(sys, w);
    let vals = exec.map(grid.len(), |i| f(grid[i]));
    let mut local: Vec<usize> = (0..grid.len())
        .filter(|&i| (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == grid.len() || vals[i] >= vals[i + 1]))
        .collect();
    local.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut best = (vals[local[0]], grid[local[0]]);
    for &i in local.iter().take(3) {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        let (x, fx) = golden_max(&f, a, b);
        if fx > best.0 {
            best = (fx, x);
        }
    }
    Ok(best)
}

/// Lower bound on `max_theta sigma_1(T_a(theta))` by a dense grid over the
/// effective angles and coordinate-wise refinement.
pub fn dense_ta(sys: &DdaeSystem, bases: &NullspaceBases, spec: &DenseSweepSpec, exec: Exec) -> Result<f64> {
    let blocks = AsymptoticBlocks::new(sys, bases);
    if blocks.nullity() == 0 {
        return Ok(0.0);
    }
    let eff = blocks.effective.clone();
    let m = sys.m();
    let full = |s: &[f64]| {
        let mut th = vec![0.0; m];
        for (&i, &x) in eff.iter().zip(s) {
            th[i - 1] = x;
        }
        th
    };
    let k = eff.len();
    if k == 0 {
        return Ok(blocks.sigma1_theta(&vec![0.0; m]));
    }
    let ppd = spec.theta_points.max(2);
    let total = ppd.checked_pow(k as u32).filter(|&t| t <= 4_000_000).ok_or_else(|| Error::Invalid("theta grid too large".into()))?;
    let vals = exec.map(total, |idx| blocks.sigma1_theta(&full(&grid_angles(idx, k, ppd))));
    let (best_idx, best) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, &v)| (i, v)).unwrap_or((0, 0.0));
    let f = |s: &[f64]| blocks.sigma1_theta(&full(s));
    let (_, refined) = coordinate_ascent(&f, grid_angles(best_idx, k, ppd), best, std::f64::consts::TAU / ppd as f64);
    Ok(refined)
}

/// H-infinity norm of a delay-free system with nonsingular `E`, by
/// bisection on the imaginary eigenvalues of the Hamiltonian matrix
/// `[[A, B B^T / g], [-C^T C / g, -A^T]]` (with `A = E^{-1} A0`,
/// `B = E^{-1} B`).
pub fn bb_bisection(sys: &DdaeSystem, tol: f64) -> Result<f64> {
    if sys.m() != 0 {
        return Err(Error::Invalid("bisection oracle needs a delay-free system".into()));
    }
    let n = sys.n();
    let einv = linalg::solve_checked(&complexify(sys.e()), &linalg::CMat::eye(n), 1e-14)
        .ok_or_else(|| Error::Invalid("bisection oracle needs nonsingular E".into()))?
        .mapv(|z| z.re);
    let a = einv.dot(&sys.a()[0]);
    let b = einv.dot(sys.b());
    let c = sys.c().clone();
    let abscissa = linalg::real_eigenvalues(&a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Err(Error::StrongStabilityViolation { abscissa, delta_radius: 0.0 });
    }
    let bbt = b.dot(&b.t());
    let ctc = c.t().dot(&c);
    let has_crossing = |g: f64| -> Result<bool> {
        let mut h = Array2::zeros((2 * n, 2 * n));
        h.slice_mut(s![..n, ..n]).assign(&a);
        h.slice_mut(s![..n, n..]).assign(&(&bbt / g));
        h.slice_mut(s![n.., ..n]).assign(&(&ctc / -g));
        h.slice_mut(s![n.., n..]).assign(&a.t().mapv(|x| -x));
        let ev = linalg::real_eigenvalues(&h)?;
        Ok(ev.iter().any(|z| z.re.abs() <= 1e-9 * (1.0 + z.norm())))
    };
    let f = |w: f64| sigma1_t(sys, w);
    let mut lo = [0.0, 1e-2, 1e-1, 1.0, 10.0, 100.0].iter().map(|&w| f(w)).fold(0.0, f64::max);
    if lo == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 2.0 * lo;
    while has_crossing(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if has_crossing(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn gaussian<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Strongly stable with some margin (abscissa below -0.05).
fn comfortably_stable(sys: &DdaeSystem) -> bool {
    let bases = compute_nullspaces(sys);
    let Ok(d) = discretize(sys, 24) else { return false };
    stability_of(sys, &bases, &d, Exec::Sequential).is_ok_and(|r| r.stable && r.abscissa < -0.05)
}

/// Random stable retarded system `x' = A0 x + sum A_i x(t - tau_i) + B w`,
/// `z = C x` with `n <= 4` states and `m <= 2` delays in `[0.1, 1)`.
pub fn random_retarded<R: Rng>(rng: &mut R) -> DdaeSystem {
    loop {
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=2usize);
        let nw = rng.random_range(1..=2usize);
        let nz = rng.random_range(1..=2usize);
        let shift = rng.random_range(0.5..2.5);
        let mut a = vec![gaussian(rng, n, n, 1.0) - Array2::<f64>::eye(n) * shift];
        for _ in 0..m {
            a.push(gaussian(rng, n, n, 0.4));
        }
        let taus = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let (b, c) = (gaussian(rng, n, nw, 1.0), gaussian(rng, nz, n, 1.0));
        let sys = DdaeSystem::new(Array2::eye(n), a, b, c, DelayVector::new(taus).expect("positive delays")).expect("consistent sizes");
        if comfortably_stable(&sys) {
            return sys;
        }
    }
}

/// Random stable delay-free system with nonsingular `E`, `n <= 5`.
pub fn random_ode<R: Rng>(rng: &mut R) -> DdaeSystem {
    loop {
        let n = rng.random_range(1..=5usize);
        let nw = rng.random_range(1..=3usize);
        let nz = rng.random_range(1..=3usize);
        let e = Array2::<f64>::eye(n) + gaussian(rng, n, n, 0.2);
        let a = gaussian(rng, n, n, 1.0) - Array2::<f64>::eye(n) * rng.random_range(0.3..2.0);
        let (b, c) = (gaussian(rng, n, nw, 1.0), gaussian(rng, nz, n, 1.0));
        let Ok(sys) = DdaeSystem::ode(e, a, b, c) else { continue };
        if comfortably_stable(&sys) {
            return sys;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::system::compute_nullspaces;
    use ndarray::array;

    #[test]
    fn scalar_lag_references() {
        let sys = fixtures::scalar_lag();
        let (v, w) = dense_hinf(&sys, &DenseSweepSpec::default(), Exec::Sequential).unwrap();
        assert!((v - 1.0).abs() < 1e-12 && w == 0.0);
        assert!((bb_bisection(&sys, 1e-10).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn neutral1_theta_grid() {
        let sys = fixtures::neutral1(1.0, 2.0);
        let v = dense_ta(&sys, &compute_nullspaces(&sys), &DenseSweepSpec::default(), Exec::Parallel).unwrap();
        assert!((v - 16.0 / 7.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn single_delay_theta_closed_form() {
        // E = 0: 0 = -x + 0.5 x(t-1) + w, z = x  =>  T_a = 1 / (1 - 0.5 e^{-j theta})
        let sys = DdaeSystem::new(
            array![[0.0]],
            vec![array![[-1.0]], array![[0.5]]],
            array![[1.0]],
            array![[1.0]],
            crate::system::DelayVector::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        let v = dense_ta(&sys, &compute_nullspaces(&sys), &DenseSweepSpec::default(), Exec::Sequential).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn unstable_ode_rejected() {
        let sys = DdaeSystem::ode(array![[1.0]], array![[0.5]], array![[1.0]], array![[1.0]]).unwrap();
        assert!(matches!(bb_bisection(&sys, 1e-8), Err(Error::StrongStabilityViolation { .. })));
    }
}
