//! Strong H-infinity norm: level-set prediction on the spectral
//! discretization, then Gauss-Newton correction on the original system.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::asymptotic::{strong_norm_ta, AsymNormResult, AsymOptions};
use crate::corrector::{self, GaussNewtonOptions, PeakSystem};
use crate::discretize::{self, DiscretizedSystem, StabilityReport, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, CMat, CVec, C64, J};
use crate::system::{causality_margin, check_causality, compute_nullspaces, DdaeSystem, NullspaceBases};
use crate::transfer::{self, characteristic_matrix, characteristic_slope, ThetaPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The norm is attained at a finite frequency.
    Frequency,
    /// The norm equals the asymptotic value `max_theta sigma_1(T_a(theta))`.
    Asymptotic,
}

#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    pub tol: f64,
    pub order: usize,
    pub auto_order: bool,
    pub max_order: usize,
    pub max_levels: usize,
    pub exec: Exec,
    pub asym: AsymOptions,
    pub gn: GaussNewtonOptions,
    /// Eigenvalues with `|Re| <= imag_tol (1 + |Im|)` count as imaginary.
    pub imag_tol: f64,
    pub check_stability: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            order: DEFAULT_ORDER,
            auto_order: false,
            max_order: 160,
            max_levels: 200,
            exec: Exec::default(),
            asym: AsymOptions::default(),
            gn: GaussNewtonOptions::default(),
            imag_tol: 1e-7,
            check_stability: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormCertificate {
    pub value: f64,
    pub branch: Branch,
    pub omega_hat: Option<f64>,
    pub theta_hat: Option<ThetaPoint>,
    /// Asymptotic part `max_theta sigma_1(T_a(theta))`.
    pub ta_norm: f64,
    /// Level-set prediction before correction.
    pub predicted: f64,
    /// Levels visited by the prediction loop.
    pub levels: Vec<f64>,
    pub iterations: usize,
    #[serde(rename = "N")]
    pub order: usize,
    pub tol: f64,
    /// False when the Gauss-Newton correction failed and `value` is the
    /// prediction.
    pub corrected: bool,
    /// Number of distinct maximizers within `tol` of `value`; the norm is
    /// nonsmooth in parameters when this exceeds one.
    pub active_peaks: usize,
    pub stability: Option<StabilityReport>,
    #[serde(skip)]
    pub u: CVec,
    #[serde(skip)]
    pub v: CVec,
}

/// `M(omega) = j omega E - A0 - sum A_i e^{-j omega tau_i}` as a peak problem.
pub struct FrequencyPeak<'a> {
    sys: &'a DdaeSystem,
    bbt: Array2<f64>,
    ctc: Array2<f64>,
}

impl<'a> FrequencyPeak<'a> {
    pub fn new(sys: &'a DdaeSystem) -> Self {
        Self { sys, bbt: sys.b().dot(&sys.b().t()), ctc: sys.c().t().dot(sys.c()) }
    }
}

impl PeakSystem for FrequencyPeak<'_> {
    fn dim(&self) -> usize {
        self.sys.n()
    }
    fn n_params(&self) -> usize {
        1
    }
    fn matrix(&self, s: &[f64]) -> CMat {
        characteristic_matrix(self.sys, J * s[0])
    }
    fn dmatrix(&self, s: &[f64], _: usize) -> CMat {
        characteristic_slope(self.sys, s[0]).mapv(|z| z * J)
    }
    fn d2matrix(&self, s: &[f64], _: usize, _: usize) -> CMat {
        let mut m = CMat::zeros((self.sys.n(), self.sys.n()));
        for (ai, &tau) in self.sys.a().iter().skip(1).zip(self.sys.delays().as_slice()) {
            let coef = (-J * s[0] * tau).exp() * tau * tau;
            m.zip_mut_with(ai, |z, &a| *z += coef * a);
        }
        m
    }
    fn bbt(&self) -> &Array2<f64> {
        &self.bbt
    }
    fn ctc(&self) -> &Array2<f64> {
        &self.ctc
    }
}

/// Nonnegative frequencies where some singular value of `T_N(j omega)`
/// equals `xi`, from the imaginary eigenvalues of the structured pencil.
pub fn crossing_frequencies(dsys: &DiscretizedSystem, xi: f64, imag_tol: f64) -> Result<Vec<f64>> {
    let big = dsys.en.nrows();
    let mut a = Array2::zeros((2 * big, 2 * big));
    let mut e = Array2::zeros((2 * big, 2 * big));
    e.slice_mut(s![..big, ..big]).assign(&dsys.en);
    e.slice_mut(s![big.., big..]).assign(&dsys.en.t());
    a.slice_mut(s![..big, ..big]).assign(&dsys.an);
    a.slice_mut(s![..big, big..]).assign(&(dsys.bn.dot(&dsys.bn.t()) / xi));
    a.slice_mut(s![big.., ..big]).assign(&(dsys.cn.t().dot(&dsys.cn) / -xi));
    a.slice_mut(s![big.., big..]).assign(&dsys.an.t().mapv(|x| -x));
    let ev = linalg::generalized_eigenvalues(&a, &e, 1e-13)?;
    let mut omegas: Vec<f64> = ev
        .into_iter()
        .filter(|z| z.is_finite() && z.norm() < 1e10 && z.re.abs() <= imag_tol * (1.0 + z.im.abs()))
        .map(|z| z.im.abs())
        .filter(|&w| {
            // discard eigenvalues that are not genuine crossings
            discretize::eval_tn(dsys, C64::new(0.0, w))
                .and_then(|r| r.singular_values())
                .map(|sv| sv.iter().any(|&s| (s - xi).abs() <= 1e-5 * xi.max(1e-300)))
                .unwrap_or(false)
        })
        .collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * (1.0 + b.abs()));
    Ok(omegas)
}

/// Test frequencies between consecutive crossings.
fn midpoints(crossings: &[f64]) -> Vec<f64> {
    let mut mids = vec![0.0];
    if let Some(&first) = crossings.first() {
        if first > 0.0 {
            mids.push(first / std::f64::consts::SQRT_2);
        }
    }
    for w in crossings.windows(2) {
        if w[0] > 0.0 {
            mids.push((w[0] * w[1]).sqrt());
        } else {
            mids.push(0.5 * w[1]);
        }
    }
    if crossings.len() == 1 {
        mids.push(2.0 * crossings[0]);
    }
    mids
}

#[derive(Debug, Clone)]
pub struct Prediction {
    /// True when the loop exits at the asymptotic level.
    pub asymptotic: bool,
    /// `(xi + xi_l) / 2` at exit.
    pub xi_tilde: f64,
    pub candidates: Vec<f64>,
    pub levels: Vec<f64>,
    pub iterations: usize,
}

/// Level-set iteration on `T_N`, starting from the asymptotic norm.
pub fn predict(dsys: &DiscretizedSystem, ta: f64, opts: &NormOptions) -> Result<Prediction> {
    let eval = |w: f64| discretize::sigma1_tn(dsys, w);
    // Starting frequencies. The pencil is undefined at level 0, so the
    // level is raised to the largest sampled gain when that exceeds ta.
    let mut probes = vec![0.0];
    probes.extend(transfer::log_space(1e-2, 1e3, 16));
    let probe_vals = opts.exec.map(probes.len(), |i| eval(probes[i]));
    let (mut arg, mut xi_l) = (None, ta);
    for (&w, &val) in probes.iter().zip(&probe_vals) {
        if !val.is_finite() {
            return Err(Error::TransmissionPole { lambda: C64::new(0.0, w) });
        }
        if val > xi_l {
            xi_l = val;
            arg = Some(w);
        }
    }
    let mut levels = vec![xi_l];
    if xi_l <= 0.0 {
        return Ok(Prediction { asymptotic: true, xi_tilde: 0.0, candidates: vec![], levels, iterations: 0 });
    }

    let mut prev: Vec<f64> = Vec::new();
    for it in 1..=opts.max_levels {
        let xi = xi_l * (1.0 + 2.0 * opts.tol);
        let crossings = crossing_frequencies(dsys, xi, opts.imag_tol)?;
        let mut best = None;
        if !crossings.is_empty() {
            let mids = midpoints(&crossings);
            let vals = opts.exec.map(mids.len(), |i| eval(mids[i]));
            best = mids.iter().zip(&vals).map(|(&w, &v)| (w, v)).max_by(|a, b| a.1.total_cmp(&b.1));
            prev = crossings;
        }
        match best {
            Some((w, val)) if val > xi_l => {
                xi_l = val;
                arg = Some(w);
                levels.push(xi_l);
            }
            _ => {
                let asymptotic = arg.is_none();
                let mut candidates = prev;
                candidates.extend(arg);
                candidates.sort_by(f64::total_cmp);
                candidates.dedup();
                return Ok(Prediction { asymptotic, xi_tilde: 0.5 * (xi + xi_l), candidates, levels, iterations: it });
            }
        }
    }
    Err(Error::IterationCap(opts.max_levels))
}

/// A corrected frequency-domain peak.
#[derive(Debug, Clone)]
pub struct FrequencyPeakSolution {
    pub omega: f64,
    pub xi: f64,
    pub u: CVec,
    pub v: CVec,
    pub converged: bool,
}

fn correct_one(sys: &DdaeSystem, omega0: f64, xi_tilde: f64, gn: GaussNewtonOptions) -> Option<FrequencyPeakSolution> {
    let peak = FrequencyPeak::new(sys);
    let attempt = |sol: corrector::PeakSolution| -> Option<FrequencyPeakSolution> {
        if !sol.converged {
            return None;
        }
        let omega = sol.params[0].abs();
        let check = transfer::sigma1_t(sys, omega);
        ((check - sol.xi).abs() <= 1e-8 * check.max(1e-300)).then_some(FrequencyPeakSolution { omega, xi: sol.xi, u: sol.u, v: sol.v, converged: true })
    };
    if let Ok((xi0, u0, v0)) = corrector::svd_vectors(&peak.matrix(&[omega0]), sys.b(), sys.c()) {
        if xi0 > 0.0 {
            if let Some(s) = corrector::solve_peak_from(&peak, &[omega0], xi0, u0, v0, gn).ok().and_then(attempt) {
                return Some(s);
            }
        }
    }
    corrector::solve_peak(&peak, &[omega0], xi_tilde, gn).ok().and_then(attempt)
}

/// Correct every candidate frequency; converged peaks sorted by value.
pub fn correct_peaks(sys: &DdaeSystem, candidates: &[f64], xi_tilde: f64, opts: &NormOptions) -> Vec<FrequencyPeakSolution> {
    let mut sols: Vec<FrequencyPeakSolution> =
        opts.exec.map(candidates.len(), |i| correct_one(sys, candidates[i], xi_tilde, opts.gn)).into_iter().flatten().collect();
    sols.sort_by(|a, b| b.xi.total_cmp(&a.xi));
    sols
}

fn count_active(values: impl Iterator<Item = (f64, f64)>, top: f64, tol: f64) -> usize {
    let mut seen: Vec<f64> = Vec::new();
    for (w, x) in values {
        if x >= top * (1.0 - tol) && !seen.iter().any(|&s| (s - w).abs() <= 1e-6 * (1.0 + w)) {
            seen.push(w);
        }
    }
    seen.len().max(1)
}

/// Validate causality and strong stability; returns the nullspace bases.
pub fn prepare(sys: &DdaeSystem) -> Result<NullspaceBases> {
    let bases = compute_nullspaces(sys);
    if !check_causality(sys, &bases) {
        return Err(Error::NonCausal { sigma_min: causality_margin(sys, &bases) });
    }
    Ok(bases)
}

fn run_prediction(sys: &DdaeSystem, ta: f64, opts: &NormOptions) -> Result<(DiscretizedSystem, Prediction)> {
    let mut order = opts.order;
    let mut dsys = discretize::discretize(sys, order)?;
    let mut pred = predict(&dsys, ta, opts)?;
    if !opts.auto_order {
        return Ok((dsys, pred));
    }
    while order * 2 <= opts.max_order {
        order *= 2;
        let d2 = discretize::discretize(sys, order)?;
        let p2 = predict(&d2, ta, opts)?;
        let diff = (p2.xi_tilde - pred.xi_tilde).abs();
        dsys = d2;
        let settled = diff <= 1e-3 * p2.xi_tilde.max(1e-300) && p2.asymptotic == pred.asymptotic;
        pred = p2;
        if settled {
            break;
        }
    }
    Ok((dsys, pred))
}

/// Strong H-infinity norm of a causal, strongly stable DDAE.
pub fn strong_hinf(sys: &DdaeSystem, opts: &NormOptions) -> Result<NormCertificate> {
    let bases = prepare(sys)?;
    strong_hinf_with(sys, &bases, opts)
}

pub fn strong_hinf_with(sys: &DdaeSystem, bases: &NullspaceBases, opts: &NormOptions) -> Result<NormCertificate> {
    let stability = if opts.check_stability {
        let dsys = discretize::discretize(sys, opts.order)?;
        let rep = discretize::stability_of(sys, bases, &dsys, opts.exec)?;
        if !rep.stable {
            return Err(Error::StrongStabilityViolation { abscissa: rep.abscissa, delta_radius: rep.delta_radius });
        }
        Some(rep)
    } else {
        None
    };
    let asym = strong_norm_ta(sys, bases, &opts.asym)?;
    let ta = asym.value;
    let (dsys, pred) = run_prediction(sys, ta, opts)?;

    let asymptotic_cert = |asym: AsymNormResult, pred: &Prediction| NormCertificate {
        value: ta,
        branch: Branch::Asymptotic,
        omega_hat: None,
        theta_hat: Some(asym.theta_hat),
        ta_norm: ta,
        predicted: pred.xi_tilde.max(ta),
        levels: pred.levels.clone(),
        iterations: pred.iterations,
        order: dsys.order,
        tol: opts.tol,
        corrected: asym.converged,
        active_peaks: 1,
        stability,
        u: asym.u,
        v: asym.v,
    };
    if pred.asymptotic {
        return Ok(asymptotic_cert(asym, &pred));
    }

    let peaks = correct_peaks(sys, &pred.candidates, pred.xi_tilde, opts);
    let (omega, xi, u, v, corrected, active) = match peaks.first() {
        Some(best) => {
            let active = count_active(peaks.iter().map(|p| (p.omega, p.xi)), best.xi, opts.tol);
            (best.omega, best.xi, best.u.clone(), best.v.clone(), true, active)
        }
        None => {
            log::warn!("peak correction failed for all {} candidates; reporting the prediction", pred.candidates.len());
            let (omega, _) = pred
                .candidates
                .iter()
                .map(|&w| (w, transfer::sigma1_t(sys, w)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or(Error::MissingVectors)?;
            let (_, u, v) = corrector::svd_vectors(&characteristic_matrix(sys, J * omega), sys.b(), sys.c())?;
            (omega, pred.xi_tilde, u, v, false, 1)
        }
    };
    if xi <= ta * (1.0 + 2.0 * opts.tol) {
        return Ok(asymptotic_cert(asym, &pred));
    }
    Ok(NormCertificate {
        value: xi,
        branch: Branch::Frequency,
        omega_hat: Some(omega),
        theta_hat: None,
        ta_norm: ta,
        predicted: pred.xi_tilde,
        levels: pred.levels,
        iterations: pred.iterations,
        order: dsys.order,
        tol: opts.tol,
        corrected,
        active_peaks: active,
        stability,
        u,
        v,
    })
}

/// A frequency beyond which no level-`xi` crossing of the original system
/// can occur: past it, `|T(j omega) - T_a(j omega)| < xi - ta` on a dense
/// logarithmic grid, and `sigma_1(T_a(j omega)) <= ta` everywhere.
/// Returns `None` when `xi <= ta` or the bound is not reached below 1e7.
pub fn crossing_bound(sys: &DdaeSystem, bases: &NullspaceBases, ta: f64, xi: f64) -> Option<f64> {
    if xi <= ta {
        return None;
    }
    let gap = xi - ta;
    let grid = transfer::log_space(1e-2, 1e7, 1800);
    let diffs: Vec<f64> = grid
        .iter()
        .map(|&w| {
            let lam = C64::new(0.0, w);
            match (transfer::eval_t(sys, lam), transfer::eval_ta(sys, bases, lam)) {
                (Ok(t), Ok(ta)) => linalg::sigma_max(&(&t.matrix - &ta.matrix)).unwrap_or(f64::INFINITY),
                _ => f64::INFINITY,
            }
        })
        .collect();
    if diffs.last().is_none_or(|&d| d >= gap) {
        return None;
    }
    let i0 = diffs.iter().rposition(|&d| d >= gap).map_or(0, |i| i + 1);
    Some(grid[i0])
}
