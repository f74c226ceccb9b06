//! Fixed-order controller design: minimize the strong H-infinity norm of the
//! closed loop over the free controller entries.
//!
//! Each start runs BFGS with a weak Wolfe line search. When BFGS stalls, a
//! gradient sampling phase refines the point on a shrinking radius schedule.
//! Strongly unstable parameters evaluate to `+inf`, which the line searches
//! treat as a failed trial step.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{self, discretize};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gradients::grad_strong_hinf;
use crate::interconnect::{closed_loop_template, ControllerStructure, ParametricDdae, PlantModel};
use crate::levelset::{strong_hinf_with, Branch, NormCertificate, NormOptions};
use crate::system::{check_causality, compute_nullspaces, NullspaceBases};

/// One objective evaluation. `grad` is `None` when `value` is infinite.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Option<Vec<f64>>,
    pub smooth: bool,
}

impl Evaluation {
    pub fn infinite() -> Self {
        Self { value: f64::INFINITY, grad: None, smooth: false }
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.is_some()
    }
}

/// A function to minimize. Implemented by [`SynthesisProblem`]; tests plug in
/// simple analytic functions.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, p: &[f64]) -> Result<Evaluation>;
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub starts: usize,
    pub seed: u64,
    /// Random starts are uniform in `[-box_half, box_half]` per parameter.
    pub box_half: f64,
    pub max_iter: usize,
    /// Iterations per radius in the gradient sampling phase.
    pub gs_iter: usize,
    pub tol: f64,
    /// Redraws allowed per start before giving up on finding a stable one.
    pub max_draws: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { starts: 5, seed: 0, box_half: 10.0, max_iter: 200, gs_iter: 10, tol: 1e-6, max_draws: 100, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bfgs,
    GradientSampling,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartTrace {
    pub start: usize,
    pub initial_p: Vec<f64>,
    pub final_p: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Norm of the smallest convex combination of sampled gradients at the
    /// final radius, when the sampling phase ran.
    pub stationarity: Option<f64>,
    pub phase: Phase,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective value after each accepted step.
    pub values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// closed-loop objective

pub struct SynthesisProblem {
    pub template: ParametricDdae,
    pub bases: NullspaceBases,
    pub norm: NormOptions,
    /// Explicit starting points; random ones are added up to `starts`.
    pub initial_points: Vec<Vec<f64>>,
    pub options: OptimizerOptions,
}

#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub certificate: Option<NormCertificate>,
}

impl SynthesisProblem {
    pub fn new(plant: &PlantModel, structure: &ControllerStructure, options: OptimizerOptions) -> Result<Self> {
        let template = closed_loop_template(plant, structure)?;
        let bases = compute_nullspaces(template.base());
        let norm = NormOptions { exec: Exec::Sequential, ..Default::default() };
        Ok(Self { template, bases, norm, initial_points: Vec::new(), options })
    }

    /// Closed-loop strong norm and gradient; `+inf` when the loop is not
    /// causal or not strongly stable.
    pub fn objective(&self, p: &[f64]) -> Result<ObjectiveValue> {
        let inf = ObjectiveValue { value: f64::INFINITY, gradient: None, certificate: None };
        let sys = self.template.substitute(p)?;
        if !check_causality(&sys, &self.bases) {
            return Ok(inf);
        }
        let dsys = discretize(&sys, self.norm.order)?;
        let rep = match discretize::stability_of(&sys, &self.bases, &dsys, self.norm.exec) {
            Ok(r) => r,
            Err(_) => return Ok(inf),
        };
        if !rep.stable {
            return Ok(inf);
        }
        let opts = NormOptions { check_stability: false, ..self.norm };
        let mut cert = match strong_hinf_with(&sys, &self.bases, &opts) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("objective evaluation failed at {p:?}: {e}");
                return Ok(inf);
            }
        };
        cert.stability = Some(rep);
        let gradient = grad_strong_hinf(&self.template, &self.bases, &cert).ok().map(|g| g.grad);
        Ok(ObjectiveValue { value: cert.value, gradient, certificate: Some(cert) })
    }
}

impl Objective for SynthesisProblem {
    fn dim(&self) -> usize {
        self.template.n_params()
    }
    fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
        let o = self.objective(p)?;
        let smooth = o.certificate.as_ref().is_some_and(|c| c.active_peaks <= 1);
        match o.gradient {
            Some(g) if o.value.is_finite() => Ok(Evaluation { value: o.value, grad: Some(g), smooth }),
            _ => Ok(Evaluation::infinite()),
        }
    }
}

// ---------------------------------------------------------------------------
// small dense helpers

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

struct Counter<'a, O: Objective + ?Sized> {
    obj: &'a O,
    evals: usize,
}

impl<O: Objective + ?Sized> Counter<'_, O> {
    fn eval(&mut self, p: &[f64]) -> Result<Evaluation> {
        self.evals += 1;
        self.obj.evaluate(p)
    }
}

// ---------------------------------------------------------------------------
// BFGS with weak Wolfe line search

const C1: f64 = 1e-4;
const C2: f64 = 0.5;

/// Bracketing line search for the weak Wolfe conditions. Returns the step
/// and the evaluation there, or `None` when no acceptable step was found.
fn weak_wolfe<O: Objective + ?Sized>(f: &mut Counter<O>, x: &[f64], fx: f64, gd: f64, d: &[f64]) -> Result<Option<(f64, Vec<f64>, Evaluation)>> {
    let (mut lo, mut hi, mut t) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..30 {
        let xt = axpy(x, t, d);
        let e = f.eval(&xt)?;
        if !e.is_finite() || e.value > fx + C1 * t * gd {
            hi = t;
        } else if dot(e.grad.as_deref().unwrap_or(&[]), d) < C2 * gd {
            lo = t;
        } else {
            return Ok(Some((t, xt, e)));
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        if hi.is_finite() && hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    // fall back to any decrease found at the lower bracket
    if lo > 0.0 {
        let xt = axpy(x, lo, d);
        let e = f.eval(&xt)?;
        if e.is_finite() && e.value < fx {
            return Ok(Some((lo, xt, e)));
        }
    }
    Ok(None)
}

struct Iterate {
    x: Vec<f64>,
    e: Evaluation,
}

fn bfgs<O: Objective + ?Sized>(f: &mut Counter<O>, mut cur: Iterate, opts: &OptimizerOptions, values: &mut Vec<f64>) -> Result<(Iterate, usize)> {
    let n = cur.x.len();
    let identity = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() };
    let mut h = identity(n);
    let mut best_value = cur.e.value;
    let mut since_improvement = 0;
    let mut it = 0;
    while it < opts.max_iter {
        let g = cur.e.grad.clone().expect("finite iterate");
        if norm2(&g) < opts.tol {
            break;
        }
        let mut d: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            h = identity(n);
            d = g.iter().map(|x| -x).collect();
            gd = dot(&g, &d);
        }
        let Some((t, xt, et)) = weak_wolfe(f, &cur.x, cur.e.value, gd, &d)? else {
            break;
        };
        it += 1;
        let g_new = et.grad.clone().expect("finite trial");
        let s: Vec<f64> = d.iter().map(|x| t * x).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let r = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
                }
            }
        }
        cur = Iterate { x: xt, e: et };
        values.push(cur.e.value);
        if cur.e.value < best_value - 1e-12 * best_value.abs().max(1.0) {
            best_value = cur.e.value;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= 10 {
                break;
            }
        }
    }
    Ok((cur, it))
}

// ---------------------------------------------------------------------------
// gradient sampling

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Smallest-norm element of the convex hull of `grads`.
pub fn min_norm_convex(grads: &[Vec<f64>]) -> Vec<f64> {
    let k = grads.len();
    let gram: Vec<Vec<f64>> = grads.iter().map(|a| grads.iter().map(|b| dot(a, b)).collect()).collect();
    let lip = (0..k).map(|i| gram[i].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-300);
    let mut lam = vec![1.0 / k as f64; k];
    for _ in 0..2000 {
        let grad: Vec<f64> = gram.iter().map(|row| dot(row, &lam)).collect();
        let prev = lam.clone();
        for (l, g) in lam.iter_mut().zip(&grad) {
            *l -= g / lip;
        }
        project_simplex(&mut lam);
        if lam.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() < 1e-15 {
            break;
        }
    }
    let dim = grads[0].len();
    (0..dim).map(|j| grads.iter().zip(&lam).map(|(g, l)| l * g[j]).sum()).collect()
}

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm2(&v);
        if r <= 1.0 && r > 0.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

fn gradient_sampling<O: Objective + ?Sized>(
    f: &mut Counter<O>,
    mut cur: Iterate,
    opts: &OptimizerOptions,
    rng: &mut ChaCha8Rng,
    values: &mut Vec<f64>,
) -> Result<(Iterate, usize, f64)> {
    let dim = cur.x.len();
    let mut iterations = 0;
    let mut measure = f64::INFINITY;
    for k in 0..4 {
        let radius = 0.1 * 10f64.powi(-k);
        for _ in 0..opts.gs_iter {
            let mut grads = vec![cur.e.grad.clone().expect("finite iterate")];
            let mut tries = 0;
            while grads.len() < 2 * dim + 1 && tries < 10 * (2 * dim + 1) {
                tries += 1;
                let e = f.eval(&axpy(&cur.x, 1.0, &sample_ball(rng, dim, radius)))?;
                if let Some(g) = e.grad.filter(|_| e.value.is_finite()) {
                    grads.push(g);
                }
            }
            let g = min_norm_convex(&grads);
            measure = norm2(&g);
            if measure < opts.tol {
                break;
            }
            let d: Vec<f64> = g.iter().map(|x| -x).collect();
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let xt = axpy(&cur.x, t, &d);
                let e = f.eval(&xt)?;
                if e.is_finite() && e.value < cur.e.value - C1 * t * measure * measure {
                    cur = Iterate { x: xt, e };
                    values.push(cur.e.value);
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !moved {
                break;
            }
        }
    }
    Ok((cur, iterations, measure))
}

// ---------------------------------------------------------------------------
// driver

fn draw_start<O: Objective + ?Sized>(f: &mut Counter<O>, rng: &mut ChaCha8Rng, opts: &OptimizerOptions) -> Result<Option<Iterate>> {
    for _ in 0..opts.max_draws {
        let x: Vec<f64> = (0..f.obj.dim()).map(|_| rng.random_range(-opts.box_half..=opts.box_half)).collect();
        let e = f.eval(&x)?;
        if e.is_finite() {
            return Ok(Some(Iterate { x, e }));
        }
    }
    Ok(None)
}

/// Optimize from one start. `initial` overrides the random draw.
pub fn run_start<O: Objective + ?Sized>(obj: &O, start: usize, initial: Option<&[f64]>, opts: &OptimizerOptions) -> Result<Option<StartTrace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(start as u64));
    let mut f = Counter { obj, evals: 0 };
    let first = match initial {
        Some(x) => {
            let e = f.eval(x)?;
            e.is_finite().then(|| Iterate { x: x.to_vec(), e })
        }
        None => draw_start(&mut f, &mut rng, opts)?,
    };
    let Some(first) = first else {
        return Ok(None);
    };
    let initial_p = first.x.clone();
    let mut values = vec![first.e.value];
    let (mut cur, mut iterations) = bfgs(&mut f, first, opts, &mut values)?;
    let mut phase = Phase::Bfgs;
    let mut stationarity = None;
    let gnorm = norm2(cur.e.grad.as_deref().unwrap_or(&[]));
    if gnorm >= opts.tol || !cur.e.smooth {
        let (next, gs_iters, measure) = gradient_sampling(&mut f, cur, opts, &mut rng, &mut values)?;
        cur = next;
        iterations += gs_iters;
        phase = Phase::GradientSampling;
        stationarity = Some(measure);
    }
    Ok(Some(StartTrace {
        start,
        initial_p,
        grad_norm: norm2(cur.e.grad.as_deref().unwrap_or(&[])),
        final_p: cur.x,
        value: cur.e.value,
        stationarity,
        phase,
        iterations,
        evaluations: f.evals,
        values,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub best_p: Vec<f64>,
    pub best_value: f64,
    pub traces: Vec<StartTrace>,
}

/// Multi-start minimization of any [`Objective`].
pub fn minimize<O: Objective + ?Sized>(obj: &O, initial_points: &[Vec<f64>], opts: &OptimizerOptions) -> Result<MinimizeResult> {
    if let Some(p) = initial_points.iter().find(|p| p.len() != obj.dim()) {
        return Err(Error::ParameterLength { expected: obj.dim(), got: p.len() });
    }
    let total = opts.starts.max(initial_points.len()).max(1);
    let runs = opts.exec.map(total, |i| run_start(obj, i, initial_points.get(i).map(|v| v.as_slice()), opts));
    let mut traces = Vec::new();
    for r in runs {
        if let Some(t) = r? {
            traces.push(t);
        }
    }
    let best = traces.iter().min_by(|a, b| a.value.total_cmp(&b.value)).ok_or(Error::NoStabilizingStart)?;
    Ok(MinimizeResult { best_p: best.final_p.clone(), best_value: best.value, traces })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub best_p: Vec<f64>,
    pub best_value: f64,
    pub traces: Vec<StartTrace>,
    pub certificate: NormCertificate,
}

pub fn optimize(problem: &SynthesisProblem) -> Result<SynthesisResult> {
    let r = minimize(problem, &problem.initial_points, &problem.options)?;
    let o = problem.objective(&r.best_p)?;
    let certificate = o.certificate.ok_or(Error::NoStabilizingStart)?;
    Ok(SynthesisResult { best_p: r.best_p, best_value: certificate.value, traces: r.traces, certificate })
}

/// Plain-text table of the per-start results.
pub fn multistart_report(result: &SynthesisResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>5} {:>14} {:>11} {:>17} {:>6} {:>6}  p", "start", "value", "|grad|", "phase", "iters", "evals");
    for t in &result.traces {
        let p: Vec<String> = t.final_p.iter().map(|x| format!("{x:.6}")).collect();
        let phase = match t.phase {
            Phase::Bfgs => "bfgs",
            Phase::GradientSampling => "gradient-sampling",
        };
        let _ = writeln!(out, "{:>5} {:>14.8} {:>11.3e} {:>17} {:>6} {:>6}  [{}]", t.start, t.value, t.grad_norm, phase, t.iterations, t.evaluations, p.join(", "));
    }
    let branch = match result.certificate.branch {
        Branch::Frequency => format!("frequency (omega = {:.6})", result.certificate.omega_hat.unwrap_or(f64::NAN)),
        Branch::Asymptotic => "asymptotic".to_string(),
    };
    let _ = writeln!(out, "best value {:.8}, branch {branch}", result.best_value);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    struct Quadratic;

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            3
        }
        fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
            let c = [1.0, -2.0, 0.5];
            let w = [1.0, 10.0, 100.0];
            let value = (0..3).map(|i| w[i] * (p[i] - c[i]).powi(2)).sum();
            let grad = (0..3).map(|i| 2.0 * w[i] * (p[i] - c[i])).collect();
            Ok(Evaluation { value, grad: Some(grad), smooth: true })
        }
    }

    /// |x| + 2|y|: nonsmooth at the minimizer.
    struct Abs;

    impl Objective for Abs {
        fn dim(&self) -> usize {
            2
        }
        fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
            Ok(Evaluation { value: p[0].abs() + 2.0 * p[1].abs(), grad: Some(vec![p[0].signum(), 2.0 * p[1].signum()]), smooth: false })
        }
    }

    #[test]
    fn quadratic_smoke_test() {
        let opts = OptimizerOptions { starts: 3, ..Default::default() };
        let r = minimize(&Quadratic, &[], &opts).unwrap();
        for (x, c) in r.best_p.iter().zip([1.0, -2.0, 0.5]) {
            assert!((x - c).abs() < 1e-8, "{:?}", r.best_p);
        }
        for t in &r.traces {
            assert!(t.values.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn nonsmooth_minimum_is_approached() {
        let opts = OptimizerOptions { starts: 2, ..Default::default() };
        let r = minimize(&Abs, &[], &opts).unwrap();
        assert!(r.best_value < 1e-3, "{r:?}");
    }

    #[test]
    fn min_norm_element() {
        let g = min_norm_convex(&[vec![1.0, 1.0], vec![-1.0, 1.0]]);
        assert!(g[0].abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        let g = min_norm_convex(&[vec![2.0, 0.0], vec![3.0, 0.0]]);
        assert!((g[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection() {
        let mut v = [0.5, 2.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn destabilizing_gain_is_infinite() {
        let prob = SynthesisProblem::new(&fixtures::table1_plant(0.5), &ControllerStructure::static_gain(1, 2), OptimizerOptions::default()).unwrap();
        assert_eq!(prob.objective(&[0.0, 0.0]).unwrap().value, f64::INFINITY);
        let o = prob.objective(&[-3.5878, 1.5017]).unwrap();
        assert!((o.value - 0.4101).abs() < 1e-3);
        assert_eq!(o.gradient.unwrap().len(), 2);
    }

    #[test]
    fn deterministic_given_seed() {
        let opts = OptimizerOptions { starts: 2, seed: 7, ..Default::default() };
        let a = minimize(&Quadratic, &[], &opts).unwrap();
        let b = minimize(&Quadratic, &[], &OptimizerOptions { exec: Exec::Sequential, ..opts }).unwrap();
        assert_eq!(a.best_p, b.best_p);
        assert_eq!(a.traces.len(), b.traces.len());
        for (x, y) in a.traces.iter().zip(&b.traces) {
            assert_eq!(x.values, y.values);
        }
    }
}
