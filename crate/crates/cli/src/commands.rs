use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use strong_hinf::asymptotic::{strong_norm_ta, AsymNormResult, AsymOptions};
use strong_hinf::discretize;
use strong_hinf::error::Error;
use strong_hinf::exec::Exec;
use strong_hinf::gradients::finite_diff_check;
use strong_hinf::io::{from_array, InputFile, InterconnectionFile, Rows};
use strong_hinf::levelset::{crossing_bound, prepare, strong_hinf_with, Branch, NormCertificate, NormOptions};
use strong_hinf::synthesis::{multistart_report, optimize, OptimizerOptions, SynthesisProblem};
use strong_hinf::system::{causality_margin, check_causality, compute_nullspaces, DdaeSystem};
use strong_hinf::transfer::{lin_space, log_space, sweep};

use crate::{Cli, Command, InputArgs, NormArgs};

pub const EXIT_NONCAUSAL: u8 = 2;
pub const EXIT_UNSTABLE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NonCausal { .. }) => EXIT_NONCAUSAL,
        Some(Error::StrongStabilityViolation { .. } | Error::NoStabilizingStart) => EXIT_UNSTABLE,
        Some(
            Error::TransmissionPole { .. }
            | Error::SingularAsymptotic { .. }
            | Error::EigenSolver(_)
            | Error::Linalg(_)
            | Error::IterationCap(_)
            | Error::MissingVectors,
        ) => EXIT_NUMERICAL,
        _ => 1,
    }
}

fn emit<T: Serialize>(doc: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    write_text(&text, output)
}

fn write_text(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<InputFile> {
    InputFile::load(path).with_context(|| format!("reading {}", path.display()))
}

fn interconnection(input: &InputArgs) -> Result<InterconnectionFile> {
    match load(&input.input)? {
        InputFile::Interconnection(f) => Ok(f),
        InputFile::System(_) => Err(anyhow!("{} is a system file; this command needs a plant/controller interconnection", input.input.display())),
    }
}

/// The system to analyze, with the parameters used (interconnections only).
fn system(input: &InputArgs) -> Result<(DdaeSystem, Option<Vec<f64>>)> {
    match load(&input.input)? {
        InputFile::System(f) => {
            if input.params.is_some() {
                return Err(anyhow!("--params only applies to interconnection files"));
            }
            Ok((f.to_system()?, None))
        }
        InputFile::Interconnection(f) => {
            let p = input
                .params
                .clone()
                .or_else(|| f.params.clone())
                .ok_or_else(|| anyhow!("interconnection file has no `params`; pass --params"))?;
            Ok((f.template()?.substitute(&p)?, Some(p)))
        }
    }
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn norm_options(args: &NormArgs, exec: Exec) -> Result<NormOptions> {
    if !(args.tol > 0.0 && args.tol < 1.0) {
        return Err(Error::Invalid(format!("--tol must lie in (0, 1), got {}", args.tol)).into());
    }
    let mut o = NormOptions {
        tol: args.tol,
        order: args.order,
        auto_order: args.auto_order,
        exec,
        check_stability: !args.no_stability_check,
        ..Default::default()
    };
    o.asym.exec = exec;
    o.max_order = o.max_order.max(args.order);
    Ok(o)
}

#[derive(Serialize)]
struct NormDocument<'a> {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a [f64]>,
    #[serde(flatten)]
    certificate: &'a NormCertificate,
    /// Frequency beyond which no crossing of the level `value (1 + 2 tol)` can occur.
    crossing_bound: Option<f64>,
}

#[derive(Serialize)]
struct TaDocument<'a> {
    command: &'static str,
    #[serde(flatten)]
    result: &'a AsymNormResult,
}

#[derive(Serialize)]
struct CheckDocument {
    command: &'static str,
    n: usize,
    nullity: usize,
    causal: bool,
    /// Smallest singular value of U^T A0 V (infinite when E is nonsingular).
    causality_margin: f64,
    stable: Option<bool>,
    abscissa: Option<f64>,
    delta_radius: Option<f64>,
}

#[derive(Serialize)]
struct ControllerMatrices {
    #[serde(rename = "Ac")]
    ac: Rows,
    #[serde(rename = "Bc")]
    bc: Rows,
    #[serde(rename = "Cc")]
    cc: Rows,
    #[serde(rename = "Dc")]
    dc: Rows,
}

#[derive(Serialize)]
struct SynthDocument<'a> {
    command: &'static str,
    best_p: &'a [f64],
    best_value: f64,
    controller: ControllerMatrices,
    branch: Branch,
    omega_hat: Option<f64>,
    options: OptimizerOptions,
    traces: &'a [strong_hinf::synthesis::StartTrace],
    certificate: &'a NormCertificate,
}

#[derive(Serialize)]
struct GradDocument<'a> {
    command: &'static str,
    params: &'a [f64],
    step: f64,
    #[serde(flatten)]
    check: &'a strong_hinf::gradients::GradCheck,
}

pub fn run(cli: &Cli) -> Result<()> {
    let exec = exec(cli);
    match &cli.command {
        Command::Norm { input, norm } => {
            let opts = norm_options(norm, exec)?;
            let (sys, params) = system(input)?;
            let bases = prepare(&sys)?;
            let cert = strong_hinf_with(&sys, &bases, &opts)?;
            let bound = match cert.branch {
                Branch::Frequency => crossing_bound(&sys, &bases, cert.ta_norm, cert.value * (1.0 + 2.0 * opts.tol)),
                Branch::Asymptotic => None,
            };
            emit(&NormDocument { command: "norm", params: params.as_deref(), certificate: &cert, crossing_bound: bound }, input.output.as_deref())
        }
        Command::TaNorm { input, grid } => {
            let (sys, _) = system(input)?;
            let bases = prepare(&sys)?;
            let opts = AsymOptions { points_per_dim: *grid, exec, ..Default::default() };
            let r = strong_norm_ta(&sys, &bases, &opts)?;
            emit(&TaDocument { command: "ta-norm", result: &r }, input.output.as_deref())
        }
        Command::Sweep { input, omega_min, omega_max, points, linear, singular_values } => {
            if *points < 2 || !(omega_max > omega_min) || *omega_min < 0.0 || (!linear && *omega_min <= 0.0) {
                return Err(Error::Invalid("sweep needs --points >= 2 and 0 < omega-min < omega-max (0 allowed with --linear)".into()).into());
            }
            let (sys, _) = system(input)?;
            let omegas = if *linear { lin_space(*omega_min, *omega_max, *points) } else { log_space(*omega_min, *omega_max, *points) };
            let table = sweep(&sys, &omegas, (*singular_values).max(1), exec);
            write_text(&table.to_csv(), input.output.as_deref())
        }
        Command::Synth { input, starts, seed, box_half, max_iter, tol } => {
            let file = interconnection(input)?;
            let plant = file.plant()?;
            let structure = file.structure()?;
            let options = OptimizerOptions { starts: *starts, seed: *seed, box_half: *box_half, max_iter: *max_iter, tol: *tol, exec, ..Default::default() };
            let mut problem = SynthesisProblem::new(&plant, &structure, options)?;
            problem.initial_points = file.initial_points.clone();
            if let Some(p) = input.params.clone().or(file.params.clone()) {
                problem.initial_points.insert(0, p);
            }
            let result = optimize(&problem)?;
            eprint!("{}", multistart_report(&result));
            let [ac, bc, cc, dc] = structure.matrices(&result.best_p)?;
            let controller = ControllerMatrices { ac: from_array(&ac), bc: from_array(&bc), cc: from_array(&cc), dc: from_array(&dc) };
            emit(
                &SynthDocument {
                    command: "synth",
                    best_p: &result.best_p,
                    best_value: result.best_value,
                    controller,
                    branch: result.certificate.branch,
                    omega_hat: result.certificate.omega_hat,
                    options,
                    traces: &result.traces,
                    certificate: &result.certificate,
                },
                input.output.as_deref(),
            )
        }
        Command::GradCheck { input, step, norm } => {
            if !(*step > 0.0) {
                return Err(Error::Invalid("--step must be positive".into()).into());
            }
            let file = interconnection(input)?;
            let p = input.params.clone().or(file.params.clone()).ok_or_else(|| anyhow!("grad-check needs `params` in the file or --params"))?;
            let template = file.template()?;
            let bases = prepare(&template.substitute(&p)?)?;
            let chk = finite_diff_check(&template, &bases, &p, *step, &norm_options(norm, exec)?)?;
            emit(&GradDocument { command: "grad-check", params: &p, step: *step, check: &chk }, input.output.as_deref())
        }
        Command::Check { input, order } => {
            let (sys, _) = system(input)?;
            let bases = compute_nullspaces(&sys);
            let causal = check_causality(&sys, &bases);
            let margin = causality_margin(&sys, &bases);
            let mut doc = CheckDocument {
                command: "check",
                n: sys.n(),
                nullity: bases.nullity(),
                causal,
                causality_margin: margin,
                stable: None,
                abscissa: None,
                delta_radius: None,
            };
            if causal {
                let dsys = discretize::discretize(&sys, *order)?;
                let rep = discretize::stability_of(&sys, &bases, &dsys, exec)?;
                doc.stable = Some(rep.stable);
                doc.abscissa = Some(rep.abscissa);
                doc.delta_radius = Some(rep.delta_radius);
            }
            emit(&doc, input.output.as_deref())?;
            if !causal {
                return Err(Error::NonCausal { sigma_min: margin }.into());
            }
            match (doc.stable, doc.abscissa, doc.delta_radius) {
                (Some(false), Some(abscissa), Some(delta_radius)) => Err(Error::StrongStabilityViolation { abscissa, delta_radius }.into()),
                _ => Ok(()),
            }
        }
    }
}
