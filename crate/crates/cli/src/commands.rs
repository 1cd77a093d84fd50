use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sqstat_core::fluctuation::{moments, stability_matrix};
use sqstat_core::inference::{
    estimate_q, reconstruct_squeeze, superstatistics_forward, BetaDensity, EquilibriumDataset,
};
use sqstat_core::io::{parse_assignments, points_csv, records_csv, ModelFile, ThermoReport};
use sqstat_core::kinetics::{KineticModel, KineticState, RunSettings, TraceRow, Xi};
use sqstat_core::numeric::linspace;
use sqstat_core::{
    EnsembleSpec, EnsembleSurface, Error, Model, ModelDescriptor, Result, SqueezeConfig, SqueezeFamily, ThermoPoint,
};

use crate::{
    ComputeArgs, FamilyArg, FluctArgs, Format, InferArgs, KineticsArgs, ModelArgs, OutputArgs, SqueezeArgs, SweepArgs,
    XiArg,
};

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write_output(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(path) => {
            let mut f = File::create(path)?;
            f.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                f.write_all(b"\n")?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let written = stdout.write_all(text.as_bytes()).and_then(|()| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            match written {
                // the reader went away, e.g. `| head`
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Resolves `--squeeze`/`--q` against a default from a model file.
fn resolve_family(args: &SqueezeArgs, from_file: Option<SqueezeConfig>) -> Result<SqueezeFamily> {
    let tsallis_q = |q: Option<f64>| q.ok_or_else(|| usage("--squeeze tsallis needs --q"));
    match (args.squeeze, from_file) {
        (Some(FamilyArg::Identity), _) => match args.q {
            Some(_) => Err(usage("--q only applies to --squeeze tsallis")),
            None => Ok(SqueezeFamily::Identity),
        },
        (Some(FamilyArg::Tsallis), _) => SqueezeFamily::tsallis(tsallis_q(args.q)?),
        (None, Some(mut cfg)) => {
            if args.q.is_some() {
                if cfg.q.is_none() {
                    return Err(usage("--q needs a tsallis squeeze"));
                }
                cfg.q = args.q;
            }
            cfg.build()
        }
        (None, None) => match args.q {
            Some(_) => Err(usage("--q needs --squeeze tsallis")),
            None => Ok(SqueezeFamily::Identity),
        },
    }
}

/// Surface and environment from the model flags; command-line `--y`/`--X`
/// values override the file's environment.
fn load(args: &ModelArgs) -> Result<(EnsembleSurface, EnsembleSpec)> {
    let (surface, mut env) = match (&args.model, &args.model_file) {
        (Some(name), None) => {
            let descriptor = ModelDescriptor { name: name.clone(), parameters: parse_assignments(&args.params)? };
            let model = Model::from_descriptor(&descriptor)?;
            (EnsembleSurface::from_model(model, resolve_family(&args.squeeze, None)?), EnsembleSpec::new())
        }
        (None, Some(path)) => {
            if !args.params.is_empty() {
                return Err(usage("--param applies to --model, not --model-file"));
            }
            let file = ModelFile::from_json(&read_file(path)?)?;
            let family = resolve_family(&args.squeeze, file.squeeze.clone())?;
            (file.surface(family)?, file.environment.clone())
        }
        _ => return Err(usage("give exactly one of --model and --model-file")),
    };
    for (k, v) in parse_assignments(&args.y)? {
        env.fixed_extensive.remove(&k);
        env.fixed_intensive.insert(k, v);
    }
    for (k, v) in parse_assignments(&args.x)? {
        env.fixed_intensive.remove(&k);
        env.fixed_extensive.insert(k, v);
    }
    env.validate()?;
    Ok((surface, env))
}

pub fn compute(args: &ComputeArgs) -> Result<()> {
    let (surface, env) = load(&args.model)?;
    let point = surface.thermo_point(&env)?;
    let table = surface.table(&surface.complete_environment(&env))?;
    if table.excluded_rows() > 0 {
        log::info!("{} rows excluded by the q-exponential cutoff", table.excluded_rows());
    }
    let report = ThermoReport::new(point, &table)?;
    if let Some(path) = &args.emit_model {
        let file = ModelFile::emit(&surface, &env)?;
        std::fs::write(path, file.to_json()? + "\n")?;
    }
    let text = match args.output.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.rows_csv()?,
    };
    write_output(&args.output, &text)
}

pub fn fluct(args: &FluctArgs) -> Result<()> {
    let (surface, env) = load(&args.model)?;
    let env = surface.complete_environment(&env);
    let vars: Vec<String> =
        if args.vars.is_empty() { env.fixed_intensive.keys().cloned().collect() } else { args.vars.clone() };
    let stability = stability_matrix(&surface, &env, &vars)?;
    let mut report = moments(&stability, surface.fluctuation_scale(&env)?)?;
    let point = surface.thermo_point(&env)?;
    report.check_size(point.entropy_theta, point.phi);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let text = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => report.matrix_csv(),
    };
    write_output(&args.output, &text)
}

#[derive(Serialize)]
struct KineticsReport {
    squeeze: Option<SqueezeConfig>,
    lattice_radius: u32,
    velocities: Vec<[i32; 2]>,
    collisions: usize,
    seed: u64,
    dt: f64,
    steps_taken: usize,
    initial_entropy: f64,
    final_entropy: f64,
    min_entropy_increment: Option<f64>,
    max_drift: f64,
    detailed_balance_residual: f64,
    initial_state: Vec<f64>,
    final_state: Vec<f64>,
    trace: Vec<TraceRow>,
}

pub fn kinetics(args: &KineticsArgs) -> Result<()> {
    let family = resolve_family(&args.squeeze, None)?;
    let xi = match args.xi {
        XiArg::One => Xi::One,
        XiArg::Soft => Xi::Soft,
    };
    let model = KineticModel::new(args.lattice_radius, family, xi)?;
    let initial = KineticState::random(&model.lattice, args.seed);
    let settings = RunSettings {
        dt: args.dt,
        steps: args.steps,
        trace_every: args.trace_every,
        snapshot_every: 0,
        stop_below: args.stop_below,
    };
    let out = model.run(&initial, &settings)?;
    log::info!("{} steps at dt = {}", out.steps_taken, out.dt);
    let text = match args.output.format {
        Format::Csv => records_csv(&out.trace)?,
        Format::Json => to_json(&KineticsReport {
            squeeze: model.family.config(),
            lattice_radius: model.lattice.radius(),
            velocities: model.lattice.velocities().to_vec(),
            collisions: model.network.quadruples.len(),
            seed: args.seed,
            dt: out.dt,
            steps_taken: out.steps_taken,
            initial_entropy: out.trace[0].entropy,
            final_entropy: out.trace[out.trace.len() - 1].entropy,
            min_entropy_increment: out.min_entropy_increment.is_finite().then_some(out.min_entropy_increment),
            max_drift: out.max_drift,
            detailed_balance_residual: model.detailed_balance_residual(&out.state),
            initial_state: initial.f.clone(),
            final_state: out.state.f.clone(),
            trace: out.trace.clone(),
        })?,
    };
    write_output(&args.output, &text)
}

#[derive(Serialize)]
struct ReconstructionRow {
    ln_g: f64,
    ratio: f64,
    ln_h: f64,
}

#[derive(Serialize)]
struct InferReport {
    q: f64,
    residual: f64,
    intercept: f64,
    power_law: bool,
    threshold: f64,
    reconstruction: Vec<ReconstructionRow>,
}

#[derive(Serialize)]
struct FactorRow {
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "B")]
    factor: f64,
}

#[derive(Serialize)]
struct SuperstatisticsReport {
    norm: f64,
    factors: Vec<FactorRow>,
}

pub fn infer(args: &InferArgs) -> Result<()> {
    let text = match (&args.data, &args.density) {
        (Some(path), None) => {
            let data = EquilibriumDataset::from_csv(open_file(path)?)?;
            let est = estimate_q(&data, args.threshold)?;
            if !est.power_law {
                log::warn!("ratios are not a power law (residual {:e} > {:e})", est.residual, args.threshold);
            }
            let rec = reconstruct_squeeze(&data);
            let rows: Vec<ReconstructionRow> = data
                .samples()
                .iter()
                .zip(&rec.ln_h)
                .map(|(s, &ln_h)| ReconstructionRow { ln_g: s.ln_g, ratio: s.ratio, ln_h })
                .collect();
            match args.output.format {
                Format::Csv => records_csv(&rows)?,
                Format::Json => to_json(&InferReport {
                    q: est.q,
                    residual: est.residual,
                    intercept: est.intercept,
                    power_law: est.power_law,
                    threshold: args.threshold,
                    reconstruction: rows,
                })?,
            }
        }
        (None, Some(path)) => {
            if args.energies.is_empty() {
                return Err(usage("--density needs at least one --energy"));
            }
            let density = BetaDensity::from_csv(open_file(path)?)?;
            let factors = args
                .energies
                .iter()
                .map(|&e| Ok(FactorRow { energy: e, factor: superstatistics_forward(&density, e)? }))
                .collect::<Result<Vec<_>>>()?;
            match args.output.format {
                Format::Csv => records_csv(&factors)?,
                Format::Json => to_json(&SuperstatisticsReport { norm: density.norm(), factors })?,
            }
        }
        _ => return Err(usage("give exactly one of --data and --density")),
    };
    write_output(&args.output, &text)
}

#[derive(Serialize)]
struct SweepReport {
    axis: String,
    points: Vec<ThermoPoint>,
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.steps < 2 {
        return Err(usage(format!("--steps must be at least 2, got {}", args.steps)));
    }
    if !(args.from.is_finite() && args.to.is_finite()) {
        return Err(usage("sweep range must be finite"));
    }
    let (surface, env) = load(&args.model)?;
    let env = surface.complete_environment(&env);
    if env.get(&args.axis).is_none() {
        return Err(usage(format!(
            "sweep axis `{}` is not an environment variable; set it with --y or --X",
            args.axis
        )));
    }
    let points = linspace(args.from, args.to, args.steps)
        .into_iter()
        .map(|v| surface.thermo_point(&env.perturbed(&args.axis, v)?))
        .collect::<Result<Vec<_>>>()?;
    let text = match args.output.format {
        Format::Json => to_json(&SweepReport { axis: args.axis.clone(), points })?,
        Format::Csv => points_csv(&points)?,
    };
    write_output(&args.output, &text)
}
