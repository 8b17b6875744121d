use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use thermal_ballast::comfort::{classify, pmv, BuildingClass, ComfortInput};
use thermal_ballast::controller::{alpha_star, ControllerConfig, ForecastWindow};
use thermal_ballast::envelope::EnvelopeDefinition;
use thermal_ballast::exec::Execution;
use thermal_ballast::project::ProjectConfig;
use thermal_ballast::{pipeline, report};
use thermal_ballast::season::Mode;
use thermal_ballast::synthetic;
use thermal_ballast::thermal_model::{identify, IdentificationData};
use thermal_ballast::tuner::SweepSpec;

#[derive(Parser)]
#[command(name = "thermal-ballast", version, about = "Store PV surplus in building thermal mass")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a state-space surrogate to measured power.
    Identify(IdentifyArgs),
    /// Areal heat capacities and total thermal mass of an envelope.
    Envelope(EnvelopeArgs),
    /// Evaluate the controller on one forecast window.
    Decide(DecideArgs),
    /// Run a baseline or controlled simulation.
    Simulate(SimulateArgs),
    /// Sweep horizon, step and ω and pick the optimum.
    Tune(TuneArgs),
    /// Thermal comfort indices.
    Pmv(PmvArgs),
    /// Baseline and controlled runs with figure data and comfort check.
    Report(ProjectArgs),
    /// Write a self-contained synthetic project.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Heating,
    Cooling,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Heating => Mode::Heating,
            ModeArg::Cooling => Mode::Cooling,
        }
    }
}

#[derive(Args)]
struct IdentifyArgs {
    /// CSV with `timestamp,t_ref,n_occ,t_ext,power`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[arg(long)]
    definition: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecideArgs {
    /// JSON with `config` and `window` objects.
    #[arg(long)]
    window: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    /// Project configuration JSON.
    #[arg(long, alias = "scenario")]
    project: PathBuf,
    /// Overrides the project's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("run").required(true).args(["controlled", "baseline"])))]
struct SimulateArgs {
    #[command(flatten)]
    project: ProjectArgs,
    #[arg(long)]
    controlled: bool,
    #[arg(long)]
    baseline: bool,
    /// Also write one CSV per figure panel.
    #[arg(long)]
    figure_data: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    project: ProjectArgs,
    /// Sweep spec JSON; defaults to the project's `sweep` section.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    heatmap_data: bool,
}

#[derive(Args)]
struct PmvArgs {
    /// Air temperature, °C.
    #[arg(long, allow_negative_numbers = true)]
    ta: f64,
    /// Mean radiant temperature, °C. Defaults to the air temperature.
    #[arg(long, allow_negative_numbers = true)]
    tr: Option<f64>,
    /// Air speed, m/s.
    #[arg(long, default_value_t = 0.1)]
    v: f64,
    /// Relative humidity, %.
    #[arg(long, default_value_t = 50.0)]
    rh: f64,
    #[arg(long, default_value_t = 1.2)]
    met: f64,
    #[arg(long, default_value_t = 1.0)]
    clo: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// First local day, YYYY-MM-DD.
    #[arg(long, default_value = "2024-04-01")]
    start: String,
    #[arg(long, default_value_t = 30)]
    days: i64,
    /// Thermal capacity, kJ/K.
    #[arg(long, default_value_t = synthetic::C_TH_MEDIUM)]
    c_th: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Identify(a) => cmd_identify(a),
        Command::Envelope(a) => cmd_envelope(a),
        Command::Decide(a) => cmd_decide(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Pmv(a) => cmd_pmv(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn cmd_identify(a: IdentifyArgs) -> Result<()> {
    let data = IdentificationData::load(&a.data, a.mode.into())
        .with_context(|| format!("reading {}", a.data.display()))?;
    let (model, fit) = identify(&data, a.order, a.split)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{}", report::to_json(&fit)?);
    Ok(())
}

fn cmd_envelope(a: EnvelopeArgs) -> Result<()> {
    let summary = EnvelopeDefinition::load(&a.definition)?.summarize()?;
    if a.json {
        print!("{}", report::to_json(&summary)?);
        return Ok(());
    }
    println!("{:<24} {:>14} {:>10} {:>14}", "component", "kappa kJ/m2K", "area m2", "kappa*A kJ/K");
    for c in &summary.components {
        println!("{:<24} {:>14.3} {:>10.3} {:>14.3}", c.name, c.kappa, c.area, c.capacity);
    }
    println!("total C_m = {:.3} kJ/K (period {} s)", summary.total_capacity, summary.period_s);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecideInput {
    config: ControllerConfig,
    window: ForecastWindow,
}

fn cmd_decide(a: DecideArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.window).with_context(|| format!("reading {}", a.window.display()))?;
    let input: DecideInput = serde_json::from_str(&text).context("parsing decision window")?;
    input.config.validate()?;
    input.window.validate()?;
    if input.window.len() != input.config.horizon_steps {
        bail!(
            "window has {} steps but config.horizon_steps is {}",
            input.window.len(),
            input.config.horizon_steps
        );
    }
    print!("{}", report::to_json(&alpha_star(&input.config, &input.window))?);
    Ok(())
}

fn load(args: &ProjectArgs) -> Result<(ProjectConfig, PathBuf)> {
    let cfg = ProjectConfig::load(&args.project)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let (cfg, out) = load(&a.project)?;
    let (written, _) = pipeline::simulate(&cfg, &out, a.controlled, a.figure_data)?;
    print_written(&written);
    Ok(())
}

fn cmd_report(a: ProjectArgs) -> Result<()> {
    let (cfg, out) = load(&a)?;
    let (written, controlled) = pipeline::report(&cfg, &out, Execution::from_env())?;
    print_written(&written);
    let s = &controlled.summary;
    println!(
        "emissions {:.3} -> {:.3} kg ({:.2}% reduction), avg daily max |dT| {:.3} K",
        s.baseline_emissions_kg,
        s.controlled_emissions_kg.unwrap_or(s.baseline_emissions_kg),
        s.emissions_reduction_percent.unwrap_or(0.0),
        s.avg_daily_delta_t.unwrap_or(0.0),
    );
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let (cfg, out) = load(&a.project)?;
    let spec: SweepSpec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let spec: SweepSpec = serde_json::from_str(&text).context("parsing sweep spec")?;
            spec.validate()?;
            spec
        }
        None => cfg.sweep.clone(),
    };
    let result = pipeline::tune(&cfg, &spec, &out, a.heatmap_data, Execution::from_env())?;
    print_written(&result.written);
    match result.optimum {
        Ok(c) => println!(
            "optimum: m = {} h, ts = {} min, omega = {:e} ({:.2}% reduction, max daily |dT| {:.3} K)",
            c.horizon_h, c.step_min, c.omega, c.emissions_reduction_percent, c.max_daily_delta_t
        ),
        Err(e) => println!("no optimum: {e}"),
    }
    Ok(())
}

fn cmd_pmv(a: PmvArgs) -> Result<()> {
    let input = ComfortInput {
        air_temp: a.ta,
        mean_radiant_temp: a.tr.unwrap_or(a.ta),
        air_speed: a.v,
        relative_humidity: a.rh,
        metabolic_rate: a.met,
        clothing: a.clo,
    };
    let r = pmv(&input)?;
    println!("PMV {:.2}", r.pmv);
    println!("PPD {:.1} %", r.ppd);
    for (name, class) in [("existing", BuildingClass::Existing), ("new", BuildingClass::New)] {
        let verdict = if classify(&r, class) { "within" } else { "outside" };
        println!("{name} building: {verdict} |PMV| <= {}", class.pmv_bound());
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let first_day = chrono::NaiveDate::parse_from_str(&a.start, "%Y-%m-%d")
        .with_context(|| format!("`{}` is not a YYYY-MM-DD date", a.start))?;
    let path = synthetic::write_project(&a.out, first_day, a.days, a.c_th)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} ({} days from {first_day})", path.display(), a.days);
    Ok(())
}
