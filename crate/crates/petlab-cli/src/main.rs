use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use petlab_cli::{
    emit_report, parse_bindings, parse_characters, parse_family, parse_index_list, parse_jobspec, parse_schedule,
    parse_system, run, validate, Command, Format, JobOptions, JobSpec, Theorem,
};

/// PET induction, characteristic factors and joint-ergodicity checks for
/// polynomial multiple ergodic averages.
#[derive(Debug, Parser)]
#[command(name = "petlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FamilyArg {
    /// Family file: {"L":…, "d":…, "polys":[…]}.
    #[arg(long)]
    family: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// vdC traces down to linear iterates.
    Pet {
        #[command(flatten)]
        family: FamilyArg,
        /// Target function (1-based); all targets when omitted.
        #[arg(long)]
        target: Option<usize>,
        /// Explicit ρ sequence, e.g. 2,3,2.
        #[arg(long)]
        manual_rho: Option<String>,
        #[arg(long)]
        step_cap: Option<usize>,
        /// Largest number of iterates a PET tuple may reach.
        #[arg(long)]
        size_cap: Option<usize>,
    },
    /// Linear stage, H lattices, descriptors, R and the certificate.
    Factors {
        #[command(flatten)]
        family: FamilyArg,
        /// Target for --manual-rho.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        manual_rho: Option<String>,
        #[arg(long)]
        size_cap: Option<usize>,
    },
    /// Decide the joint-ergodicity conditions on a rotation system.
    Check {
        #[command(flatten)]
        family: FamilyArg,
        /// Rotation system file: torus and action dimensions, irrationals, α.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, value_enum)]
        theorem: Theorem,
    },
    /// Convergence series of multiple averages for character observables.
    Simulate {
        #[command(flatten)]
        family: FamilyArg,
        /// Rotation system file: torus and action dimensions, irrationals, α.
        #[arg(long)]
        system: PathBuf,
        /// Irrational values, e.g. xi1=sqrt2,xi2=sqrt3.
        #[arg(long)]
        bind: Option<String>,
        /// Box sizes N, e.g. 1e4,1e5,2e5.
        #[arg(long)]
        schedule: Option<String>,
        /// Boxes are [M, M+N).
        #[arg(long, allow_hyphen_values = true)]
        box_start: Option<i64>,
        /// Monte-Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Monte-Carlo sample points.
        #[arg(long)]
        samples: Option<usize>,
        /// Characters: `1;1` (per function, `;`), tuples separated by `|`.
        #[arg(long)]
        characters: Option<String>,
        /// Also write the CSV series here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a JSON job specification.
    Job {
        spec: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build_spec(cli: &Cli) -> Result<JobSpec> {
    let family_of = |f: &FamilyArg| -> Result<_> { parse_family(&read(&f.family)?) };
    let mut options = JobOptions { output: cli.output.as_ref().map(|p| p.display().to_string()), ..Default::default() };
    let spec = match &cli.command {
        Sub::Job { spec } => {
            let mut s = parse_jobspec(&read(spec)?)?;
            if options.output.is_some() {
                s.options.output = options.output;
            }
            return Ok(s);
        }
        Sub::Pet { family, target, manual_rho, step_cap, size_cap } => {
            options.target = *target;
            options.manual_rho = manual_rho.as_deref().map(parse_index_list).transpose()?;
            options.step_cap = *step_cap;
            options.size_cap = *size_cap;
            JobSpec { command: Command::Pet, family: family_of(family)?, system: None, options }
        }
        Sub::Factors { family, target, manual_rho, size_cap } => {
            options.target = *target;
            options.size_cap = *size_cap;
            options.manual_rho = manual_rho.as_deref().map(parse_index_list).transpose()?;
            JobSpec { command: Command::Factors, family: family_of(family)?, system: None, options }
        }
        Sub::Check { family, system, theorem } => {
            options.theorem = Some(*theorem);
            let system = Some(parse_system(&read(system)?)?);
            JobSpec { command: Command::Check, family: family_of(family)?, system, options }
        }
        Sub::Simulate { family, system, bind, schedule, box_start, seed, samples, characters, csv } => {
            options.bind = bind.as_deref().map(parse_bindings).transpose()?.unwrap_or_default();
            options.schedule = schedule.as_deref().map(parse_schedule).transpose()?;
            options.box_start = *box_start;
            options.seed = *seed;
            options.samples = *samples;
            options.characters = characters.as_deref().map(parse_characters).transpose()?;
            options.csv = csv.as_ref().map(|p| p.display().to_string());
            let system = Some(parse_system(&read(system)?)?);
            JobSpec { command: Command::Simulate, family: family_of(family)?, system, options }
        }
    };
    validate(&spec)?;
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<i32> {
    let spec = build_spec(cli)?;
    let report = run(&spec)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let bytes = emit_report(&report, cli.format);
    match &spec.options.output {
        Some(path) => fs::write(path, &bytes).with_context(|| format!("writing {path}"))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    if let (Some(path), Some(csv)) = (&spec.options.csv, &report.csv) {
        fs::write(path, csv).with_context(|| format!("writing {path}"))?;
    }
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
