//! Command-line front end. `main.rs` only forwards `std::env::args` to [`run`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::eigen::EigenOptions;
use crate::ep::{encircle_with, find_branch_point_with, list_branch_points_with, EpOptions, Region};
use crate::error::Error;
use crate::family::{family_to_config, parse_family, FamilySpec};
use crate::io::{self, fmt_f64, RunManifest};
use crate::sweep::{
    detect_avoided_crossings, mixing_region_width, overlap_onset_with, sweep_with, OnsetOptions, SweepOptions,
    DEFAULT_MIXING_THRESHOLD,
};
use crate::tolerances::Tolerances;

pub const TOLERANCE_SCALE_VAR: &str = "BP_TOLERANCE_SCALE";

#[derive(Debug, Parser)]
#[command(name = "epkit", version, about = "Avoided crossings and branch points of complex symmetric matrix families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file, or the name of a bundled preset (e.g. two_level_v005)
    #[arg(long)]
    pub config: String,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Replace the coupling by a uniform real coupling v
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// Override one tolerance, e.g. --tol root_step=1e-13 (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Track eigenvalues and mixing coefficients over a real parameter interval
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Bisect wherever mixing coefficients change quickly
        #[arg(long)]
        adaptive: bool,
        /// Also write energies.svg and mixing.svg
        #[arg(long)]
        svg: bool,
    },
    /// Locate one branch point from a complex seed
    FindEp {
        #[command(flatten)]
        common: Common,
        /// Seed as re,im
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        seed: Complex64,
        /// Relative step size at which the root search stops
        #[arg(long, default_value_t = 1e-14)]
        step_tol: f64,
        /// Certify with a loop of this radius; exit code 4 if it does not swap the pair
        #[arg(long)]
        certify_radius: Option<f64>,
    },
    /// Scan a rectangle of the complex plane for branch points
    ListEps {
        #[command(flatten)]
        common: Common,
        /// re_min,re_max,im_min,im_max
        #[arg(long, allow_hyphen_values = true, value_parser = parse_region)]
        region: Region,
        /// Seeds per side
        #[arg(long, default_value_t = 8)]
        grid: usize,
    },
    /// Follow the eigenvalues once around a circle and report the permutation
    Encircle {
        #[command(flatten)]
        common: Common,
        /// Centre as re,im
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        center: Complex64,
        #[arg(long, default_value_t = 0.02)]
        radius: f64,
        #[arg(long, default_value_t = 256)]
        steps: usize,
    },
    /// Smallest uniform coupling at which neighbouring mixing regions meet
    OverlapOnset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        v_min: f64,
        #[arg(long)]
        v_max: f64,
        /// Number of coupling values, endpoints included
        #[arg(long)]
        v_steps: usize,
        #[arg(long, default_value_t = DEFAULT_MIXING_THRESHOLD)]
        threshold: f64,
        /// Grid steps of each sweep
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Sweep window lo,hi (default: around the two-level crossings)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
        window: Option<(f64, f64)>,
    },
    /// Avoided crossings of a sweep with the widths of their mixing regions
    Mixing {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        adaptive: bool,
        #[arg(long, default_value_t = DEFAULT_MIXING_THRESHOLD)]
        threshold: f64,
    },
    /// Rerun the command recorded in a manifest with its echoed config and tolerances
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (default: the one recorded in the manifest)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sweep { .. } => "sweep",
            Command::FindEp { .. } => "find-ep",
            Command::ListEps { .. } => "list-eps",
            Command::Encircle { .. } => "encircle",
            Command::OverlapOnset { .. } => "overlap-onset",
            Command::Mixing { .. } => "mixing",
            Command::Replay { .. } => "replay",
        }
    }

    fn common(&self) -> Option<&Common> {
        match self {
            Command::Sweep { common, .. }
            | Command::FindEp { common, .. }
            | Command::ListEps { common, .. }
            | Command::Encircle { common, .. }
            | Command::OverlapOnset { common, .. }
            | Command::Mixing { common, .. } => Some(common),
            Command::Replay { .. } => None,
        }
    }

    fn common_mut(&mut self) -> Option<&mut Common> {
        match self {
            Command::Sweep { common, .. }
            | Command::FindEp { common, .. }
            | Command::ListEps { common, .. }
            | Command::Encircle { common, .. }
            | Command::OverlapOnset { common, .. }
            | Command::Mixing { common, .. } => Some(common),
            Command::Replay { .. } => None,
        }
    }
}

fn parse_floats(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|p| match p.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(x) => Err(format!("non-finite value {x}")),
            Err(e) => Err(format!("{:?}: {e}", p.trim())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != count {
        return Err(format!("expected {count} comma-separated numbers, got {s:?}"));
    }
    Ok(values)
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let v = parse_floats(s, 2)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_region(s: &str) -> Result<Region, String> {
    let v = parse_floats(s, 4)?;
    if !(v[0] < v[1] && v[2] < v[3]) {
        return Err(format!("empty region {s:?}"));
    }
    Ok(Region::new(v[0], v[1], v[2], v[3]))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Certification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => CliError::Config(c.to_string()),
            Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Numerical(other),
        }
    }
}

/// Files written and lines printed by a command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub stdout: String,
    /// Set when the run completed but a certification check did not hold.
    pub certification_failure: Option<String>,
}

/// Parses `args` (without the program name), runs the command and writes its
/// outputs. Returns the text meant for stdout.
pub fn run<I, S>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once("epkit".to_string()).chain(args.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => return Ok(e.to_string()),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    match cli.command {
        Command::Replay { manifest, out } => replay(&manifest, out),
        command => {
            let common = command.common().expect("not a replay").clone();
            let spec = resolve_config(&common.config)?;
            let spec = match common.v {
                Some(v) => spec.with_uniform_coupling(Complex64::new(v, 0.0)),
                None => spec,
            };
            let scale = tolerance_scale_from_env()?;
            let (tolerances, overrides) = resolve_tolerances(scale, &common.tol)?;
            execute(&command, &args, &spec, scale, tolerances, overrides)
        }
    }
}

fn replay(path: &Path, out: Option<PathBuf>) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let manifest = RunManifest::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let spec = parse_family(&manifest.config).map_err(|e| CliError::Config(format!("manifest config: {e}")))?;
    let cli = Cli::try_parse_from(std::iter::once("epkit".to_string()).chain(manifest.args.iter().cloned()))
        .map_err(|e| CliError::Config(format!("manifest args: {e}")))?;
    let mut command = cli.command;
    let mut args = manifest.args.clone();
    if let Some(out) = out {
        let common = command
            .common_mut()
            .ok_or_else(|| CliError::Config("manifest records a replay".into()))?;
        common.out = out.clone();
        // keep the recorded arguments consistent with where the files go
        args.push("--out".into());
        args.push(out.display().to_string());
    }
    if command.common().is_none() {
        return Err(CliError::Config("manifest records a replay".into()));
    }
    execute(
        &command,
        &args,
        &spec,
        manifest.tolerance_scale,
        manifest.tolerances,
        manifest.tolerance_overrides,
    )
}

fn resolve_config(source: &str) -> Result<FamilySpec, CliError> {
    let path = Path::new(source);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{source}: {e}")))?
    } else if let Some(text) = io::preset(source) {
        text.to_string()
    } else {
        return Err(CliError::Config(format!("{source:?} is neither a file nor a preset")));
    };
    parse_family(&text).map_err(|e| CliError::Config(format!("{source}: {e}")))
}

fn tolerance_scale_from_env() -> Result<f64, CliError> {
    match std::env::var(TOLERANCE_SCALE_VAR) {
        Err(_) => Ok(1.0),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
            _ => Err(CliError::Config(format!("{TOLERANCE_SCALE_VAR} must be a positive number, got {s:?}"))),
        },
    }
}

fn resolve_tolerances(scale: f64, overrides: &[String]) -> Result<(Tolerances, BTreeMap<String, f64>), CliError> {
    let mut tol = Tolerances::scaled(scale);
    let mut map = BTreeMap::new();
    for item in overrides {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--tol expects NAME=VALUE, got {item:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("--tol {item}: {e}")))?;
        tol.set(name.trim(), value).map_err(CliError::Usage)?;
        map.insert(name.trim().to_string(), value);
    }
    Ok((tol, map))
}

fn execute(
    command: &Command,
    args: &[String],
    spec: &FamilySpec,
    scale: f64,
    tolerances: Tolerances,
    overrides: BTreeMap<String, f64>,
) -> Result<String, CliError> {
    let common = command.common().expect("not a replay");
    let eigen = EigenOptions {
        tolerances,
        ..EigenOptions::default()
    };
    let outcome = dispatch(command, spec, &eigen)?;

    let out_dir = &common.out;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut output_paths = Vec::new();
    for (name, contents) in &outcome.files {
        write_file(&out_dir.join(name), contents)?;
        output_paths.push(name.clone());
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config_path: common.config.clone(),
        args: args.to_vec(),
        output_paths,
        tolerance_scale: scale,
        tolerance_overrides: overrides,
        tolerances,
        config: family_to_config(spec),
    };
    write_file(&out_dir.join("manifest.toml"), &manifest.to_toml())?;

    match outcome.certification_failure {
        Some(msg) => Err(CliError::Certification(msg)),
        None => Ok(outcome.stdout),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn dispatch(command: &Command, spec: &FamilySpec, eigen: &EigenOptions) -> Result<Outcome, CliError> {
    let sweep_opts = SweepOptions {
        eigen: *eigen,
        ..SweepOptions::default()
    };
    let ep_opts = EpOptions {
        eigen: *eigen,
        ..EpOptions::default()
    };
    let mut outcome = Outcome::default();
    match command {
        Command::Sweep {
            from,
            to,
            steps,
            adaptive,
            svg,
            ..
        } => {
            check_interval(*from, *to, *steps)?;
            let records = sweep_with(spec, *from, *to, *steps, *adaptive, &sweep_opts)?;
            let events = detect_avoided_crossings(&records)
                .into_iter()
                .map(|e| mixing_region_width(&records, &e, DEFAULT_MIXING_THRESHOLD).map(|r| (e, r)))
                .collect::<Result<Vec<_>, _>>()?;
            outcome.files.push(("sweep.csv".into(), io::sweep_csv(&records, spec.is_hermitian_regime())));
            outcome.files.push(("crossings.csv".into(), io::events_csv(&events)));
            if *svg {
                outcome.files.push(("energies.svg".into(), io::energies_chart(&records)));
                outcome.files.push(("mixing.svg".into(), io::mixing_chart(&records)));
            }
            let _ = writeln!(outcome.stdout, "records,{}", records.len());
            for (e, _) in &events {
                let _ = writeln!(
                    outcome.stdout,
                    "{},{},{},{}",
                    if e.exchanged { "avoided" } else { "crossing" },
                    fmt_f64(e.a_min),
                    e.pair.0 + 1,
                    e.pair.1 + 1
                );
            }
        }
        Command::Mixing {
            from,
            to,
            steps,
            adaptive,
            threshold,
            ..
        } => {
            check_interval(*from, *to, *steps)?;
            let records = sweep_with(spec, *from, *to, *steps, *adaptive, &sweep_opts)?;
            let events = detect_avoided_crossings(&records)
                .into_iter()
                .map(|e| mixing_region_width(&records, &e, *threshold).map(|r| (e, r)))
                .collect::<Result<Vec<_>, _>>()?;
            let csv = io::events_csv(&events);
            outcome.stdout.push_str(&csv);
            outcome.files.push(("mixing.csv".into(), csv));
        }
        Command::FindEp {
            seed,
            step_tol,
            certify_radius,
            ..
        } => {
            let bp = find_branch_point_with(spec, *seed, *step_tol, &ep_opts)?;
            let mut csv = String::from(
                "a_re,a_im,value_re,value_im,state_1,state_2,disc_residual,scale,coalescence,iterations\n",
            );
            let [are, aim] = io::fmt_complex_pair(bp.a_bp);
            let [vre, vim] = io::fmt_complex_pair(bp.value_bp);
            let _ = writeln!(
                csv,
                "{are},{aim},{vre},{vim},{},{},{},{},{},{}",
                bp.pair.0 + 1,
                bp.pair.1 + 1,
                fmt_f64(bp.disc_residual),
                fmt_f64(bp.scale),
                fmt_f64(bp.coalescence),
                bp.history.len() - 1
            );
            if let Some(radius) = certify_radius {
                let m = encircle_with(spec, bp.a_bp, *radius, ep_opts.loop_steps, &ep_opts)?;
                if m.transposition() != Some(bp.pair) {
                    outcome.certification_failure = Some(format!(
                        "loop of radius {radius} around {} gave permutation {}",
                        bp.a_bp,
                        io::fmt_permutation(&m.permutation)
                    ));
                }
                outcome.files.push(("encircle.csv".into(), monodromy_csv(&m)));
            }
            outcome.stdout.push_str(&csv);
            outcome.files.push(("find_ep.csv".into(), csv));
        }
        Command::ListEps { region, grid, .. } => {
            let scan = list_branch_points_with(spec, *region, *grid, &ep_opts)?;
            let mut csv = String::from(
                "a_re,a_im,value_re,value_im,state_1,state_2,disc_residual,loop_radius,permutation,certified\n",
            );
            for p in &scan.points {
                let bp = &p.point;
                let [are, aim] = io::fmt_complex_pair(bp.a_bp);
                let [vre, vim] = io::fmt_complex_pair(bp.value_bp);
                let (radius, perm) = match &p.monodromy {
                    Some(m) => (fmt_f64(m.loop_radius), io::fmt_permutation(&m.permutation)),
                    None => (String::new(), String::new()),
                };
                let _ = writeln!(
                    csv,
                    "{are},{aim},{vre},{vim},{},{},{},{radius},{perm},{}",
                    bp.pair.0 + 1,
                    bp.pair.1 + 1,
                    fmt_f64(bp.disc_residual),
                    p.certified
                );
            }
            if scan.decoupled {
                outcome.stdout.push_str("# decoupled family: degeneracies are the real unperturbed crossings\n");
            }
            let uncertified = scan.points.iter().filter(|p| !p.certified).count();
            if uncertified > 0 {
                outcome.certification_failure = Some(format!("{uncertified} branch point(s) not certified"));
            }
            outcome.stdout.push_str(&csv);
            outcome.files.push(("eps.csv".into(), csv));
        }
        Command::Encircle {
            center, radius, steps, ..
        } => {
            let m = encircle_with(spec, *center, *radius, *steps, &ep_opts)?;
            let csv = monodromy_csv(&m);
            outcome.stdout.push_str(&csv);
            outcome.files.push(("encircle.csv".into(), csv));
        }
        Command::OverlapOnset {
            v_min,
            v_max,
            v_steps,
            threshold,
            steps,
            window,
            ..
        } => {
            if *v_steps < 2 || !(v_min < v_max) {
                return Err(CliError::Usage("need --v-min < --v-max and --v-steps >= 2".into()));
            }
            let vs: Vec<f64> = (0..*v_steps)
                .map(|k| {
                    if k + 1 == *v_steps {
                        *v_max
                    } else {
                        v_min + (v_max - v_min) * k as f64 / (*v_steps - 1) as f64
                    }
                })
                .collect();
            let opts = OnsetOptions {
                window: *window,
                steps: *steps,
                sweep: sweep_opts,
            };
            let result = overlap_onset_with(spec, &vs, *threshold, &opts)?;
            let mut samples = String::from("v,overlap,events\n");
            for s in &result.samples {
                let _ = writeln!(samples, "{},{},{}", fmt_f64(s.v), fmt_f64(s.overlap), s.regions.len());
            }
            let onset = result.onset.map_or_else(|| "none".to_string(), fmt_f64);
            let summary = format!(
                "key,value\nonset,{onset}\nthreshold,{}\nwindow_lo,{}\nwindow_hi,{}\n",
                fmt_f64(*threshold),
                fmt_f64(result.window.0),
                fmt_f64(result.window.1)
            );
            outcome.stdout.push_str(&summary);
            outcome.files.push(("onset.csv".into(), summary));
            outcome.files.push(("overlap_samples.csv".into(), samples));
        }
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
    Ok(outcome)
}

fn check_interval(from: f64, to: f64, steps: usize) -> Result<(), CliError> {
    if !(from < to) {
        return Err(CliError::Usage(format!("--from ({from}) must be below --to ({to})")));
    }
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    Ok(())
}

fn monodromy_csv(m: &crate::ep::MonodromyResult) -> String {
    let [cre, cim] = io::fmt_complex_pair(m.loop_center);
    format!(
        "key,value\ncenter_re,{cre}\ncenter_im,{cim}\nradius,{}\nsteps,{}\npermutation,{}\nmin_confidence,{}\nmax_tracking_gap,{}\n",
        fmt_f64(m.loop_radius),
        m.steps,
        io::fmt_permutation(&m.permutation),
        fmt_f64(m.min_confidence),
        fmt_f64(m.max_tracking_gap)
    )
}
