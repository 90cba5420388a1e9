//! Command-line surface tying the pipeline together.

use crate::acquisition::{simulate_acquisition, AcquisitionSpec};
use crate::error::Error;
use crate::inference::{super_resolve, Provenance};
use crate::io::{load_labels, load_volume, save_volume};
use crate::manifest::{ProfileSource, RunManifest};
use crate::metrics::{cdsc, format_report, psnr, ssim};
use crate::profile::{load_profile, make_profile, profile_shape, save_profile, SliceProfile};
use crate::trainer::{train, TrainConfig};
use crate::Result;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "tpsr", version, about = "Through-plane self-super-resolution for anisotropic multi-slice volumes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train on the input volume's own in-plane content and
    /// super-resolve its through-plane axis.
    Run(RunArgs),
    /// Simulate a 2D multi-slice acquisition from an HR volume.
    Simulate(SimulateArgs),
    /// Write a parametric slice profile file.
    MakeProfile(MakeProfileArgs),
    /// Compute reference-based metrics between two volumes.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Slice thickness in mm (profile FWHM); defaults to the slice
    /// separation from the file metadata, assuming no gap.
    #[arg(long)]
    pub thickness: Option<f64>,
    /// Slice gap in mm.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Through-plane axis (0..2); inferred from spacing when omitted.
    #[arg(long)]
    pub axis: Option<usize>,
    /// Slice profile file; overrides the parametric default.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Total training patches.
    #[arg(long)]
    pub patches: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Thickness and gap in mm as `TxG`, e.g. `4x1.2` or `5x1.5`.
    #[arg(long)]
    pub tg: String,
    #[arg(long, default_value_t = 2)]
    pub axis: usize,
}

#[derive(Args)]
pub struct MakeProfileArgs {
    /// Profile shape (gaussian or rect).
    #[arg(long)]
    pub shape: String,
    #[arg(long)]
    pub fwhm: f64,
    #[arg(long, default_value_t = 21)]
    pub taps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels_gt: Option<PathBuf>,
    #[arg(long)]
    pub labels_pred: Option<PathBuf>,
    /// Comma-separated subset of psnr,ssim.
    #[arg(long, default_value = "psnr,ssim")]
    pub metrics: String,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Exit code mapping: ambiguous axis 2, non-finite training 3,
/// any other error 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AmbiguousAxis => 2,
        Error::NonFiniteLoss { .. } => 3,
        _ => 1,
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::MakeProfile(args) => cmd_make_profile(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn resolve_profile(
    args: &RunArgs,
    thickness: f64,
    hr_spacing: f64,
) -> Result<(SliceProfile, ProfileSource)> {
    if let Some(path) = &args.profile {
        let p = load_profile(path)?;
        return Ok((p, ProfileSource::File(path.display().to_string())));
    }
    let p = make_profile(profile_shape("gaussian").unwrap(), thickness, 21, hr_spacing)?;
    Ok((
        p,
        ProfileSource::Parametric {
            shape: "gaussian".into(),
            fwhm_mm: thickness,
            taps: 21,
        },
    ))
}

pub fn cmd_run(args: RunArgs) -> Result<()> {
    let start = std::time::Instant::now();
    let mut volume = load_volume(&args.input)?;
    if let Some(axis) = args.axis {
        if axis > 2 {
            return Err(Error::InvalidAxis { axis });
        }
        volume.through_axis = Some(axis);
    }
    let axis = volume.through_axis_or_err()?;
    let in_plane = volume.in_plane_axes()?;
    let hr_spacing = volume.spacing[in_plane[0]];
    let separation = volume.spacing[axis];

    let thickness = match args.thickness {
        Some(t) => t,
        None => {
            log::warn!(
                "no --thickness given; assuming thickness = slice separation ({separation} mm) with no gap"
            );
            separation
        }
    };
    if let Some(gap) = args.gap {
        let stated = thickness + gap;
        if (stated - separation).abs() > 1e-3 {
            log::warn!(
                "thickness + gap = {stated} mm disagrees with the metadata slice separation {separation} mm; using the metadata separation"
            );
        }
    }
    let spec = AcquisitionSpec::from_separation(separation, thickness, hr_spacing)?;
    let (profile, profile_source) = resolve_profile(&args, thickness, hr_spacing)?;

    volume.normalize();

    let mut cfg = TrainConfig::for_ratio(spec.ratio);
    cfg.seed = args.seed;
    if let Some(p) = args.patches {
        cfg.total_patches = p;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(c) = args.channels {
        cfg.channels = c;
    }
    if let Some(b) = args.blocks {
        cfg.blocks = b;
    }

    let (net, records) = train(&volume, &spec, &profile, &cfg)?;

    let log_path = sibling_path(&args.output, ".train.log");
    let mut log_file = std::fs::File::create(&log_path)?;
    for r in &records {
        writeln!(log_file, "{}", r.log_line())?;
    }

    let provenance = Provenance {
        spec,
        profile: match &profile_source {
            ProfileSource::File(p) => p.clone(),
            ProfileSource::Parametric { shape, .. } => shape.clone(),
        },
        network: net.config,
        seed: args.seed,
    };
    let out = super_resolve(&volume, &net, &spec, provenance)?;
    let mut sr = out.volume;
    sr.denormalize();
    save_volume(&sr, &args.output)?;

    let manifest = RunManifest {
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        spec,
        through_axis: axis,
        profile: profile_source,
        train: cfg,
        seed: args.seed,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        parameter_bytes: net.param_count() * std::mem::size_of::<f32>(),
    };
    manifest.save(&sibling_path(&args.output, ".manifest.json"))?;
    Ok(())
}

/// `out.nii.gz` -> `out.nii.gz<suffix>` next to the output.
fn sibling_path(output: &Path, suffix: &str) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_tg(tg: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = tg.split('x').collect();
    let err = || Error::InvalidSpec(format!("--tg must be of the form TxG (e.g. 4x1.2), got '{tg}'"));
    if parts.len() != 2 {
        return Err(err());
    }
    let t: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let g: f64 = parts[1].trim().parse().map_err(|_| err())?;
    Ok((t, g))
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (thickness, gap) = parse_tg(&args.tg)?;
    let hr = load_volume(&args.input)?;
    let lr = simulate_acquisition(&hr, thickness, gap, args.axis)?;
    save_volume(&lr, &args.output)?;
    Ok(())
}

pub fn cmd_make_profile(args: MakeProfileArgs) -> Result<()> {
    let shape = profile_shape(&args.shape).ok_or_else(|| {
        Error::InvalidProfile(format!(
            "unknown shape '{}' (known: {})",
            args.shape,
            crate::profile::shape_registry()
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let profile = make_profile(shape, args.fwhm, args.taps, args.spacing)?;
    save_profile(&profile, &args.out)?;
    Ok(())
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let want: Vec<&str> = args.metrics.split(',').map(|s| s.trim()).collect();
    for m in &want {
        if !["psnr", "ssim"].contains(m) {
            return Err(Error::InvalidSpec(format!("unknown metric '{m}'")));
        }
    }
    if args.labels_gt.is_some() != args.labels_pred.is_some() {
        return Err(Error::InvalidSpec(
            "--labels-gt and --labels-pred must be given together".into(),
        ));
    }
    let gt = load_volume(&args.gt)?;
    let pred = load_volume(&args.pred)?;
    let psnr_val = want
        .contains(&"psnr")
        .then(|| psnr(&gt, &pred))
        .transpose()?;
    let ssim_val = want
        .contains(&"ssim")
        .then(|| ssim(&gt, &pred))
        .transpose()?;
    let cdsc_val = match (&args.labels_gt, &args.labels_pred) {
        (Some(lg), Some(lp)) => Some(cdsc(&load_labels(lg)?, &load_labels(lp)?)?),
        _ => None,
    };
    let report = format_report(psnr_val, ssim_val, cdsc_val.as_ref());
    match &args.report {
        Some(path) => std::fs::write(path, report)?,
        None => print!("{report}"),
    }
    Ok(())
}
