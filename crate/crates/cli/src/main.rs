use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lasi_cli::{embedding, format_value, load_image, load_manifest, report, save_image, CliError, Result};
use lasi_core::{
    fd_check, predict, run_mad, score_2afc, score_jnd, solve_embeddings, spearman, sweep_n, ChannelMode, ImageTensor,
    LasiConfig, MadConfig, MetricId, PixelMap, Wrt,
};

#[derive(Parser)]
#[command(name = "lasi", version, about = "Perceptual image similarity from per-pixel weighted least squares")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricName {
    Lasi,
    Mse,
    Psnr,
    Ssim,
    Msssim,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerChannel,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arg {
    First,
    Second,
}

#[derive(Args, Clone, Copy)]
struct LasiOpts {
    /// Neighborhood size.
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Weight decay per unit of Manhattan distance.
    #[arg(long, default_value_t = 0.8)]
    omega: f64,
    #[arg(long, value_enum, default_value_t = Mode::PerChannel)]
    mode: Mode,
}

impl LasiOpts {
    fn config(&self) -> LasiConfig {
        let channel_mode = match self.mode {
            Mode::PerChannel => ChannelMode::PerChannel,
            Mode::Joint => ChannelMode::Joint,
        };
        LasiConfig { n: self.n, omega: self.omega, channel_mode, ..LasiConfig::default() }
    }

    fn metric(&self, name: MetricName) -> MetricId {
        match name {
            MetricName::Lasi => MetricId::Lasi(self.config()),
            MetricName::Mse => MetricId::Mse,
            MetricName::Psnr => MetricId::Psnr,
            MetricName::Ssim => MetricId::Ssim,
            MetricName::Msssim => MetricId::MsSsim,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the metric between two images (PSNR in dB, SSIM and MS-SSIM as
    /// similarity indices, LASI and MSE as distances).
    Compare {
        #[arg(long, value_enum, default_value_t = MetricName::Lasi)]
        metric: MetricName,
        #[command(flatten)]
        lasi: LasiOpts,
        img_a: PathBuf,
        img_b: PathBuf,
    },
    /// Write the embedding matrix of an image.
    Embed {
        #[command(flatten)]
        lasi: LasiOpts,
        img: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the autoregressive prediction and squared residuals; print the
    /// prediction MSE.
    Residual {
        #[command(flatten)]
        lasi: LasiOpts,
        img: PathBuf,
        /// Output prefix: PREFIX_pred, PREFIX_residual (scaled to its maximum)
        /// and PREFIX_residual.csv.
        #[arg(long)]
        out: PathBuf,
        /// Leave the first row and column out of the printed MSE.
        #[arg(long)]
        exclude_seed: bool,
    },
    /// Score a metric on a 2-AFC manifest.
    #[command(name = "eval-2afc")]
    Eval2afc {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricName::Lasi)]
        metric: MetricName,
        #[command(flatten)]
        lasi: LasiOpts,
        /// Per-example decisions.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Score a metric on a JND manifest (mean average precision).
    #[command(name = "eval-jnd")]
    EvalJnd {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricName::Lasi)]
        metric: MetricName,
        #[command(flatten)]
        lasi: LasiOpts,
        /// Precision-recall curve.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Maximum differentiation competition against a reference image.
    Mad {
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricName::Lasi)]
        fixed: MetricName,
        #[arg(long, value_enum, default_value_t = MetricName::Mse)]
        moving: MetricName,
        #[command(flatten)]
        lasi: LasiOpts,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Logit-space RMS size of one projected step.
        #[arg(long, default_value_t = 1e-2)]
        step_size: f64,
        /// Standard deviation of the logit-space corruption.
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        /// Relative tolerance of the level-set correction.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prediction error and LASI 2-AFC score for several neighborhood sizes.
    Sweep {
        manifest: PathBuf,
        /// Comma-separated ascending sizes.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,12")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.8)]
        omega: f64,
        #[arg(long, value_enum, default_value_t = Mode::PerChannel)]
        mode: Mode,
        /// Also report the attained weighted training objective.
        #[arg(long)]
        train_loss: bool,
        /// Write the table here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare the analytic gradient with central finite differences.
    Gradcheck {
        #[arg(long, value_enum, default_value_t = MetricName::Lasi)]
        metric: MetricName,
        #[command(flatten)]
        lasi: LasiOpts,
        #[arg(long, value_enum, default_value_t = Arg::Second)]
        wrt: Arg,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        img_a: PathBuf,
        img_b: PathBuf,
    },
}

fn require_file(path: &Path) -> Result<()> {
    fs::metadata(path).map(|_| ()).map_err(|e| CliError::io(path, e))
}

fn print_value(v: f64) {
    println!("{}", format_value(v));
}

fn compare(metric: MetricId, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(match metric {
        MetricId::Psnr => lasi_core::psnr(a, b)?,
        MetricId::Ssim => lasi_core::ssim(a, b)?,
        MetricId::MsSsim => lasi_core::ms_ssim(a, b)?,
        m => m.distance(a, b)?,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn residual(img: &ImageTensor, cfg: &LasiConfig, out: &Path, exclude_seed: bool) -> Result<f64> {
    let pred = predict(img, &solve_embeddings(img, cfg)?, cfg)?;
    let ext = lasi_cli::pnm::extension(img.channels());
    save_image(&pred.predicted.to_image_clamped()?, &with_suffix(out, &format!("_pred.{ext}")))?;
    let peak = pred.residual.data.iter().copied().fold(0.0, f64::max);
    let scaled = PixelMap {
        dims: pred.residual.dims,
        data: pred.residual.data.iter().map(|z| if peak > 0.0 { z / peak } else { 0.0 }).collect(),
    };
    save_image(&scaled.to_image_clamped()?, &with_suffix(out, &format!("_residual.{ext}")))?;

    let csv_path = with_suffix(out, "_residual.csv");
    let mut text = String::from("row,col,channel,value,predicted,residual\n");
    let dims = img.dims();
    let mut kept = Vec::new();
    for (i, (z, p)) in pred.residual.data.iter().zip(&pred.predicted.data).enumerate() {
        let (r, c, ch) = dims.coords(i);
        text.push_str(&format!("{r},{c},{ch},{:e},{p:e},{z:e}\n", img.data()[i]));
        if !exclude_seed || (r > 0 && c > 0) {
            kept.push(*z);
        }
    }
    fs::write(&csv_path, text).map_err(|e| CliError::io(&csv_path, e))?;
    Ok(lasi_core::sum::mean(kept).unwrap_or(0.0))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compare { metric, lasi, img_a, img_b } => {
            let metric = lasi.metric(metric);
            metric.validate()?;
            require_file(&img_a)?;
            require_file(&img_b)?;
            let (a, b) = (load_image(&img_a)?, load_image(&img_b)?);
            print_value(compare(metric, &a, &b)?);
        }
        Command::Embed { lasi, img, out } => {
            let cfg = lasi.config();
            cfg.validate()?;
            let emb = solve_embeddings(&load_image(&img)?, &cfg)?;
            let bytes = embedding::encode(&emb).map_err(|e| CliError::Usage(e.to_string()))?;
            fs::write(&out, bytes).map_err(|e| CliError::io(&out, e))?;
        }
        Command::Residual { lasi, img, out, exclude_seed } => {
            let cfg = lasi.config();
            cfg.validate()?;
            print_value(residual(&load_image(&img)?, &cfg, &out, exclude_seed)?);
        }
        Command::Eval2afc { manifest, metric, lasi, csv } => {
            let metric = lasi.metric(metric);
            metric.validate()?;
            let examples = load_manifest(&manifest)?.two_afc_examples(&manifest)?;
            let res = score_2afc(&examples, &metric)?;
            if let Some(path) = csv {
                report::write_2afc(&path, &res)?;
            }
            eprintln!(
                "{} examples; majority bound {}; human level {}",
                examples.len(),
                format_value(res.majority_bound),
                format_value(res.human_level)
            );
            print_value(res.score);
        }
        Command::EvalJnd { manifest, metric, lasi, csv } => {
            let metric = lasi.metric(metric);
            metric.validate()?;
            let examples = load_manifest(&manifest)?.jnd_examples(&manifest)?;
            let res = score_jnd(&examples, &metric)?;
            if let Some(path) = csv {
                report::write_pr_curve(&path, &res)?;
            }
            print_value(res.map_score);
        }
        Command::Mad { reference, fixed, moving, lasi, steps, step_size, sigma, tol, seed, out } => {
            let cfg = MadConfig {
                steps,
                step_size,
                noise_sigma: sigma,
                correction_tol: tol,
                seed,
                ..MadConfig::new(lasi.metric(fixed), lasi.metric(moving))
            };
            cfg.validate()?;
            let traj = run_mad(&load_image(&reference)?, &cfg)?;
            report::write_mad(&out, &traj)?;
            let last = |v: &[lasi_core::mad::StepValues]| v.last().map_or(f64::NAN, |s| s.d_moving);
            eprintln!("max fixed-metric drift {}", format_value(traj.max_fixed_drift()));
            println!("{} {}", format_value(last(&traj.max_values)), format_value(last(&traj.min_values)));
        }
        Command::Sweep { manifest, n_list, omega, mode, train_loss, csv } => {
            let template = LasiOpts { n: 1, omega, mode }.config();
            template.validate()?;
            let examples = load_manifest(&manifest)?.two_afc_examples(&manifest)?;
            let rows = sweep_n(&examples, &n_list, &template)?;
            match csv {
                Some(path) => report::write_sweep(fs::File::create(&path).map_err(|e| CliError::io(&path, e))?, &path, &rows, train_loss)?,
                None => report::write_sweep(io::stdout().lock(), Path::new("<stdout>"), &rows, train_loss)?,
            }
            if rows.len() > 1 {
                let neg_mse: Vec<f64> = rows.iter().map(|r| -r.prediction_mse).collect();
                let score: Vec<f64> = rows.iter().map(|r| r.afc_score).collect();
                eprintln!("spearman(-prediction_mse, afc_score) = {}", format_value(spearman(&neg_mse, &score)));
            }
        }
        Command::Gradcheck { metric, lasi, wrt, step, img_a, img_b } => {
            let metric = lasi.metric(metric);
            metric.validate()?;
            let (a, b) = (load_image(&img_a)?, load_image(&img_b)?);
            let wrt = match wrt {
                Arg::First => Wrt::First,
                Arg::Second => Wrt::Second,
            };
            let rep = fd_check(&metric, &a, &b, wrt, step)?;
            println!("max_rel_err {:.8e}", rep.max_rel_err);
            println!("max_abs_err {:.8e}", rep.max_abs_err);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
