use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fve_core::dualscheme::preset_names;
use fve_core::harness::{
    compare_reference, init_thread_pool, render, run_study, Format, Kind, ReferenceTable,
    StudyConfig,
};
use fve_core::FveError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Fve,
    Fem,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Json,
}

/// Convergence studies for bi-k-order finite volume element schemes.
///
/// Thread count follows FVE_THREADS (0 or unset = all cores).
#[derive(Debug, Parser)]
#[command(name = "fve-study", version)]
struct Args {
    /// JSON study configuration; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// BVP-D, BVP-DR, BVP-DQR or BENCHMARK.
    #[arg(long)]
    problem: Option<String>,
    /// Preset (e.g. FVE-3-3), FE-k, or a scheme JSON file.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Comma-separated N values for N x N meshes.
    #[arg(long, value_delimiter = ',')]
    mesh_sizes: Option<Vec<usize>>,
    /// Node perturbation fraction, below 0.5.
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: h1x-super, l2-super, h1x-ultra, l2, h1.
    #[arg(long, value_delimiter = ',')]
    norms: Option<Vec<String>>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare against the embedded published tables; exit 1 on mismatch.
    #[arg(long)]
    check_reference: bool,
    /// Allowed multiplicative deviation of error values.
    #[arg(long)]
    tolerance_factor: Option<f64>,
    /// Allowed absolute deviation of orders.
    #[arg(long)]
    order_tolerance: Option<f64>,
    /// Print the preset names and exit.
    #[arg(long)]
    list_presets: bool,
}

fn build_config(args: &Args) -> Result<StudyConfig, FveError> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::read(path)?,
        None => {
            let missing = |flag: &str| FveError::InvalidArgument(format!("--{flag} is required without --config"));
            StudyConfig::new(
                args.problem.as_deref().ok_or_else(|| missing("problem"))?,
                args.scheme.as_deref().ok_or_else(|| missing("scheme"))?,
                args.mesh_sizes.as_deref().ok_or_else(|| missing("mesh-sizes"))?,
                &[],
            )
        }
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = s.clone();
    }
    if let Some(k) = args.kind {
        cfg.kind = Some(match k {
            KindArg::Fve => Kind::Fve,
            KindArg::Fem => Kind::Fem,
        });
    }
    if let Some(m) = &args.mesh_sizes {
        cfg.mesh_sizes = m.clone();
        cfg.meshes.clear();
    }
    if let Some(d) = args.perturb {
        cfg.perturb = d;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = &args.norms {
        cfg.norms = n.clone();
    }
    if cfg.norms.is_empty() {
        cfg.norms = vec!["h1x-ultra".into()];
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Markdown => Format::Markdown,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if args.check_reference {
        cfg.check_reference = true;
    }
    if let Some(f) = args.tolerance_factor {
        cfg.tolerance_factor = f;
    }
    if let Some(t) = args.order_tolerance {
        cfg.order_tolerance = t;
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool, FveError> {
    let cfg = build_config(args)?;
    let result = run_study(&cfg)?;
    let text = render(&result, cfg.format)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    if !cfg.check_reference {
        return Ok(true);
    }
    let cmp = compare_reference(&result, &ReferenceTable::embedded(), cfg.tolerance_factor, cfg.order_tolerance)?;
    eprint!("{}", cmp.summary());
    Ok(cmp.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_presets {
        for name in preset_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    init_thread_pool();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
