use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use curvenet::curvature::Variant;
use curvenet::harness::{
    self, fit_records, run_level, umbilic_experiment, ExperimentConfig, UmbilicOutcome,
};
use curvenet::netgen::UmbilicPattern;
use curvenet::verify::Summary;
use curvenet::Result;

/// Slopes accepted as linear or better convergence.
const SLOPE_RANGE: (f64, f64) = (0.8, 2.2);
const UMBILIC_MIN_SLOPE: f64 = 0.8;

#[derive(Parser, Debug)]
#[command(name = "curvenet", version, about = "Curvature estimation on discrete nets of curvature lines")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment file (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    /// Comma separated refinement levels, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Output directory; wins over CURVENET_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Angle,
    Sin,
    Tan,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Angle => Variant::Angle,
            VariantArg::Sin => Variant::Sin,
            VariantArg::Tan => Variant::Tan,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Obj,
    Txt,
    Plotdata,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the net of every level and write it as OBJ and text.
    Generate,
    /// Per-vertex curvature estimates of every level.
    Curvature,
    /// Bound checks; fails on any violation.
    Verify,
    /// Refinement sweep with sup errors and rate fits.
    Converge,
    /// Refinement sweep around an umbilic of a Monge patch.
    Umbilic {
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long, default_value_t = 6)]
        sectors: usize,
    },
    /// Run the sweep and write one artifact in the chosen format.
    Export {
        #[arg(long, value_enum)]
        format: Format,
        /// Target file; defaults to a name inside the output directory.
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

struct Context {
    config: ExperimentConfig,
    out: PathBuf,
}

fn load(global: &Global) -> Result<Context> {
    let path = global.config.as_ref().ok_or_else(|| {
        curvenet::Error::Config("this command needs --config".into())
    })?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(v) = global.variant {
        config.variant = v.into();
    }
    if let Some(levels) = &global.levels {
        config.levels = levels.clone();
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    let out = global.out.clone().unwrap_or_else(|| config.output_dir());
    fs::create_dir_all(&out)?;
    Ok(Context { config, out })
}

fn generate(ctx: &Context) -> Result<bool> {
    let chart = ctx.config.chart()?;
    for &level in &ctx.config.levels {
        let net = ctx.config.build_net(&chart, level)?;
        let problems = net.validate();
        for p in &problems {
            error!("level {level}: {p}");
        }
        harness::write_net(&net, &ctx.out.join(format!("net_{level}.obj")))?;
        harness::write_net(&net, &ctx.out.join(format!("net_{level}.txt")))?;
        println!(
            "level {level}: {} vertices, {} edges, {} cells",
            net.vertices.len(),
            net.edges.len(),
            net.cells.len()
        );
        if !problems.is_empty() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn curvature(ctx: &Context) -> Result<bool> {
    let chart = ctx.config.chart()?;
    let bounds = chart.estimate_bounds(ctx.config.bounds_density)?;
    let mut ok = true;
    for &level in &ctx.config.levels {
        let outcome = run_level(&ctx.config, &chart, &bounds, level, false)?;
        harness::write_vertices_csv(
            &outcome.results,
            ctx.config.variant,
            &ctx.out.join(format!("vertices_{level}.csv")),
        )?;
        let r = &outcome.record;
        println!(
            "level {level}: {} vertices, eps {:.4e}, max vertex error {:.4e}, failures {}",
            r.vertices, r.eps_max, r.vertex_error, r.estimate_failures
        );
        ok &= r.degenerate_stars == 0;
    }
    Ok(ok)
}

fn verify(ctx: &Context) -> Result<bool> {
    let chart = ctx.config.chart()?;
    let bounds = chart.estimate_bounds(ctx.config.bounds_density)?;
    let mut total = Summary::default();
    for &level in &ctx.config.levels {
        let outcome = run_level(&ctx.config, &chart, &bounds, level, false)?;
        harness::write_checks_csv(&outcome.results, &ctx.out.join(format!("checks_{level}.csv")))?;
        println!(
            "level {level}: sampling condition at {:.0}% of vertices, {} violations",
            100.0 * outcome.record.sampling_fraction,
            outcome.record.violations
        );
        total = total.merge(outcome.summary);
    }
    fs::write(ctx.out.join("summary.txt"), total.to_text())?;
    print!("{}", total.to_text());
    Ok(total.violations() == 0)
}

fn converge(ctx: &Context) -> Result<bool> {
    let records = harness::run_refinement(&ctx.config)?;
    write_sweep(ctx, &records)?;
    let mut ok = records.len() == ctx.config.levels.len() && records.iter().all(|r| r.valid);
    let mut fits = String::new();
    for second in [false, true] {
        let name = if second { "k2" } else { "k1" };
        let all_zero = records
            .iter()
            .all(|r| if second { r.sup_k2(ctx.config.variant) } else { r.sup_k1(ctx.config.variant) } == 0.0);
        match fit_records(&records, ctx.config.variant, second) {
            Ok(fit) => {
                fits += &format!(
                    "{name} slope {:.4} intercept {:.4} residual {:.4e} points {}\n",
                    fit.slope, fit.intercept, fit.residual, fit.points
                );
                ok &= (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&fit.slope);
            }
            Err(_) if all_zero => fits += &format!("{name} exact at every level\n"),
            Err(e) => {
                fits += &format!("{name} {e}\n");
                ok = false;
            }
        }
    }
    fs::write(ctx.out.join("fit.txt"), &fits)?;
    print!("{fits}");
    Ok(ok)
}

fn write_sweep(ctx: &Context, records: &[harness::ConvergenceRecord]) -> Result<()> {
    harness::write_records_csv(records, &ctx.out.join("records.csv"))?;
    harness::write_violations_csv(records, &ctx.out.join("violations.csv"))?;
    harness::write_plotdata(records, ctx.config.variant, &ctx.out.join("plotdata.txt"))?;
    harness::write_timing(records, &ctx.out.join("timing.txt"))?;
    for r in records {
        println!(
            "level {}: eps {:.4e} rho {:.3} sup k1 {:.4e} sup k2 {:.4e} violations {}{}",
            r.level,
            r.eps_max,
            r.rho_max,
            r.sup_k1(ctx.config.variant),
            r.sup_k2(ctx.config.variant),
            r.violations,
            if r.valid { "" } else { " (invalid)" }
        );
    }
    Ok(())
}

fn umbilic(global: &Global, pattern: Option<&str>, sectors: usize) -> Result<bool> {
    let config = match &global.config {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => None,
    };
    let pattern: UmbilicPattern = match (pattern, config.as_ref().and_then(|c| c.pattern)) {
        (Some(p), _) => p.parse()?,
        (None, Some(p)) => p,
        (None, None) => {
            return Err(curvenet::Error::Config("umbilic needs --pattern or a config pattern".into()))
        }
    };
    let levels = global
        .levels
        .clone()
        .or_else(|| config.as_ref().map(|c| c.levels.clone()))
        .unwrap_or_else(|| vec![4, 8, 16, 32]);
    let variant = global
        .variant
        .map(Variant::from)
        .or_else(|| config.as_ref().map(|c| c.variant))
        .unwrap_or_default();
    let out = global
        .out
        .clone()
        .unwrap_or_else(|| config.as_ref().map_or_else(|| PathBuf::from("out"), |c| c.output_dir()));
    fs::create_dir_all(&out)?;
    let outcome: UmbilicOutcome = umbilic_experiment(pattern, &levels, sectors, variant)?;
    harness::write_umbilic_csv(&outcome, &out.join(format!("umbilic_{}.csv", pattern.name())))?;
    for r in &outcome.records {
        println!(
            "rings {}: eps {:.4e} rho {:.4} near error {:.4e}",
            r.rings, r.eps_max, r.rho_max, r.near_error
        );
    }
    println!(
        "{} slope {:.4}, rho non-decreasing: {}",
        pattern.name(),
        outcome.fit.slope,
        outcome.rho_non_decreasing
    );
    Ok(outcome.fit.slope >= UMBILIC_MIN_SLOPE && outcome.rho_non_decreasing)
}

fn export(ctx: &Context, format: Format, path: Option<&Path>) -> Result<bool> {
    let target = |name: &str| path.map_or_else(|| ctx.out.join(name), Path::to_path_buf);
    match format {
        Format::Obj | Format::Txt => {
            let level = *ctx.config.levels.last().unwrap();
            let net = ctx.config.build_net(&ctx.config.chart()?, level)?;
            let ext = if matches!(format, Format::Obj) { "obj" } else { "txt" };
            harness::write_net(&net, &target(&format!("net_{level}.{ext}")))?;
        }
        Format::Csv => {
            let records = harness::run_refinement(&ctx.config)?;
            harness::write_records_csv(&records, &target("records.csv"))?;
        }
        Format::Plotdata => {
            let records = harness::run_refinement(&ctx.config)?;
            harness::write_plotdata(&records, ctx.config.variant, &target("plotdata.txt"))?;
        }
    }
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Command::Umbilic { pattern, sectors } = &cli.command {
        return umbilic(&cli.global, pattern.as_deref(), *sectors);
    }
    let ctx = load(&cli.global)?;
    info!("writing to {}", ctx.out.display());
    match &cli.command {
        Command::Generate => generate(&ctx),
        Command::Curvature => curvature(&ctx),
        Command::Verify => verify(&ctx),
        Command::Converge => converge(&ctx),
        Command::Export { format, path } => export(&ctx, *format, path.as_deref()),
        Command::Umbilic { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance assertions failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
