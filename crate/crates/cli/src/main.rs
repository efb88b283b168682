use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oamlink::experiment::{emit_csv, run_sweep_with_workers, write_csv};
use oamlink::io::{save_amplitudes, write_screen_table};
use oamlink::turbulence::kolmogorov_screen;
use oamlink::validation::{screen_statistics, vacuum_suite};
use oamlink::{make_grid, CorrectionKind, LinkConfig, Profile, StreamId};

#[derive(Parser)]
#[command(name = "oamlink", version, about = "OAM entanglement through turbulence with adaptive optics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write the result CSV.
    Run(RunArgs),
    /// Check screen statistics and vacuum propagation.
    Validate(ValidateArgs),
    /// Write one Kolmogorov phase screen as a plain table.
    Screen(ScreenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Full,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Full => Profile::Full,
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Base parameter set.
    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,
    /// `key = value` file applied on top of the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Realizations per cell.
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated subset of none,tiptilt,ideal.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<CorrectionKind>>,
    /// Comma-separated OAM orders.
    #[arg(long, value_delimiter = ',')]
    l0: Option<Vec<i32>>,
    /// Comma-separated Cn² values.
    #[arg(long, value_delimiter = ',')]
    cn2: Option<Vec<f64>>,
    /// Samples per grid side.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> oamlink::Result<LinkConfig> {
        let mut cfg = LinkConfig::profile(self.profile.into());
        if let Some(path) = &self.config {
            cfg = cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(s) = &self.scenarios {
            cfg.scenarios = s.clone();
        }
        if let Some(l) = &self.l0 {
            cfg.l0_list = l.clone();
        }
        if let Some(c) = &self.cn2 {
            cfg.cn2_list = c.clone();
        }
        if let Some(n) = self.grid_n {
            cfg.grid_n = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(rayon_threads)
    }
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Directory for per-cell amplitude CSVs.
    #[arg(long)]
    amplitudes_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Screens in the structure-function ensemble.
    #[arg(long, default_value_t = 1000)]
    screens: usize,
    /// Fried parameter of the test screens (m).
    #[arg(long, default_value_t = 0.05)]
    r0: f64,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 0.4)]
    width: f64,
    /// Fried parameter (m).
    #[arg(long, default_value_t = 0.05)]
    r0: f64,
    #[arg(long, default_value_t = 7)]
    subharmonics: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
        Command::Screen(a) => screen(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: RunArgs) -> oamlink::Result<ExitCode> {
    let cfg = args.config.build()?;
    let start = Instant::now();
    let keep = args.amplitudes_dir.is_some();
    let out = run_sweep_with_workers(&cfg, args.config.workers(), keep)?;
    eprintln!(
        "{} cells, {} realizations each, {:.1} s",
        out.rows.len(),
        cfg.realizations,
        start.elapsed().as_secs_f64()
    );
    match &args.output {
        Some(path) => emit_csv(&out.rows, path)?,
        None => write_csv(&out.rows, std::io::stdout().lock())?,
    }
    if let Some(dir) = &args.amplitudes_dir {
        std::fs::create_dir_all(dir)?;
        for (i, (row, ens)) in out.rows.iter().zip(&out.ensembles).enumerate() {
            let name = format!("cell{i:04}_l{}_{}.csv", row.l0, row.scenario);
            save_amplitudes(ens, &dir.join(name))?;
        }
    }
    let failed: Vec<_> = out.rows.iter().filter_map(|r| r.error.as_deref()).collect();
    for e in &failed {
        eprintln!("failed cell: {e}");
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn validate(args: ValidateArgs) -> oamlink::Result<ExitCode> {
    let cfg = args.config.build()?;
    let grid = cfg.grid()?;
    let mut ok = true;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.config.workers())
        .build()
        .map_err(|e| oamlink::Error::InvalidParameter(e.to_string()))?;

    let seps: Vec<f64> = (2..=5)
        .map(|k| grid.width() / 8.0 * (2f64).powi(-(5 - k)))
        .filter(|&r| r >= 4.0 * grid.dx())
        .collect();
    println!("structure function, r0 = {} m, {} screens", args.r0, args.screens);
    let checks = pool.install(|| {
        screen_statistics(&grid, args.r0, cfg.subharmonic_orders, args.screens, cfg.master_seed, &seps)
    })?;
    for c in &checks {
        let pass = (c.ratio() - 1.0).abs() <= 0.1;
        ok &= pass;
        println!(
            "  r = {:.4} m  D = {:.4}  theory = {:.4}  ratio = {:.3}  {}",
            c.separation,
            c.measured,
            c.theory,
            c.ratio(),
            verdict(pass)
        );
    }

    let report = pool.install(|| vacuum_suite(&cfg, &[0, 1, 2, 3, 4, 5]))?;
    println!("vacuum propagation over {} m", cfg.path_length);
    for (l, o) in &report.mode_overlaps {
        let pass = *o >= 0.999;
        ok &= pass;
        println!("  LG0{l}: |overlap|^2 = {o:.6}  {}", verdict(pass));
    }
    for (l0, sc, c, n, r) in &report.end_to_end {
        let pass = *c >= 0.999 && *r <= 1e-3 && *n >= 0.99;
        ok &= pass;
        println!("  l0 = {l0} {sc}: C = {c:.6} N = {n:.6} R = {r:.2e}  {}", verdict(pass));
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn screen(args: ScreenArgs) -> oamlink::Result<ExitCode> {
    let grid = make_grid(args.n, args.width)?;
    let s = kolmogorov_screen(&grid, args.r0, args.subharmonics, &mut StreamId::new(args.seed, 0).rng());
    match &args.output {
        Some(path) => write_screen_table(&s, std::fs::File::create(path)?)?,
        None => write_screen_table(&s, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAIL"
    }
}
