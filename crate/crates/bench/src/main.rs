use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use fmm_core::Precision;
use fmmbench::{
    assert_error_below, efficiency, parse_precision, run, sweep, write_reports, Axis, BenchSpec,
    Check, Distribution, Format, Report,
};

#[derive(Parser)]
#[command(
    name = "fmmbench",
    version,
    about = "Accuracy and timing runs of the fmm-core Laplace FMM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One evaluation, one record.
    Run(RunArgs),
    /// One record per value of the swept parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// cube, sphere or lattice.
    #[arg(long, default_value = "cube")]
    dist: Distribution,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Expansion order (degrees 0..p-1).
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Bodies per leaf used to pick the depth.
    #[arg(long, conflicts_with = "level")]
    ncrit: Option<usize>,
    /// Fixed tree depth.
    #[arg(long)]
    level: Option<u32>,
    #[arg(long, env = "FMMBENCH_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    sim_ranks: usize,
    /// double, or single for the f32 near field.
    #[arg(long, default_value = "double", value_parser = parse_precision)]
    precision: Precision,
    /// off, auto, full or sampled:<k>.
    #[arg(long, default_value = "auto")]
    check: Check,
    /// Permit check=full above 100000 bodies.
    #[arg(long)]
    allow_full: bool,
    /// Exit with status 3 if the relative L2 error is not below this.
    #[arg(long)]
    assert_error_below: Option<f64>,
    /// Append here instead of writing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    axis: Axis,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u64>,
    /// Scale n with the swept workers or ranks (weak scaling).
    #[arg(long)]
    weak: bool,
}

impl RunArgs {
    fn spec(&self) -> BenchSpec {
        BenchSpec {
            n: self.n,
            distribution: self.dist,
            seed: self.seed,
            p: self.p,
            ncrit: self.ncrit,
            level: self.level,
            workers: self.workers,
            sim_ranks: self.sim_ranks,
            precision: self.precision,
            check: self.check,
            allow_full: self.allow_full,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

fn summarize(reports: &[Report], axis: Axis) {
    let eff = efficiency(reports, |r| r.t_total);
    let kernels = efficiency(reports, |r| r.t_p2p + r.t_m2l);
    eprintln!(
        "{:>10} {:>10} {:>12} {:>10} {:>10} {:>11}",
        "value", "n", "t_total", "eff", "eff_P2P+M2L", "err_l2"
    );
    for (i, r) in reports.iter().enumerate() {
        let rec = &r.record;
        let value = match axis {
            Axis::Workers => rec.workers,
            Axis::Ranks => rec.sim_ranks,
            Axis::N => rec.n,
            Axis::P => rec.p,
        };
        let err = rec.err_l2.map_or("-".to_string(), |e| format!("{e:.3e}"));
        eprintln!(
            "{value:>10} {:>10} {:>12.4} {:>10.3} {:>10.3} {err:>11}",
            rec.n, rec.t_total, eff[i], kernels[i]
        );
    }
}

fn execute(command: Command) -> fmmbench::Result<()> {
    match command {
        Command::Run(args) => {
            let spec = args.spec();
            let report = run(&spec)?;
            write_reports(
                spec.out.as_deref(),
                spec.format,
                std::slice::from_ref(&report),
            )?;
            match args.assert_error_below {
                Some(limit) => assert_error_below(&report, limit),
                None => Ok(()),
            }
        }
        Command::Sweep(args) => {
            let spec = args.run.spec();
            let reports = sweep(
                &spec,
                args.axis,
                &args.values,
                args.weak,
                args.run.assert_error_below,
            )?;
            summarize(&reports, args.axis);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fmmbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
