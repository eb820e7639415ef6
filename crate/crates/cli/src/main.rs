use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crackfem::config::{RunConfig, SweepAxis};
use crackfem::{io, pipeline, Error};

/// Corrected-XFEM crack solver and benchmark harness.
#[derive(Parser, Debug)]
#[command(name = "crackfem", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker count (regular subdomains and thread pool size).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory; overrides [output] dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Also write K (MatrixMarket), f and x (CSV) and the partition dump.
    #[arg(long)]
    export_matrix: bool,
    /// Also write von Mises and displacement magnitude as legacy VTK.
    #[arg(long)]
    export_vtk: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration.
    Run(Common),
    /// Run one configuration per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// strategy, fill_reg, fill_tip, overlap_reg, overlap_tip, reorder, enr or mesh.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Skip the untimed warmup run.
        #[arg(long)]
        no_warmup: bool,
    },
    /// Classify all 120 two-function eliminations per element type.
    ScanLindep(Common),
    /// Error norms and convergence orders on a mesh sequence.
    BenchConvergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated node counts per side.
        #[arg(long, value_delimiter = ',')]
        meshes: Vec<usize>,
        /// Comma-separated numbers of branch functions.
        #[arg(long, value_delimiter = ',')]
        enr: Vec<usize>,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn load(common: &Common) -> Result<RunConfig, ExitCode> {
    let mut cfg = match RunConfig::from_path(&common.config) {
        Ok(c) => c,
        Err(e @ (Error::ConfigParse(_) | Error::InvalidConfiguration(_) | Error::Unsupported(_))) => {
            eprintln!("crackfem: {}: {e}", common.config.display());
            eprintln!("usage: crackfem <run|sweep|scan-lindep|bench-convergence> --config PATH [options]");
            return Err(ExitCode::from(EXIT_USAGE));
        }
        Err(e) => {
            eprintln!("crackfem: cannot read {}: {e}", common.config.display());
            return Err(ExitCode::from(EXIT_ERROR));
        }
    };
    if let Some(w) = common.workers {
        if w == 0 {
            eprintln!("crackfem: --workers must be at least 1");
            return Err(ExitCode::from(EXIT_USAGE));
        }
        cfg.solver.workers = w;
        cfg.solver.threads = None;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.output.export_matrix |= common.export_matrix;
    cfg.output.export_vtk |= common.export_vtk;
    Ok(cfg)
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("crackfem: {e}");
    ExitCode::from(EXIT_ERROR)
}

fn write_table<T: serde::Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    io::write_csv_file(&dir.join(name), rows)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Command::Run(c) | Command::ScanLindep(c) => c,
        Command::Sweep { common, .. } | Command::BenchConvergence { common, .. } => common,
    };
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if common.dry_run {
        print!("{}", cfg.to_toml_string());
        return ExitCode::from(EXIT_OK);
    }
    let dir = cfg.output.dir.clone();
    match cli.cmd {
        Command::Run(_) => match pipeline::run(&cfg) {
            Ok(out) => {
                if let Err(e) = pipeline::write_run_artifacts(&out, &dir, cfg.output.export_matrix, cfg.output.export_vtk) {
                    return fail(e);
                }
                let s = &out.summary;
                println!(
                    "{} dofs, {} iterations, converged={}, residual {:.3e}, T_sol {:.3}s",
                    s.n_dofs, s.iterations, s.converged, s.final_residual, s.t_sol
                );
                ExitCode::from(if s.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
            }
            Err(e) => fail(e),
        },
        Command::Sweep { axis, values, no_warmup, .. } => {
            let sw = cfg.sweep.clone();
            let axis = match axis.map(|a| a.parse::<SweepAxis>()).transpose() {
                Ok(Some(a)) => a,
                Ok(None) => match &sw {
                    Some(s) => s.axis,
                    None => {
                        eprintln!("crackfem: sweep needs --axis or a [sweep] section");
                        return ExitCode::from(EXIT_USAGE);
                    }
                },
                Err(e) => {
                    eprintln!("crackfem: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            let values: Vec<String> = if values.is_empty() {
                sw.as_ref().map(|s| s.values.iter().map(|v| v.to_string()).collect()).unwrap_or_default()
            } else {
                values
            };
            if values.is_empty() {
                eprintln!("crackfem: sweep needs --values or [sweep] values");
                return ExitCode::from(EXIT_USAGE);
            }
            let warmup = !no_warmup && sw.as_ref().map(|s| s.warmup).unwrap_or(true);
            let scale = sw.as_ref().map(|s| s.scale_overlap).unwrap_or(true);
            match pipeline::sweep(&cfg, axis, &values, warmup, scale) {
                Ok(rows) => {
                    if let Err(e) = write_table(&dir, "sweep.csv", &rows) {
                        return fail(e);
                    }
                    for r in &rows {
                        println!("{}={}: {} iterations, converged={} {}", r.axis, r.value, r.iterations, r.converged, r.error);
                    }
                    let ok = rows.iter().all(|r| r.converged && r.error.is_empty());
                    ExitCode::from(if ok { EXIT_OK } else { EXIT_NOT_CONVERGED })
                }
                Err(e) => fail(e),
            }
        }
        Command::ScanLindep(_) => match pipeline::scan_lindep(&cfg) {
            Ok((rows, summary)) => {
                if let Err(e) = write_table(&dir, "lindep_scan.csv", &rows).and_then(|_| write_table(&dir, "lindep_summary.csv", &summary)) {
                    return fail(e);
                }
                for s in &summary {
                    println!("{}: {} good, {} bad, min eigenvalue in [{:.3e}, {:.3e}]", s.element_type, s.good, s.bad, s.min_eig_lo, s.min_eig_hi);
                }
                ExitCode::from(EXIT_OK)
            }
            Err(e) => fail(e),
        },
        Command::BenchConvergence { meshes, enr, .. } => {
            let meshes = if meshes.is_empty() { cfg.bench.meshes.clone() } else { meshes };
            let enr = if enr.is_empty() { cfg.bench.enr.clone() } else { enr };
            match pipeline::bench_convergence(&cfg, &meshes, &enr) {
                Ok((rows, orders)) => {
                    if let Err(e) = write_table(&dir, "errors.csv", &rows).and_then(|_| write_table(&dir, "orders.csv", &orders)) {
                        return fail(e);
                    }
                    for o in &orders {
                        println!("enr={}: L2 order {:.4}, energy order {:.4}, SIF order {:.4}", o.enr, o.l2_order, o.energy_order, o.sif_order);
                    }
                    ExitCode::from(EXIT_OK)
                }
                Err(e) => fail(e),
            }
        }
    }
}
