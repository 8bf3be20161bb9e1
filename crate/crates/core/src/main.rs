use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use penalmhd::check::run_checks;
use penalmhd::config::SimConfig;
use penalmhd::driver;
use penalmhd::sweep::eta_sweep;
use penalmhd::trajectory::Trajectory;
use penalmhd::vtk;

#[derive(Parser)]
#[command(name = "penalmhd", version, about = "Penalized MHD simulator for a rigid body in a conducting fluid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation.
    Run {
        config: PathBuf,
        /// Override a key, e.g. `--set grid.n=16`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the invariant suite on a small copy of the configuration.
    /// The exit code is the number of failed checks.
    Check {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Repeat a run for several penalization parameters.
    EtaSweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        etas: Vec<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate the time interpolants of a stored trajectory.
    Interp {
        /// Directory holding `snap_*.vtk` written with `output.cadence = 1`.
        trajectory: PathBuf,
        #[arg(long)]
        t: f64,
        /// Where to write affine.vtk, constant.vtk and lagged.vtk.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, overrides: &[String]) -> penalmhd::Result<SimConfig> {
    let mut cfg = SimConfig::load(path)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| penalmhd::Error::Config(format!("override {o:?} must look like key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> penalmhd::Result<u8> {
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let s = driver::run(&cfg)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("steps          {}", s.steps);
            println!("stop reason    {}", s.stop_reason.as_str());
            println!("final time     {:.6e}", s.final_time);
            println!("density range  [{:.10e}, {:.10e}]", s.rho_min, s.rho_max);
            println!("max div u      {:.3e}", s.max_div_u);
            println!("max div B      {:.3e}", s.max_div_b);
            println!("max CFL        {:.3e}", s.max_cfl);
            println!("rigid defect   {:.6e}", s.rigid_defect);
            println!("energy faults  {}", s.energy_violations);
            Ok(u8::from(s.energy_violations > 0))
        }
        Command::Check { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let results = run_checks(&cfg);
            let mut failed = 0u8;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += u8::from(!r.passed);
            }
            Ok(failed)
        }
        Command::EtaSweep { config, etas, overrides } => {
            let cfg = load(&config, &overrides)?;
            let table = eta_sweep(&cfg, &etas)?;
            let csv = table.to_csv();
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join("eta_sweep.csv");
            std::fs::write(&path, &csv)?;
            print!("{csv}");
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
        Command::Interp { trajectory, t, out } => {
            let traj = Trajectory::load(&trajectory)?;
            let i = traj.interpolants(t)?;
            let dir = out.unwrap_or_else(|| trajectory.join(format!("interp_{t}")));
            std::fs::create_dir_all(&dir)?;
            for (name, s) in [("affine", &i.affine), ("constant", &i.constant), ("lagged", &i.lagged)] {
                vtk::write(&dir.join(format!("{name}.vtk")), s)?;
            }
            println!("t = {t}: constant = step {}, lagged = step {}; written to {}", i.constant.step, i.lagged.step, dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(101)
        }
    }
}
