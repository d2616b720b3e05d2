use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anyon_slab::cli_io::{parse_config, resume_scenario, run_scenario_in, OUTPUT_DIR_ENV};
use anyon_slab::collision::{conservative_projection, post_collision, relative_defect, Increment};
use anyon_slab::error::{Error, Result};
use anyon_slab::fields::{make_grid, SimulationParams};
use anyon_slab::haldane::{filling_factor, ln_w, solve_w, wu_occupation, EquilibriumSpec};
use anyon_slab::presets::{initial_data, Preset};
use anyon_slab::solver::{NoObserver, Solver};

#[derive(Parser)]
#[command(name = "anyon-slab", version, about = "Kinetic solver for the Haldane-statistics Boltzmann equation on a periodic slab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the Wu equilibrium occupation as a function of |v|.
    Equilibrium {
        alpha: f64,
        mu: f64,
        temperature: f64,
        /// Largest |v| in the table.
        #[arg(long, default_value_t = 4.0)]
        vmax: f64,
        #[arg(long, default_value_t = 17)]
        rows: usize,
    },
    /// Run a quick invariant suite and report pass/fail per check.
    Check,
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        /// New final time (defaults to the checkpointed config's).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn output_dir(flag: Option<PathBuf>, configured: &Path) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| configured.to_path_buf())
}

fn run(config: &Path, flag: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::Io {
        path: config.to_path_buf(),
        source: e,
    })?;
    let cfg = parse_config(&text)?;
    let dir = output_dir(flag, &cfg.output_dir);
    let out = run_scenario_in(&cfg, &dir)?;
    print!("{}", out.summary);
    println!("output written to {}", out.output_dir.display());
    Ok(())
}

fn equilibrium(alpha: f64, mu: f64, t: f64, vmax: f64, rows: usize) -> Result<()> {
    let spec = EquilibriumSpec::new(mu, t, alpha)?;
    println!("{:>10} {:>14} {:>14} {:>14} {:>14}", "|v|", "epsilon", "zeta", "w", "f");
    for i in 0..rows {
        let v = vmax * i as f64 / (rows.max(2) - 1) as f64;
        let eps = 0.5 * v * v;
        let lz = (eps - spec.mu) / spec.temperature;
        let w = ln_w(lz, alpha).exp();
        println!(
            "{v:>10.4} {eps:>14.6e} {:>14.6e} {w:>14.6e} {:>14.6e}",
            lz.exp(),
            wu_occupation(lz, alpha)
        );
    }
    Ok(())
}

fn check() -> bool {
    let mut all = true;
    let mut report = |name: &str, ok: bool| {
        println!("[{}] {name}", if ok { "pass" } else { "FAIL" });
        all &= ok;
    };

    let endpoints = [0.25, 0.5, 0.75, 1.0].iter().all(|&a| {
        filling_factor(0.0, a).is_ok_and(|v| v == 1.0) && filling_factor(1.0 / a, a).is_ok_and(|v| v == 0.0)
    });
    report("filling factor endpoints F(0)=1, F(1/alpha)=0", endpoints);

    let mut worst: f64 = 0.0;
    for &a in &[0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        for i in 0..=60 {
            let z = 10f64.powf(-6.0 + 12.0 * i as f64 / 60.0);
            if let Ok(w) = solve_w(z, a) {
                let r = (w.powf(a) * (1.0 + w).powf(1.0 - a) - z).abs() / z.max(1.0);
                worst = worst.max(r);
            } else {
                worst = f64::INFINITY;
            }
        }
    }
    report("w(zeta) residual < 1e-12", worst < 1e-12);

    let geometry = post_collision([0.3, -1.1], [1.7, 0.4], 0.7).is_ok_and(|(a, b)| {
        let e0 = 0.3f64.powi(2) + 1.1f64.powi(2) + 1.7f64.powi(2) + 0.4f64.powi(2);
        let e1 = a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1];
        (a[0] + b[0] - 2.0).abs() < 1e-14 && (a[1] + b[1] + 0.7).abs() < 1e-14 && (e0 - e1).abs() < 1e-13
    });
    report("collision conserves momentum and energy", geometry);

    let params = SimulationParams {
        nx: 4,
        nv: 12,
        j: 3.0,
        t_end: 0.05,
        ..Default::default()
    };
    let projected = make_grid(&params).and_then(|g| {
        let mut inc = Increment::zeros(&g);
        for (i, v) in inc.values.iter_mut().enumerate() {
            if g.is_active(i % g.n_v()) {
                *v = ((i * 37 % 11) as f64 - 5.0) * 1e-2;
            }
        }
        conservative_projection(&inc, &g).map(|p| relative_defect(&p.increment, &g))
    });
    report("conservative projection zeroes moments", projected.is_ok_and(|d| d < 1e-13));

    for dt in [1e-3, 1.0, 1e3] {
        let p = SimulationParams {
            dt,
            t_end: 2.0 * dt,
            ..params.clone()
        };
        let ok = Solver::new(&p).and_then(|s| {
            let f0 = initial_data(&Preset::by_name("bimodal").expect("preset"), &p, &s.grid, 0.0, 0, false)?;
            s.run(f0, &mut NoObserver)
        });
        report(&format!("range kept for dt = {dt:e}"), ok.is_ok());
    }
    all
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Equilibrium {
            alpha,
            mu,
            temperature,
            vmax,
            rows,
        } => equilibrium(alpha, mu, temperature, vmax, rows),
        Command::Check => {
            return if check() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Resume {
            checkpoint,
            t_end,
            output_dir: flag,
        } => {
            let dir = output_dir(flag, Path::new("out"));
            resume_scenario(&checkpoint, t_end, &dir).map(|o| {
                print!("{}", o.summary);
                println!("output written to {}", o.output_dir.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
