//! Command-line harness for the time-renormalized N-body experiments.
//!
//! `RENORM_NBODY_PRECISION=f64|extended` selects the scalar backend when
//! the binary is built with the `extended` feature.

use clap::{Parser, Subcommand, ValueEnum};
use renorm_nbody::bounds::{compute_constants, Lambda};
use renorm_nbody::dynamics::energies;
use renorm_nbody::error::{Error, Result};
use renorm_nbody::experiments::{
    compare, default_dtau, radius_scan, strip_width, write_position_errors_csv, write_scan_csv,
    JET_ORDER,
};
use renorm_nbody::integrate::{integrate, verner98, IntegratorConfig, Mode, Span, Trajectory};
use renorm_nbody::problem::{gen_binary_visitor, gen_pythagorean, load_problem, ProblemFile};
use renorm_nbody::renorm::{RenormChoice, RenormKind};
use renorm_nbody::scalar::Real;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "renorm-nbody",
    about = "Gravitational N-body integration with global time-renormalization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegrateMode {
    Taylor,
    Rk,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for lambda_0, lambda_*, lambda_max and beta; print as JSON.
    Constants {
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Integrate a problem and write trajectory samples as CSV.
    Integrate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "s1")]
        renorm: String,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = IntegrateMode::Taylor)]
        mode: IntegrateMode,
        /// Constant step in fictitious time (default beta/2).
        #[arg(long)]
        dtau: Option<f64>,
        /// Taylor order.
        #[arg(long, default_value_t = JET_ORDER)]
        order: usize,
        /// Adaptive RK tolerances (rk mode with s0 only).
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Pairwise separations at or below this raise a collision error
        /// (default 0: only exact coincidence).
        #[arg(long, default_value_t = 0.0)]
        collision_floor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan the radius of convergence against the lower bound 1/L.
    RadiusScan {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        dtau: Option<f64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the analyticity-strip width for one renormalization.
    StripWidth {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "s1")]
        renorm: String,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        dtau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Step-matched comparison of renormalized constant-step runs against
    /// the adaptive physical-time baseline.
    Compare {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "s1,s2,s3,s4")]
        renorms: String,
        #[arg(long, default_value_t = 1e-13)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-13)]
        atol: f64,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Emit a built-in problem file.
    GenProblem {
        /// pythagorean | binary-visitor
        which: String,
        #[arg(long, default_value_t = 100.0)]
        speed: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_choice(renorm: &str, kappa: f64) -> Result<RenormChoice> {
    let kind: RenormKind = renorm.parse()?;
    RenormChoice::new(kind, kappa)
}

fn write_trajectory_csv<R: Real>(
    path: &Path,
    spec: &renorm_nbody::dynamics::SystemSpec<R>,
    traj: &Trajectory<R>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = spec.n_bodies();
    let mut header = vec!["tau".to_string(), "t".to_string(), "energy".to_string()];
    for i in 0..n {
        for c in ["qx", "qy", "qz"] {
            header.push(format!("{c}{i}"));
        }
    }
    for i in 0..n {
        for c in ["vx", "vy", "vz"] {
            header.push(format!("{c}{i}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for s in &traj.samples {
        let (_, _, h) = energies(spec, &s.q, &s.v)?;
        let mut line = format!("{},{},{}", s.tau.to_f64(), s.t.to_f64(), h.to_f64());
        for q in &s.q {
            for c in 0..3 {
                line.push(',');
                line.push_str(&q[c].to_f64().to_string());
            }
        }
        for v in &s.v {
            for c in 0..3 {
                line.push(',');
                line.push_str(&v[c].to_f64().to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn load<R: Real>(
    path: &Path,
) -> Result<(
    renorm_nbody::dynamics::SystemSpec<R>,
    renorm_nbody::dynamics::PhaseState<R>,
    f64,
)> {
    load_problem(path)?.build::<R>()
}

fn run<R: Real>(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Constants { tol } => {
            let report = compute_constants(tol)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?
            );
        }
        Command::Integrate {
            problem,
            renorm,
            kappa,
            mode,
            dtau,
            order,
            rtol,
            atol,
            stride,
            collision_floor,
            out,
        } => {
            let choice = parse_choice(&renorm, kappa)?;
            let (spec, state0, t_end) = load::<R>(&problem)?;
            let spec = spec.with_collision_floor(R::from_f64(collision_floor));
            let dtau = dtau.unwrap_or_else(default_dtau);
            let traj = match mode {
                IntegrateMode::Taylor => integrate(
                    &spec,
                    choice,
                    &state0,
                    &IntegratorConfig {
                        mode: Mode::TaylorConst { dtau, order },
                        span: Span::PhysicalEnd(t_end),
                        output_stride: stride,
                    },
                )?,
                IntegrateMode::Rk => match (rtol, atol) {
                    (Some(rtol), Some(atol)) => integrate(
                        &spec,
                        choice,
                        &state0,
                        &IntegratorConfig {
                            mode: Mode::RkAdaptive {
                                rtol,
                                atol,
                                tableau: verner98(),
                            },
                            span: Span::PhysicalEnd(t_end),
                            output_stride: stride,
                        },
                    )?,
                    (None, None) => {
                        // Constant-step RK needs the fictitious span; probe
                        // it with constant-step Taylor unless s0 (tau = t).
                        let span = if choice.kind == RenormKind::S0 {
                            Span::FictitiousEnd(t_end)
                        } else {
                            let probe = integrate(
                                &spec,
                                choice,
                                &state0,
                                &IntegratorConfig {
                                    mode: Mode::TaylorConst {
                                        dtau: default_dtau(),
                                        order: JET_ORDER,
                                    },
                                    span: Span::PhysicalEnd(t_end),
                                    output_stride: usize::MAX,
                                },
                            )?;
                            Span::FictitiousEnd(probe.final_state().tau.to_f64())
                        };
                        integrate(
                            &spec,
                            choice,
                            &state0,
                            &IntegratorConfig {
                                mode: Mode::RkConst {
                                    dtau,
                                    tableau: verner98(),
                                },
                                span,
                                output_stride: stride,
                            },
                        )?
                    }
                    _ => {
                        return Err(Error::Config(
                            "give both --rtol and --atol for adaptive RK, or neither \
                             for constant-step"
                                .into(),
                        ))
                    }
                },
            };
            write_trajectory_csv(&out, &spec, &traj)?;
            eprintln!(
                "accepted {} steps, rejected {}, tail warnings {}",
                traj.accepted, traj.rejected, traj.tail_warnings
            );
        }
        Command::RadiusScan {
            problem,
            lambda,
            dtau,
            stride,
            out,
        } => {
            let (spec, state0, t_end) = load::<R>(&problem)?;
            let rows = radius_scan(
                &spec,
                &state0,
                t_end,
                Lambda::new(lambda)?,
                dtau.unwrap_or_else(default_dtau),
                stride,
            )?;
            write_scan_csv(BufWriter::new(File::create(&out)?), &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::StripWidth {
            problem,
            renorm,
            kappa,
            dtau,
            out,
        } => {
            let choice = parse_choice(&renorm, kappa)?;
            let (spec, state0, t_end) = load::<R>(&problem)?;
            let sw = strip_width(
                &spec,
                choice,
                &state0,
                t_end,
                dtau.unwrap_or_else(default_dtau),
            )?;
            let json =
                serde_json::to_string_pretty(&sw).map_err(|e| Error::Parse(e.to_string()))?;
            std::fs::write(&out, &json)?;
            println!("{json}");
        }
        Command::Compare {
            problem,
            renorms,
            rtol,
            atol,
            outdir,
        } => {
            let choices: Vec<RenormChoice> = renorms
                .split(',')
                .map(|s| parse_choice(s.trim(), 1.0))
                .collect::<Result<_>>()?;
            let (spec, state0, t_end) = load::<R>(&problem)?;
            let output = compare(&spec, &state0, t_end, &choices, rtol, atol)?;
            std::fs::create_dir_all(&outdir)?;
            let report = serde_json::json!({
                "baseline_steps": output.baseline_steps,
                "rows": output.rows,
            });
            std::fs::write(
                outdir.join("report.json"),
                serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?,
            )?;
            for errs in &output.position_errors {
                let path = outdir.join(format!("pos_err_{}.csv", errs.renorm));
                write_position_errors_csv(BufWriter::new(File::create(path)?), errs)?;
            }
            for row in &output.rows {
                println!(
                    "{}: width {:.6e}, scaled {:.6e}, energy err {:.3e}, steps {}, {:.2}s",
                    row.renorm,
                    row.width,
                    row.scaled_width,
                    row.max_rel_energy_error,
                    row.steps,
                    row.wall_secs
                );
            }
        }
        Command::GenProblem { which, speed, out } => {
            let file: ProblemFile = match which.as_str() {
                "pythagorean" => gen_pythagorean(),
                "binary-visitor" => gen_binary_visitor(speed)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown problem '{other}'; expected pythagorean or binary-visitor"
                    )))
                }
            };
            file.save(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let precision = std::env::var("RENORM_NBODY_PRECISION").unwrap_or_else(|_| "f64".into());
    let result = match precision.as_str() {
        "f64" => run::<f64>(cli),
        "extended" => {
            #[cfg(feature = "extended")]
            {
                run::<renorm_nbody::dd::DoubleDouble>(cli)
            }
            #[cfg(not(feature = "extended"))]
            {
                Err(Error::Config(
                    "this binary was built without the extended backend; \
                     rebuild with --features extended"
                        .into(),
                ))
            }
        }
        other => Err(Error::Config(format!(
            "RENORM_NBODY_PRECISION must be f64 or extended, got '{other}'"
        ))),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
