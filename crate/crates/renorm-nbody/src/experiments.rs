//! The experiment pipelines behind the CLI: radius-of-convergence scans,
//! analyticity-strip widths, and the step-matched efficiency comparison
//! between constant-step renormalized integration and adaptive integration
//! in physical time.

use crate::bounds::{l_bound, Lambda, BETA_PAPER};
use crate::dynamics::{energies, PhaseState, SystemSpec};
use crate::error::Result;
use crate::integrate::{
    integrate, reference_solution, verner98, IntegratorConfig, Mode, Span, Trajectory,
};
use crate::jets::{radius_estimate, taylor_coeffs, JetMode};
use crate::renorm::{RenormChoice, RenormKind};
use crate::scalar::Real;
use serde::Serialize;
use std::io::Write;
use std::time::Instant;

/// Taylor order used throughout the pipelines.
pub const JET_ORDER: usize = 30;

/// Default constant step in fictitious time: half the guaranteed strip
/// half-width.
pub fn default_dtau() -> f64 {
    BETA_PAPER / 2.0
}

/// One sampled point of a radius scan.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanRow {
    pub t: f64,
    pub tau: f64,
    /// Estimated radius of convergence of the physical-time expansion.
    pub rho: f64,
    /// Certified lower bound 1/L(q, v, lambda).
    pub radius_lower: f64,
    /// rho * L, the scaling factor between estimate and bound.
    pub product: f64,
}

/// Integrate with s_1 at constant Taylor steps and record, every `stride`
/// accepted steps, the estimated radius of convergence alongside the
/// certified lower bound at lambda.
pub fn radius_scan<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    t_end: f64,
    lambda: Lambda,
    dtau: f64,
    stride: usize,
) -> Result<Vec<ScanRow>> {
    let config = IntegratorConfig {
        mode: Mode::TaylorConst {
            dtau,
            order: JET_ORDER,
        },
        span: Span::PhysicalEnd(t_end),
        output_stride: stride,
    };
    let traj = integrate(spec, RenormChoice::of(RenormKind::S1), state0, &config)?;
    let mut rows = Vec::with_capacity(traj.samples.len());
    for sample in &traj.samples {
        let bundle = taylor_coeffs(spec, sample, JET_ORDER, JetMode::Physical)?;
        let rho = radius_estimate(&bundle)?.rho;
        let bound = l_bound(spec, &sample.q, &sample.v, lambda)?;
        let radius_lower = bound.radius_lower.to_f64();
        rows.push(ScanRow {
            t: sample.t.to_f64(),
            tau: sample.tau.to_f64(),
            rho,
            radius_lower,
            product: rho / radius_lower,
        });
    }
    Ok(rows)
}

/// Analyticity-strip measurement for one renormalization choice.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StripWidth {
    pub renorm: RenormKind,
    /// Minimum over the trajectory of the estimated radius of convergence
    /// of the tau-expansion.
    pub width: f64,
    /// width * T / T_j, comparable across renormalizations.
    pub scaled_width: f64,
    /// Fictitious-time length corresponding to [0, T].
    pub t_j: f64,
    pub samples: usize,
}

/// Integrate the renormalized system over [0, T] and take the minimum
/// tau-plane radius of convergence along the trajectory, sampling every
/// accepted step.
pub fn strip_width<R: Real>(
    spec: &SystemSpec<R>,
    choice: RenormChoice,
    state0: &PhaseState<R>,
    t_end: f64,
    dtau: f64,
) -> Result<StripWidth> {
    let config = IntegratorConfig {
        mode: Mode::TaylorConst {
            dtau,
            order: JET_ORDER,
        },
        span: Span::PhysicalEnd(t_end),
        output_stride: 1,
    };
    let traj = integrate(spec, choice, state0, &config)?;
    let mut width = f64::INFINITY;
    for sample in &traj.samples {
        let bundle = taylor_coeffs(spec, sample, JET_ORDER, JetMode::Renormalized(choice))?;
        width = width.min(radius_estimate(&bundle)?.rho);
    }
    // For s0 tau coincides with t, so T_j = T and the scaling is exact by
    // construction rather than within accumulated roundoff.
    let t_j = if choice.kind == RenormKind::S0 {
        t_end
    } else {
        traj.final_state().tau.to_f64()
    };
    Ok(StripWidth {
        renorm: choice.kind,
        width,
        scaled_width: if choice.kind == RenormKind::S0 {
            width
        } else {
            width * t_end / t_j
        },
        t_j,
        samples: traj.samples.len(),
    })
}

/// Summary row of the step-matched comparison.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReportRow {
    pub renorm: RenormKind,
    pub width: f64,
    pub scaled_width: f64,
    pub max_rel_energy_error: f64,
    pub steps: usize,
    pub wall_secs: f64,
    /// |t_end - T| of the constant-step run. The probe pins T_j to machine
    /// precision, so on well-resolved problems this is ~1e-12 T; on
    /// chaotic spans at binary64 the probe and the RK run shadow different
    /// trajectories and the deviation is genuinely macroscopic.
    pub t_end_deviation: f64,
}

/// Per-sample position errors of one run against the reference solution.
#[derive(Clone, Debug, Serialize)]
pub struct PositionErrors {
    pub renorm: RenormKind,
    /// (t, per-body |q_i(t) - q_i_ref(t)|)
    pub rows: Vec<(f64, Vec<f64>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareOutput {
    /// s_0 (adaptive baseline) first, then one row per requested choice.
    pub rows: Vec<ReportRow>,
    pub position_errors: Vec<PositionErrors>,
    /// Accepted steps of the adaptive baseline; the constant-step runs use
    /// dtau = T_j / n with this n.
    pub baseline_steps: usize,
}

fn max_rel_energy_error<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    traj: &Trajectory<R>,
) -> Result<f64> {
    let (_, _, h0) = energies(spec, &state0.q, &state0.v)?;
    let mut worst = 0.0f64;
    for s in &traj.samples {
        let (_, _, h) = energies(spec, &s.q, &s.v)?;
        worst = worst.max(((h - h0) / h0).abs().to_f64());
    }
    Ok(worst)
}

fn position_errors<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    traj: &Trajectory<R>,
    renorm: RenormKind,
) -> Result<PositionErrors> {
    let times: Vec<f64> = traj.samples[1..].iter().map(|s| s.t.to_f64()).collect();
    let reference = reference_solution(spec, state0, &times)?;
    let rows = traj.samples[1..]
        .iter()
        .zip(&reference)
        .map(|(s, r)| {
            let errs =
                s.q.iter()
                    .zip(&r.q)
                    .map(|(&a, &b)| (a - b).norm().to_f64())
                    .collect();
            (s.t.to_f64(), errs)
        })
        .collect();
    Ok(PositionErrors { renorm, rows })
}

/// The full step-matched comparison: adaptive RK9(8) in physical time sets
/// the step count n; each renormalization is then integrated with the same
/// scheme at constant dtau = T_j / n over the same physical interval, with
/// energy and position errors measured against the Taylor reference.
pub fn compare<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    t_end: f64,
    choices: &[RenormChoice],
    rtol: f64,
    atol: f64,
) -> Result<CompareOutput> {
    let tableau = verner98();

    // Baseline: adaptive physical-time integration.
    let start = Instant::now();
    let baseline = integrate(
        spec,
        RenormChoice::of(RenormKind::S0),
        state0,
        &IntegratorConfig {
            mode: Mode::RkAdaptive {
                rtol,
                atol,
                tableau,
            },
            span: Span::PhysicalEnd(t_end),
            output_stride: 1,
        },
    )?;
    let baseline_wall = start.elapsed().as_secs_f64();
    let n = baseline.accepted;

    // The baseline row's strip width is the physical-time one: minimum
    // radius of the physical expansion along its samples.
    let mut s0_width = f64::INFINITY;
    for sample in &baseline.samples {
        let bundle = taylor_coeffs(spec, sample, JET_ORDER, JetMode::Physical)?;
        s0_width = s0_width.min(radius_estimate(&bundle)?.rho);
    }
    let mut rows = vec![ReportRow {
        renorm: RenormKind::S0,
        width: s0_width,
        scaled_width: s0_width,
        max_rel_energy_error: max_rel_energy_error(spec, state0, &baseline)?,
        steps: n,
        wall_secs: baseline_wall,
        t_end_deviation: (baseline.final_state().t.to_f64() - t_end).abs(),
    }];
    let mut errors = vec![position_errors(spec, state0, &baseline, RenormKind::S0)?];

    // One worker per renormalization choice; each probes T_j and the strip
    // with constant-step Taylor, then runs the step-matched constant-step
    // RK integration.
    let results: Vec<Result<(ReportRow, PositionErrors)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = choices
            .iter()
            .map(|&choice| {
                scope.spawn(move || -> Result<(ReportRow, PositionErrors)> {
                    let start = Instant::now();
                    let probe = strip_width(spec, choice, state0, t_end, default_dtau())?;
                    let dtau = probe.t_j / n as f64;
                    let traj = integrate(
                        spec,
                        choice,
                        state0,
                        &IntegratorConfig {
                            mode: Mode::RkConst { dtau, tableau },
                            span: Span::FictitiousEnd(probe.t_j),
                            output_stride: 1,
                        },
                    )?;
                    let t_final = traj.final_state().t.to_f64();
                    let row = ReportRow {
                        renorm: choice.kind,
                        width: probe.width,
                        scaled_width: probe.scaled_width,
                        max_rel_energy_error: max_rel_energy_error(spec, state0, &traj)?,
                        steps: traj.accepted,
                        wall_secs: start.elapsed().as_secs_f64(),
                        t_end_deviation: (t_final - t_end).abs(),
                    };
                    let errs = position_errors(spec, state0, &traj, choice.kind)?;
                    Ok((row, errs))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });
    for r in results {
        let (row, errs) = r?;
        rows.push(row);
        errors.push(errs);
    }

    Ok(CompareOutput {
        rows,
        position_errors: errors,
        baseline_steps: n,
    })
}

/// Write scan rows as CSV (shortest round-trip decimals, deterministic).
pub fn write_scan_csv<W: Write>(mut out: W, rows: &[ScanRow]) -> Result<()> {
    writeln!(out, "t,tau,rho,radius_lower,product")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.tau, r.rho, r.radius_lower, r.product
        )?;
    }
    Ok(())
}

/// Write per-sample position errors as CSV: t, then one column per body.
pub fn write_position_errors_csv<W: Write>(mut out: W, errs: &PositionErrors) -> Result<()> {
    let bodies = errs.rows.first().map(|(_, e)| e.len()).unwrap_or(0);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..bodies).map(|i| format!("q{i}_err")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, per_body) in &errs.rows {
        let mut line = t.to_string();
        for e in per_body {
            line.push(',');
            line.push_str(&e.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}


/// Reference ("gold") radius checks used when tuning the estimator: the
/// K = 30 binary64 estimates are compared against order-60 double-double
/// expansions at states where the estimate is hardest (interference dips
/// of the strip scans, transition zones after encounters). Run with
/// --ignored; kept as a regression harness for estimator changes.
#[cfg(test)]
mod estimator_gold_checks {
    use super::*;
    use crate::dd::DoubleDouble as Dd;
    use crate::problem::{gen_binary_visitor, gen_pythagorean};

    fn to_dd(state: &PhaseState<f64>) -> PhaseState<Dd> {
        PhaseState::new(
            state
                .q
                .iter()
                .map(|q| crate::vec3::Vec3([Dd::from(q[0]), Dd::from(q[1]), Dd::from(q[2])]))
                .collect(),
            state
                .v
                .iter()
                .map(|v| crate::vec3::Vec3([Dd::from(v[0]), Dd::from(v[1]), Dd::from(v[2])]))
                .collect(),
        )
    }

    #[test]
    #[ignore]
    fn binary_visitor_dip_estimates_track_gold() {
        let (spec, state0, t_end) = gen_binary_visitor(100.0).unwrap().build::<f64>().unwrap();
        let spec_dd = SystemSpec::new(
            Dd::from(1.0),
            vec![Dd::from(2.0), Dd::from(1.0), Dd::from(0.02)],
        )
        .unwrap();
        let choice = RenormChoice::of(RenormKind::S1);
        let traj = integrate(
            &spec,
            choice,
            &state0,
            &IntegratorConfig {
                mode: Mode::TaylorConst {
                    dtau: 0.002,
                    order: JET_ORDER,
                },
                span: Span::PhysicalEnd(t_end),
                output_stride: 1,
            },
        )
        .unwrap();
        let mut rhos: Vec<(usize, f64)> = traj
            .samples
            .iter()
            .enumerate()
            .map(|(i, smp)| {
                let b =
                    taylor_coeffs(&spec, smp, JET_ORDER, JetMode::Renormalized(choice)).unwrap();
                (i, radius_estimate(&b).unwrap().rho)
            })
            .collect();
        rhos.sort_by(|a, b| a.1.total_cmp(&b.1));
        for &(idx, rho30) in rhos.iter().take(4) {
            let gold = radius_estimate(
                &taylor_coeffs(
                    &spec_dd,
                    &to_dd(&traj.samples[idx]),
                    60,
                    JetMode::Renormalized(choice),
                )
                .unwrap(),
            )
            .unwrap()
            .rho;
            let rel = (rho30 / gold - 1.0).abs();
            println!(
                "dip t = {:.5}: K30 {rho30:.4} vs K60dd {gold:.4} ({:+.1}%)",
                traj.samples[idx].t,
                (rho30 / gold - 1.0) * 100.0
            );
            assert!(rel < 0.15, "dip estimate {rho30} strays from gold {gold}");
        }
    }

    #[test]
    #[ignore]
    fn pythagorean_peak_estimates_track_gold() {
        let (spec, state0, _) = gen_pythagorean().build::<f64>().unwrap();
        let spec_dd = SystemSpec::new(
            Dd::from(1.0),
            vec![Dd::from(5.0), Dd::from(4.0), Dd::from(3.0)],
        )
        .unwrap();
        let choice = RenormChoice::of(RenormKind::S1);
        let traj = integrate(
            &spec,
            choice,
            &state0,
            &IntegratorConfig {
                mode: Mode::TaylorConst {
                    dtau: default_dtau(),
                    order: JET_ORDER,
                },
                span: Span::PhysicalEnd(63.0),
                output_stride: 1,
            },
        )
        .unwrap();
        for target in [36.2206f64, 40.5863, 17.0069, 14.6233] {
            let smp = traj
                .samples
                .iter()
                .min_by(|a, b| (a.t - target).abs().total_cmp(&(b.t - target).abs()))
                .unwrap();
            let rho30 =
                radius_estimate(&taylor_coeffs(&spec, smp, JET_ORDER, JetMode::Physical).unwrap())
                    .unwrap()
                    .rho;
            let gold = radius_estimate(
                &taylor_coeffs(&spec_dd, &to_dd(smp), 60, JetMode::Physical).unwrap(),
            )
            .unwrap()
            .rho;
            let rel = (rho30 / gold - 1.0).abs();
            println!(
                "peak t = {:.4}: K30 {rho30:.5} vs K60dd {gold:.5} ({:+.1}%)",
                smp.t,
                (rho30 / gold - 1.0) * 100.0
            );
            assert!(rel < 0.10, "peak estimate {rho30} strays from gold {gold}");
        }
    }
}
