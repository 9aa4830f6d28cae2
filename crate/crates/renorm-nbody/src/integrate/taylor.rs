//! Constant-step Taylor integration and the Taylor-based reference
//! solution.

use super::{IntegratorConfig, Span, Trajectory, MAX_STEPS};
use crate::dynamics::{PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::jets::{taylor_coeffs, JetMode, SeriesBundle};
use crate::renorm::RenormChoice;
use crate::scalar::Real;

/// Truncation-tail warning level: a step is flagged when
/// d_K * dtau^K > 1e-3 * |state|_inf.
const TAIL_WARN_FACTOR: f64 = 1e-3;

/// Outcome of one Taylor step.
#[derive(Clone, Debug)]
pub struct TaylorStep<R: Real> {
    pub state: PhaseState<R>,
    /// d_K * h^K, the crude truncation-tail estimate at the step size used.
    pub tail_estimate: f64,
    pub warned: bool,
}

/// One constant step of size dtau: build the local bundle, evaluate it by
/// Horner summation, advance (q, v, t, tau).
pub fn taylor_step<R: Real>(
    spec: &SystemSpec<R>,
    choice: RenormChoice,
    state: &PhaseState<R>,
    dtau: f64,
    order: usize,
) -> Result<TaylorStep<R>> {
    let bundle = taylor_coeffs(spec, state, order, JetMode::Renormalized(choice))?;
    Ok(eval_step(&bundle, state, R::from_f64(dtau)))
}

fn eval_step<R: Real>(bundle: &SeriesBundle<R>, state: &PhaseState<R>, h: R) -> TaylorStep<R> {
    let (q, v) = bundle.eval(h);
    let t = bundle.t_series().map(|s| s.eval(h)).unwrap_or(state.t + h);
    let order = bundle.order();
    let d_last = bundle.order_norms()[order];
    let tail = d_last * h.abs().to_f64().powi(order as i32);
    let scale = state.max_abs().to_f64();
    let next = PhaseState {
        q,
        v,
        t,
        tau: state.tau + h,
    };
    TaylorStep {
        state: next,
        tail_estimate: tail,
        warned: tail > TAIL_WARN_FACTOR * scale.max(f64::MIN_POSITIVE),
    }
}

/// Solve t(h) = t_end on the step's physical-time polynomial by bisection;
/// t is strictly increasing in h (dt/dtau = s > 0).
fn clip_to_physical<R: Real>(bundle: &SeriesBundle<R>, h_max: R, t_end: R) -> R {
    let tser = bundle.t_series().expect("tau-mode bundle has a t series");
    let mut lo = R::zero();
    let mut hi = h_max;
    for _ in 0..200 {
        let mid = (lo + hi) * R::from_f64(0.5);
        if mid == lo || mid == hi {
            break;
        }
        if tser.eval(mid) < t_end {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub(super) fn integrate_taylor<R: Real>(
    spec: &SystemSpec<R>,
    choice: RenormChoice,
    state0: &PhaseState<R>,
    dtau: f64,
    order: usize,
    config: &IntegratorConfig,
) -> Result<Trajectory<R>> {
    let h_full = R::from_f64(dtau);
    let mut state = state0.clone();
    let mut samples = vec![state.clone()];
    let mut accepted = 0usize;
    let mut warnings = 0usize;

    loop {
        if accepted >= MAX_STEPS {
            return Err(Error::MaxSteps(MAX_STEPS));
        }
        // Work out this step's size; the final step is clipped to land on
        // the requested endpoint exactly.
        let bundle = taylor_coeffs(spec, &state, order, JetMode::Renormalized(choice))?;
        let (h, last) = match config.span {
            Span::FictitiousEnd(tau_end) => {
                let remaining = R::from_f64(tau_end) - state.tau;
                // Slack absorbs accumulated tau roundoff so the last step
                // is not followed by a spurious micro-step.
                if remaining <= h_full * R::from_f64(1.0 + 1e-9) {
                    (remaining, true)
                } else {
                    (h_full, false)
                }
            }
            Span::PhysicalEnd(t_end) => {
                let t_end = R::from_f64(t_end);
                let t_next = bundle
                    .t_series()
                    .expect("tau-mode bundle has a t series")
                    .eval(h_full);
                if t_next >= t_end {
                    (clip_to_physical(&bundle, h_full, t_end), true)
                } else {
                    (h_full, false)
                }
            }
        };
        if !(h > R::zero()) {
            break;
        }

        let step = eval_step(&bundle, &state, h);
        state = step.state;
        accepted += 1;
        if step.warned {
            warnings += 1;
        }
        if last {
            samples.push(state.clone());
            break;
        }
        if accepted % config.output_stride == 0 {
            samples.push(state.clone());
        }
    }

    Ok(Trajectory {
        samples,
        accepted,
        rejected: 0,
        tail_warnings: warnings,
    })
}

/// Step-size rule for the reference integrator: from the decay of the top
/// two coefficient norms, aim the truncation tail at the backend roundoff.
fn reference_step<R: Real>(bundle: &SeriesBundle<R>, scale: f64, shrink: f64) -> f64 {
    let norms = bundle.order_norms();
    let order = bundle.order();
    let tol = R::EPSILON * scale.max(1e-300);
    let mut h = f64::INFINITY;
    for k in [order - 1, order] {
        if norms[k] > 0.0 {
            h = h.min((tol / norms[k]).powf(1.0 / k as f64));
        }
    }
    if !h.is_finite() {
        // Constant-ish jets (free bodies): any moderate step is exact.
        h = 1.0;
    }
    0.9 * shrink * h
}

/// Physical-time Taylor reference hitting each requested time exactly.
/// `shrink` scales the internal step (used by the self-convergence test).
pub fn reference_solution<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    times: &[f64],
    shrink: f64,
) -> Result<Vec<PhaseState<R>>> {
    const ORDER: usize = 30;
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("requested times must be increasing".into()));
        }
    }
    if let Some(&first) = times.first() {
        if first < state0.t.to_f64() {
            return Err(Error::Config(
                "requested times start before the initial state".into(),
            ));
        }
    }
    let scale = state0.max_abs().to_f64();
    let mut out = Vec::with_capacity(times.len());
    let mut state = state0.clone();
    let mut steps = 0usize;
    for &target in times {
        let target_r = R::from_f64(target);
        if target_r == state.t {
            out.push(state.clone());
            continue;
        }
        loop {
            if steps >= MAX_STEPS {
                return Err(Error::MaxSteps(MAX_STEPS));
            }
            steps += 1;
            let bundle = taylor_coeffs(spec, &state, ORDER, JetMode::Physical)?;
            let h_nat = reference_step(&bundle, scale, shrink);
            let remaining = (target_r - state.t).to_f64();
            let (h, landed) = if h_nat >= remaining {
                (remaining, true)
            } else {
                (h_nat, false)
            };
            let h = R::from_f64(h);
            let (q, v) = bundle.eval(h);
            state = PhaseState {
                q,
                v,
                t: state.t + h,
                tau: state.tau + h,
            };
            if landed {
                state.t = target_r;
                out.push(state.clone());
                break;
            }
        }
    }
    Ok(out)
}
