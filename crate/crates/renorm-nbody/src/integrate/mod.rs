//! Trajectory integration: constant-step Taylor stepping in fictitious
//! time and a generic explicit embedded Runge-Kutta engine (adaptive and
//! constant-step).

pub mod rk;
pub mod tableau;
pub mod taylor;

pub use tableau::{verner98, ButcherTableau};

use crate::dynamics::{PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::renorm::{RenormChoice, RenormKind};
use crate::scalar::Real;

/// Hard cap on steps (accepted + rejected) per integration.
pub const MAX_STEPS: usize = 10_000_000;

/// Integration mode. Step sizes and tolerances are given in f64 and
/// promoted to the scalar backend internally.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    /// Constant-step Taylor of the given order in the active time variable.
    TaylorConst { dtau: f64, order: usize },
    /// Constant-step embedded RK (the error estimate is recorded, not used
    /// for control).
    RkConst {
        dtau: f64,
        tableau: &'a ButcherTableau,
    },
    /// Adaptive embedded RK with the elementary integral controller.
    RkAdaptive {
        rtol: f64,
        atol: f64,
        tableau: &'a ButcherTableau,
    },
}

/// Where the integration ends: at a fictitious time tau (the natural
/// variable of constant-step runs) or at a physical time t.
#[derive(Clone, Copy, Debug)]
pub enum Span {
    FictitiousEnd(f64),
    PhysicalEnd(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig<'a> {
    pub mode: Mode<'a>,
    pub span: Span,
    /// Record every `output_stride`-th accepted step (the initial and final
    /// states are always recorded).
    pub output_stride: usize,
}

impl IntegratorConfig<'_> {
    fn validate(&self, choice: RenormChoice) -> Result<()> {
        choice.validate()?;
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be >= 1".into()));
        }
        match self.mode {
            Mode::TaylorConst { dtau, order } => {
                if !(dtau > 0.0) {
                    return Err(Error::Config("dtau must be > 0".into()));
                }
                if !(4..=60).contains(&order) {
                    return Err(Error::Config(format!(
                        "Taylor order must be in 4..=60, got {order}"
                    )));
                }
            }
            Mode::RkConst { dtau, .. } => {
                if !(dtau > 0.0) {
                    return Err(Error::Config("dtau must be > 0".into()));
                }
                if matches!(self.span, Span::PhysicalEnd(_)) && choice.kind != RenormKind::S0 {
                    return Err(Error::Config(
                        "constant-step RK can only hit a physical endpoint with s0 \
                         (tau = t); probe the fictitious span first"
                            .into(),
                    ));
                }
            }
            Mode::RkAdaptive { rtol, atol, .. } => {
                if !(rtol > 0.0) || !(atol > 0.0) {
                    return Err(Error::Config("rtol and atol must be > 0".into()));
                }
                if matches!(self.span, Span::PhysicalEnd(_)) && choice.kind != RenormKind::S0 {
                    return Err(Error::Config(
                        "adaptive RK in renormalized time cannot target a physical \
                         endpoint directly"
                            .into(),
                    ));
                }
            }
        }
        match self.span {
            Span::FictitiousEnd(x) | Span::PhysicalEnd(x) => {
                if !(x > 0.0) || !x.is_finite() {
                    return Err(Error::Config("span end must be finite and > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Sampled trajectory with step statistics. Samples carry (tau, t, q, v)
/// inside [`PhaseState`]; per-sample diagnostics (energy, radius
/// estimates, bounds) are recomputed lazily by consumers, which is cheap
/// and keeps the samples plain data.
#[derive(Clone, Debug)]
pub struct Trajectory<R: Real> {
    pub samples: Vec<PhaseState<R>>,
    pub accepted: usize,
    pub rejected: usize,
    /// Steps whose truncation-tail estimate exceeded the warning level.
    pub tail_warnings: usize,
}

impl<R: Real> Trajectory<R> {
    pub fn final_state(&self) -> &PhaseState<R> {
        self.samples.last().expect("trajectory has samples")
    }
}

/// Integrate the renormalized system (choice = s0 recovers physical time)
/// from `state0` to the configured end.
pub fn integrate<R: Real>(
    spec: &SystemSpec<R>,
    choice: RenormChoice,
    state0: &PhaseState<R>,
    config: &IntegratorConfig,
) -> Result<Trajectory<R>> {
    config.validate(choice)?;
    match config.mode {
        Mode::TaylorConst { dtau, order } => {
            taylor::integrate_taylor(spec, choice, state0, dtau, order, config)
        }
        Mode::RkConst { dtau, tableau } => {
            rk::integrate_rk_const(spec, choice, state0, dtau, tableau, config)
        }
        Mode::RkAdaptive {
            rtol,
            atol,
            tableau,
        } => rk::integrate_rk_adaptive(spec, choice, state0, rtol, atol, tableau, config),
    }
}

/// Physical-time reference states at the requested times, from order-30
/// Taylor integration stepping exactly onto each requested t. Serves as
/// the position-error oracle for the step-matched comparisons.
pub fn reference_solution<R: Real>(
    spec: &SystemSpec<R>,
    state0: &PhaseState<R>,
    times: &[f64],
) -> Result<Vec<PhaseState<R>>> {
    taylor::reference_solution(spec, state0, times, 1.0)
}
