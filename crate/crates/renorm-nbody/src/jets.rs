//! Taylor-coefficient generation for the N-body vector fields.
//!
//! Coefficients are produced order by order: given jets of (q, v) through
//! order k, the right-hand side is evaluated in truncated-series arithmetic
//! at order k and integrated termwise to order k+1. The pairwise kernels
//! (r^2, r^-3, ...) are the same ones the point evaluations use, propagated
//! through the power-series recurrences; there is no symbolic
//! differentiation and no external AD.

use crate::dynamics::{PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::renorm::{RenormChoice, RenormKind};
use crate::scalar::Real;
use crate::series::{
    conv_at, pow_next, powf_leading, radius_from_norms, PowerSeries, RadiusEstimate,
};
use crate::vec3::Vec3;

/// Expansion variable of a bundle: physical time t, or fictitious time tau
/// under a renormalization choice.
#[derive(Clone, Copy, Debug)]
pub enum JetMode {
    Physical,
    Renormalized(RenormChoice),
}

/// Per-component truncated series of the full state about one expansion
/// point; in tau-mode the physical-time series t(tau) rides along.
#[derive(Clone, Debug)]
pub struct SeriesBundle<R: Real> {
    order: usize,
    q: Vec<[PowerSeries<R>; 3]>,
    v: Vec<[PowerSeries<R>; 3]>,
    t: Option<PowerSeries<R>>,
}

impl<R: Real> SeriesBundle<R> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_bodies(&self) -> usize {
        self.q.len()
    }

    pub fn q_series(&self, body: usize) -> &[PowerSeries<R>; 3] {
        &self.q[body]
    }

    pub fn v_series(&self, body: usize) -> &[PowerSeries<R>; 3] {
        &self.v[body]
    }

    /// Physical-time series t(tau); present only in tau-mode.
    pub fn t_series(&self) -> Option<&PowerSeries<R>> {
        self.t.as_ref()
    }

    /// Evaluate positions and velocities at offset h from the expansion
    /// point (h in t or tau depending on mode).
    pub fn eval(&self, h: R) -> (Vec<Vec3<R>>, Vec<Vec3<R>>) {
        let eval3 = |s: &[PowerSeries<R>; 3]| Vec3([s[0].eval(h), s[1].eval(h), s[2].eval(h)]);
        (
            self.q.iter().map(eval3).collect(),
            self.v.iter().map(eval3).collect(),
        )
    }

    /// Max-norm over all position/velocity components of the order-k
    /// coefficients, k = 0..=K. The t(tau) series is excluded: the radius
    /// of interest is that of the state itself.
    pub fn order_norms(&self) -> Vec<f64> {
        let mut d = vec![0.0f64; self.order + 1];
        for series in self.q.iter().chain(self.v.iter()) {
            for comp in series {
                for (k, dk) in d.iter_mut().enumerate() {
                    *dk = dk.max(comp.coeff(k).abs().to_f64());
                }
            }
        }
        d
    }
}

/// Estimate the radius of convergence of a bundle from its coefficient
/// decay. Requires order >= 10.
pub fn radius_estimate<R: Real>(bundle: &SeriesBundle<R>) -> Result<RadiusEstimate> {
    radius_from_norms(&bundle.order_norms())
}

/// Scratch space for one pair (i, j): difference jets and the derived
/// kernels, each a coefficient vector filled progressively.
struct PairWork<R> {
    i: usize,
    j: usize,
    dq: [Vec<R>; 3],
    dv: [Vec<R>; 3],
    r2: Vec<R>,
    /// r^{-3} = (r2)^{-3/2}
    rm3: Vec<R>,
    /// r^{-2}
    r2inv: Vec<R>,
    /// r^{-1}
    rinv: Vec<R>,
    /// |v_i - v_j|^2
    w2: Vec<R>,
}

/// Generate the order-K Taylor coefficients of the solution through the
/// given state.
pub fn taylor_coeffs<R: Real>(
    spec: &SystemSpec<R>,
    state: &PhaseState<R>,
    order: usize,
    mode: JetMode,
) -> Result<SeriesBundle<R>> {
    if order < 2 {
        return Err(Error::Config(format!(
            "jet order must be at least 2, got {order}"
        )));
    }
    let n = state.q.len();
    let gm = spec.gm();
    let len = order + 1;
    let zero = || vec![R::zero(); len];

    let kind = match mode {
        JetMode::Physical => None,
        JetMode::Renormalized(choice) => {
            choice.validate()?;
            Some(choice)
        }
    };
    let needs_s = kind.map(|c| c.kind != RenormKind::S0).unwrap_or(false);
    let s_kind = kind.map(|c| c.kind);
    let kappa = R::from_f64(kind.map(|c| c.kappa).unwrap_or(1.0));

    // State jets.
    let mut q: Vec<[Vec<R>; 3]> = (0..n).map(|_| [zero(), zero(), zero()]).collect();
    let mut v: Vec<[Vec<R>; 3]> = (0..n).map(|_| [zero(), zero(), zero()]).collect();
    for b in 0..n {
        for c in 0..3 {
            q[b][c][0] = state.q[b][c];
            v[b][c][0] = state.v[b][c];
        }
    }

    let mut pairs: Vec<PairWork<R>> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(PairWork {
                i,
                j,
                dq: [zero(), zero(), zero()],
                dv: [zero(), zero(), zero()],
                r2: zero(),
                rm3: zero(),
                r2inv: zero(),
                rinv: zero(),
                w2: zero(),
            });
        }
    }

    let mut g: Vec<[Vec<R>; 3]> = (0..n).map(|_| [zero(), zero(), zero()]).collect();
    // K_i jets, only assembled for s_1.
    let needs_k = s_kind == Some(RenormKind::S1);
    let needs_r2inv = matches!(
        s_kind,
        Some(RenormKind::S1) | Some(RenormKind::S2) | Some(RenormKind::S3)
    );
    let needs_rinv = matches!(s_kind, Some(RenormKind::S1) | Some(RenormKind::S2));
    let mut k_jets: Vec<Vec<R>> = if needs_k {
        (0..n).map(|_| zero()).collect()
    } else {
        Vec::new()
    };
    // s_2's factor series A = sum 1/r and B = sum G(m_i+m_j)/r^2.
    let needs_ab = s_kind == Some(RenormKind::S2);
    let mut a_sum = if needs_ab { zero() } else { Vec::new() };
    let mut b_sum = if needs_ab { zero() } else { Vec::new() };
    let mut s2inv = if needs_s { zero() } else { Vec::new() };
    let mut s = if needs_s { zero() } else { Vec::new() };

    for k in 0..order {
        // Pair kernels at order k.
        for p in pairs.iter_mut() {
            let (i, j) = (p.i, p.j);
            for c in 0..3 {
                p.dq[c][k] = q[j][c][k] - q[i][c][k];
                p.dv[c][k] = v[j][c][k] - v[i][c][k];
            }
            p.r2[k] = conv_at(&p.dq[0], &p.dq[0], k)
                + conv_at(&p.dq[1], &p.dq[1], k)
                + conv_at(&p.dq[2], &p.dq[2], k);
            if k == 0 {
                spec.check_separation(i, j, p.r2[0])?;
                p.rm3[0] = powf_leading(p.r2[0], -1.5);
            } else {
                p.rm3[k] = pow_next(&p.r2, &p.rm3, -1.5, k);
            }
            if needs_r2inv {
                if k == 0 {
                    p.r2inv[0] = p.r2[0].recip();
                } else {
                    p.r2inv[k] = pow_next(&p.r2, &p.r2inv, -1.0, k);
                }
                p.w2[k] = conv_at(&p.dv[0], &p.dv[0], k)
                    + conv_at(&p.dv[1], &p.dv[1], k)
                    + conv_at(&p.dv[2], &p.dv[2], k);
            }
            if needs_rinv {
                if k == 0 {
                    p.rinv[0] = p.r2[0].sqrt().recip();
                } else {
                    p.rinv[k] = pow_next(&p.r2, &p.rinv, -0.5, k);
                }
            }
        }

        // Accelerations at order k.
        for p in pairs.iter() {
            let (i, j) = (p.i, p.j);
            for c in 0..3 {
                let kernel = conv_at(&p.rm3, &p.dq[c], k);
                g[i][c][k] += gm[j] * kernel;
                g[j][c][k] -= gm[i] * kernel;
            }
        }

        if needs_k {
            for p in pairs.iter() {
                k_jets[p.i][k] += gm[p.j] * p.r2inv[k];
                k_jets[p.j][k] += gm[p.i] * p.r2inv[k];
            }
        }
        if needs_ab {
            for p in pairs.iter() {
                a_sum[k] += p.rinv[k];
                b_sum[k] += (gm[p.i] + gm[p.j]) * p.r2inv[k];
            }
        }

        // s(q, v) jet at order k.
        if needs_s {
            let mut acc = R::zero();
            match s_kind.unwrap() {
                RenormKind::S1 => {
                    for p in pairs.iter() {
                        acc += conv_at(&p.w2, &p.r2inv, k);
                        // (K_i + K_j) / r convolved directly from the body jets.
                        let (ki, kj) = (&k_jets[p.i], &k_jets[p.j]);
                        for m in 0..=k {
                            acc += (ki[m] + kj[m]) * p.rinv[k - m];
                        }
                    }
                }
                RenormKind::S2 => {
                    for p in pairs.iter() {
                        acc += conv_at(&p.w2, &p.r2inv, k);
                    }
                    acc += conv_at(&a_sum, &b_sum, k);
                }
                RenormKind::S3 => {
                    for p in pairs.iter() {
                        acc += kappa * conv_at(&p.w2, &p.r2inv, k);
                        acc += (gm[p.i] + gm[p.j]) * p.rm3[k];
                    }
                }
                RenormKind::S4 => {
                    for p in pairs.iter() {
                        acc += (gm[p.i] + gm[p.j]) * p.rm3[k];
                    }
                }
                RenormKind::S0 => unreachable!(),
            }
            s2inv[k] = acc;
            if k == 0 {
                if !(s2inv[0] > R::zero()) || !s2inv[0].is_finite() {
                    return Err(Error::domain(
                        "renormalization sum is not positive at the expansion point",
                    ));
                }
                s[0] = powf_leading(s2inv[0], -0.5);
            } else {
                s[k] = pow_next(&s2inv, &s, -0.5, k);
            }
        }

        // Integrate termwise: order k of the RHS becomes order k+1 of the
        // state.
        let divisor = R::from_usize(k + 1);
        for b in 0..n {
            for c in 0..3 {
                let (dq, dv) = if needs_s {
                    (conv_at(&s, &v[b][c], k), conv_at(&s, &g[b][c], k))
                } else {
                    (v[b][c][k], g[b][c][k])
                };
                q[b][c][k + 1] = dq / divisor;
                v[b][c][k + 1] = dv / divisor;
            }
        }
    }

    let t = match kind {
        None => None,
        Some(choice) => {
            let mut tser = vec![R::zero(); len];
            tser[0] = state.t;
            if choice.kind == RenormKind::S0 {
                tser[1] = R::one();
            } else {
                for k in 0..order {
                    tser[k + 1] = s[k] / R::from_usize(k + 1);
                }
            }
            Some(PowerSeries::new(tser))
        }
    };

    Ok(SeriesBundle {
        order,
        q: q.into_iter()
            .map(|[a, b, c]| {
                [
                    PowerSeries::new(a),
                    PowerSeries::new(b),
                    PowerSeries::new(c),
                ]
            })
            .collect(),
        v: v.into_iter()
            .map(|[a, b, c]| {
                [
                    PowerSeries::new(a),
                    PowerSeries::new(b),
                    PowerSeries::new(c),
                ]
            })
            .collect(),
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{accelerations, SystemSpec};
    use crate::renorm::{renormalized_rhs, RenormChoice, RenormKind};

    fn unit_two_body_at_rest() -> (SystemSpec<f64>, PhaseState<f64>) {
        let spec = SystemSpec::new(1.0, vec![1.0, 1.0]).unwrap();
        let state = PhaseState::new(
            vec![Vec3::zero(), Vec3::from_f64([1.0, 0.0, 0.0])],
            vec![Vec3::zero(), Vec3::zero()],
        );
        (spec, state)
    }

    /// Circular orbit with angular rate 1: separation 1, total mass 1.
    fn circular_orbit() -> (SystemSpec<f64>, PhaseState<f64>) {
        let spec = SystemSpec::new(1.0, vec![0.5, 0.5]).unwrap();
        let state = PhaseState::new(
            vec![
                Vec3::from_f64([0.5, 0.0, 0.0]),
                Vec3::from_f64([-0.5, 0.0, 0.0]),
            ],
            vec![
                Vec3::from_f64([0.0, 0.5, 0.0]),
                Vec3::from_f64([0.0, -0.5, 0.0]),
            ],
        );
        (spec, state)
    }

    #[test]
    fn physical_two_body_leading_orders() {
        let (spec, state) = unit_two_body_at_rest();
        let bundle = taylor_coeffs(&spec, &state, 6, JetMode::Physical).unwrap();
        // q''_0 = g_0 = (1, 0, 0): x-series starts (0, 0, 1/2, 0, ...).
        let x = &bundle.q_series(0)[0];
        assert_eq!(x.coeff(0), 0.0);
        assert_eq!(x.coeff(1), 0.0);
        assert!((x.coeff(2) - 0.5).abs() < 1e-15);
        assert!(x.coeff(3).abs() < 1e-15);
        assert!(bundle.t_series().is_none());
    }

    #[test]
    fn s0_bundle_is_physical_bundle_plus_unit_time_series() {
        let (spec, state) = circular_orbit();
        let phys = taylor_coeffs(&spec, &state, 12, JetMode::Physical).unwrap();
        let s0 = taylor_coeffs(
            &spec,
            &state,
            12,
            JetMode::Renormalized(RenormChoice::of(RenormKind::S0)),
        )
        .unwrap();
        for b in 0..2 {
            for c in 0..3 {
                assert_eq!(
                    phys.q_series(b)[c].coefficients(),
                    s0.q_series(b)[c].coefficients()
                );
                assert_eq!(
                    phys.v_series(b)[c].coefficients(),
                    s0.v_series(b)[c].coefficients()
                );
            }
        }
        let t = s0.t_series().unwrap();
        assert_eq!(t.coeff(0), 0.0);
        assert_eq!(t.coeff(1), 1.0);
        for k in 2..=12 {
            assert_eq!(t.coeff(k), 0.0);
        }
    }

    #[test]
    fn circular_orbit_matches_cos_sin_jets() {
        let (spec, state) = circular_orbit();
        let bundle = taylor_coeffs(&spec, &state, 10, JetMode::Physical).unwrap();
        // q_0 = (cos t, sin t, 0) / 2 with angular rate 1.
        let mut factorial = 1.0f64;
        for k in 0..=10 {
            if k > 0 {
                factorial *= k as f64;
            }
            let (cx, sx) = match k % 4 {
                0 => (0.5 / factorial, 0.0),
                1 => (0.0, 0.5 / factorial),
                2 => (-0.5 / factorial, 0.0),
                _ => (0.0, -0.5 / factorial),
            };
            assert!((bundle.q_series(0)[0].coeff(k) - cx).abs() < 1e-12);
            assert!((bundle.q_series(0)[1].coeff(k) - sx).abs() < 1e-12);
        }
    }

    #[test]
    fn termwise_integration_inverts_to_the_rhs() {
        // Differentiating the generated jets must reproduce the RHS
        // evaluated on them; checked against the plain whole-series
        // arithmetic rather than the incremental kernels.
        let spec = SystemSpec::new(1.0, vec![5.0, 4.0, 3.0]).unwrap();
        let state = PhaseState::new(
            vec![
                Vec3::from_f64([1.0, -1.0, 0.0]),
                Vec3::from_f64([-2.0, -1.0, 0.25]),
                Vec3::from_f64([1.0, 3.0, -0.5]),
            ],
            vec![
                Vec3::from_f64([0.2, 0.0, -0.1]),
                Vec3::from_f64([0.0, -0.3, 0.4]),
                Vec3::from_f64([-0.25, 0.4, 0.0]),
            ],
        );
        let choice = RenormChoice::of(RenormKind::S1);
        let order = 8;
        let bundle = taylor_coeffs(&spec, &state, order, JetMode::Renormalized(choice)).unwrap();

        // Rebuild s(q, v) as a series with PowerSeries operations only.
        let q0 = bundle.q_series(0).clone();
        let series_of = |b: usize, c: usize| bundle.q_series(b)[c].clone();
        let vel_of = |b: usize, c: usize| bundle.v_series(b)[c].clone();
        let mut inv_s2 = PowerSeries::constant(0.0, order);
        let gm = spec.gm();
        let mut k_jet: Vec<PowerSeries<f64>> =
            (0..3).map(|_| PowerSeries::constant(0.0, order)).collect();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dq: Vec<_> = (0..3)
                    .map(|c| series_of(j, c).sub(&series_of(i, c)))
                    .collect();
                let dv: Vec<_> = (0..3).map(|c| vel_of(j, c).sub(&vel_of(i, c))).collect();
                let r2 = dq[0]
                    .mul(&dq[0])
                    .add(&dq[1].mul(&dq[1]))
                    .add(&dq[2].mul(&dq[2]));
                let w2 = dv[0]
                    .mul(&dv[0])
                    .add(&dv[1].mul(&dv[1]))
                    .add(&dv[2].mul(&dv[2]));
                let r2inv = r2.powf(-1.0).unwrap();
                inv_s2 = inv_s2.add(&w2.mul(&r2inv));
                k_jet[i] = k_jet[i].add(&r2inv.scale(gm[j]));
                k_jet[j] = k_jet[j].add(&r2inv.scale(gm[i]));
            }
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dq: Vec<_> = (0..3)
                    .map(|c| series_of(j, c).sub(&series_of(i, c)))
                    .collect();
                let r2 = dq[0]
                    .mul(&dq[0])
                    .add(&dq[1].mul(&dq[1]))
                    .add(&dq[2].mul(&dq[2]));
                let rinv = r2.powf(-0.5).unwrap();
                inv_s2 = inv_s2.add(&k_jet[i].add(&k_jet[j]).mul(&rinv));
            }
        }
        let s = inv_s2.powf(-0.5).unwrap();

        // dq_0x/dtau = s * v_0x termwise.
        let want = s.mul(&vel_of(0, 0));
        for k in 0..order {
            let got = (k + 1) as f64 * q0[0].coeff(k + 1);
            let w = want.coeff(k);
            assert!(
                (got - w).abs() <= 1e-13 * (1.0 + w.abs()),
                "order {k}: {got} vs {w}"
            );
        }
        // And the t(tau) series derivative is the s jet itself.
        let t = bundle.t_series().unwrap();
        for k in 0..order {
            let got = (k + 1) as f64 * t.coeff(k + 1);
            assert!((got - s.coeff(k)).abs() <= 1e-13 * (1.0 + s.coeff(k).abs()));
        }
        // First derivative coefficients agree with the point RHS.
        let rhs = renormalized_rhs(choice, &spec, &state).unwrap();
        assert!((q0[0].coeff(1) - rhs.dq[0][0]).abs() < 1e-14);
    }

    #[test]
    fn jet_derivative_matches_finite_differences() {
        let (spec, state) = circular_orbit();
        let bundle = taylor_coeffs(&spec, &state, 20, JetMode::Physical).unwrap();
        let x = &bundle.q_series(0)[0];
        let dx = x.derivative();
        let h = 1e-4;
        let fd = (x.eval(h) - x.eval(-h)) / (2.0 * h);
        assert!((fd - dx.eval(0.0)).abs() < 5.0 * h * h);
    }

    #[test]
    fn free_fall_radius_matches_collision_time() {
        // Free fall from rest: rho = (pi/2) sqrt(r^3 / (2 mu)) = pi/4 here.
        let (spec, state) = unit_two_body_at_rest();
        let bundle = taylor_coeffs(&spec, &state, 30, JetMode::Physical).unwrap();
        let est = radius_estimate(&bundle).unwrap();
        let want = std::f64::consts::PI / 4.0;
        assert!(
            (est.rho / want - 1.0).abs() < 0.02,
            "rho = {}, want {} within 2%",
            est.rho,
            want
        );
    }

    #[test]
    fn radius_scale_covariance() {
        let spec = SystemSpec::new(1.0, vec![5.0, 4.0, 3.0]).unwrap();
        let state = PhaseState::new(
            vec![
                Vec3::from_f64([1.0, -1.0, 0.0]),
                Vec3::from_f64([-2.0, -1.0, 0.0]),
                Vec3::from_f64([1.0, 3.0, 0.0]),
            ],
            vec![
                Vec3::from_f64([0.1, 0.3, 0.0]),
                Vec3::from_f64([-0.2, 0.0, 0.1]),
                Vec3::from_f64([0.0, -0.4, -0.1]),
            ],
        );
        let base = radius_estimate(&taylor_coeffs(&spec, &state, 30, JetMode::Physical).unwrap())
            .unwrap()
            .rho;
        for nu in [0.05f64, 20.0] {
            let scaled = PhaseState::new(
                state.q.iter().map(|&x| x * nu.powf(-2.0 / 3.0)).collect(),
                state.v.iter().map(|&x| x * nu.powf(1.0 / 3.0)).collect(),
            );
            let rho =
                radius_estimate(&taylor_coeffs(&spec, &scaled, 30, JetMode::Physical).unwrap())
                    .unwrap()
                    .rho;
            assert!(
                (rho * nu / base - 1.0).abs() < 0.05,
                "nu = {nu}: {rho} vs {base}"
            );
        }
    }

    #[test]
    fn eval_advances_the_state() {
        let (spec, state) = circular_orbit();
        let bundle = taylor_coeffs(&spec, &state, 20, JetMode::Physical).unwrap();
        let h = 0.1;
        let (q, v) = bundle.eval(h);
        assert!((q[0][0] - 0.5 * h.cos()).abs() < 1e-14);
        assert!((q[0][1] - 0.5 * h.sin()).abs() < 1e-14);
        assert!((v[0][0] + 0.5 * h.sin()).abs() < 1e-14);
        assert!((v[0][1] - 0.5 * h.cos()).abs() < 1e-14);
    }

    #[test]
    fn acceleration_jets_match_point_values() {
        let spec = SystemSpec::new(1.0, vec![5.0, 4.0, 3.0]).unwrap();
        let state = PhaseState::new(
            vec![
                Vec3::from_f64([1.0, -1.0, 0.0]),
                Vec3::from_f64([-2.0, -1.0, 0.0]),
                Vec3::from_f64([1.0, 3.0, 0.0]),
            ],
            vec![Vec3::zero(); 3],
        );
        let bundle = taylor_coeffs(&spec, &state, 4, JetMode::Physical).unwrap();
        let g = accelerations(&spec, &state.q).unwrap();
        for b in 0..3 {
            for c in 0..3 {
                // v' = g: first-order velocity coefficient.
                assert!((bundle.v_series(b)[c].coeff(1) - g[b][c]).abs() < 1e-14);
                // q'' = g/2.
                assert!((bundle.q_series(b)[c].coeff(2) - 0.5 * g[b][c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn low_order_rejected() {
        let (spec, state) = unit_two_body_at_rest();
        assert!(taylor_coeffs(&spec, &state, 1, JetMode::Physical).is_err());
    }
}
