//! Time-renormalization functions s_0..s_4 and the renormalized vector
//! field in fictitious time.
//!
//! With s = s(q, v) the system in tau reads
//!   dq_i/dtau = s v_i,  dv_i/dtau = s g_i(q),  dt/dtau = s,
//! so s_0 = 1 recovers the physical-time equations.

use crate::dynamics::{accelerations, PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenormKind {
    S0,
    S1,
    S2,
    S3,
    S4,
}

impl RenormKind {
    pub const ALL: [RenormKind; 5] = [
        RenormKind::S0,
        RenormKind::S1,
        RenormKind::S2,
        RenormKind::S3,
        RenormKind::S4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RenormKind::S0 => "s0",
            RenormKind::S1 => "s1",
            RenormKind::S2 => "s2",
            RenormKind::S3 => "s3",
            RenormKind::S4 => "s4",
        }
    }
}

impl fmt::Display for RenormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which time-renormalization function is active, plus its parameters.
/// `kappa` is used by s_3 only (default 1); s_4 is velocity-independent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RenormChoice {
    pub kind: RenormKind,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl RenormChoice {
    pub fn new(kind: RenormKind, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invariant("kappa must be finite and > 0"));
        }
        Ok(RenormChoice { kind, kappa })
    }

    pub fn of(kind: RenormKind) -> Self {
        RenormChoice { kind, kappa: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invariant("kappa must be finite and > 0"));
        }
        Ok(())
    }
}

impl FromStr for RenormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s0" => Ok(RenormKind::S0),
            "s1" => Ok(RenormKind::S1),
            "s2" => Ok(RenormKind::S2),
            "s3" => Ok(RenormKind::S3),
            "s4" => Ok(RenormKind::S4),
            other => Err(Error::Parse(format!(
                "unknown renormalization '{other}', expected s0..s4"
            ))),
        }
    }
}

/// The pairwise sums all s_j are assembled from; computed in one fused pass
/// over pairs with one square root per pair.
pub(crate) struct PairSums<R> {
    /// sum over i<j of |v_i - v_j|^2 / r_ij^2
    pub w2_over_r2: R,
    /// sum over i<j of (K_i + K_j) / r_ij
    pub k_over_r: R,
    /// A(q) = sum over i<j of 1 / r_ij
    pub inv_r: R,
    /// sum over i<j of G (m_i + m_j) / r_ij^2
    pub gm_over_r2: R,
    /// sum over i<j of G (m_i + m_j) / r_ij^3
    pub gm_over_r3: R,
}

pub(crate) fn pair_sums<R: Real>(
    spec: &SystemSpec<R>,
    q: &[Vec3<R>],
    v: &[Vec3<R>],
) -> Result<PairSums<R>> {
    let n = q.len();
    let gm = spec.gm();
    let n_pairs = n * (n - 1) / 2;
    let mut inv_r_cache = Vec::with_capacity(n_pairs);
    let mut k = vec![R::zero(); n];
    let mut w2_over_r2 = R::zero();
    let mut inv_r_sum = R::zero();
    let mut gm_over_r2 = R::zero();
    let mut gm_over_r3 = R::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = (q[j] - q[i]).norm2();
            spec.check_separation(i, j, r2)?;
            let inv_r2 = r2.recip();
            let inv_r = r2.sqrt().recip();
            let inv_r3 = inv_r * inv_r2;
            let w2 = (v[j] - v[i]).norm2();
            let gm_pair = gm[i] + gm[j];
            k[i] += gm[j] * inv_r2;
            k[j] += gm[i] * inv_r2;
            w2_over_r2 += w2 * inv_r2;
            inv_r_sum += inv_r;
            gm_over_r2 += gm_pair * inv_r2;
            gm_over_r3 += gm_pair * inv_r3;
            inv_r_cache.push(inv_r);
        }
    }
    // (K_i + K_j)/r_ij needs the complete K's, hence a second sweep over the
    // cached reciprocal distances.
    let mut k_over_r = R::zero();
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            k_over_r += (k[i] + k[j]) * inv_r_cache[idx];
            idx += 1;
        }
    }
    Ok(PairSums {
        w2_over_r2,
        k_over_r,
        inv_r: inv_r_sum,
        gm_over_r2,
        gm_over_r3,
    })
}

/// Evaluate the chosen s(q, v) > 0.
pub fn s_value<R: Real>(
    choice: RenormChoice,
    spec: &SystemSpec<R>,
    q: &[Vec3<R>],
    v: &[Vec3<R>],
) -> Result<R> {
    choice.validate()?;
    if choice.kind == RenormKind::S0 {
        return Ok(R::one());
    }
    let sums = pair_sums(spec, q, v)?;
    let inv_s2 = match choice.kind {
        RenormKind::S0 => unreachable!(),
        RenormKind::S1 => sums.w2_over_r2 + sums.k_over_r,
        RenormKind::S2 => sums.w2_over_r2 + sums.inv_r * sums.gm_over_r2,
        RenormKind::S3 => R::from_f64(choice.kappa) * sums.w2_over_r2 + sums.gm_over_r3,
        RenormKind::S4 => sums.gm_over_r3,
    };
    let s = inv_s2.sqrt().recip();
    if !s.is_finite() || !(s > R::zero()) {
        return Err(Error::domain(format!(
            "renormalization {} is non-finite at this state",
            choice.kind
        )));
    }
    Ok(s)
}

/// Derivatives of (q, v, t) with respect to tau.
#[derive(Clone, Debug)]
pub struct TauDerivatives<R: Real> {
    pub dq: Vec<Vec3<R>>,
    pub dv: Vec<Vec3<R>>,
    pub dt: R,
}

/// Right-hand side of the renormalized system at the given state.
pub fn renormalized_rhs<R: Real>(
    choice: RenormChoice,
    spec: &SystemSpec<R>,
    state: &PhaseState<R>,
) -> Result<TauDerivatives<R>> {
    let s = s_value(choice, spec, &state.q, &state.v)?;
    let g = accelerations(spec, &state.q)?;
    let dq = state.v.iter().map(|&vi| vi * s).collect();
    let dv = g.into_iter().map(|gi| gi * s).collect();
    Ok(TauDerivatives { dq, dv, dt: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemSpec;

    fn unit_two_body_at_rest() -> (SystemSpec<f64>, Vec<Vec3<f64>>, Vec<Vec3<f64>>) {
        let spec = SystemSpec::new(1.0, vec![1.0, 1.0]).unwrap();
        let q = vec![Vec3::zero(), Vec3::from_f64([1.0, 0.0, 0.0])];
        let v = vec![Vec3::zero(), Vec3::zero()];
        (spec, q, v)
    }

    #[test]
    fn s1_unit_two_body_at_rest() {
        let (spec, q, v) = unit_two_body_at_rest();
        let s = s_value(RenormChoice::of(RenormKind::S1), &spec, &q, &v).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn s4_unit_two_body() {
        let (spec, q, v) = unit_two_body_at_rest();
        let s = s_value(RenormChoice::of(RenormKind::S4), &spec, &q, &v).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn s0_is_identity() {
        let (spec, q, v) = unit_two_body_at_rest();
        let s = s_value(RenormChoice::of(RenormKind::S0), &spec, &q, &v).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn rhs_factorizes_through_s() {
        let spec = SystemSpec::new(1.0, vec![5.0, 4.0, 3.0]).unwrap();
        let state = PhaseState::new(
            vec![
                Vec3::from_f64([1.0, -1.0, 0.3]),
                Vec3::from_f64([-2.0, -1.0, -0.1]),
                Vec3::from_f64([1.0, 3.0, 0.2]),
            ],
            vec![
                Vec3::from_f64([0.1, 0.2, -0.4]),
                Vec3::from_f64([-0.3, 0.5, 0.0]),
                Vec3::from_f64([0.2, -0.6, 0.7]),
            ],
        );
        let choice = RenormChoice::of(RenormKind::S3);
        let rhs = renormalized_rhs(choice, &spec, &state).unwrap();
        let s = s_value(choice, &spec, &state.q, &state.v).unwrap();
        let g = accelerations(&spec, &state.q).unwrap();
        assert!((rhs.dt - s).abs() < 1e-16);
        for i in 0..3 {
            assert!((rhs.dq[i] - state.v[i] * s).norm() < 1e-15);
            assert!((rhs.dv[i] - g[i] * s).norm() < 1e-15);
        }
    }

    #[test]
    fn rhs_s1_unit_two_body_at_rest() {
        let (spec, q, v) = unit_two_body_at_rest();
        let state = PhaseState::new(q, v);
        let rhs = renormalized_rhs(RenormChoice::of(RenormKind::S1), &spec, &state).unwrap();
        let inv_sqrt2 = 0.5f64.sqrt();
        assert!((rhs.dt - inv_sqrt2).abs() < 1e-15);
        assert!(rhs.dq[0].norm() == 0.0 && rhs.dq[1].norm() == 0.0);
        assert!((rhs.dv[0] - Vec3::from_f64([inv_sqrt2, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn kappa_must_be_positive() {
        assert!(RenormChoice::new(RenormKind::S3, 0.0).is_err());
        assert!(RenormChoice::new(RenormKind::S3, -1.0).is_err());
        assert!(RenormChoice::new(RenormKind::S3, 2.0).is_ok());
    }

    #[test]
    fn choice_serializes_as_config_schema() {
        let c = RenormChoice::new(RenormKind::S3, 2.5).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"kind":"s3","kappa":2.5}"#);
        let back: RenormChoice = serde_json::from_str(r#"{"kind":"s1"}"#).unwrap();
        assert_eq!(back.kind, RenormKind::S1);
        assert_eq!(back.kappa, 1.0);
    }
}
