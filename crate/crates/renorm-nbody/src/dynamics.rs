//! The gravitational N-body system: accelerations, pairwise quantities and
//! conserved-quantity diagnostics.
//!
//! All pair loops are plain O(N^2) double loops; the systems in scope have at
//! most a few dozen bodies.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Masses, gravitational constant and global constants of one N-body system.
#[derive(Clone, Debug)]
pub struct SystemSpec<R: Real> {
    g: R,
    masses: Vec<R>,
    gm: Vec<R>,
    labels: Option<Vec<String>>,
    collision_floor: R,
}

impl<R: Real> SystemSpec<R> {
    /// Build from masses. Requires at least two bodies, positive masses and
    /// a positive gravitational constant.
    pub fn new(g: R, masses: Vec<R>) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::invariant(format!(
                "need at least 2 bodies, got {}",
                masses.len()
            )));
        }
        if !(g > R::zero()) || !g.is_finite() {
            return Err(Error::invariant("gravitational constant must be > 0"));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m > R::zero()) || !m.is_finite() {
                return Err(Error::invariant(format!("mass of body {i} must be > 0")));
            }
        }
        let gm = masses.iter().map(|&m| g * m).collect();
        Ok(SystemSpec {
            g,
            masses,
            gm,
            labels: None,
            collision_floor: R::zero(),
        })
    }

    /// Build from gravitational parameters GM (ephemeris-style input);
    /// masses are derived as gm/G.
    pub fn from_gm(g: R, gm: Vec<R>) -> Result<Self> {
        if !(g > R::zero()) || !g.is_finite() {
            return Err(Error::invariant("gravitational constant must be > 0"));
        }
        let masses: Vec<R> = gm.iter().map(|&x| x / g).collect();
        let mut spec = Self::new(g, masses)?;
        // Keep the file's gm values exactly rather than re-multiplied ones.
        spec.gm = gm;
        Ok(spec)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_bodies() {
            return Err(Error::invariant("labels length must match body count"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Pairwise separations at or below this floor raise
    /// [`Error::Collision`]. Default 0: only exact coincidence is rejected.
    pub fn with_collision_floor(mut self, floor: R) -> Self {
        self.collision_floor = floor;
        self
    }

    #[inline]
    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    #[inline]
    pub fn grav_const(&self) -> R {
        self.g
    }

    #[inline]
    pub fn masses(&self) -> &[R] {
        &self.masses
    }

    /// Derived gravitational parameters gm_i = G * m_i (read-only).
    #[inline]
    pub fn gm(&self) -> &[R] {
        &self.gm
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn collision_floor(&self) -> R {
        self.collision_floor
    }

    /// Checks one squared separation against the collision floor.
    #[inline]
    pub(crate) fn check_separation(&self, i: usize, j: usize, r2: R) -> Result<()> {
        let floor2 = self.collision_floor * self.collision_floor;
        if r2 < floor2 || r2 == R::zero() {
            return Err(Error::Collision {
                i,
                j,
                separation: r2.to_f64().sqrt(),
                floor: self.collision_floor.to_f64(),
            });
        }
        Ok(())
    }
}

/// Positions, velocities, physical time t and fictitious time tau.
#[derive(Clone, Debug)]
pub struct PhaseState<R: Real> {
    pub q: Vec<Vec3<R>>,
    pub v: Vec<Vec3<R>>,
    pub t: R,
    pub tau: R,
}

impl<R: Real> PhaseState<R> {
    pub fn new(q: Vec<Vec3<R>>, v: Vec<Vec3<R>>) -> Self {
        assert_eq!(q.len(), v.len(), "position/velocity body counts differ");
        PhaseState {
            q,
            v,
            t: R::zero(),
            tau: R::zero(),
        }
    }

    pub fn n_bodies(&self) -> usize {
        self.q.len()
    }

    /// Largest absolute coordinate over positions and velocities.
    pub fn max_abs(&self) -> R {
        let mut m = R::zero();
        for (q, v) in self.q.iter().zip(&self.v) {
            m = m.max(q.max_abs()).max(v.max_abs());
        }
        m
    }
}

/// g_i(q) = sum_{j != i} G m_j (q_j - q_i) / |q_i - q_j|^3.
pub fn accelerations<R: Real>(spec: &SystemSpec<R>, q: &[Vec3<R>]) -> Result<Vec<Vec3<R>>> {
    let n = q.len();
    let gm = spec.gm();
    let mut g = vec![Vec3::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dq = q[j] - q[i];
            let r2 = dq.norm2();
            spec.check_separation(i, j, r2)?;
            let inv_r3 = (r2 * r2.sqrt()).recip();
            g[i] += dq * (gm[j] * inv_r3);
            g[j] -= dq * (gm[i] * inv_r3);
        }
    }
    Ok(g)
}

/// K_i(q) = sum_{j != i} G m_j / |q_i - q_j|^2, all values positive.
pub fn pairwise_k<R: Real>(spec: &SystemSpec<R>, q: &[Vec3<R>]) -> Result<Vec<R>> {
    let n = q.len();
    let gm = spec.gm();
    let mut k = vec![R::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = (q[j] - q[i]).norm2();
            spec.check_separation(i, j, r2)?;
            let inv_r2 = r2.recip();
            k[i] += gm[j] * inv_r2;
            k[j] += gm[i] * inv_r2;
        }
    }
    Ok(k)
}

/// Kinetic energy T, potential energy U and total H = T - U.
pub fn energies<R: Real>(spec: &SystemSpec<R>, q: &[Vec3<R>], v: &[Vec3<R>]) -> Result<(R, R, R)> {
    let n = q.len();
    let m = spec.masses();
    let g = spec.grav_const();
    let half = R::from_f64(0.5);
    let mut kinetic = R::zero();
    for i in 0..n {
        kinetic += half * m[i] * v[i].norm2();
    }
    let mut potential = R::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = (q[j] - q[i]).norm2();
            spec.check_separation(i, j, r2)?;
            potential += g * m[i] * m[j] / r2.sqrt();
        }
    }
    Ok((kinetic, potential, kinetic - potential))
}

/// Minimum pairwise separation and its (0-based) pair, ties broken by
/// lexicographic (i, j).
pub fn min_separation<R: Real>(q: &[Vec3<R>]) -> (R, (usize, usize)) {
    let n = q.len();
    assert!(n >= 2, "min_separation needs at least two bodies");
    let mut best = (q[1] - q[0]).norm2();
    let mut pair = (0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = (q[j] - q[i]).norm2();
            if r2 < best {
                best = r2;
                pair = (i, j);
            }
        }
    }
    (best.sqrt(), pair)
}

/// Total linear momentum sum m_i v_i.
pub fn total_momentum<R: Real>(spec: &SystemSpec<R>, v: &[Vec3<R>]) -> Vec3<R> {
    let mut p = Vec3::zero();
    for (&m, &vi) in spec.masses().iter().zip(v) {
        p += vi * m;
    }
    p
}
