//! Problem definitions: the JSON file schema, ingestion/validation, and
//! the built-in generated problems.

use crate::dynamics::{min_separation, PhaseState, SystemSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One body entry; exactly one of `mass` or `gm` must be present, and a
/// file must use the same convention for every body.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodyEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gm: Option<f64>,
    pub q: [f64; 3],
    pub v: [f64; 3],
}

/// On-disk problem description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub name: String,
    #[serde(default = "default_g")]
    pub g: f64,
    pub bodies: Vec<BodyEntry>,
    /// [0, T]
    pub t_span: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

fn default_g() -> f64 {
    1.0
}

impl ProblemFile {
    pub fn validate(&self) -> Result<()> {
        if self.bodies.len() < 2 {
            return Err(Error::invariant(format!(
                "problem '{}' needs at least 2 bodies, has {}",
                self.name,
                self.bodies.len()
            )));
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::invariant("g must be finite and > 0"));
        }
        if self.t_span[0] != 0.0 {
            return Err(Error::invariant("t_span must start at 0"));
        }
        if !(self.t_span[1] > 0.0) || !self.t_span[1].is_finite() {
            return Err(Error::invariant("t_span end must be finite and > 0"));
        }
        let use_mass = self.bodies[0].mass.is_some();
        for (i, b) in self.bodies.iter().enumerate() {
            match (b.mass, b.gm) {
                (Some(_), Some(_)) => {
                    return Err(Error::invariant(format!(
                        "body {i}: give mass or gm, not both"
                    )))
                }
                (None, None) => {
                    return Err(Error::invariant(format!("body {i}: mass or gm required")))
                }
                (Some(_), None) if !use_mass => {
                    return Err(Error::invariant(
                        "mixing mass- and gm-specified bodies in one file",
                    ))
                }
                (None, Some(_)) if use_mass => {
                    return Err(Error::invariant(
                        "mixing mass- and gm-specified bodies in one file",
                    ))
                }
                _ => {}
            }
            let value = b.mass.or(b.gm).unwrap();
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invariant(format!(
                    "body {i}: mass/gm must be finite and > 0"
                )));
            }
            for x in b.q.iter().chain(b.v.iter()) {
                if !x.is_finite() {
                    return Err(Error::invariant(format!(
                        "body {i}: non-finite state component"
                    )));
                }
            }
        }
        // Outside the collision set.
        let q: Vec<Vec3<f64>> = self.bodies.iter().map(|b| Vec3::from_f64(b.q)).collect();
        let (dmin, pair) = min_separation(&q);
        if !(dmin > 0.0) {
            return Err(Error::invariant(format!(
                "bodies {} and {} coincide",
                pair.0, pair.1
            )));
        }
        Ok(())
    }

    /// Build the runtime system and initial state in the requested scalar.
    pub fn build<R: Real>(&self) -> Result<(SystemSpec<R>, PhaseState<R>, f64)> {
        self.validate()?;
        let g = R::from_f64(self.g);
        let spec = if self.bodies[0].mass.is_some() {
            SystemSpec::new(
                g,
                self.bodies
                    .iter()
                    .map(|b| R::from_f64(b.mass.unwrap()))
                    .collect(),
            )?
        } else {
            SystemSpec::from_gm(
                g,
                self.bodies
                    .iter()
                    .map(|b| R::from_f64(b.gm.unwrap()))
                    .collect(),
            )?
        };
        let spec = if self.bodies.iter().all(|b| b.label.is_some()) {
            spec.with_labels(
                self.bodies
                    .iter()
                    .map(|b| b.label.clone().unwrap())
                    .collect(),
            )?
        } else {
            spec
        };
        let state = PhaseState::new(
            self.bodies.iter().map(|b| Vec3::from_f64(b.q)).collect(),
            self.bodies.iter().map(|b| Vec3::from_f64(b.v)).collect(),
        );
        Ok((spec, state, self.t_span[1]))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("serializing problem: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Load and validate a problem file, reporting parse errors with position
/// context.
pub fn load_problem(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse a problem file from JSON text.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let file: ProblemFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    file.validate()?;
    Ok(file)
}

/// The Pythagorean three-body problem: G m_i = 5, 4, 3 at rest on the
/// vertices of a 3:4:5 right triangle, integrated over t in [0, 63].
pub fn gen_pythagorean() -> ProblemFile {
    ProblemFile {
        name: "pythagorean".into(),
        g: 1.0,
        bodies: vec![
            BodyEntry {
                label: Some("m5".into()),
                mass: Some(5.0),
                gm: None,
                q: [1.0, -1.0, 0.0],
                v: [0.0; 3],
            },
            BodyEntry {
                label: Some("m4".into()),
                mass: Some(4.0),
                gm: None,
                q: [-2.0, -1.0, 0.0],
                v: [0.0; 3],
            },
            BodyEntry {
                label: Some("m3".into()),
                mass: Some(3.0),
                gm: None,
                q: [1.0, 3.0, 0.0],
                v: [0.0; 3],
            },
        ],
        t_span: [0.0, 63.0],
        units: Some("adimensional".into()),
    }
}

/// An eccentric binary (mass ratio 2:1, e = 0.9, a = 10) at pericenter,
/// crossed perpendicularly through its barycenter by a light visitor
/// (1:100 of the primary) at the given speed. Barycentric frame, t in
/// [0, 1].
pub fn gen_binary_visitor(speed: f64) -> Result<ProblemFile> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::Config("visitor speed must be finite and > 0".into()));
    }
    let (m1, m2, m3) = (2.0, 1.0, 0.02);
    let a = 10.0;
    let e = 0.9;
    let mu = m1 + m2; // G = 1
    let r_p = a * (1.0 - e);
    // Vis-viva at pericenter for the relative orbit.
    let w_p = (mu * (1.0 + e) / r_p).sqrt();
    // Binary split about its own barycenter; separation along x, relative
    // velocity along y.
    let q1 = [-(m2 / mu) * r_p, 0.0, 0.0];
    let q2 = [(m1 / mu) * r_p, 0.0, 0.0];
    let v1 = [0.0, -(m2 / mu) * w_p, 0.0];
    let v2 = [0.0, (m1 / mu) * w_p, 0.0];
    // Visitor at the barycenter, crossing the orbital plane.
    let q3 = [0.0, 0.0, 0.0];
    let v3 = [0.0, 0.0, speed];
    // Remove the total momentum the visitor introduced.
    let m_total = m1 + m2 + m3;
    let dv = m3 * speed / m_total;
    let fix = |v: [f64; 3]| [v[0], v[1], v[2] - dv];
    Ok(ProblemFile {
        name: format!("binary-visitor (speed {speed})"),
        g: 1.0,
        bodies: vec![
            BodyEntry {
                label: Some("primary".into()),
                mass: Some(m1),
                gm: None,
                q: q1,
                v: fix(v1),
            },
            BodyEntry {
                label: Some("secondary".into()),
                mass: Some(m2),
                gm: None,
                q: q2,
                v: fix(v2),
            },
            BodyEntry {
                label: Some("visitor".into()),
                mass: Some(m3),
                gm: None,
                q: q3,
                v: fix(v3),
            },
        ],
        t_span: [0.0, 1.0],
        units: Some("adimensional".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{energies, total_momentum};

    #[test]
    fn pythagorean_passes_invariants() {
        let p = gen_pythagorean();
        p.validate().unwrap();
        let (spec, state, t_end) = p.build::<f64>().unwrap();
        assert_eq!(t_end, 63.0);
        let d01 = (state.q[1] - state.q[0]).norm();
        let d02 = (state.q[2] - state.q[0]).norm();
        let d12 = (state.q[2] - state.q[1]).norm();
        assert_eq!((d01, d02, d12), (3.0, 4.0, 5.0));
        let (_, _, h) = energies(&spec, &state.q, &state.v).unwrap();
        let expect = -(20.0 / 3.0 + 15.0 / 4.0 + 12.0 / 5.0);
        assert!((h - expect).abs() < 1e-12);
        assert_eq!(total_momentum(&spec, &state.v).norm(), 0.0);
    }

    #[test]
    fn binary_visitor_geometry() {
        let p = gen_binary_visitor(100.0).unwrap();
        p.validate().unwrap();
        let (spec, state, t_end) = p.build::<f64>().unwrap();
        assert_eq!(t_end, 1.0);
        // Pericenter separation 1, relative speed sqrt(5.7).
        let sep = (state.q[1] - state.q[0]).norm();
        assert!((sep - 1.0).abs() < 1e-14);
        let w = (state.v[1] - state.v[0]).norm();
        assert!((w - 5.7f64.sqrt()).abs() < 1e-12);
        assert!((w - 2.387467).abs() < 1e-6);
        // Visitor sits at the barycenter: 1/3 and 2/3 from the binary.
        assert!(((state.q[2] - state.q[0]).norm() - 1.0 / 3.0).abs() < 1e-14);
        assert!(((state.q[2] - state.q[1]).norm() - 2.0 / 3.0).abs() < 1e-14);
        // Momentum-free frame.
        let p_total = total_momentum(&spec, &state.v).norm();
        assert!(p_total < 1e-14);
        assert!(gen_binary_visitor(0.0).is_err());
    }

    #[test]
    fn round_trip_field_for_field() {
        let p = gen_binary_visitor(50.0).unwrap();
        let dir = std::env::temp_dir();
        let path = dir.join(format!("renorm_nbody_problem_{}.json", std::process::id()));
        p.save(&path).unwrap();
        let back = load_problem(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(p.name, back.name);
        assert_eq!(p.g, back.g);
        assert_eq!(p.t_span, back.t_span);
        assert_eq!(p.units, back.units);
        assert_eq!(p.bodies.len(), back.bodies.len());
        for (a, b) in p.bodies.iter().zip(&back.bodies) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.mass, b.mass);
            assert_eq!(a.gm, b.gm);
            assert_eq!(a.q, b.q);
            assert_eq!(a.v, b.v);
        }
    }

    #[test]
    fn rejects_bad_files() {
        // Coincident bodies.
        let mut p = gen_pythagorean();
        p.bodies[1].q = p.bodies[0].q;
        assert!(matches!(p.validate(), Err(Error::Invariant(_))));

        // Mixing mass and gm.
        let mut p = gen_pythagorean();
        p.bodies[2].mass = None;
        p.bodies[2].gm = Some(3.0);
        assert!(p.validate().is_err());

        // Both on one body.
        let mut p = gen_pythagorean();
        p.bodies[0].gm = Some(5.0);
        assert!(p.validate().is_err());

        // Malformed JSON reports position context.
        let err = parse_problem("{\"name\": ").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }

        // One body only.
        let mut p = gen_pythagorean();
        p.bodies.truncate(1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn solar_system_sample_loads() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../problems/solar_system_sample.json");
        let p = load_problem(&path).unwrap();
        assert_eq!(p.bodies.len(), 9);
        assert_eq!(p.t_span[1], 2000.0);
        let (spec, state, _) = p.build::<f64>().unwrap();
        assert_eq!(spec.n_bodies(), 9);
        // GM ingestion: masses derived as gm / G.
        assert!(spec.masses()[0] > 0.99 && spec.masses()[0] < 1.01);
        assert!(state.q.len() == 9);
    }
}
