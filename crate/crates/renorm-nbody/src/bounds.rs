//! Lower bounds on the radius of convergence of N-body solutions, the
//! auxiliary lambda-functions behind them, the derived constants
//! (lambda_0, lambda_*, beta) and the conformal strip-to-disk map.

use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::renorm::{s_value, RenormChoice, RenormKind};
use crate::scalar::Real;
use crate::vec3::Vec3;
use num_complex::Complex64;
use serde::Serialize;

/// Upper end of the admissible lambda interval, sqrt(2) - 1.
pub const LAMBDA_SUP: f64 = std::f64::consts::SQRT_2 - 1.0;

/// A validated lambda in (0, sqrt(2) - 1), the domain where
/// 1 - 2 lambda - lambda^2 > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lambda(f64);

impl Lambda {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < LAMBDA_SUP {
            Ok(Lambda(value))
        } else {
            Err(Error::domain(format!(
                "lambda must lie in (0, {LAMBDA_SUP}), got {value}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// eta(lambda) = (1 + lambda) / (1 - 2 lambda - lambda^2)^{3/2},
/// monotone increasing on [0, sqrt(2) - 1).
pub fn eta(lambda: f64) -> Result<f64> {
    if !(0.0..LAMBDA_SUP).contains(&lambda) {
        return Err(Error::domain(format!(
            "eta defined on [0, {LAMBDA_SUP}), got {lambda}"
        )));
    }
    let d = 1.0 - 2.0 * lambda - lambda * lambda;
    Ok((1.0 + lambda) / (d * d.sqrt()))
}

/// The lambda-functions from the contraction estimates. `beta_lemma` is
/// an intermediate beta(lambda) of the derivation, distinct from the
/// strip half-width constant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AuxFunctions {
    pub alpha: f64,
    pub beta_lemma: f64,
    pub gamma: f64,
    pub nu: f64,
    pub xi: f64,
    pub mu: f64,
    pub delta: f64,
}

/// mu(lambda) = max(gamma, nu + xi); defined on all of [0, sqrt(2) - 1).
fn mu_value(lambda: f64) -> Result<f64> {
    let d = 1.0 - 2.0 * lambda - lambda * lambda;
    let sd = d.sqrt();
    let alpha = (2.0 + lambda) / d;
    let gamma = (2.0 + lambda) / (1.0 + sd) / sd;
    let nu = alpha / sd + gamma;
    let xi = 3.0 * eta(lambda)? / (d * d);
    Ok(gamma.max(nu + xi))
}

pub fn aux_lambda_functions(lambda: f64) -> Result<AuxFunctions> {
    if !(0.0..LAMBDA_SUP).contains(&lambda) {
        return Err(Error::domain(format!(
            "aux functions defined on [0, {LAMBDA_SUP}), got {lambda}"
        )));
    }
    let d = 1.0 - 2.0 * lambda - lambda * lambda;
    let sd = d.sqrt();
    let alpha = (2.0 + lambda) / d;
    let beta_lemma = (2.0 + lambda) / (1.0 + sd);
    let gamma = beta_lemma / sd;
    let nu = alpha / sd + gamma;
    let xi = 3.0 * eta(lambda)? / (d * d);
    let mu = gamma.max(nu + xi);
    let lam_mu = lambda * mu;
    if lam_mu >= 1.0 {
        return Err(Error::domain(format!(
            "delta undefined: lambda * mu = {lam_mu} >= 1 at lambda = {lambda}"
        )));
    }
    let delta = mu / (1.0 + (1.0 - lam_mu).sqrt());
    Ok(AuxFunctions {
        alpha,
        beta_lemma,
        gamma,
        nu,
        xi,
        mu,
        delta,
    })
}

/// Upper-triangular pair matrix (entries for i < j only).
#[derive(Clone, Debug)]
pub struct PairMatrix<R> {
    n: usize,
    data: Vec<R>,
}

impl<R: Copy> PairMatrix<R> {
    fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut data = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                data.push(f(i, j));
            }
        }
        PairMatrix { n, data }
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        // Row-major offset into the strictly upper triangle.
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[self.index(i, j)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn iter_pairs(&self) -> impl Iterator<Item = ((usize, usize), R)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .zip(self.data.iter().copied())
    }
}

/// L(q, v, lambda) = max over pairs of L_ij, plus the pieces it is built
/// from. `radius_lower` = 1/L is the certified lower bound on the radius of
/// convergence at this state.
#[derive(Clone, Debug)]
pub struct BoundsReport<R: Real> {
    pub l: R,
    pub l_ij: PairMatrix<R>,
    pub m_ij: PairMatrix<R>,
    pub radius_lower: R,
    pub max_pair: (usize, usize),
}

/// L_ij = w/(2 lambda r) + sqrt((w/(2 lambda r))^2 + M_ij/(2 lambda r)) with
/// w = |v_i - v_j|, r = |q_i - q_j| and M_ij = eta(lambda) (K_i + K_j).
pub fn l_bound<R: Real>(
    spec: &SystemSpec<R>,
    q: &[Vec3<R>],
    v: &[Vec3<R>],
    lambda: Lambda,
) -> Result<BoundsReport<R>> {
    let n = q.len();
    let k = crate::dynamics::pairwise_k(spec, q)?;
    let eta_l = R::from_f64(eta(lambda.get())?);
    let two_lambda = R::from_f64(2.0 * lambda.get());
    let m_ij = PairMatrix::from_fn(n, |i, j| eta_l * (k[i] + k[j]));
    let mut l_max = R::zero();
    let mut max_pair = (0, 1);
    let l_ij = PairMatrix::from_fn(n, |i, j| {
        let r = (q[j] - q[i]).norm();
        let w = (v[j] - v[i]).norm();
        let denom = two_lambda * r;
        let a = w / denom;
        let lij = a + (a * a + m_ij.get(i, j) / denom).sqrt();
        if lij > l_max {
            l_max = lij;
            max_pair = (i, j);
        }
        lij
    });
    Ok(BoundsReport {
        l: l_max,
        l_ij,
        m_ij,
        radius_lower: l_max.recip(),
        max_pair,
    })
}

/// s_1(q,v)^{-1} L(q,v,lambda)^{-1}; bounded below by lambda for
/// lambda <= lambda_0.
pub fn sl_product<R: Real>(
    spec: &SystemSpec<R>,
    q: &[Vec3<R>],
    v: &[Vec3<R>],
    lambda: Lambda,
) -> Result<R> {
    let s = s_value(RenormChoice::of(RenormKind::S1), spec, q, v)?;
    let report = l_bound(spec, q, v, lambda)?;
    let product = (s * report.l).recip();
    debug_assert!(
        product.to_f64() >= lambda.get() * (1.0 - 1e-10),
        "s^-1 L^-1 = {} fell below lambda = {}",
        product,
        lambda.get()
    );
    Ok(product)
}

/// One solver output with the residual achieved.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolvedValue {
    pub value: f64,
    pub residual: f64,
}

/// The derived constants: lambda_0 (zero of lambda eta(lambda) = 1),
/// lambda_* (zero of lambda mu(lambda) = 1), the maximizer lambda_max of
/// (1 - lambda delta(lambda)) lambda and the strip half-width beta attained
/// there.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstantsReport {
    pub lambda0: SolvedValue,
    pub lambda_star: SolvedValue,
    pub lambda_max: SolvedValue,
    pub beta: f64,
}

/// Published strip half-width guaranteed for s_1 and s_2; used for
/// default step sizes and the width floor checks.
pub const BETA_PAPER: f64 = 0.0444443;
/// Published value of lambda_0; `compute_constants` reproduces it.
pub const LAMBDA0_PAPER: f64 = 0.244204;

fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!(
            "bisection bracket [{lo}, {hi}] does not straddle a zero"
        )));
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    let root = 0.5 * (lo + hi);
    Ok((root, f(root)?.abs()))
}

fn golden_section_max(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok((0.5 * (lo + hi), hi - lo))
}

/// Solve for the constants with bisection / golden-section search.
pub fn compute_constants(tolerance: f64) -> Result<ConstantsReport> {
    if !(tolerance > 0.0) {
        return Err(Error::Config("tolerance must be > 0".into()));
    }
    let (lambda0, res0) = bisect(1e-12, LAMBDA_SUP - 1e-12, tolerance, |l| {
        Ok(l * eta(l)? - 1.0)
    })?;

    // lambda mu(lambda) is monotone increasing from 0 and blows up at the
    // eta singularity, so the full interval brackets the crossing.
    let (lambda_star, res_star) = bisect(1e-12, LAMBDA_SUP - 1e-12, tolerance, |l| {
        Ok(l * mu_value(l)? - 1.0)
    })?;

    let objective = |l: f64| -> Result<f64> {
        let aux = aux_lambda_functions(l)?;
        Ok((1.0 - l * aux.delta) * l)
    };
    let (lambda_max, width) =
        golden_section_max(1e-9, lambda_star - 1e-12, tolerance.min(1e-10), objective)?;
    let beta = objective(lambda_max)?;

    Ok(ConstantsReport {
        lambda0: SolvedValue {
            value: lambda0,
            residual: res0,
        },
        lambda_star: SolvedValue {
            value: lambda_star,
            residual: res_star,
        },
        lambda_max: SolvedValue {
            value: lambda_max,
            residual: width,
        },
        beta,
    })
}

/// sigma = (exp(pi tau / (2 beta)) - 1) / (exp(pi tau / (2 beta)) + 1),
/// mapping the strip |Im tau| < beta into the open unit disk.
pub fn conformal_map(tau: Complex64, beta: f64) -> Result<Complex64> {
    if !(beta > 0.0) {
        return Err(Error::domain("beta must be > 0"));
    }
    if tau.im.abs() >= 2.0 * beta {
        return Err(Error::domain(format!(
            "|Im tau| = {} reaches the pole strip boundary 2 beta = {}",
            tau.im.abs(),
            2.0 * beta
        )));
    }
    let e = (std::f64::consts::PI / (2.0 * beta) * tau).exp();
    Ok((e - 1.0) / (e + 1.0))
}

/// Inverse of [`conformal_map`], tau = (2 beta / pi) ln((1 + sigma)/(1 - sigma)).
pub fn conformal_map_inverse(sigma: Complex64, beta: f64) -> Result<Complex64> {
    if !(beta > 0.0) {
        return Err(Error::domain("beta must be > 0"));
    }
    if (sigma - Complex64::new(1.0, 0.0)).norm() == 0.0 {
        return Err(Error::domain("sigma = 1 is the image of infinity"));
    }
    let z = (Complex64::new(1.0, 0.0) + sigma) / (Complex64::new(1.0, 0.0) - sigma);
    Ok(2.0 * beta / std::f64::consts::PI * z.ln())
}
