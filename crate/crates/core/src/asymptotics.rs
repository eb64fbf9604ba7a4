//! Closed-form distributional approximations of the GLRT statistic.
//!
//! Three approximation families are provided, indexed the way the
//! experiments report them:
//!  (a) classical: `2N eta ~ chi^2_{2ML}` under H0, Gaussian under H1;
//!  (b) large (M,N) with L fixed: Gaussian with mean `L log(1/(1-c_N))`;
//!  (c) large (L,M,N): Gaussian with the F-matrix linear-spectral-statistic
//!      mean and variance.
//! Model (c) under H1 is a heuristic additive approximation, not a proven
//! limit theorem; it is exposed with that caveat.

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::glrt::{h1_logdet_term, kappa1};
use crate::signal::{Channel, DetectionProblem, Hypothesis};

/// Gaussian (mean, variance) cell of the approximation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianApprox {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianApprox {
    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.mean + self.variance.sqrt() * gaussian_quantile(p)?)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gaussian_cdf((x - self.mean) / self.variance.sqrt())
    }
}

/// Scaled chi-squared approximation: `eta ~ (scale/2) chi^2_dof`, i.e.
/// `(2/scale) eta` is chi-squared with `dof` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquaredApprox {
    pub dof: usize,
    pub scale: f64,
}

impl ChiSquaredApprox {
    pub fn mean(&self) -> f64 {
        self.dof as f64 * self.scale / 2.0
    }

    pub fn variance(&self) -> f64 {
        self.dof as f64 * self.scale * self.scale / 2.0
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.scale / 2.0 * chi2_quantile(p, self.dof)?)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        chi2_cdf(2.0 * x / self.scale, self.dof)
    }
}

/// Marcenko-Pastur law of a sample covariance matrix with aspect ratio
/// `c` in (0,1) and per-entry variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpLaw {
    pub c: f64,
    pub sigma2: f64,
}

/// An H0 threshold model: either of the closed-form approximations that can
/// supply a false-alarm threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum H0Model {
    Gaussian(GaussianApprox),
    ChiSquared(ChiSquaredApprox),
}

impl H0Model {
    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            H0Model::Gaussian(g) => g.quantile(p),
            H0Model::ChiSquared(x) => x.quantile(p),
        }
    }
}

/// Model (a) under H0: classical fixed-M regime, `2N eta ~ chi^2_{2ML}`.
pub fn model_a_h0(problem: &DetectionProblem) -> ChiSquaredApprox {
    ChiSquaredApprox {
        dof: 2 * problem.m * problem.l,
        scale: 1.0 / problem.n as f64,
    }
}

/// Model (a) under H1: Gaussian with mean `log det(I + H*H/sigma2)` and
/// variance `kappa1/N`.
pub fn model_a_h1(problem: &DetectionProblem, h: &Channel) -> Result<GaussianApprox> {
    Ok(GaussianApprox {
        mean: h1_logdet_term(h, problem.sigma2)?,
        variance: kappa1(h, problem.sigma2)? / problem.n as f64,
    })
}

fn check_channel_arg(hypothesis: Hypothesis, h: Option<&Channel>) -> Result<()> {
    match (hypothesis, h) {
        (Hypothesis::H1, None) => Err(Error::Config(
            "H1 approximation requires a channel".into(),
        )),
        (Hypothesis::H0, Some(_)) => Err(Error::Config(
            "H0 approximation takes no channel".into(),
        )),
        _ => Ok(()),
    }
}

/// Model (b): large (M,N), L fixed.
pub fn model_b(
    problem: &DetectionProblem,
    hypothesis: Hypothesis,
    h: Option<&Channel>,
) -> Result<GaussianApprox> {
    check_channel_arg(hypothesis, h)?;
    let c = problem.c_n();
    if c >= 1.0 {
        return Err(Error::Domain(format!("model (b) requires c_N < 1, got {c}")));
    }
    let n = problem.n as f64;
    let l = problem.l as f64;
    let mut mean = l * (1.0 / (1.0 - c)).ln();
    let mut variance = l * c / (1.0 - c) / n;
    if let Some(ch) = h {
        mean += h1_logdet_term(ch, problem.sigma2)?;
        variance += kappa1(ch, problem.sigma2)? / n;
    }
    Ok(GaussianApprox { mean, variance })
}

/// The model-(c) H0 mean as a function of the finite-N ratios.
fn eta_tilde(n: f64, c: f64, d: f64) -> f64 {
    -n * ((1.0 - c) * (1.0 - c).ln() + (1.0 - d) * (1.0 - d).ln())
        + n * (1.0 - c - d) * (1.0 - c - d).ln()
}

/// The model-(c) H0 variance as a function of the finite-N ratios.
fn delta_tilde(c: f64, d: f64) -> Result<f64> {
    let a = (1.0 - c / (1.0 - d)).powi(2) + d / (1.0 - d) * (1.0 + c * (1.0 - c) / (d * (1.0 - d)));
    let b = 2.0 * d / (1.0 - d) * (c * (1.0 - c) / (d * (1.0 - d))).sqrt();
    let disc = a * a - b * b;
    if disc <= 0.0 {
        return Err(Error::Domain(format!(
            "model (c) variance undefined: a^2 - b^2 = {disc}"
        )));
    }
    let root = disc.sqrt();
    Ok(-(2.0 * root / (a + root)).ln())
}

/// Model (c): large (L,M,N).
///
/// The H1 cell is a heuristic: the H0 Gaussian shifted by
/// `log det(I + H*H/sigma2)` with variance inflated by `kappa1/N`. It is an
/// additive approximation carried over from the fixed-L regime, not a
/// proven limit theorem.
pub fn model_c(
    problem: &DetectionProblem,
    hypothesis: Hypothesis,
    h: Option<&Channel>,
) -> Result<GaussianApprox> {
    check_channel_arg(hypothesis, h)?;
    let (c, d) = (problem.c_n(), problem.d_n());
    if c + d >= 1.0 {
        return Err(Error::Domain(format!(
            "model (c) requires c_N + d_N < 1, got {}",
            c + d
        )));
    }
    let n = problem.n as f64;
    let mut mean = eta_tilde(n, c, d);
    let mut variance = delta_tilde(c, d)?;
    if let Some(ch) = h {
        mean += h1_logdet_term(ch, problem.sigma2)?;
        variance += kappa1(ch, problem.sigma2)? / n;
    }
    Ok(GaussianApprox { mean, variance })
}

/// Support edges of the Marcenko-Pastur law:
/// `sigma2 (1 -/+ sqrt(c))^2`.
pub fn mp_edges(law: &MpLaw) -> (f64, f64) {
    let s = law.c.sqrt();
    (
        law.sigma2 * (1.0 - s) * (1.0 - s),
        law.sigma2 * (1.0 + s) * (1.0 + s),
    )
}

/// Marcenko-Pastur density at `x`; zero outside the support.
pub fn mp_density(x: f64, law: &MpLaw) -> f64 {
    let (lo, hi) = mp_edges(law);
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((x - lo) * (hi - x)).sqrt() / (2.0 * law.sigma2 * law.c * std::f64::consts::PI * x)
}

/// Stieltjes transform of the MP law and its derivative at zero:
/// `m(0) = 1/(sigma2 (1-c))`, `m'(0) = 1/(sigma2^2 (1-c)^3)`.
pub fn mp_inverse_moments(law: &MpLaw) -> (f64, f64) {
    let om = 1.0 - law.c;
    (
        1.0 / (law.sigma2 * om),
        1.0 / (law.sigma2 * law.sigma2 * om * om * om),
    )
}

/// Standard normal CDF.
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse standard normal CDF: Acklam's rational approximation refined by
/// one Newton step on the CDF. Absolute error well below 1e-9.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile requires p in (0,1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Newton step on the CDF.
    let err = gaussian_cdf(x) - p;
    Ok(x - err / gaussian_pdf(x))
}

/// Chi-squared CDF: regularized lower incomplete gamma.
pub fn chi2_cdf(x: f64, dof: usize) -> Result<f64> {
    if dof < 1 {
        return Err(Error::Domain("chi2 dof must be >= 1".into()));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("chi2_cdf requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr(dof as f64 / 2.0, x / 2.0))
}

fn chi2_pdf(x: f64, dof: usize) -> f64 {
    let k = dof as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Chi-squared quantile: Wilson-Hilferty start refined by Newton iterations
/// on the CDF.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile requires p in (0,1), got {p}")));
    }
    if dof < 1 {
        return Err(Error::Domain("chi2 dof must be >= 1".into()));
    }
    let k = dof as f64;
    // Bracket the root, starting from the Wilson-Hilferty point when it is
    // usable (it goes nonpositive deep in the lower tail for small dof).
    let z = gaussian_quantile(p)?;
    let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
    let mut hi = if t > 0.0 { (k * t * t * t).max(k) } else { k };
    while chi2_cdf(hi, dof)? < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut x = hi;
    for _ in 0..200 {
        x = 0.5 * (lo + hi);
        if chi2_cdf(x, dof)? < p {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    // One Newton polish on the bisection result.
    let df = chi2_pdf(x, dof);
    if df > 0.0 {
        let refined = x - (chi2_cdf(x, dof)? - p) / df;
        if refined > lo && refined < hi {
            x = refined;
        }
    }
    Ok(x)
}
