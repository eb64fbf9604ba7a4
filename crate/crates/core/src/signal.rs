//! Training sequences, channels, noise and synthetic observations.
//!
//! All generators take an explicit RNG stream derived from a master seed and
//! a stream id, so that Monte-Carlo trials are reproducible independently of
//! thread scheduling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::matkernel::{gemm, ComplexMatrix, HermitianMatrix};

/// Detection hypothesis: noise only, or training signal plus noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn label(&self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        }
    }
}

/// Problem dimensions and noise power.
///
/// `M` sensors, `N` training samples, `L` channel paths. The constraint
/// `N > M + L` guarantees almost sure invertibility of the sample
/// covariance of the noise component orthogonal to the training space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionProblem {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub sigma2: f64,
}

impl DetectionProblem {
    pub fn new(m: usize, n: usize, l: usize, sigma2: f64) -> Result<Self> {
        if m < 1 || l < 1 {
            return Err(Error::Config(format!("M and L must be >= 1, got M={m}, L={l}")));
        }
        if n <= m + l {
            return Err(Error::Config(format!(
                "N > M + L required, got N={n}, M={m}, L={l}"
            )));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Self { m, n, l, sigma2 })
    }

    /// Dimension ratio `c_N = M/N`.
    pub fn c_n(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Dimension ratio `d_N = L/N`.
    pub fn d_n(&self) -> f64 {
        self.l as f64 / self.n as f64
    }
}

/// Training matrix whose rows are cyclic shifts of a Zadoff-Chu sequence,
/// so that `S S*/N = I_L`.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    s: ComplexMatrix,
    root: usize,
}

impl TrainingMatrix {
    /// Wraps an arbitrary matrix without the Zadoff-Chu construction;
    /// used by tests that need deliberately invalid training rows.
    #[cfg(test)]
    pub(crate) fn from_raw(s: ComplexMatrix, root: usize) -> Self {
        Self { s, root }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn paths(&self) -> usize {
        self.s.rows()
    }

    pub fn len(&self) -> usize {
        self.s.cols()
    }
}

/// Multipath channel, `M x L`. Draws from `generate_channel` are normalized
/// to `Tr(H H*) = 1`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub h: ComplexMatrix,
}

/// Normalized spatial noise covariance shape: positive definite with
/// `Tr(R)/M = 1`. The full noise covariance is `sigma2 * R`.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    r: HermitianMatrix,
}

impl SpatialCovariance {
    pub fn new(r: HermitianMatrix) -> Result<Self> {
        let m = r.dim() as f64;
        if (r.trace() / m - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "spatial covariance must have Tr(R)/M = 1, got {}",
                r.trace() / m
            )));
        }
        // PD check.
        r.cholesky_factor()?;
        Ok(Self { r })
    }

    /// Rescales an arbitrary positive definite matrix to normalized trace.
    pub fn from_unnormalized(r: &HermitianMatrix) -> Result<Self> {
        let m = r.dim() as f64;
        let scale = m / r.trace();
        let scaled = HermitianMatrix::from_matrix(&r.as_matrix().scale(scale))?;
        Self::new(scaled)
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }
}

/// Deterministic per-stream RNG derived from `(master_seed, stream_id)`.
pub fn stream_rng(master_seed: u64, stream_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Zadoff-Chu sequence of length `n` with the given root index.
///
/// Phase convention: `exp(-i pi root k(k+1)/n)` for odd `n`,
/// `exp(-i pi root k^2/n)` for even `n`. Both yield unit modulus and ideal
/// periodic autocorrelation when `gcd(root, n) = 1`.
pub fn zadoff_chu(n: usize, root: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Config("zadoff_chu length must be >= 1".into()));
    }
    if n > 1 && (root == 0 || root >= n || gcd(root, n) != 1) {
        return Err(Error::InvalidRoot { root, len: n });
    }
    let nf = n as f64;
    let seq = (0..n)
        .map(|k| {
            let kf = k as f64;
            let phase = if n % 2 == 1 {
                -std::f64::consts::PI * root as f64 * kf * (kf + 1.0) / nf
            } else {
                -std::f64::consts::PI * root as f64 * kf * kf / nf
            };
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    Ok(seq)
}

/// `L x N` training matrix whose row `k` is the `k`-sample cyclic shift of
/// the base Zadoff-Chu sequence.
pub fn build_training_matrix(n: usize, l: usize, root: usize) -> Result<TrainingMatrix> {
    if l > n {
        return Err(Error::Dimension(format!(
            "training matrix needs L <= N, got L={l}, N={n}"
        )));
    }
    let base = zadoff_chu(n, root)?;
    let s = ComplexMatrix::from_fn(l, n, |k, j| base[(j + k) % n]);
    Ok(TrainingMatrix { s, root })
}

/// One standard complex Gaussian draw via Box-Muller: real and imaginary
/// parts independent `N(0, 1/2)`, so unit total variance.
#[inline]
fn standard_complex(rng: &mut impl Rng) -> Complex64 {
    let u1: f64 = rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    // Guard u1 = 0.
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    // Total variance of (r cos, r sin) is 2; scale to 1.
    Complex64::from_polar(r / std::f64::consts::SQRT_2, theta)
}

/// Matrix of i.i.d. circular complex Gaussian entries with the given
/// per-entry variance.
pub fn sample_complex_gaussian(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut impl Rng,
) -> ComplexMatrix {
    let scale = variance.sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| standard_complex(rng) * scale)
}

/// Channel draw: i.i.d. `N_C(0, 1/M)` entries, then normalized so that
/// `Tr(H H*) = 1`.
pub fn generate_channel(m: usize, l: usize, rng: &mut impl Rng) -> Channel {
    let hbar = sample_complex_gaussian(m, l, 1.0 / m as f64, rng);
    let norm = hbar.frobenius_norm();
    Channel {
        h: hbar.scale(1.0 / norm),
    }
}

/// Synthesizes one observation `Y`: `Y = V` under H0, `Y = H S + V` under
/// H1, with `V = sigma * G W` where `G G* = R` and `W` standard complex
/// Gaussian (`R = I` when no spatial covariance is supplied).
pub fn synthesize(
    hypothesis: Hypothesis,
    problem: &DetectionProblem,
    channel: Option<&Channel>,
    training: &TrainingMatrix,
    rtilde: Option<&SpatialCovariance>,
    rng: &mut impl Rng,
) -> Result<ComplexMatrix> {
    let (m, n) = (problem.m, problem.n);
    if training.len() != n || training.paths() != problem.l {
        return Err(Error::Dimension(format!(
            "training matrix is {}x{}, problem expects {}x{}",
            training.paths(),
            training.len(),
            problem.l,
            n
        )));
    }
    let white = sample_complex_gaussian(m, n, problem.sigma2, rng);
    let v = match rtilde {
        None => white,
        Some(r) => {
            if r.dim() != m {
                return Err(Error::Dimension(format!(
                    "spatial covariance dim {} != M={m}",
                    r.dim()
                )));
            }
            let g = r.matrix().cholesky_factor()?;
            gemm(&g, &white, false, false)?
        }
    };
    match hypothesis {
        Hypothesis::H0 => Ok(v),
        Hypothesis::H1 => {
            let h = channel.ok_or_else(|| {
                Error::Config("hypothesis H1 requires a channel".into())
            })?;
            if h.h.rows() != m || h.h.cols() != problem.l {
                return Err(Error::Dimension(format!(
                    "channel is {}x{}, problem expects {}x{}",
                    h.h.rows(),
                    h.h.cols(),
                    m,
                    problem.l
                )));
            }
            let hs = gemm(&h.h, training.matrix(), false, false)?;
            Ok(hs.add(&v))
        }
    }
}

/// Whitening reduction: returns `(R^{-1/2} Y, (SS*/N)^{-1/2} S)` so that the
/// GLRT statistic can be evaluated on canonical inputs. The statistic itself
/// is invariant under this transformation.
pub fn whiten(
    y: &ComplexMatrix,
    s: &ComplexMatrix,
    rtilde: &SpatialCovariance,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = s.cols() as f64;
    let gram = HermitianMatrix::from_matrix(&gemm(s, s, false, true)?.scale(1.0 / n))?;
    let inv_sqrt = gram.inv_sqrt_hpd().map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularTraining,
        other => other,
    })?;
    let stilde = gemm(&inv_sqrt, s, false, false)?;
    let r_inv_sqrt = rtilde.matrix().inv_sqrt_hpd()?;
    let ytilde = gemm(&r_inv_sqrt, y, false, false)?;
    Ok((ytilde, stilde))
}
