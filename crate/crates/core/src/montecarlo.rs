//! Monte-Carlo harness: trial batches, empirical moments, ROC curves, and
//! the random-matrix property validation reports.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::asymptotics::{gaussian_cdf, GaussianApprox, H0Model};
use crate::error::{Error, Result};
use crate::glrt::eta_direct;
use crate::matkernel::{eigvalsh, gemm, solve_hpd, ComplexMatrix, HermitianMatrix};
use crate::signal::{
    generate_channel, sample_complex_gaussian, stream_rng, synthesize, Channel, DetectionProblem,
    Hypothesis, TrainingMatrix,
};
use num_complex::Complex64;

/// Seed offset for per-trial channel redraws, so the noise stream stays
/// aligned with fixed-channel runs sharing the same master seed.
const CHANNEL_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// A batch of statistic samples with provenance. Samples produced by
/// `run_trials` are nonnegative up to round-off and stored by trial index,
/// so the contents are independent of scheduling.
#[derive(Debug, Clone)]
pub struct TrialBatch {
    pub samples: Vec<f64>,
    pub hypothesis: Hypothesis,
    pub config_digest: String,
    pub master_seed: u64,
}

impl TrialBatch {
    /// Wraps externally produced samples (synthetic calibration data may be
    /// negative, so no sign check is applied here).
    pub fn from_samples(
        samples: Vec<f64>,
        hypothesis: Hypothesis,
        config_digest: String,
        master_seed: u64,
    ) -> Self {
        Self {
            samples,
            hypothesis,
            config_digest,
            master_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One ROC grid point. `below_resolution` marks false-alarm targets finer
/// than 1/count, where the empirical threshold saturates at the sample
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub pfa: f64,
    pub pnd: f64,
    pub below_resolution: bool,
}

/// Which construction produced a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocMethod {
    Empirical,
    Hybrid,
    Theoretical,
}

impl RocMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RocMethod::Empirical => "empirical",
            RocMethod::Hybrid => "hybrid",
            RocMethod::Theoretical => "theoretical",
        }
    }
}

/// Ordered (P_fa, P_nd) pairs with the construction tag.
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub method: RocMethod,
}

/// Sample mean and unbiased variance with Gaussian-theory standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSummary {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
    pub standard_error_mean: f64,
    pub standard_error_variance: f64,
}

/// SHA-256 hex digest of an experiment description string, recorded in
/// batches so downstream artifacts can be traced to their configuration.
pub fn config_digest(description: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(description.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `trials` independent synthetic trials and collects the statistic.
///
/// Trial `t` draws from the RNG stream `(master_seed, t)`, so the batch
/// contents are identical for any thread count or scheduling order. Under
/// H1 the supplied channel is fixed across all trials.
pub fn run_trials(
    problem: &DetectionProblem,
    hypothesis: Hypothesis,
    channel: Option<&Channel>,
    training: &TrainingMatrix,
    trials: usize,
    master_seed: u64,
) -> Result<TrialBatch> {
    run_trials_opt(problem, hypothesis, channel, training, trials, master_seed, false)
}

/// `run_trials` with an optional per-trial channel redraw (off in the
/// standard protocol, which fixes the channel for the whole experiment).
pub fn run_trials_opt(
    problem: &DetectionProblem,
    hypothesis: Hypothesis,
    channel: Option<&Channel>,
    training: &TrainingMatrix,
    trials: usize,
    master_seed: u64,
    redraw_channel: bool,
) -> Result<TrialBatch> {
    if hypothesis == Hypothesis::H1 && channel.is_none() && !redraw_channel {
        return Err(Error::Config("H1 trials require a channel".into()));
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = stream_rng(master_seed, t as u64);
            let drawn;
            let ch = if hypothesis == Hypothesis::H1 && redraw_channel {
                let mut chan_rng = stream_rng(master_seed.wrapping_add(CHANNEL_SALT), t as u64);
                drawn = generate_channel(problem.m, problem.l, &mut chan_rng);
                Some(&drawn)
            } else {
                channel
            };
            let y = synthesize(hypothesis, problem, ch, training, None, &mut rng)?;
            let stat = eta_direct(&y, training.matrix()).map_err(|e| match e {
                Error::DegenerateStatistic(msg) => {
                    Error::DegenerateStatistic(format!("trial {t}: {msg}"))
                }
                other => other,
            })?;
            if stat.eta < -1e-12 {
                return Err(Error::DegenerateStatistic(format!(
                    "trial {t}: negative statistic {}",
                    stat.eta
                )));
            }
            Ok(stat.eta)
        })
        .collect::<Result<Vec<f64>>>()?;
    let digest = config_digest(&format!(
        "M={} N={} L={} sigma2={} hyp={} trials={} seed={} root={} redraw={}",
        problem.m,
        problem.n,
        problem.l,
        problem.sigma2,
        hypothesis.label(),
        trials,
        master_seed,
        training.root(),
        redraw_channel,
    ));
    Ok(TrialBatch {
        samples,
        hypothesis,
        config_digest: digest,
        master_seed,
    })
}

/// Mean, unbiased variance, and their standard errors.
pub fn summarize(batch: &TrialBatch) -> Result<EmpiricalSummary> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "summary requires at least 2 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = batch.samples.iter().sum::<f64>() / nf;
    let variance = batch
        .samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (nf - 1.0);
    Ok(EmpiricalSummary {
        mean,
        variance,
        count: n,
        standard_error_mean: (variance / nf).sqrt(),
        standard_error_variance: variance * (2.0 / (nf - 1.0)).sqrt(),
    })
}

/// The "higher" order-statistic threshold: the smallest sample value `s`
/// with fraction of samples strictly above `s` at most `pfa`.
fn empirical_threshold(sorted: &[f64], pfa: f64) -> (f64, bool) {
    let n = sorted.len();
    let above = (pfa * n as f64).floor() as usize;
    let idx = n - 1 - above.min(n - 1);
    (sorted[idx], pfa < 1.0 / n as f64)
}

fn check_grid(pfa_grid: &[f64]) -> Result<()> {
    if pfa_grid.is_empty() {
        return Err(Error::Config("empty false-alarm grid".into()));
    }
    for pair in pfa_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config(format!(
                "false-alarm grid must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if pfa_grid[0] <= 0.0 || pfa_grid[pfa_grid.len() - 1] >= 1.0 {
        return Err(Error::Config(
            "false-alarm grid values must lie in (0,1)".into(),
        ));
    }
    Ok(())
}

fn fraction_at_or_below(samples: &[f64], s: f64) -> f64 {
    samples.iter().filter(|&&x| x <= s).count() as f64 / samples.len() as f64
}

/// ROC from empirical thresholds (H0 batch) and empirical detection (H1
/// batch).
pub fn empirical_roc(h0: &TrialBatch, h1: &TrialBatch, pfa_grid: &[f64]) -> Result<RocCurve> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::Precondition("ROC requires nonempty batches".into()));
    }
    check_grid(pfa_grid)?;
    let mut sorted = h0.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let points = pfa_grid
        .iter()
        .map(|&pfa| {
            let (s, below) = empirical_threshold(&sorted, pfa);
            RocPoint {
                pfa,
                pnd: fraction_at_or_below(&h1.samples, s),
                below_resolution: below,
            }
        })
        .collect();
    Ok(RocCurve {
        points,
        method: RocMethod::Empirical,
    })
}

/// ROC with the threshold taken from a closed-form H0 approximation and the
/// detection probability from the empirical H1 batch.
pub fn hybrid_roc(h0_model: &H0Model, h1: &TrialBatch, pfa_grid: &[f64]) -> Result<RocCurve> {
    if h1.is_empty() {
        return Err(Error::Precondition("ROC requires a nonempty H1 batch".into()));
    }
    check_grid(pfa_grid)?;
    let points = pfa_grid
        .iter()
        .map(|&pfa| -> Result<RocPoint> {
            let s = h0_model.quantile(1.0 - pfa)?;
            Ok(RocPoint {
                pfa,
                pnd: fraction_at_or_below(&h1.samples, s),
                below_resolution: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        points,
        method: RocMethod::Hybrid,
    })
}

/// Fully closed-form ROC: threshold from the H0 model, detection from the
/// Gaussian H1 model.
pub fn theoretical_roc(
    h0_model: &H0Model,
    h1_model: &GaussianApprox,
    pfa_grid: &[f64],
) -> Result<RocCurve> {
    check_grid(pfa_grid)?;
    let points = pfa_grid
        .iter()
        .map(|&pfa| -> Result<RocPoint> {
            let s = h0_model.quantile(1.0 - pfa)?;
            Ok(RocPoint {
                pfa,
                pnd: h1_model.cdf(s),
                below_resolution: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        points,
        method: RocMethod::Theoretical,
    })
}

/// Sample skewness and excess kurtosis (population normalization).
pub fn standardized_moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|&x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = samples.iter().map(|&x| (x - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Kolmogorov-Smirnov distance between the sample distribution and the
/// standard normal.
pub fn ks_statistic_vs_normal(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = gaussian_cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Summary of the spectral behaviour of the sample covariance of pure noise
/// compared against the Marcenko-Pastur predictions.
#[derive(Debug, Clone)]
pub struct MpReport {
    pub edge_lower: f64,
    pub edge_upper: f64,
    pub min_eig_mean: f64,
    pub max_eig_mean: f64,
    pub trace_inv_mean: f64,
    pub trace_inv_theory: f64,
    pub trace_inv_sq_mean: f64,
    pub trace_inv_sq_theory: f64,
    pub quad_form_mean: Complex64,
    pub quad_form_theory: Complex64,
    pub trials: usize,
}

/// Validates the Marcenko-Pastur edge and inverse-moment predictions on
/// `trials` draws of the noise sample covariance.
pub fn validate_mp_properties(
    m: usize,
    n: usize,
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> Result<MpReport> {
    if n <= m {
        return Err(Error::Precondition(format!(
            "MP validation requires N > M, got M={m}, N={n}"
        )));
    }
    if trials == 0 {
        return Err(Error::Precondition("MP validation requires trials >= 1".into()));
    }
    let c = m as f64 / n as f64;
    let sqrt_c = c.sqrt();
    let edge_lower = sigma2 * (1.0 - sqrt_c) * (1.0 - sqrt_c);
    let edge_upper = sigma2 * (1.0 + sqrt_c) * (1.0 + sqrt_c);
    // Fixed deterministic unit vectors drawn from a stream outside the
    // per-trial range.
    let mut vec_rng = stream_rng(seed.wrapping_add(CHANNEL_SALT), trials as u64);
    let normalize = |x: ComplexMatrix| {
        let norm = x.frobenius_norm();
        x.scale(1.0 / norm)
    };
    let u = normalize(sample_complex_gaussian(m, 1, 1.0, &mut vec_rng));
    let v = normalize(sample_complex_gaussian(m, 1, 1.0, &mut vec_rng));
    let uv: Complex64 = (0..m).map(|i| u.get(i, 0).conj() * v.get(i, 0)).sum();

    let per_trial: Vec<(f64, f64, f64, f64, Complex64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64, f64, Complex64)> {
            let mut rng = stream_rng(seed, t as u64);
            let noise = sample_complex_gaussian(m, n, sigma2, &mut rng);
            let gram =
                HermitianMatrix::from_matrix(&gemm(&noise, &noise, false, true)?.scale(1.0 / n as f64))?;
            let eigs = eigvalsh(&gram)?;
            let trace_inv = eigs.iter().map(|&x| 1.0 / x).sum::<f64>() / m as f64;
            let trace_inv_sq = eigs.iter().map(|&x| 1.0 / (x * x)).sum::<f64>() / m as f64;
            let qv = solve_hpd(&gram, &v)?;
            let quad: Complex64 = (0..m).map(|i| u.get(i, 0).conj() * qv.get(i, 0)).sum();
            Ok((eigs[0], eigs[m - 1], trace_inv, trace_inv_sq, quad))
        })
        .collect::<Result<Vec<_>>>()?;

    let tf = trials as f64;
    let omc = 1.0 - c;
    Ok(MpReport {
        edge_lower,
        edge_upper,
        min_eig_mean: per_trial.iter().map(|r| r.0).sum::<f64>() / tf,
        max_eig_mean: per_trial.iter().map(|r| r.1).sum::<f64>() / tf,
        trace_inv_mean: per_trial.iter().map(|r| r.2).sum::<f64>() / tf,
        trace_inv_theory: 1.0 / (sigma2 * omc),
        trace_inv_sq_mean: per_trial.iter().map(|r| r.3).sum::<f64>() / tf,
        trace_inv_sq_theory: 1.0 / (sigma2 * sigma2 * omc * omc * omc),
        quad_form_mean: per_trial.iter().map(|r| r.4).sum::<Complex64>() / tf,
        quad_form_theory: uv / (sigma2 * omc),
        trials,
    })
}

/// Empirical vs predicted moments of the mixed linear-quadratic trace
/// functional of a Gaussian matrix.
#[derive(Debug, Clone)]
pub struct TraceLemmaReport {
    pub mean_theory: f64,
    pub var_theory: f64,
    pub mean_emp: f64,
    pub var_emp: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub trials: usize,
}

/// Validates the mean and variance of
/// `omega = Tr[D (G*AG + G*B + B*G)]` over i.i.d. complex Gaussian `G` with
/// per-entry variance `sigma2/N`:
/// `E(omega) = sigma2 (1/N) Tr(A) Tr(D)` and `Var(omega) = zeta/N` with
/// `zeta = sigma2^2 (1/N) Tr(A^2) Tr(D^2) + 2 sigma2 Tr(D^2 B*B)`.
///
/// Both moments are exact, not asymptotic: the quadratic and linear parts
/// of `omega` are uncorrelated, the quadratic part contributes
/// `sigma2^2 Tr(A^2) Tr(D^2)/N^2` and the linear part
/// `2 sigma2 Tr(D^2 B*B)/N` (each entry of `G` hits `B D` once).
#[allow(clippy::too_many_arguments)]
pub fn validate_trace_lemma(
    m: usize,
    n: usize,
    l: usize,
    sigma2: f64,
    a: &HermitianMatrix,
    b: &ComplexMatrix,
    d: &HermitianMatrix,
    trials: usize,
    seed: u64,
) -> Result<TraceLemmaReport> {
    if a.dim() != m || b.rows() != m || b.cols() != l || d.dim() != l {
        return Err(Error::Dimension(format!(
            "trace lemma expects A {m}x{m}, B {m}x{l}, D {l}x{l}; got A {0}x{0}, B {1}x{2}, D {3}x{3}",
            a.dim(),
            b.rows(),
            b.cols(),
            d.dim()
        )));
    }
    if trials < 2 {
        return Err(Error::Precondition(
            "trace lemma validation requires trials >= 2".into(),
        ));
    }
    let nf = n as f64;
    let am = a.as_matrix();
    let dm = d.as_matrix();
    let mean_theory = sigma2 / nf * a.trace() * d.trace();
    let a_sq_tr = gemm(&am, &am, false, false)?.trace().re;
    let d_sq = gemm(&dm, &dm, false, false)?;
    let d_sq_tr = d_sq.trace().re;
    let bb = gemm(b, b, true, false)?;
    let d2bb_tr = gemm(&d_sq, &bb, false, false)?.trace().re;
    let zeta = sigma2 * sigma2 / nf * a_sq_tr * d_sq_tr + 2.0 * sigma2 * d2bb_tr;
    let var_theory = zeta / nf;

    let omegas: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = stream_rng(seed, t as u64);
            let g = sample_complex_gaussian(m, l, sigma2 / nf, &mut rng);
            let ag = gemm(&am, &g, false, false)?;
            let gag = gemm(&g, &ag, true, false)?;
            let gb = gemm(&g, b, true, false)?;
            // G*AG + G*B + B*G = G*AG + G*B + (G*B)*.
            let inner = gag.add(&gb).add(&gb.adjoint());
            Ok(gemm(&dm, &inner, false, false)?.trace().re)
        })
        .collect::<Result<Vec<_>>>()?;

    let batch = TrialBatch::from_samples(omegas, Hypothesis::H0, String::new(), seed);
    let summary = summarize(&batch)?;
    Ok(TraceLemmaReport {
        mean_theory,
        var_theory,
        mean_emp: summary.mean,
        var_emp: summary.variance,
        se_mean: summary.standard_error_mean,
        se_var: summary.standard_error_variance,
        trials,
    })
}

/// Writes a batch as `trial_index,eta` CSV.
pub fn write_batch_csv<W: std::io::Write>(batch: &TrialBatch, out: &mut W) -> Result<()> {
    writeln!(out, "trial_index,eta")?;
    for (i, &eta) in batch.samples.iter().enumerate() {
        writeln!(out, "{i},{eta}")?;
    }
    Ok(())
}

/// Writes a summary as `quantity,value,stderr` CSV.
pub fn write_summary_csv<W: std::io::Write>(summary: &EmpiricalSummary, out: &mut W) -> Result<()> {
    writeln!(out, "quantity,value,stderr")?;
    writeln!(
        out,
        "mean,{},{}",
        summary.mean, summary.standard_error_mean
    )?;
    writeln!(
        out,
        "variance,{},{}",
        summary.variance, summary.standard_error_variance
    )?;
    Ok(())
}
