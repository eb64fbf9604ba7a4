//! The GLRT statistic in its equivalent algebraic forms, plus the
//! deterministic H1 functionals entering the Gaussian approximations.

use crate::error::{Error, Result};
use crate::matkernel::{eigvalsh, gemm, logdet_hpd, solve_hpd, ComplexMatrix, HermitianMatrix};
use crate::signal::{Channel, TrainingMatrix};

/// Which algebraic route produced the statistic value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticForm {
    Direct,
    Split,
}

/// The log-GLRT statistic value; nonnegative up to round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlrtStatistic {
    pub eta: f64,
    pub form: StatisticForm,
}

/// Direct evaluation from the observation and training matrices:
/// `eta = -log det(I_L - T)` with
/// `T = (SS*/N)^{-1/2} (SY*/N) (YY*/N)^{-1} (YS*/N) (SS*/N)^{-1/2}`.
///
/// The formula is invariant to invertible spatial transformations of `Y`
/// and to unitary rotations of `S`, so no pre-whitening is required.
pub fn eta_direct(y: &ComplexMatrix, s: &ComplexMatrix) -> Result<GlrtStatistic> {
    if y.cols() != s.cols() {
        return Err(Error::Dimension(format!(
            "Y has {} samples but S has {}",
            y.cols(),
            s.cols()
        )));
    }
    let n = y.cols();
    let (m, l) = (y.rows(), s.rows());
    if n <= m + l {
        return Err(Error::Precondition(format!(
            "eta requires N > M + L, got N={n}, M={m}, L={l}"
        )));
    }
    let nf = n as f64;
    let s_gram = HermitianMatrix::from_matrix(&gemm(s, s, false, true)?.scale(1.0 / nf))?;
    let s_gram_inv_sqrt = s_gram.inv_sqrt_hpd()?;
    let y_gram = HermitianMatrix::from_matrix(&gemm(y, y, false, true)?.scale(1.0 / nf))?;
    // B = Y S*/N (M x L); inner = B* (YY*/N)^{-1} B.
    let b = gemm(y, s, false, true)?.scale(1.0 / nf);
    let x = solve_hpd(&y_gram, &b)?;
    let inner = gemm(&b, &x, true, false)?;
    let t = gemm(
        &gemm(&s_gram_inv_sqrt, &inner, false, false)?,
        &s_gram_inv_sqrt,
        false,
        false,
    )?;
    let i_minus_t = HermitianMatrix::from_matrix(&ComplexMatrix::identity(l).sub(&t))?;
    let eta = -logdet_hpd(&i_minus_t).map_err(|e| match e {
        Error::NotPositiveDefinite { index, pivot } => Error::DegenerateStatistic(format!(
            "I - T is not positive definite (pivot {pivot} at index {index})"
        )),
        other => other,
    })?;
    Ok(GlrtStatistic {
        eta,
        form: StatisticForm::Direct,
    })
}

/// Splits the noise matrix along the training space: returns
/// `V2 = V S*/sqrt(N)` and the Gram matrix `V1 V1*/N = V V*/N - V2 V2*/N`.
/// The orthogonal completion `V1` itself is never materialized.
pub fn split_v(
    v: &ComplexMatrix,
    training: &TrainingMatrix,
) -> Result<(ComplexMatrix, HermitianMatrix)> {
    let s = training.matrix();
    if v.cols() != s.cols() {
        return Err(Error::Dimension(format!(
            "V has {} samples but S has {}",
            v.cols(),
            s.cols()
        )));
    }
    let n = s.cols() as f64;
    let l = s.rows();
    let gram_err = gemm(s, s, false, true)?
        .scale(1.0 / n)
        .sub(&ComplexMatrix::identity(l))
        .frobenius_norm();
    if gram_err > 1e-8 {
        return Err(Error::Precondition(format!(
            "split_v requires orthonormal training rows, ||SS*/N - I|| = {gram_err:.3e}"
        )));
    }
    let v2 = gemm(v, s, false, true)?.scale(1.0 / n.sqrt());
    let vv = gemm(v, v, false, true)?.scale(1.0 / n);
    let v2v2 = gemm(&v2, &v2, false, true)?.scale(1.0 / n);
    let v1_gram = HermitianMatrix::from_matrix(&vv.sub(&v2v2))?;
    Ok((v2, v1_gram))
}

/// H0 form of the statistic:
/// `eta = log det(I_L + V2*/sqrt(N) (V1 V1*/N)^{-1} V2/sqrt(N))`.
/// `n` is the sample count the Gram matrices were normalized with.
pub fn eta_split_h0(
    v2: &ComplexMatrix,
    v1_gram: &HermitianMatrix,
    n: usize,
) -> Result<GlrtStatistic> {
    if v2.rows() != v1_gram.dim() {
        return Err(Error::Dimension(format!(
            "V2 has {} rows but V1 Gram is {}x{}",
            v2.rows(),
            v1_gram.dim(),
            v1_gram.dim()
        )));
    }
    let l = v2.cols();
    let x = solve_hpd(v1_gram, v2)?;
    let inner = gemm(v2, &x, true, false)?.scale(1.0 / n as f64);
    let arg = HermitianMatrix::from_matrix(&ComplexMatrix::identity(l).add(&inner))?;
    Ok(GlrtStatistic {
        eta: logdet_hpd(&arg)?,
        form: StatisticForm::Split,
    })
}

fn channel_gram_eigenvalues(h: &Channel) -> Result<Vec<f64>> {
    let gram = HermitianMatrix::from_matrix(&gemm(&h.h, &h.h, true, false)?)?;
    eigvalsh(&gram)
}

/// Classical-regime H1 variance term `Tr[I - (I + H*H/sigma2)^{-2}]`.
pub fn kappa1(h: &Channel, sigma2: f64) -> Result<f64> {
    Ok(channel_gram_eigenvalues(h)?
        .iter()
        .map(|&g| {
            let r = 1.0 + g.max(0.0) / sigma2;
            1.0 - 1.0 / (r * r)
        })
        .sum())
}

/// Deterministic H1 mean offset `log det(I + H*H/sigma2)`.
pub fn h1_logdet_term(h: &Channel, sigma2: f64) -> Result<f64> {
    Ok(channel_gram_eigenvalues(h)?
        .iter()
        .map(|&g| (1.0 + g.max(0.0) / sigma2).ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::HermitianMatrix;
    use crate::signal::{
        build_training_matrix, generate_channel, sample_complex_gaussian, stream_rng, synthesize,
        DetectionProblem, Hypothesis,
    };
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn eta_zero_when_y_orthogonal_to_s() {
        let training = build_training_matrix(16, 2, 1).unwrap();
        let s = training.matrix();
        let mut rng = stream_rng(1, 0);
        let y = sample_complex_gaussian(3, 16, 1.0, &mut rng);
        // Project the S components out of Y so that Y S* = 0.
        let b = gemm(&y, s, false, true).unwrap().scale(1.0 / 16.0);
        let proj = gemm(&b, s, false, false).unwrap();
        let y_perp = y.sub(&proj);
        let stat = eta_direct(&y_perp, s).unwrap();
        assert!(stat.eta.abs() < 1e-10, "eta = {}", stat.eta);
    }

    #[test]
    fn eta_scalar_reduction() {
        // L = 1: T is scalar, eta = -log(1 - t) with t computed by hand
        // from the 2x2 closed-form inverse.
        let training = build_training_matrix(8, 1, 1).unwrap();
        let s = training.matrix();
        let mut rng = stream_rng(2, 0);
        let y = sample_complex_gaussian(2, 8, 1.0, &mut rng);
        let n = 8.0;
        // b = Y s*/N (2-vector), A = YY*/N (2x2).
        let b: Vec<Complex64> = (0..2)
            .map(|i| (0..8).map(|k| y.get(i, k) * s.get(0, k).conj()).sum::<Complex64>() / n)
            .collect();
        let a = |i: usize, j: usize| -> Complex64 {
            (0..8).map(|k| y.get(i, k) * y.get(j, k).conj()).sum::<Complex64>() / n
        };
        let (a00, a01, a10, a11) = (a(0, 0), a(0, 1), a(1, 0), a(1, 1));
        let det = a00 * a11 - a01 * a10;
        // q = b* A^{-1} b.
        let q = (b[0].conj() * (a11 * b[0] - a01 * b[1])
            + b[1].conj() * (-a10 * b[0] + a00 * b[1]))
            / det;
        let ss = 1.0; // ss*/N = 1 for a unit-modulus row
        let t = q.re / ss;
        let expect = -(1.0 - t).ln();
        let stat = eta_direct(&y, s).unwrap();
        assert_abs_diff_eq!(stat.eta, expect, epsilon = 1e-10);
    }

    #[test]
    fn eta_noiseless_limit_dominated_by_logdet() {
        let problem = DetectionProblem::new(3, 24, 2, 1e-12).unwrap();
        let training = build_training_matrix(24, 2, 1).unwrap();
        let mut rng = stream_rng(3, 0);
        let ch = generate_channel(3, 2, &mut rng);
        let y =
            synthesize(Hypothesis::H1, &problem, Some(&ch), &training, None, &mut rng).unwrap();
        let stat = eta_direct(&y, training.matrix()).unwrap();
        let half = h1_logdet_term(
            &Channel {
                h: ch.h.scale(0.5f64.sqrt()),
            },
            problem.sigma2,
        )
        .unwrap();
        assert!(stat.eta >= half, "eta {} vs bound {half}", stat.eta);
    }

    #[test]
    fn whitening_invariance() {
        let problem = DetectionProblem::new(4, 32, 2, 1.0).unwrap();
        let training = build_training_matrix(32, 2, 1).unwrap();
        for trial in 0..10 {
            let mut rng = stream_rng(4, trial);
            let y = synthesize(Hypothesis::H0, &problem, None, &training, None, &mut rng).unwrap();
            // Random invertible A = I + small random perturbation + random matrix.
            let a = sample_complex_gaussian(4, 4, 1.0, &mut rng)
                .add(&ComplexMatrix::identity(4).scale(3.0));
            let ay = gemm(&a, &y, false, false).unwrap();
            let e0 = eta_direct(&y, training.matrix()).unwrap().eta;
            let e1 = eta_direct(&ay, training.matrix()).unwrap().eta;
            assert!(
                (e0 - e1).abs() <= 1e-8 * (1.0 + e0.abs()),
                "trial {trial}: {e0} vs {e1}"
            );
        }
    }

    #[test]
    fn training_rotation_invariance() {
        let problem = DetectionProblem::new(4, 32, 3, 1.0).unwrap();
        let training = build_training_matrix(32, 3, 1).unwrap();
        for trial in 0..10 {
            let mut rng = stream_rng(5, trial);
            let y = synthesize(Hypothesis::H0, &problem, None, &training, None, &mut rng).unwrap();
            // Unitary U from the eigenvectors of a random Hermitian matrix.
            let b = sample_complex_gaussian(3, 3, 1.0, &mut rng);
            let herm = HermitianMatrix::from_matrix(
                &gemm(&b, &b, false, true)
                    .unwrap()
                    .add(&ComplexMatrix::identity(3)),
            )
            .unwrap();
            let u = herm.inv_sqrt_hpd().unwrap(); // Hermitian, not unitary...
            // ...so build a genuine unitary via Cayley transform of i*Herm:
            // U = (I - K)(I + K)^{-1} with K skew-Hermitian.
            let _ = u;
            let k = {
                let hm = herm.as_matrix();
                ComplexMatrix::from_fn(3, 3, |i, j| Complex64::new(0.0, 1.0) * hm.get(i, j))
            };
            let i3 = ComplexMatrix::identity(3);
            let ipk = HermitianMatrix::from_matrix(&gemm(
                &i3.add(&k),
                &i3.add(&k),
                true,
                false,
            )
            .unwrap())
            .unwrap();
            // (I+K)^{-1}(I-K) is unitary when K* = -K; solve via normal equations.
            let rhs = gemm(&i3.add(&k), &i3.sub(&k), true, false).unwrap();
            let uu = crate::matkernel::solve_hpd(&ipk, &rhs).unwrap();
            let us = gemm(&uu, training.matrix(), false, false).unwrap();
            let e0 = eta_direct(&y, training.matrix()).unwrap().eta;
            let e1 = eta_direct(&y, &us).unwrap().eta;
            assert!(
                (e0 - e1).abs() <= 1e-8 * (1.0 + e0.abs()),
                "trial {trial}: {e0} vs {e1}"
            );
        }
    }

    #[test]
    fn split_identity_v_equals_s() {
        // V = S with M = L: V2 = sqrt(N) I (up to phases), V1 Gram = 0.
        let training = build_training_matrix(16, 3, 1).unwrap();
        let s = training.matrix().clone();
        let (v2, v1_gram) = split_v(&s, &training).unwrap();
        let n = 16f64;
        let scaled = gemm(&v2, &v2, false, true).unwrap().scale(1.0 / n);
        // V2 V2*/N = (S S*/N) = I_3 here.
        assert!(scaled.sub(&ComplexMatrix::identity(3)).frobenius_norm() < 1e-10);
        assert!(v1_gram.as_matrix().frobenius_norm() < 1e-10);
    }

    #[test]
    fn split_trace_identity() {
        let training = build_training_matrix(32, 3, 1).unwrap();
        let mut rng = stream_rng(6, 0);
        let v = sample_complex_gaussian(5, 32, 1.0, &mut rng);
        let (v2, v1_gram) = split_v(&v, &training).unwrap();
        let tr_v = gemm(&v, &v, false, true).unwrap().scale(1.0 / 32.0).trace().re;
        let tr_v2 = gemm(&v2, &v2, false, true)
            .unwrap()
            .scale(1.0 / 32.0)
            .trace()
            .re;
        assert_abs_diff_eq!(v1_gram.trace() + tr_v2, tr_v, epsilon = 1e-10);
    }

    #[test]
    fn split_gram_is_psd() {
        let training = build_training_matrix(40, 4, 1).unwrap();
        let mut rng = stream_rng(7, 0);
        let v = sample_complex_gaussian(6, 40, 1.0, &mut rng);
        let (_, v1_gram) = split_v(&v, &training).unwrap();
        let vals = eigvalsh(&v1_gram).unwrap();
        assert!(vals[0] >= -1e-10, "min eigenvalue {}", vals[0]);
    }

    #[test]
    fn split_rejects_non_orthonormal_training() {
        let base = build_training_matrix(16, 2, 1).unwrap();
        // Corrupt the training rows.
        let training = TrainingMatrix::from_raw(base.matrix().scale(2.0), 1);
        let v = sample_complex_gaussian(3, 16, 1.0, &mut stream_rng(8, 0));
        assert!(matches!(
            split_v(&v, &training),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn form_equivalence_h0() {
        let problem = DetectionProblem::new(8, 40, 3, 1.0).unwrap();
        let training = build_training_matrix(40, 3, 1).unwrap();
        for trial in 0..20 {
            let mut rng = stream_rng(9, trial);
            let v = synthesize(Hypothesis::H0, &problem, None, &training, None, &mut rng).unwrap();
            let direct = eta_direct(&v, training.matrix()).unwrap().eta;
            let (v2, v1_gram) = split_v(&v, &training).unwrap();
            let split = eta_split_h0(&v2, &v1_gram, 40).unwrap().eta;
            assert!(
                (direct - split).abs() <= 1e-8 * (1.0 + direct.abs()),
                "trial {trial}: direct {direct} vs split {split}"
            );
        }
    }

    #[test]
    fn split_v2_zero_gives_zero() {
        let v1_gram = HermitianMatrix::identity(4);
        let v2 = ComplexMatrix::zeros(4, 2);
        let stat = eta_split_h0(&v2, &v1_gram, 32).unwrap();
        assert_abs_diff_eq!(stat.eta, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn split_scalar_case() {
        // L = 1: eta = log(1 + q) with q = v2* (V1V1*/N)^{-1} v2 / N.
        let training = build_training_matrix(24, 1, 1).unwrap();
        let mut rng = stream_rng(10, 0);
        let v = sample_complex_gaussian(4, 24, 1.0, &mut rng);
        let (v2, v1_gram) = split_v(&v, &training).unwrap();
        let x = solve_hpd(&v1_gram, &v2).unwrap();
        let q: Complex64 = (0..4).map(|i| v2.get(i, 0).conj() * x.get(i, 0)).sum();
        let expect = (1.0 + q.re / 24.0).ln();
        let stat = eta_split_h0(&v2, &v1_gram, 24).unwrap();
        assert_abs_diff_eq!(stat.eta, expect, epsilon = 1e-12);
    }

    #[test]
    fn kappa1_zero_channel() {
        let ch = Channel {
            h: ComplexMatrix::zeros(3, 2),
        };
        assert_abs_diff_eq!(kappa1(&ch, 1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h1_logdet_term(&ch, 1.0).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn kappa1_rank_one() {
        // H*H = diag(sigma2, 0, ...): kappa1 = 1 - (1/2)^2 = 0.75.
        let sigma2: f64 = 2.0;
        let mut h = ComplexMatrix::zeros(3, 3);
        h.set(0, 0, Complex64::new(sigma2.sqrt(), 0.0));
        let ch = Channel { h };
        assert_abs_diff_eq!(kappa1(&ch, sigma2).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn kappa1_saturates_at_l() {
        // H*H = 1e4 sigma2 I: kappa1 = L (1 - (1 + 1e4)^{-2}) >= 0.99 L.
        let l = 4;
        let h = ComplexMatrix::from_fn(l, l, |i, j| {
            if i == j {
                Complex64::new(100.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let ch = Channel { h };
        let k = kappa1(&ch, 1.0).unwrap();
        assert!(k >= 0.99 * l as f64 && k < l as f64, "kappa1 = {k}");
    }

    #[test]
    fn h1_logdet_diagonal() {
        // H*H = diag(1, 3), sigma2 = 1 -> log 8.
        let mut h = ComplexMatrix::zeros(2, 2);
        h.set(0, 0, Complex64::new(1.0, 0.0));
        h.set(1, 1, Complex64::new(3f64.sqrt(), 0.0));
        let ch = Channel { h };
        assert_abs_diff_eq!(
            h1_logdet_term(&ch, 1.0).unwrap(),
            8f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn overdetermination_invariance() {
        // Zero-padding the channel changes neither logdet term nor kappa1.
        let mut rng = stream_rng(11, 0);
        let ch = generate_channel(5, 2, &mut rng);
        let padded = Channel {
            h: ComplexMatrix::from_fn(5, 4, |i, j| {
                if j < 2 {
                    ch.h.get(i, j)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        };
        assert_abs_diff_eq!(
            h1_logdet_term(&ch, 0.7).unwrap(),
            h1_logdet_term(&padded, 0.7).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            kappa1(&ch, 0.7).unwrap(),
            kappa1(&padded, 0.7).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn eta_nonnegative() {
        let problem = DetectionProblem::new(5, 24, 2, 1.0).unwrap();
        let training = build_training_matrix(24, 2, 1).unwrap();
        for trial in 0..50 {
            let mut rng = stream_rng(12, trial);
            let y = synthesize(Hypothesis::H0, &problem, None, &training, None, &mut rng).unwrap();
            let stat = eta_direct(&y, training.matrix()).unwrap();
            assert!(stat.eta >= -1e-12);
        }
    }
}
