//! Maximum-likelihood channel estimate, pseudo-true parameter and the
//! misspecified lower bound `LB = sqrt(Tr(MCRB) + Tr(Bias))` for the linear
//! Gaussian model `r = sqrt(P_T) D x + w`, `w ~ N(0, sigma2/2 I)`.
//!
//! With estimation model `D_est` and true model `D_true`:
//!
//! * `x0 = (D_est^T D_est)^-1 D_est^T D_true x_true` (least-squares projection),
//! * `MCRB = (D_est^T D_est)^-1 / (2 gamma)` with `gamma = P_T / sigma2`,
//! * `Bias = (x_true - x0)(x_true - x0)^T`.
//!
//! When the estimation model is the true one, the bias vanishes and LB is the
//! classical CRLB, `sqrt(Tr((D^T D)^-1) / (2 gamma))`. Note the inverse: the
//! matched bound is the `D_est = D_true` case of the MCRB term, not
//! `Tr(D^T D)`.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::channel::{generate_observations, ChannelVector, RealifiedModel};
use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::rng::{noise_stream_name, substream};

/// Receiver noise: PSD, noise figure and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
}

impl NoiseModel {
    /// `10^((psd - 30)/10) * 10^(nf/10) * B`, in watts.
    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.psd_dbm_hz) * 10f64.powf(self.noise_figure_db / 10.0) * self.bandwidth_hz
    }
}

pub fn noise_variance(noise: &NoiseModel) -> Result<f64> {
    if !(noise.bandwidth_hz.is_finite() && noise.bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise bandwidth must be positive, got {}",
            noise.bandwidth_hz
        )));
    }
    Ok(noise.sigma2())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Bounds at one operating point. Traces are in squared ohms, `lb`, `crlb`
/// and `rmse` in ohms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub p_t: f64,
    pub gamma: f64,
    pub tr_mcrb: f64,
    pub tr_bias: f64,
    pub lb: f64,
    pub crlb: f64,
    pub rmse: Option<f64>,
}

impl BoundReport {
    pub fn sqrt_tr_bias(&self) -> f64 {
        self.tr_bias.sqrt()
    }
}

/// Factorized estimation and true models for one channel realization.
/// Everything that does not depend on the SNR is computed once.
#[derive(Debug, Clone)]
pub struct MismatchAnalysis {
    est: LeastSquares,
    d_true: RealifiedModel,
    x_true: ChannelVector,
    pseudo_true: ChannelVector,
    tr_inv_est: f64,
    tr_inv_true: f64,
    tr_bias: f64,
}

impl MismatchAnalysis {
    pub fn new(
        d_est: &RealifiedModel,
        d_true: &RealifiedModel,
        x_true: &ChannelVector,
    ) -> Result<Self> {
        check_shapes(d_est, d_true, x_true)?;
        let est = LeastSquares::new(&d_est.d)?;
        let matched = d_est.d == d_true.d;
        let x0 = if matched {
            x_true.0.clone()
        } else {
            est.solve(&(&d_true.d * &x_true.0))
        };
        let tr_bias = (&x_true.0 - &x0).norm_squared();
        let tr_inv_est = est.trace_inverse_normal();
        let tr_inv_true = if matched {
            tr_inv_est
        } else {
            LeastSquares::new(&d_true.d)?.trace_inverse_normal()
        };
        Ok(Self {
            est,
            d_true: d_true.clone(),
            x_true: x_true.clone(),
            pseudo_true: ChannelVector(x0),
            tr_inv_est,
            tr_inv_true,
            tr_bias,
        })
    }

    pub fn pseudo_true(&self) -> &ChannelVector {
        &self.pseudo_true
    }

    pub fn x_true(&self) -> &ChannelVector {
        &self.x_true
    }

    pub fn d_true(&self) -> &RealifiedModel {
        &self.d_true
    }

    /// `Tr((D_est^T D_est)^-1)`.
    pub fn trace_inverse_est(&self) -> f64 {
        self.tr_inv_est
    }

    /// `Tr((D_true^T D_true)^-1)`.
    pub fn trace_inverse_true(&self) -> f64 {
        self.tr_inv_true
    }

    pub fn tr_bias(&self) -> f64 {
        self.tr_bias
    }

    pub fn tr_mcrb(&self, gamma: f64) -> f64 {
        self.tr_inv_est / (2.0 * gamma)
    }

    pub fn crlb(&self, gamma: f64) -> f64 {
        (self.tr_inv_true / (2.0 * gamma)).sqrt()
    }

    pub fn report(&self, p_t: f64, sigma2: f64) -> Result<BoundReport> {
        let gamma = snr(p_t, sigma2)?;
        let tr_mcrb = self.tr_mcrb(gamma);
        Ok(BoundReport {
            p_t,
            gamma,
            tr_mcrb,
            tr_bias: self.tr_bias,
            lb: (tr_mcrb + self.tr_bias).sqrt(),
            crlb: self.crlb(gamma),
            rmse: None,
        })
    }

    /// `x_hat = (1/sqrt(P_T)) argmin |r - D_est x|`.
    pub fn ml_estimate(&self, r: &DVector<f64>, p_t: f64) -> ChannelVector {
        ChannelVector(self.est.solve(r) / p_t.sqrt())
    }

    /// Monte-Carlo RMSE of the ML estimate against the true channel. Trial `t`
    /// draws its noise from substream `noise/<point>/<t>` of `seed`, and
    /// squared errors are summed in trial order. `sigma2 = None` runs
    /// noiseless trials.
    pub fn mc_rmse(
        &self,
        p_t: f64,
        sigma2: Option<f64>,
        trials: usize,
        seed: u64,
        point: &str,
    ) -> Result<f64> {
        if trials == 0 {
            return Err(Error::InvalidArgument("Monte-Carlo needs at least one trial".into()));
        }
        let errors: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(seed, &noise_stream_name(point, t));
                let r = generate_observations(&self.d_true, &self.x_true, p_t, sigma2, &mut rng)?;
                let x_hat = self.ml_estimate(&r, p_t);
                Ok((&x_hat.0 - &self.x_true.0).norm_squared())
            })
            .collect::<Result<_>>()?;
        let total: f64 = errors.iter().sum();
        Ok((total / trials as f64).sqrt())
    }
}

fn check_shapes(d_est: &RealifiedModel, d_true: &RealifiedModel, x: &ChannelVector) -> Result<()> {
    if d_est.d.shape() != d_true.d.shape() || d_est.d.ncols() != x.0.len() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: D_est {:?}, D_true {:?}, x {}",
            d_est.d.shape(),
            d_true.d.shape(),
            x.0.len()
        )));
    }
    Ok(())
}

fn snr(p_t: f64, sigma2: f64) -> Result<f64> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::InvalidArgument(format!("transmit power must be positive, got {p_t}")));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(p_t / sigma2)
}

fn positive_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("SNR must be positive, got {gamma}")))
    }
}

/// Least-squares estimate of the channel from observations `r` under model
/// `d_est`.
pub fn ml_estimate(d_est: &RealifiedModel, r: &DVector<f64>, p_t: f64) -> Result<ChannelVector> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::InvalidArgument(format!("transmit power must be positive, got {p_t}")));
    }
    if r.len() != d_est.d.nrows() {
        return Err(Error::InvalidArgument(format!(
            "observation length {} does not match model rows {}",
            r.len(),
            d_est.d.nrows()
        )));
    }
    let ls = LeastSquares::new(&d_est.d)?;
    Ok(ChannelVector(ls.solve(r) / p_t.sqrt()))
}

/// Pseudo-true parameter: the `x` minimizing `|D_true x_true - D_est x|`.
pub fn pseudo_true(
    d_est: &RealifiedModel,
    d_true: &RealifiedModel,
    x_true: &ChannelVector,
) -> Result<ChannelVector> {
    Ok(MismatchAnalysis::new(d_est, d_true, x_true)?.pseudo_true)
}

/// `Tr((D_est^T D_est)^-1) / (2 gamma)`.
pub fn mcrb_trace(d_est: &RealifiedModel, gamma: f64) -> Result<f64> {
    positive_gamma(gamma)?;
    Ok(LeastSquares::new(&d_est.d)?.trace_inverse_normal() / (2.0 * gamma))
}

/// `|x_true - x0|^2`, independent of power and noise level.
pub fn bias_trace(
    d_est: &RealifiedModel,
    d_true: &RealifiedModel,
    x_true: &ChannelVector,
) -> Result<f64> {
    Ok(MismatchAnalysis::new(d_est, d_true, x_true)?.tr_bias)
}

/// Full report at SNR `gamma`; `p_t` is carried through for labeling only.
pub fn lower_bound(
    d_est: &RealifiedModel,
    d_true: &RealifiedModel,
    x_true: &ChannelVector,
    gamma: f64,
) -> Result<BoundReport> {
    positive_gamma(gamma)?;
    let a = MismatchAnalysis::new(d_est, d_true, x_true)?;
    let tr_mcrb = a.tr_mcrb(gamma);
    Ok(BoundReport {
        p_t: f64::NAN,
        gamma,
        tr_mcrb,
        tr_bias: a.tr_bias,
        lb: (tr_mcrb + a.tr_bias).sqrt(),
        crlb: a.crlb(gamma),
        rmse: None,
    })
}

/// Matched-model bound `sqrt(Tr((D^T D)^-1) / (2 gamma))`.
pub fn crlb(d_true: &RealifiedModel, gamma: f64) -> Result<f64> {
    positive_gamma(gamma)?;
    Ok((LeastSquares::new(&d_true.d)?.trace_inverse_normal() / (2.0 * gamma)).sqrt())
}

/// Monte-Carlo RMSE of the ML estimator built on `d_est` for data from
/// `d_true`, see [`MismatchAnalysis::mc_rmse`].
#[allow(clippy::too_many_arguments)]
pub fn mc_rmse(
    d_est: &RealifiedModel,
    d_true: &RealifiedModel,
    x_true: &ChannelVector,
    p_t: f64,
    sigma2: Option<f64>,
    trials: usize,
    seed: u64,
    point: &str,
) -> Result<f64> {
    MismatchAnalysis::new(d_est, d_true, x_true)?.mc_rmse(p_t, sigma2, trials, seed, point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::realify;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(g: usize, n: usize, rng: &mut ChaCha8Rng, mutual: bool) -> RealifiedModel {
        let b = DMatrix::from_fn(g, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        realify(&b, mutual)
    }

    fn perturbed(m: &RealifiedModel, eps: f64, rng: &mut ChaCha8Rng) -> RealifiedModel {
        let b = m.complex_matrix().map(|v| {
            v + Complex64::new(rng.random_range(-eps..eps), rng.random_range(-eps..eps))
        });
        realify(&b, true)
    }

    fn random_x(n: usize, rng: &mut ChaCha8Rng) -> ChannelVector {
        ChannelVector(DVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn noise_variance_values() {
        let base = NoiseModel { psd_dbm_hz: -173.855, noise_figure_db: 10.0, bandwidth_hz: 1.0 };
        let s = noise_variance(&base).unwrap();
        assert_relative_eq!(s, 10f64.powf(-19.3855), max_relative = 1e-12);
        assert_relative_eq!(s, 4.117e-20, max_relative = 1e-3);
        let nf0 = noise_variance(&NoiseModel { noise_figure_db: 0.0, ..base }).unwrap();
        assert_relative_eq!(nf0, 10f64.powf(-20.3855), max_relative = 1e-12);
        let wide = noise_variance(&NoiseModel { bandwidth_hz: 10.0, ..base }).unwrap();
        assert_relative_eq!(wide, 10.0 * s, max_relative = 1e-15);
        assert!(noise_variance(&NoiseModel { bandwidth_hz: 0.0, ..base }).is_err());
    }

    #[test]
    fn ml_estimate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_model(8, 3, &mut rng, false);
        let x = random_x(3, &mut rng);
        let p_t: f64 = 2.5;
        let r = &d.d * &x.0 * p_t.sqrt();
        let est = ml_estimate(&d, &r, p_t).unwrap();
        assert!((&est.0 - &x.0).norm() < 1e-10 * x.0.norm());
        let zero = ml_estimate(&d, &DVector::zeros(16), p_t).unwrap();
        assert_eq!(zero.0, DVector::zeros(6));

        let noisy = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
        let est = ml_estimate(&d, &noisy, p_t).unwrap();
        let dt = d.d.transpose();
        let oracle = (&dt * &d.d).try_inverse().unwrap() * dt * noisy / p_t.sqrt();
        assert!((&est.0 - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn rank_deficient_design() {
        let b = DMatrix::from_element(4, 2, Complex64::new(1.0, 0.5));
        let d = realify(&b, false);
        let x = ChannelVector(DVector::zeros(4));
        assert!(matches!(ml_estimate(&d, &DVector::zeros(8), 1.0), Err(Error::DegenerateDesign { .. })));
        assert!(matches!(mcrb_trace(&d, 1.0), Err(Error::DegenerateDesign { .. })));
        assert!(matches!(pseudo_true(&d, &d, &x), Err(Error::DegenerateDesign { .. })));
    }

    #[test]
    fn pseudo_true_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d_true = random_model(6, 2, &mut rng, true);
        let d_est = perturbed(&d_true, 0.2, &mut rng);
        let x = random_x(2, &mut rng);
        assert_eq!(pseudo_true(&d_true, &d_true, &x).unwrap(), x);
        let zero = ChannelVector(DVector::zeros(4));
        assert_eq!(pseudo_true(&d_est, &d_true, &zero).unwrap().0, DVector::zeros(4));
    }

    #[test]
    fn mcrb_closed_form_and_scaling() {
        // D = I (2N x 2N) from B = I.
        let n = 3;
        let b = DMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        let d = realify(&b, false);
        assert_relative_eq!(mcrb_trace(&d, 0.5).unwrap(), 2.0 * n as f64, max_relative = 1e-14);
        assert_relative_eq!(crlb(&d, 0.5).unwrap(), (2.0 * n as f64).sqrt(), max_relative = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_model(10, 4, &mut rng, false);
        let a = mcrb_trace(&d, 3.0).unwrap();
        let b2 = mcrb_trace(&d, 6.0).unwrap();
        assert_eq!(a, 2.0 * b2);
        let explicit = (d.d.transpose() * &d.d).try_inverse().unwrap().trace() / 6.0;
        assert_relative_eq!(a, explicit, max_relative = 1e-9);
        assert!(mcrb_trace(&d, 0.0).is_err());
    }

    #[test]
    fn crlb_scales_with_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_model(10, 4, &mut rng, true);
        let sigma2 = 1e-3;
        let lo = crlb(&d, dbm_to_watts(20.0) / sigma2).unwrap();
        let hi = crlb(&d, dbm_to_watts(40.0) / sigma2).unwrap();
        assert_relative_eq!(lo / hi, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn bias_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d_true = random_model(9, 3, &mut rng, true);
        let d_est = perturbed(&d_true, 0.3, &mut rng);
        let x = random_x(3, &mut rng);
        assert_eq!(bias_trace(&d_true, &d_true, &x).unwrap(), 0.0);
        let b1 = bias_trace(&d_est, &d_true, &x).unwrap();
        let scaled = ChannelVector(&x.0 * 3.0);
        assert_relative_eq!(bias_trace(&d_est, &d_true, &scaled).unwrap(), 9.0 * b1, max_relative = 1e-12);
        let x0 = pseudo_true(&d_est, &d_true, &x).unwrap();
        assert_relative_eq!(b1, (&x.0 - &x0.0).norm_squared(), max_relative = 1e-10);
        assert!(b1 > 0.0);
    }

    #[test]
    fn lower_bound_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d_true = random_model(12, 3, &mut rng, true);
        let d_est = perturbed(&d_true, 0.1, &mut rng);
        let x = random_x(3, &mut rng);
        let matched = lower_bound(&d_true, &d_true, &x, 10.0).unwrap();
        assert_relative_eq!(matched.lb, matched.crlb, max_relative = 1e-12);
        let bias = bias_trace(&d_est, &d_true, &x).unwrap();
        let high = lower_bound(&d_est, &d_true, &x, 1e14).unwrap();
        assert_relative_eq!(high.lb, bias.sqrt(), max_relative = 1e-6);
        let mid = lower_bound(&d_est, &d_true, &x, 5.0).unwrap();
        assert_relative_eq!(mid.lb, (mid.tr_mcrb + mid.tr_bias).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn noiseless_mc_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d_true = random_model(12, 3, &mut rng, true);
        let d_est = perturbed(&d_true, 0.1, &mut rng);
        let x = random_x(3, &mut rng);
        let bias = bias_trace(&d_est, &d_true, &x).unwrap();
        let rmse = mc_rmse(&d_est, &d_true, &x, 3.0, None, 4, 1, "0").unwrap();
        assert_relative_eq!(rmse, bias.sqrt(), max_relative = 1e-9);
        let matched = mc_rmse(&d_true, &d_true, &x, 3.0, None, 1, 1, "0").unwrap();
        assert!(matched < 1e-12);
        assert!(mc_rmse(&d_true, &d_true, &x, 3.0, None, 0, 1, "0").is_err());
    }

    #[test]
    fn mc_rmse_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_model(12, 3, &mut rng, true);
        let x = random_x(3, &mut rng);
        let a = mc_rmse(&d, &d, &x, 1.0, Some(0.5), 50, 42, "3").unwrap();
        let b = mc_rmse(&d, &d, &x, 1.0, Some(0.5), 50, 42, "3").unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = mc_rmse(&d, &d, &x, 1.0, Some(0.5), 50, 43, "3").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn matched_mc_rmse_tracks_crlb() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_model(64, 4, &mut rng, true);
        let x = random_x(4, &mut rng);
        let sigma2 = 0.3;
        let p_t = 2.0;
        let rmse = mc_rmse(&d, &d, &x, p_t, Some(sigma2), 2000, 5, "0").unwrap();
        let bound = crlb(&d, p_t / sigma2).unwrap();
        let ratio = rmse / bound;
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }
}
