//! One-dimensional Gaussian random field baseline with a power-law
//! spectrum. Diffusion acts independently on every Fourier coefficient, so
//! the forward-backward protocol has a closed form per mode and no
//! approximation anywhere: the reconstruction is drawn from the exact
//! Gaussian posterior of each coefficient.
//!
//! Conventions: periodic boundary, unitary transforms (`1/sqrt(n)` both
//! ways), spectral variance `sigma_k^2 = k^(-a)` split evenly between the
//! real and imaginary parts, zero mode pinned to 0 (centered field).

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::observables::CorrelationAccumulator;

/// Grid and spectrum description.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrfSpec {
    /// Grid points; a power of two.
    pub n: usize,
    /// Spectral decay exponent: `sigma_k^2 = k^(-a)`.
    pub a: f64,
}

impl GrfSpec {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "grid size {n} must be a power of two >= 8"
            )));
        }
        if a.is_nan() || a <= 0.0 {
            return Err(Error::range("a", a, "(0, inf)"));
        }
        Ok(GrfSpec { n, a })
    }

    /// Spectral variance of mode `k` (total over real and imaginary parts).
    pub fn sigma2(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            (k as f64).powf(-self.a)
        }
    }
}

/// Critical wavevector: modes below it carry unit signal-to-noise at keep
/// probability `alpha_bar` and are retrieved by the backward process.
pub fn kappa_star(alpha_bar: f64, a: f64) -> f64 {
    if alpha_bar >= 1.0 {
        return f64::INFINITY;
    }
    (1.0 / alpha_bar - 1.0).powf(-1.0 / a)
}

/// A real field together with its spectrum.
#[derive(Clone, Debug)]
pub struct Field {
    pub values: Vec<f64>,
    /// Full-length spectrum under the unitary convention.
    pub spectrum: Vec<Complex64>,
}

fn ifft_real(spec: &GrfSpec, spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(spec.n).process(&mut buf);
    let scale = 1.0 / (spec.n as f64).sqrt();
    buf.iter().map(|c| c.re * scale).collect()
}

fn fft_forward(spec: &GrfSpec, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(spec.n).process(&mut buf);
    let scale = 1.0 / (spec.n as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Draws a centered field: independent complex Gaussians with variance
/// `sigma_k^2`, Hermitian-symmetrized and inverse-transformed.
pub fn sample(spec: &GrfSpec, rng: &mut impl Rng) -> Field {
    let n = spec.n;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n / 2 {
        let sd = (spec.sigma2(k) / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spectrum[k] = Complex64::new(sd * re, sd * im);
        spectrum[n - k] = spectrum[k].conj();
    }
    let nyq: f64 = rng.sample(StandardNormal);
    spectrum[n / 2] = Complex64::new(spec.sigma2(n / 2).sqrt() * nyq, 0.0);
    let values = ifft_real(spec, &spectrum);
    Field { values, spectrum }
}

/// Outcome of one forward-backward pass.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub field: Field,
    /// Relative modal error `|rec(k) - orig(k)| / sigma_k` for `k <= n/2`
    /// (zero mode reported as 0).
    pub modal_error: Vec<f64>,
}

/// Diffuses every coefficient to keep probability `alpha_bar` and samples
/// the exact per-mode posterior of the clean coefficient given the noisy
/// one. `alpha_bar = 1` is the identity; `alpha_bar = 0` redraws the field.
pub fn forward_backward(
    spec: &GrfSpec,
    orig: &Field,
    alpha_bar: f64,
    rng: &mut impl Rng,
) -> Result<Reconstruction> {
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::range("alpha_bar", alpha_bar, "[0, 1]"));
    }
    let n = spec.n;
    let sqrt_ab = alpha_bar.sqrt();
    let noise_var = 1.0 - alpha_bar;
    let mut rec = vec![Complex64::new(0.0, 0.0); n];

    let posterior = |x0: Complex64, s2: f64, split: f64, rng: &mut dyn rand::RngCore| {
        // forward one coefficient, then draw from the Gaussian posterior of
        // the clean value; `split` is 1/2 for paired modes, 1 for Nyquist
        let nsd = (noise_var * split).sqrt();
        let xt = Complex64::new(
            sqrt_ab * x0.re + nsd * rng.sample::<f64, _>(StandardNormal),
            sqrt_ab * x0.im + nsd * rng.sample::<f64, _>(StandardNormal),
        );
        let denom = alpha_bar * s2 + noise_var;
        if denom == 0.0 {
            // alpha_bar = 1 and sigma = 0
            return xt;
        }
        let gain = sqrt_ab * s2 / denom;
        let post_sd = (s2 * noise_var / denom * split).sqrt();
        Complex64::new(
            gain * xt.re + post_sd * rng.sample::<f64, _>(StandardNormal),
            gain * xt.im + post_sd * rng.sample::<f64, _>(StandardNormal),
        )
    };

    for k in 1..n / 2 {
        let x = posterior(orig.spectrum[k], spec.sigma2(k), 0.5, rng);
        rec[k] = x;
        rec[n - k] = x.conj();
    }
    let nyq = posterior(
        Complex64::new(orig.spectrum[n / 2].re, 0.0),
        spec.sigma2(n / 2),
        1.0,
        rng,
    );
    rec[n / 2] = Complex64::new(nyq.re, 0.0);

    let mut modal_error = vec![0.0; n / 2 + 1];
    for k in 1..=n / 2 {
        let err = (rec[k] - orig.spectrum[k]).norm();
        modal_error[k] = err / spec.sigma2(k).sqrt();
    }
    let values = ifft_real(spec, &rec);
    Ok(Reconstruction {
        field: Field {
            values,
            spectrum: rec,
        },
        modal_error,
    })
}

/// Spectrum of an arbitrary real field under the crate's conventions.
pub fn spectrum_of(spec: &GrfSpec, values: &[f64]) -> Vec<Complex64> {
    fft_forward(spec, values)
}

/// Correlation statistics of the forward-backward change magnitudes
/// `|rec - orig|` per site, plus the batch-averaged modal errors.
pub struct GrfObservables {
    pub table: crate::observables::CorrelationTable,
    /// Root-mean-square relative modal error per `k <= n/2`.
    pub modal_rms: Vec<f64>,
}

/// Runs `n_starts x n_traj` forward-backward passes at one noise level.
/// Trajectory randomness is derived from `seed` and the cell index, so the
/// batch is reproducible regardless of scheduling.
pub fn observables(
    spec: &GrfSpec,
    alpha_bar: f64,
    n_starts: usize,
    n_traj: usize,
    seed: u64,
) -> Result<GrfObservables> {
    let mut acc = CorrelationAccumulator::new(spec.n);
    let mut err2 = vec![0.0f64; spec.n / 2 + 1];
    for b in 0..n_starts {
        let mut srng = crate::seeding::stream(seed, "grf-start", b as u64);
        let orig = sample(spec, &mut srng);
        let mut trajs = Vec::with_capacity(n_traj);
        for t in 0..n_traj {
            let mut trng =
                crate::seeding::stream(seed, "grf-traj", (b * n_traj + t) as u64);
            let rec = forward_backward(spec, &orig, alpha_bar, &mut trng)?;
            for (dst, &e) in err2.iter_mut().zip(&rec.modal_error) {
                *dst += e * e;
            }
            trajs.push(
                rec.field
                    .values
                    .iter()
                    .zip(&orig.values)
                    .map(|(a, b)| (a - b).abs())
                    .collect(),
            );
        }
        acc.add_start(&trajs)?;
    }
    let total = (n_starts * n_traj) as f64;
    let modal_rms = err2.iter().map(|&e| (e / total).sqrt()).collect();
    Ok(GrfObservables {
        table: acc.finish()?,
        modal_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_validation() {
        assert!(GrfSpec::new(5, 1.0).is_err());
        assert!(GrfSpec::new(64, 0.0).is_err());
        assert!(GrfSpec::new(64, 0.5).is_ok());
    }

    #[test]
    fn zero_mode_is_pinned() {
        let spec = GrfSpec::new(64, 1.0).unwrap();
        let mut rng = seeding::stream(1, "grf", 0);
        let f = sample(&spec, &mut rng);
        assert_eq!(f.spectrum[0], Complex64::new(0.0, 0.0));
        let mean: f64 = f.values.iter().sum::<f64>() / 64.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn field_is_real_and_round_trips() {
        let spec = GrfSpec::new(128, 0.8).unwrap();
        let mut rng = seeding::stream(2, "grf", 0);
        let f = sample(&spec, &mut rng);
        let back = spectrum_of(&spec, &f.values);
        for k in 0..128 {
            assert_abs_diff_eq!(back[k].re, f.spectrum[k].re, epsilon = 1e-10);
            assert_abs_diff_eq!(back[k].im, f.spectrum[k].im, epsilon = 1e-10);
        }
    }

    #[test]
    fn spectral_variances_match_the_power_law() {
        let spec = GrfSpec::new(64, 1.3).unwrap();
        let draws = 10_000;
        let mut acc = vec![0.0f64; 33];
        for i in 0..draws {
            let mut rng = seeding::stream(3, "grf", i);
            let f = sample(&spec, &mut rng);
            for k in 1..=32 {
                acc[k] += f.spectrum[k].norm_sqr();
            }
        }
        for k in 1..=32usize {
            let est = acc[k] / draws as f64;
            let want = spec.sigma2(k);
            // variance of |X|^2 over draws is about want^2 (resp. 2 want^2
            // at the Nyquist mode)
            let sd = want * if k == 32 { (2.0f64).sqrt() } else { 1.0 } / (draws as f64).sqrt();
            assert!(
                (est - want).abs() < 4.0 * sd,
                "k = {k}: {est} vs {want}"
            );
        }
    }

    #[test]
    fn steep_spectra_are_dominated_by_the_lowest_mode() {
        let spec = GrfSpec::new(64, 4.0).unwrap();
        let total: f64 = (1..=32).map(|k| spec.sigma2(k)).sum();
        assert!(spec.sigma2(1) / total > 0.9);
    }

    #[test]
    fn identity_at_zero_noise() {
        let spec = GrfSpec::new(64, 1.0).unwrap();
        let mut rng = seeding::stream(4, "grf", 0);
        let f = sample(&spec, &mut rng);
        let rec = forward_backward(&spec, &f, 1.0, &mut rng).unwrap();
        for (a, b) in rec.field.values.iter().zip(&f.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(rec.modal_error.iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn terminal_noise_redraws_the_field() {
        let spec = GrfSpec::new(64, 1.0).unwrap();
        // pooled correlation between original and reconstructed coefficients
        let draws = 2000;
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..draws {
            let mut rng = seeding::stream(5, "grf", i);
            let f = sample(&spec, &mut rng);
            let rec = forward_backward(&spec, &f, 0.0, &mut rng).unwrap();
            for k in 1..=32 {
                dot += f.spectrum[k].re * rec.field.spectrum[k].re
                    + f.spectrum[k].im * rec.field.spectrum[k].im;
                na += f.spectrum[k].norm_sqr();
                nb += rec.field.spectrum[k].norm_sqr();
            }
        }
        let rho = dot / (na * nb).sqrt();
        // about 64 effective dof per draw
        assert!(rho.abs() < 4.0 / (64.0 * draws as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn modal_error_crosses_unity_at_kappa_star() {
        let spec = GrfSpec::new(256, 1.0).unwrap();
        let alpha_bar = 0.9; // kappa* = 9
        let obs = observables(&spec, alpha_bar, 64, 8, 6).unwrap();
        let ks = kappa_star(alpha_bar, spec.a);
        assert_abs_diff_eq!(ks, 9.0, epsilon = 1e-12);
        // rms relative error is sqrt(2/(snr+1)): below 1 before kappa*,
        // above 1 after
        let cross = (1..=128)
            .find(|&k| obs.modal_rms[k] >= 1.0)
            .expect("error must cross unity");
        assert!(
            (cross as f64 - ks).abs() <= 1.0 + 1e-9,
            "crossing at {cross}, kappa* = {ks}"
        );
    }

    #[test]
    fn kappa_star_values() {
        assert_abs_diff_eq!(kappa_star(0.5, 2.0), 1.0, epsilon = 1e-12);
        assert!((kappa_star(0.9, 1.0) - 9.0).abs() < 1e-12);
        assert_eq!(kappa_star(1.0, 1.0), f64::INFINITY);
    }
}
