//! Bootstrap particle filter with systematic resampling.

use super::{FilterError, Result};
use crate::linalg::{self, cholesky, Matrix};
use crate::rng::{uniform, GaussianSampler, SimRng};
use crate::scenarios::StateSpaceModel;

/// Weighted particle cloud. Weights are stored as normalized logs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
}

impl ParticleSet {
    /// Normalizes `log_weights` on construction.
    pub fn new(particles: Vec<Vec<f64>>, log_weights: Vec<f64>) -> Result<Self> {
        if particles.len() < 2 || particles.len() != log_weights.len() {
            return Err(FilterError::InvalidArgument(
                "need at least 2 particles with one weight each".into(),
            ));
        }
        let lse = log_sum_exp(&log_weights);
        if !lse.is_finite() {
            return Err(FilterError::AllWeightsCollapsed);
        }
        let log_weights = log_weights.iter().map(|w| w - lse).collect();
        Ok(Self {
            particles,
            log_weights,
        })
    }

    pub fn uniform(particles: Vec<Vec<f64>>) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![0.0; n])
    }

    pub fn particles(&self) -> &[Vec<f64>] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.particles[0].len()];
        for (x, w) in self.particles.iter().zip(self.weights()) {
            linalg::axpy(w, x, &mut m);
        }
        m
    }
}

/// `log Σ exp(vᵢ)`, stable for large magnitudes. `−∞` if every entry is `−∞`,
/// NaN if any entry is NaN.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `1 / Σ wᵢ²` of the weights implied by `log_weights` (normalized here).
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let lse = log_sum_exp(log_weights);
    1.0 / log_weights
        .iter()
        .map(|w| (2.0 * (w - lse)).exp())
        .sum::<f64>()
}

/// Systematic resampling: one uniform offset `u0 ∈ [0, 1)`, positions
/// `(u0 + i)/N`, each mapped to the first index whose cumulative weight exceeds it.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..n {
        let position = (u0 + i as f64) / n as f64;
        while position >= cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}

/// Result of one particle-filter cycle.
#[derive(Debug, Clone)]
pub struct PfStep {
    pub set: ParticleSet,
    /// Weighted mean computed before any resampling.
    pub estimate: Vec<f64>,
    pub ess: f64,
    pub resampled: bool,
}

/// Gaussian log-likelihood up to a constant, `−½ rᵀ R⁻¹ r`, given `chol(R)`.
fn log_likelihood(chol_r: &Matrix, residual: &[f64]) -> f64 {
    // forward substitution L z = r
    let p = residual.len();
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = residual[i];
        for k in 0..i {
            s -= chol_r[(i, k)] * z[k];
        }
        z[i] = s / chol_r[(i, i)];
    }
    -0.5 * linalg::dot(&z, &z)
}

/// One bootstrap-PF cycle: propagate with process noise, reweight by the
/// observation likelihood (wrapped residuals), normalize, and resample
/// systematically when `ESS < ess_threshold · Np`.
pub fn pf_step(
    set: &ParticleSet,
    model: &dyn StateSpaceModel,
    u: &[f64],
    y: &[f64],
    rng: &mut SimRng,
    ess_threshold: f64,
) -> Result<PfStep> {
    let process = GaussianSampler::new(model.process_noise())?;
    let chol_r =
        cholesky(model.observation_noise()).map_err(|_| FilterError::NotPositiveDefinite)?;
    let mut particles = Vec::with_capacity(set.len());
    let mut log_weights = Vec::with_capacity(set.len());
    for (x, lw) in set.particles.iter().zip(&set.log_weights) {
        let mut next = model.transition(x, u)?;
        process.perturb(&mut next, rng);
        let ll = match model.observe(&next) {
            Ok(pred) => log_likelihood(&chol_r, &model.observation_residual(y, &pred)),
            // a particle on a singular point of h explains nothing
            Err(_) => f64::NEG_INFINITY,
        };
        particles.push(next);
        log_weights.push(lw + ll);
    }
    let weighted = ParticleSet::new(particles, log_weights)?;
    let estimate = weighted.mean();
    let ess = effective_sample_size(&weighted.log_weights);
    let n = weighted.len();
    if ess < ess_threshold * n as f64 {
        let idx = systematic_resample(&weighted.weights(), uniform(rng));
        let particles = idx
            .into_iter()
            .map(|i| weighted.particles[i].clone())
            .collect();
        return Ok(PfStep {
            set: ParticleSet::uniform(particles)?,
            estimate,
            ess,
            resampled: true,
        });
    }
    Ok(PfStep {
        set: weighted,
        estimate,
        ess,
        resampled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::testing::scalar_model;
    use crate::filters::{kf_step, GaussianBelief};
    use crate::rng::{rng_from_seed, standard_normal};
    use proptest::prelude::*;

    fn logs(w: &[f64]) -> Vec<f64> {
        w.iter().map(|v| v.ln()).collect()
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&[0.0; 8]) - 8.0).abs() < 1e-12);
        assert!((effective_sample_size(&logs(&[1.0, 0.0, 0.0])) - 1.0).abs() < 1e-12);
        assert!((effective_sample_size(&logs(&[0.5, 0.5, 0.0, 0.0])) - 2.0).abs() < 1e-12);
        // unnormalized logs give the same answer
        assert!((effective_sample_size(&[-1000.0; 5]) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn systematic_examples() {
        for u0 in [0.0, 0.3, 0.999] {
            assert_eq!(systematic_resample(&[0.25; 4], u0), vec![0, 1, 2, 3]);
            assert_eq!(systematic_resample(&[1.0, 0.0, 0.0], u0), vec![0, 0, 0]);
        }
        // positions 0.05 and 0.55 against cumulative (0.75, 1.0)
        assert_eq!(systematic_resample(&[0.75, 0.25], 0.1), vec![0, 0]);
        assert_eq!(systematic_resample(&[0.75, 0.25], 0.6), vec![0, 1]);
    }

    #[test]
    fn systematic_copy_counts_are_unbiased() {
        let w = [0.05, 0.4, 0.15, 0.3, 0.1];
        let n = w.len();
        let draws = 100_000;
        let mut rng = rng_from_seed(11);
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            for i in systematic_resample(&w, uniform(&mut rng)) {
                counts[i] += 1;
            }
        }
        for (i, &wi) in w.iter().enumerate() {
            let expected = n as f64 * wi;
            let mean = counts[i] as f64 / draws as f64;
            let sigma = (n as f64 * wi * (1.0 - wi) / draws as f64).sqrt();
            assert!(
                (mean - expected).abs() < 3.0 * sigma,
                "index {i}: {mean} vs {expected}"
            );
        }
    }

    proptest! {
        #[test]
        fn resample_keeps_count_and_tracks_weights(
            raw in proptest::collection::vec(0.0f64..1.0, 2..40),
            u0 in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let idx = systematic_resample(&w, u0);
            prop_assert_eq!(idx.len(), w.len());
            let n = w.len() as f64;
            for (i, wi) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&j| j == i).count() as f64;
                // systematic copies are floor or ceil of N·w (up to rounding at the boundary)
                prop_assert!((c - n * wi).abs() < 1.0 + 1e-9);
            }
        }

        #[test]
        fn pf_weights_are_normalized(seed in 0u64..1000, y in -5.0f64..5.0) {
            let model = scalar_model(0.9, 1.0, 0.3, 0.2);
            let mut rng = rng_from_seed(seed);
            let particles = (0..50).map(|_| vec![standard_normal(&mut rng)]).collect();
            let set = ParticleSet::uniform(particles).unwrap();
            let out = pf_step(&set, &model, &[], &[y], &mut rng, 0.5).unwrap();
            let sum: f64 = out.set.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_r_keeps_weights_uniform() {
        let model = scalar_model(1.0, 1.0, 0.1, 1e12);
        let mut rng = rng_from_seed(4);
        let particles = (0..100).map(|_| vec![standard_normal(&mut rng)]).collect();
        let set = ParticleSet::uniform(particles).unwrap();
        let out = pf_step(&set, &model, &[], &[0.5], &mut rng, 0.5).unwrap();
        assert!(!out.resampled);
        assert!((out.ess - 100.0).abs() < 1e-6);
    }

    #[test]
    fn exact_particle_dominates_and_triggers_resampling() {
        let model = scalar_model(1.0, 1.0, 0.0, 1e-10);
        let particles = (0..10).map(|i| vec![i as f64]).collect();
        let set = ParticleSet::uniform(particles).unwrap();
        let mut rng = rng_from_seed(0);
        let out = pf_step(&set, &model, &[], &[7.0], &mut rng, 0.5).unwrap();
        assert!(out.ess < 1.0 + 1e-9);
        assert!(out.resampled);
        assert!(out.set.particles().iter().all(|p| p == &vec![7.0]));
        assert_eq!(out.estimate, vec![7.0]);
    }

    #[test]
    fn incompatible_observation_collapses_weights() {
        let model = scalar_model(1.0, 1.0, 0.0, 1e-300);
        let set = ParticleSet::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let mut rng = rng_from_seed(0);
        let err = pf_step(&set, &model, &[], &[1e200], &mut rng, 0.5).unwrap_err();
        assert_eq!(err, FilterError::AllWeightsCollapsed);
    }

    #[test]
    fn large_cloud_matches_kalman_oracle() {
        let (a, h, q, r) = (0.9, 1.0, 0.3, 0.4);
        let model = scalar_model(a, h, q, r);
        let s = |v: f64| Matrix::new(1, 1, vec![v]).unwrap();
        let ys: Vec<f64> = (0..20).map(|t| (t as f64 * 0.4).sin() * 2.0).collect();
        let mut kf = GaussianBelief::new(vec![1.0], s(1.0));
        for y in &ys {
            kf = kf_step(
                &kf,
                &s(a),
                &Matrix::zeros(1, 0),
                &s(h),
                &s(q),
                &s(r),
                &[],
                &[*y],
            )
            .unwrap();
        }
        let replicates = 20;
        let means: Vec<f64> = (0..replicates)
            .map(|k| {
                let mut rng = rng_from_seed(100 + k);
                let particles = (0..10_000)
                    .map(|_| vec![1.0 + standard_normal(&mut rng)])
                    .collect();
                let mut set = ParticleSet::uniform(particles).unwrap();
                let mut est = 0.0;
                for y in &ys {
                    let out = pf_step(&set, &model, &[], &[*y], &mut rng, 0.5).unwrap();
                    est = out.estimate[0];
                    set = out.set;
                }
                est
            })
            .collect();
        let avg = means.iter().sum::<f64>() / replicates as f64;
        let sd =
            (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (replicates - 1) as f64).sqrt();
        let se = sd / (replicates as f64).sqrt();
        assert!(
            (avg - kf.mean[0]).abs() < 3.0 * se,
            "{avg} vs {} (se {se})",
            kf.mean[0]
        );
    }
}
