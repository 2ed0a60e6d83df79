//! Exact linear Kalman recursion (test oracle) and the extended Kalman filter.

use super::{FilterError, GaussianBelief, Result};
use crate::linalg::{self, solve, solve_spd, Matrix};
use crate::scenarios::StateSpaceModel;

/// One predict/update cycle of the linear-Gaussian Kalman filter.
///
/// Written independently of the EKF path (plain `P = (I − K H) P⁻` update and
/// an LU solve per gain row) so it can serve as an oracle for the nonlinear
/// filters on linear systems.
#[allow(clippy::too_many_arguments)]
pub fn kf_step(
    belief: &GaussianBelief,
    a: &Matrix,
    b: &Matrix,
    h: &Matrix,
    q: &Matrix,
    r: &Matrix,
    u: &[f64],
    y: &[f64],
) -> Result<GaussianBelief> {
    let n = belief.dim();
    let p = h.rows();
    if a.rows() != n || a.cols() != n || h.cols() != n || y.len() != p || b.cols() != u.len() {
        return Err(FilterError::InvalidArgument(
            "kf_step: inconsistent dimensions".into(),
        ));
    }

    let mut mean = a.mul_vec(&belief.mean);
    if !u.is_empty() {
        linalg::axpy(1.0, &b.mul_vec(u), &mut mean);
    }
    let cov = a.matmul(&belief.cov).matmul(&a.transpose()).add(q);

    let ht = h.transpose();
    let s = h.matmul(&cov).matmul(&ht).add(r);
    let pht = cov.matmul(&ht);
    // K = P Hᵀ S⁻¹, row i solves Sᵀ k_iᵀ = (P Hᵀ)_iᵀ
    let mut gain = Matrix::zeros(n, p);
    let st = s.transpose();
    for i in 0..n {
        let row = solve(&st, pht.row(i)).map_err(|_| FilterError::SingularInnovation)?;
        for (j, v) in row.into_iter().enumerate() {
            gain[(i, j)] = v;
        }
    }
    let innovation = linalg::sub(y, &h.mul_vec(&mean));
    linalg::axpy(1.0, &gain.mul_vec(&innovation), &mut mean);
    let mut post = Matrix::identity(n).sub(&gain.matmul(h)).matmul(&cov);
    post.symmetrize();
    Ok(GaussianBelief::new(mean, post))
}

/// Kalman gain `K = P_xy S⁻¹` for symmetric positive-definite `S`.
pub(crate) fn gain_from(cross: &Matrix, innovation_cov: &Matrix) -> Result<Matrix> {
    let kt = solve_spd(innovation_cov, &cross.transpose())
        .map_err(|_| FilterError::SingularInnovation)?;
    Ok(kt.transpose())
}

/// Measurement update of a Gaussian prior through a linearized observation.
/// Joseph-form covariance keeps the result symmetric positive semi-definite.
fn linearized_update(
    mean: &[f64],
    cov: &Matrix,
    h: &Matrix,
    r: &Matrix,
    innovation: &[f64],
) -> Result<GaussianBelief> {
    let pht = cov.matmul_t(h);
    let mut s = h.matmul(&pht).add(r);
    s.symmetrize();
    let k = gain_from(&pht, &s)?;
    let mut new_mean = mean.to_vec();
    linalg::axpy(1.0, &k.mul_vec(innovation), &mut new_mean);
    let i_kh = Matrix::identity(mean.len()).sub(&k.matmul(h));
    let mut new_cov = i_kh
        .matmul(cov)
        .matmul_t(&i_kh)
        .add(&k.matmul(r).matmul_t(&k));
    new_cov.symmetrize();
    Ok(GaussianBelief::new(new_mean, new_cov))
}

/// EKF time update: `x⁻ = f(x, u)`, `P⁻ = F P Fᵀ + Q`.
pub fn ekf_predict(
    belief: &GaussianBelief,
    model: &dyn StateSpaceModel,
    u: &[f64],
) -> Result<GaussianBelief> {
    let f = model.transition_jacobian(&belief.mean, u)?;
    let mean = model.transition(&belief.mean, u)?;
    let mut cov = f
        .matmul(&belief.cov)
        .matmul_t(&f)
        .add(model.process_noise());
    cov.symmetrize();
    Ok(GaussianBelief::new(mean, cov))
}

/// EKF measurement update with the (possibly angle-wrapped) innovation.
pub fn ekf_update(
    prior: &GaussianBelief,
    model: &dyn StateSpaceModel,
    y: &[f64],
) -> Result<GaussianBelief> {
    let predicted_y = model.observe(&prior.mean)?;
    let h = model.observation_jacobian(&prior.mean)?;
    let innovation = model.observation_residual(y, &predicted_y);
    linearized_update(
        &prior.mean,
        &prior.cov,
        &h,
        model.observation_noise(),
        &innovation,
    )
}

/// One extended-Kalman-filter step.
pub fn ekf_step(
    belief: &GaussianBelief,
    model: &dyn StateSpaceModel,
    u: &[f64],
    y: &[f64],
) -> Result<GaussianBelief> {
    let prior = ekf_predict(belief, model, u)?;
    ekf_update(&prior, model, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::testing::{random_linear_system, scalar_model};
    use crate::rng::{rng_from_seed, standard_normal};
    use crate::scenarios::{BotConfig, BotModel, LinearModel};

    fn scalar(v: f64) -> Matrix {
        Matrix::new(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn scalar_riccati_update() {
        let belief = GaussianBelief::new(vec![0.0], scalar(1.0));
        let out = kf_step(
            &belief,
            &scalar(1.0),
            &Matrix::zeros(1, 0),
            &scalar(1.0),
            &scalar(0.01),
            &scalar(0.04),
            &[],
            &[0.3],
        )
        .unwrap();
        let prior = 1.0 + 0.01;
        let expected = prior * 0.04 / (prior + 0.04);
        assert!((out.cov[(0, 0)] - expected).abs() < 1e-15);
        assert!((out.mean[0] - prior / (prior + 0.04) * 0.3).abs() < 1e-15);
    }

    #[test]
    fn perfect_measurement_limit() {
        let n = 3;
        let belief = GaussianBelief::new(vec![1.0, -2.0, 0.5], Matrix::identity(n));
        let y = [4.0, 5.0, 6.0];
        let out = kf_step(
            &belief,
            &Matrix::identity(n),
            &Matrix::zeros(n, 0),
            &Matrix::identity(n),
            &Matrix::zeros(n, n),
            &Matrix::identity(n).scale(1e-12),
            &[],
            &y,
        )
        .unwrap();
        for (m, t) in out.mean.iter().zip(y) {
            assert!((m - t).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_innovation_leaves_mean() {
        let belief = GaussianBelief::new(vec![1.0, 2.0], Matrix::identity(2));
        let a = Matrix::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]).unwrap();
        let h = Matrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        let predicted = a.mul_vec(&belief.mean);
        let y = h.mul_vec(&predicted);
        let out = kf_step(
            &belief,
            &a,
            &Matrix::zeros(2, 0),
            &h,
            &Matrix::identity(2).scale(0.1),
            &scalar(0.5),
            &[],
            &y,
        )
        .unwrap();
        assert_eq!(out.mean, predicted);
    }

    #[test]
    fn ekf_matches_kf_on_linear_system() {
        let mut rng = rng_from_seed(21);
        let cfg = random_linear_system(&mut rng, 4, 2, 1);
        let model = LinearModel::new(cfg.clone()).unwrap();
        let mut ekf = GaussianBelief::new(cfg.init_mean.clone(), cfg.init_cov.clone());
        let mut kf = ekf.clone();
        for _ in 0..100 {
            let u = vec![standard_normal(&mut rng)];
            let y: Vec<f64> = (0..2).map(|_| standard_normal(&mut rng)).collect();
            ekf = ekf_step(&ekf, &model, &u, &y).unwrap();
            kf = kf_step(&kf, &cfg.a, &cfg.b, &cfg.h, &cfg.q, &cfg.r, &u, &y).unwrap();
            for (a, b) in ekf.mean.iter().zip(&kf.mean) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
            for (a, b) in ekf.cov.as_slice().iter().zip(kf.cov.as_slice()) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn ekf_covariance_stays_symmetric() {
        let model = BotModel::new(BotConfig::default()).unwrap();
        let mut b = GaussianBelief::new(model.init_mean().to_vec(), model.init_cov().clone());
        for t in 0..50 {
            b = ekf_step(&b, &model, &[], &[1.3 + 0.001 * t as f64]).unwrap();
            assert_eq!(b.cov.asymmetry(), 0.0);
        }
    }

    #[test]
    fn ekf_zero_innovation_keeps_predicted_mean() {
        let model = scalar_model(0.9, 1.0, 0.1, 0.2);
        let b = GaussianBelief::new(vec![2.0], scalar(0.5));
        let prior = ekf_predict(&b, &model, &[]).unwrap();
        let y = model.observe(&prior.mean).unwrap();
        let post = ekf_step(&b, &model, &[], &y).unwrap();
        assert_eq!(post.mean, prior.mean);
    }

    #[test]
    fn bot_innovation_is_wrapped() {
        use std::f64::consts::PI;
        let model = BotModel::new(BotConfig::default()).unwrap();
        // prior mean sits at bearing π − 0.01 (just above the negative x axis)
        let bearing = PI - 0.01;
        let prior = GaussianBelief::new(
            vec![1000.0 * bearing.cos(), 1000.0 * bearing.sin(), 0.0, 0.0],
            Matrix::identity(4).scale(100.0),
        );
        let post = ekf_update(&prior, &model, &[-PI + 0.01]).unwrap();
        let h = model.observation_jacobian(&prior.mean).unwrap();
        let moved = linalg::sub(&post.mean, &prior.mean);
        // the update is a small nudge consistent with a +0.02 rad innovation
        let implied = h.mul_vec(&moved)[0];
        assert!(
            implied > 0.0 && implied < 0.02,
            "implied bearing change {implied}"
        );
        assert!(linalg::norm(&moved) < 50.0);
    }
}
