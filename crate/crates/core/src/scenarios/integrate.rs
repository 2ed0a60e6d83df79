use super::Result;
use crate::linalg::Matrix;

/// One classical fourth-order Runge–Kutta step of size `h`.
pub fn rk4_step<F>(drift: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + s * k).collect()
    };
    let k1 = drift(x);
    let k2 = drift(&shifted(x, &k1, 0.5 * h));
    let k3 = drift(&shifted(x, &k2, 0.5 * h));
    let k4 = drift(&shifted(x, &k3, h));
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// `substeps` RK4 steps covering a total time `span`.
pub fn rk4_integrate<F>(drift: F, x: &[f64], span: f64, substeps: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let h = span / substeps as f64;
    let mut state = x.to_vec();
    for _ in 0..substeps {
        state = rk4_step(&drift, &state, h);
    }
    state
}

/// Central-difference Jacobian with per-coordinate step `1e-6·(1 + |x_j|)`.
pub fn finite_difference_jacobian<F>(f: F, x: &[f64]) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let f0 = f(x)?;
    let m = f0.len();
    let mut jac = Matrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let step = 1e-6 * (1.0 + x[j].abs());
        probe[j] = x[j] + step;
        let plus = f(&probe)?;
        probe[j] = x[j] - step;
        let minus = f(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let x = [1.5, -2.0, 3.25];
        assert_eq!(rk4_step(|v| vec![0.0; v.len()], &x, 0.3), x.to_vec());
    }

    #[test]
    fn constant_field_is_exact() {
        let x = [1.0, 2.0];
        let got = rk4_step(|_| vec![0.5, -3.0], &x, 0.25);
        assert_eq!(got, vec![1.0 + 0.125, 2.0 - 0.75]);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let got = rk4_step(|v| vec![-v[0]], &[1.0], 0.1)[0];
        let exact = (-0.1f64).exp();
        // local error of RK4 is h^5/120 ≈ 8.3e-8 here
        assert!((got - exact).abs() < 1e-7, "{got} vs {exact}");
        assert!((got - exact).abs() > 0.0);
    }

    #[test]
    fn integrate_splits_span() {
        let one = rk4_integrate(|v| vec![-v[0]], &[1.0], 1.0, 100)[0];
        assert!((one - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn finite_difference_of_linear_map() {
        let jac = finite_difference_jacobian(|v| Ok(vec![2.0 * v[0] + v[1], -v[1]]), &[0.3, 4.0])
            .unwrap();
        let expected = [[2.0, 1.0], [0.0, -1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((jac[(i, j)] - expected[i][j]).abs() < 1e-8);
            }
        }
    }
}
