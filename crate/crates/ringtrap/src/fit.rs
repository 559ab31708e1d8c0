//! Levenberg–Marquardt nonlinear least squares with a numeric Jacobian.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Outcome of a least-squares minimization.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Parameter covariance sigma^2 (J^T J)^{-1}; empty if singular.
    pub covariance: DMatrix<f64>,
    /// Euclidean norm of the residual vector at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tolerance: f64,
    /// Stop when the relative step norm falls below this.
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, cost_tolerance: 1e-14, step_tolerance: 1e-12 }
    }
}

/// Minimizes ||r(p)||^2 starting from `initial`. `residuals` fills the
/// `n_res`-element residual vector for a parameter vector.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    initial: &[f64],
    n_res: usize,
    options: FitOptions,
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n_params = initial.len();
    if n_res < n_params {
        return Err(Error::DegenerateData(format!(
            "{n_res} residuals cannot constrain {n_params} parameters"
        )));
    }
    let mut p = initial.to_vec();
    let mut r = vec![0.0; n_res];
    residuals(&p, &mut r);
    let mut cost = r.iter().map(|x| x * x).sum::<f64>();
    let mut lambda: f64 = 1e-3;
    let mut jac = DMatrix::<f64>::zeros(n_res, n_params);
    let mut scratch = vec![0.0; n_res];
    let mut jtj = DMatrix::<f64>::zeros(n_params, n_params);

    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        numeric_jacobian(&mut residuals, &p, &mut jac, &mut scratch);
        let rv = DVector::from_column_slice(&r);
        jac.tr_mul_to(&jac.clone(), &mut jtj);
        let jtr = jac.transpose() * &rv;

        // restart each iteration from a small damping so one stubborn step
        // does not leave the solver stuck in steepest-descent mode
        lambda = (lambda * 0.1).max(1e-12_f64);
        let mut improved = false;
        for _ in 0..16 {
            let mut damped = jtj.clone();
            for k in 0..n_params {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let p_try: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            residuals(&p_try, &mut scratch);
            let cost_try = scratch.iter().map(|x| x * x).sum::<f64>();
            if cost_try.is_finite() && cost_try < cost {
                let step_small = step.norm()
                    < options.step_tolerance * (1.0 + p.iter().map(|x| x * x).sum::<f64>().sqrt());
                let cost_small = (cost - cost_try) < options.cost_tolerance * cost.max(1e-300);
                p = p_try;
                r.copy_from_slice(&scratch);
                cost = cost_try;
                improved = true;
                if step_small || cost_small {
                    return finish(&mut residuals, p, cost, iterations, n_res, n_params);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping between 1e-12 and 1e4: the
            // iterate is a minimum to within finite-difference noise
            return finish(&mut residuals, p, cost, iterations, n_res, n_params);
        }
    }
    Err(Error::FitNonConvergence { iterations, residual: cost.sqrt() })
}

fn numeric_jacobian<F>(residuals: &mut F, p: &[f64], jac: &mut DMatrix<f64>, scratch: &mut [f64])
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut p_try = p.to_vec();
    let mut minus = vec![0.0; scratch.len()];
    for k in 0..p.len() {
        let h = 1e-6 * (p[k].abs() + 1e-9);
        p_try[k] = p[k] + h;
        residuals(&p_try, scratch);
        p_try[k] = p[k] - h;
        residuals(&p_try, &mut minus);
        for (i, (&rp, &rm)) in scratch.iter().zip(minus.iter()).enumerate() {
            jac[(i, k)] = (rp - rm) / (2.0 * h);
        }
        p_try[k] = p[k];
    }
}

fn finish<F>(
    residuals: &mut F,
    p: Vec<f64>,
    cost: f64,
    iterations: usize,
    n_res: usize,
    n_params: usize,
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut jac = DMatrix::<f64>::zeros(n_res, n_params);
    let mut scratch = vec![0.0; n_res];
    numeric_jacobian(residuals, &p, &mut jac, &mut scratch);
    let jtj = jac.transpose() * &jac;
    let dof = (n_res.max(n_params + 1) - n_params) as f64;
    let sigma2 = cost / dof;
    let covariance = jtj
        .try_inverse()
        .map(|inv| inv * sigma2)
        .unwrap_or_else(|| DMatrix::zeros(0, 0));
    Ok(FitResult { params: p, covariance, residual_norm: cost.sqrt(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_round_trip() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let truth = [2.5, 1.3, 0.4];
        let data: Vec<f64> = xs.iter().map(|&x| truth[0] * (-truth[1] * x).exp() + truth[2]).collect();
        let xs2 = xs.clone();
        let data2 = data.clone();
        let fit = levenberg_marquardt(
            move |p, out| {
                for (i, (&x, &d)) in xs2.iter().zip(data2.iter()).enumerate() {
                    out[i] = p[0] * (-p[1] * x).exp() + p[2] - d;
                }
            },
            &[1.0, 1.0, 0.0],
            50,
            FitOptions::default(),
        )
        .unwrap();
        for (got, want) in fit.params.iter().zip(truth.iter()) {
            assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        }
        assert!(fit.residual_norm < 1e-8);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let res = levenberg_marquardt(
            |p, out| {
                out[0] = p[0] + p[1] + p[2] - 1.0;
            },
            &[0.0, 0.0, 0.0],
            1,
            FitOptions::default(),
        );
        assert!(matches!(res, Err(Error::DegenerateData(_))));
    }
}
