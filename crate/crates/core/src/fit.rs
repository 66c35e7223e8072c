//! Small dense nonlinear least squares (Levenberg-Marquardt with a numeric
//! Jacobian), sized for the few-parameter pulse-shape fits.

pub(crate) struct LmOptions {
    pub max_iterations: usize,
    pub cost_tol: f64,
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iterations: 200, cost_tol: 1e-14, step_tol: 1e-12 }
    }
}

pub(crate) struct LmFit {
    pub params: Vec<f64>,
    pub rmse: f64,
    pub converged: bool,
}

/// In-place Gaussian elimination with partial pivoting for the tiny normal
/// equations; returns `None` on a (numerically) singular system.
fn solve_dense(m: &mut [f64], mut rhs: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let inv = 1.0 / m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * rhs[k];
        }
        rhs[col] = acc / m[col * n + col];
    }
    Some(rhs)
}

/// Minimizes ‖r(p)‖² for a residual function writing `n_res` residuals.
pub(crate) fn levenberg_marquardt<F>(
    residuals: F,
    n_res: usize,
    p0: &[f64],
    opts: &LmOptions,
) -> LmFit
where
    F: Fn(&[f64], &mut [f64]),
{
    let np = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0f64; n_res];
    let mut r_trial = vec![0.0f64; n_res];
    let mut jac = vec![0.0f64; n_res * np];
    let mut rp = vec![0.0f64; n_res];
    let mut rm = vec![0.0f64; n_res];

    residuals(&p, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..opts.max_iterations {
        // Central-difference Jacobian.
        for k in 0..np {
            let h = (1e-7 * p[k].abs()).max(1e-9);
            let saved = p[k];
            p[k] = saved + h;
            residuals(&p, &mut rp);
            p[k] = saved - h;
            residuals(&p, &mut rm);
            p[k] = saved;
            let inv = 1.0 / (2.0 * h);
            for i in 0..n_res {
                jac[i * np + k] = (rp[i] - rm[i]) * inv;
            }
        }
        // Normal equations JᵀJ + λ·diag(JᵀJ).
        let mut jtj = vec![0.0f64; np * np];
        let mut jtr = vec![0.0f64; np];
        for i in 0..n_res {
            let row = &jac[i * np..(i + 1) * np];
            for a in 0..np {
                jtr[a] += row[a] * r[i];
                for b in a..np {
                    jtj[a * np + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a * np + b] = jtj[b * np + a];
            }
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for a in 0..np {
                m[a * np + a] += lambda * jtj[a * np + a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_dense(&mut m, rhs, np) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = (0..np).map(|a| p[a] + step[a]).collect();
            residuals(&trial, &mut r_trial);
            let trial_cost: f64 = r_trial.iter().map(|v| v * v).sum();
            if trial_cost < cost {
                let rel_drop = (cost - trial_cost) / cost.max(1e-300);
                let step_norm: f64 = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                let p_norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p = trial;
                r.copy_from_slice(&r_trial);
                cost = trial_cost;
                lambda = (lambda * 0.25).max(1e-12);
                improved = true;
                if rel_drop < opts.cost_tol || step_norm < opts.step_tol * (1.0 + p_norm) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged || !improved {
            converged = converged || improved || cost.is_finite();
            break;
        }
    }

    LmFit { params: p, rmse: (cost / n_res as f64).sqrt(), converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exponential_parameters() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let truth = [2.0, 0.6];
        let ys: Vec<f64> = xs.iter().map(|&x| truth[0] * (-truth[1] * x).exp()).collect();
        let fit = levenberg_marquardt(
            |p, out| {
                for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
                    out[i] = p[0] * (-p[1] * x).exp() - y;
                }
            },
            xs.len(),
            &[1.0, 1.0],
            &LmOptions::default(),
        );
        assert!(fit.converged);
        assert_relative_eq!(fit.params[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(fit.params[1], 0.6, epsilon = 1e-6);
        assert!(fit.rmse < 1e-8);
    }

    #[test]
    fn recovers_offset_gaussian() {
        let xs: Vec<f64> = (-60..=60).map(|i| i as f64 * 0.5).collect();
        let truth = [3.0, 4.5, 7.0, 0.25];
        let model = |p: &[f64], x: f64| {
            p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp() + p[3]
        };
        let ys: Vec<f64> = xs.iter().map(|&x| model(&truth, x)).collect();
        let fit = levenberg_marquardt(
            |p, out| {
                for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
                    out[i] = model(p, x) - y;
                }
            },
            xs.len(),
            &[1.0, 2.0, 3.0, 0.0],
            &LmOptions::default(),
        );
        assert!(fit.converged);
        for (got, want) in fit.params.iter().zip(&truth) {
            assert_relative_eq!(got, want, epsilon = 1e-5);
        }
    }
}
