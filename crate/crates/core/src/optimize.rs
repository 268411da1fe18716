//! Derivative-free minimisation: Nelder–Mead simplex plus a coordinate-wise
//! polish. Objectives here have at most a few dozen parameters and are cheap,
//! so robustness matters more than evaluation count.

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub xatol: f64,
    pub fatol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            xatol: 1e-9,
            fatol: 1e-15,
            max_evals: 20_000,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Adaptive-coefficient Nelder–Mead (Gao & Han parameters), with
    /// scipy-style termination on simplex diameter and value spread.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        if n == 0 {
            let value = f(x0);
            return Minimum { x: vec![], value, evaluations: 1, converged: true };
        }
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for k in 0..n {
            let mut p = x0.to_vec();
            p[k] += if p[k].abs() > 1e-3 { self.initial_step * p[k].abs().max(0.25) } else { self.initial_step };
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
        let mut converged = false;

        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let x_spread = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0f64, f64::max);
            let f_spread = values[1..].iter().map(|v| (v - values[0]).abs()).fold(0.0f64, f64::max);
            if x_spread <= self.xatol && f_spread <= self.fatol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / nf)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let xc = along(alpha * rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            let best = simplex[0].clone();
            for i in 1..=n {
                for k in 0..n {
                    simplex[i][k] = best[k] + sigma * (simplex[i][k] - best[k]);
                }
                values[i] = eval(&simplex[i], &mut evals);
            }
        }

        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evaluations: evals,
            converged,
        }
    }
}

/// Cyclic coordinate descent with a shrinking step; each sweep tries ± steps
/// along every axis and refines with a parabola through the three samples.
pub fn coordinate_polish<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    initial_step: f64,
    tol: f64,
    max_evals: usize,
) -> Minimum {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1usize;
    let mut step = initial_step;
    while step > tol && evals < max_evals {
        let mut improved = false;
        for k in 0..x.len() {
            let x0k = x[k];
            x[k] = x0k + step;
            let fp = f(&x);
            x[k] = x0k - step;
            let fm = f(&x);
            evals += 2;
            let curvature = fp + fm - 2.0 * fx;
            let mut cand = (x0k, fx);
            if fp < cand.1 {
                cand = (x0k + step, fp);
            }
            if fm < cand.1 {
                cand = (x0k - step, fm);
            }
            if curvature > 0.0 {
                let offset = 0.5 * step * (fm - fp) / curvature;
                if offset.abs() <= step {
                    x[k] = x0k + offset;
                    let fq = f(&x);
                    evals += 1;
                    if fq < cand.1 {
                        cand = (x0k + offset, fq);
                    }
                }
            }
            x[k] = cand.0;
            if cand.1 < fx {
                improved = improved || fx - cand.1 > 0.0;
                fx = cand.1;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
        converged: step <= tol,
    }
}
