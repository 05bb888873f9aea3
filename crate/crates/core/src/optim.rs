//! Derivative-free minimization (Nelder–Mead simplex).

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMead {
    /// Initial simplex edge length.
    pub step: f64,
    /// Stop once every vertex is within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { step: 0.3, diameter_tol: 1e-7, max_iterations: 4000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() { f64::INFINITY } else { v }
        };
        if n == 0 {
            let value = eval(x0);
            return Minimum { x: Vec::new(), value, iterations: 0, evaluations: 1, converged: true };
        }

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += self.step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            // Sort vertices by value (stable, so ties keep insertion order).
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let diameter = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(0.0f64, f64::max);
            if diameter < self.diameter_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
            };

            let reflected = along(-REFLECT);
            let fr = eval(&reflected);
            if fr < values[0] {
                let expanded = along(-EXPAND);
                let fe = eval(&expanded);
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[n] {
                let c = along(-CONTRACT);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(CONTRACT);
                let fc = eval(&c);
                (c, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=n {
                for (x, b) in simplex[i].iter_mut().zip(&best) {
                    *x = b + SHRINK * (*x - b);
                }
                values[i] = eval(&simplex[i]);
            }
        }
        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
            evaluations,
            converged,
        }
    }
}
