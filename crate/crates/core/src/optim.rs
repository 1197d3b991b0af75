//! Derivative-free minimization with the Nelder-Mead simplex method.

/// Nelder-Mead with the standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 0.5, 0.5). The run is fully deterministic.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Convergence threshold on the simplex diameter (max L-infinity
    /// distance from the best vertex).
    pub tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iterations: 5000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimize `f` starting from `x0`, with one simplex edge of length
    /// `steps[i]` along each coordinate.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], steps: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        assert_eq!(x0.len(), steps.len(), "one step per coordinate");
        let dim = x0.len();
        assert!(dim > 0, "cannot optimize zero dimensions");

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += steps[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iterations {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
            let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
            let revalued: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            simplex = reordered;
            values = revalued;

            let diameter = simplex[1..]
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            if diameter < self.tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let reflected: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + alpha * (c - w))
                .collect();
            let f_reflected = f(&reflected);

            if f_reflected < values[0] {
                let expanded: Vec<f64> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + gamma * (r - c))
                    .collect();
                let f_expanded = f(&expanded);
                if f_expanded < f_reflected {
                    simplex[dim] = expanded;
                    values[dim] = f_expanded;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = f_reflected;
                }
            } else if f_reflected < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = f_reflected;
            } else {
                let (contracted, f_contracted) = if f_reflected < values[dim] {
                    let outside: Vec<f64> = centroid
                        .iter()
                        .zip(&reflected)
                        .map(|(c, r)| c + rho * (r - c))
                        .collect();
                    let fv = f(&outside);
                    (outside, fv)
                } else {
                    let inside: Vec<f64> = centroid
                        .iter()
                        .zip(&worst)
                        .map(|(c, w)| c + rho * (w - c))
                        .collect();
                    let fv = f(&inside);
                    (inside, fv)
                };
                if f_contracted < values[dim].min(f_reflected) {
                    simplex[dim] = contracted;
                    values[dim] = f_contracted;
                } else {
                    for i in 1..=dim {
                        let shrunk: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, v)| b + sigma * (v - b))
                            .collect();
                        values[i] = f(&shrunk);
                        simplex[i] = shrunk;
                    }
                }
            }
        }

        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap();
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
            converged,
        }
    }
}
