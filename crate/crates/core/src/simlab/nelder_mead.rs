//! Derivative-free simplex minimization for intercept calibration.

/// Options for [`minimize`].
pub struct NmOptions {
    pub max_iters: usize,
    pub f_tol: f64,
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            f_tol: 1e-12,
            initial_step: 0.25,
        }
    }
}

/// Nelder–Mead with the standard reflection/expansion/contraction/shrink
/// coefficients. Returns the best point and its objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NmOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += if p[i].abs() > 1e-8 {
            p[i].abs() * opts.initial_step
        } else {
            opts.initial_step
        };
        simplex.push(p);
    }
    let mut scores: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..opts.max_iters {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if (scores[worst] - scores[best]).abs() < opts.f_tol {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < scores[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                scores[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                scores[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < scores[second_worst] {
            simplex[worst] = reflect;
            scores[worst] = f_reflect;
            continue;
        }

        let contract: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
            .collect();
        let f_contract = f(&contract);
        if f_contract < scores[worst] {
            simplex[worst] = contract;
            scores[worst] = f_contract;
            continue;
        }

        for &i in order.iter().skip(1) {
            for d in 0..dim {
                simplex[i][d] = simplex[best][d] + sigma * (simplex[i][d] - simplex[best][d]);
            }
            scores[i] = f(&simplex[i]);
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    (simplex.swap_remove(best), scores[best])
}
