/// Why a Nelder–Mead run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    SimplexSize,
    Target,
    Budget,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub stop: Stop,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½,
/// shrink ½) from `x0` with axis steps `steps`.
///
/// Stops once every vertex lies within `tol` (max-norm) of the best one,
/// once the best value reaches `target`, or after `budget` evaluations.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], tol: f64, budget: usize, target: Option<f64>) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    let reached = |v: f64| target.is_some_and(|t| v <= t);
    if reached(f0) {
        return Outcome { x: x0.to_vec(), f: f0, evaluations: evals, stop: Stop::Target, history: vec![f0] };
    }
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut history = Vec::new();
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let best = &simplex[0].0;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let stop = if reached(simplex[0].1) {
            Some(Stop::Target)
        } else if size < tol {
            Some(Stop::SimplexSize)
        } else if evals >= budget {
            Some(Stop::Budget)
        } else {
            None
        };
        if let Some(stop) = stop {
            let (x, f) = simplex.swap_remove(0);
            return Outcome { x, f, evaluations: evals, stop, history };
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = v.0.iter().zip(&x_best).map(|(a, b)| b + 0.5 * (a - b)).collect();
            let fx = eval(&x, &mut evals);
            *v = (x, fx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(f, &[-1.2, 1.0], &[0.1, 0.1], 1e-9, 5000, None);
        assert_eq!(out.stop, Stop::SimplexSize);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn history_is_monotone_and_budget_respected() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum::<f64>();
        let out = minimize(f, &[1.0; 9], &[0.2; 9], 1e-12, 300, None);
        assert_eq!(out.stop, Stop::Budget);
        assert!(out.evaluations <= 300 + 10);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn target_stops_immediately() {
        let out = minimize(|x: &[f64]| x[0] * x[0], &[1e-3], &[0.1], 1e-9, 100, Some(1e-5));
        assert_eq!((out.stop, out.evaluations), (Stop::Target, 1));
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
        let out = minimize(f, &[0.05, 0.3], &[0.2, 0.2], 1e-9, 2000, None);
        assert!((out.x[0] - 0.5).abs() < 1e-5);
    }
}
