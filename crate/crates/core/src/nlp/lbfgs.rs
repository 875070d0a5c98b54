//! Projected limited-memory BFGS for `min f(x)` on a box.

use std::collections::VecDeque;

use super::NlpError;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InnerStatus {
    Converged,
    IterationLimit,
    LineSearchFailure,
}

pub(crate) struct InnerOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub status: InnerStatus,
}

pub(crate) fn project(x: &mut [f64], lb: &[f64], ub: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lb[i], ub[i]);
    }
}

/// `max_i |x_i - P(x_i - g_i)|`.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lb: &[f64], ub: &[f64]) -> f64 {
    (0..x.len()).fold(0.0, |m, i| m.max((x[i] - (x[i] - g[i]).clamp(lb[i], ub[i])).abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes from `x0` (projected into the box). `value` may return `None` at
/// points where the function cannot be evaluated; such trial steps are
/// shortened. `value_grad` must succeed at every accepted point.
#[allow(clippy::too_many_arguments)]
pub(crate) fn minimize(
    value: &mut dyn FnMut(&[f64]) -> Option<f64>,
    value_grad: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>), NlpError>,
    x0: &[f64],
    lb: &[f64],
    ub: &[f64],
    tol: f64,
    max_iter: usize,
    memory: usize,
) -> Result<InnerOutcome, NlpError> {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lb, ub);
    let (mut f, mut g) = value_grad(&x)?;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut iterations = 0;

    loop {
        if projected_gradient_norm(&x, &g, lb, ub) <= tol {
            return Ok(InnerOutcome { x, f, g, iterations, status: InnerStatus::Converged });
        }
        if iterations >= max_iter {
            return Ok(InnerOutcome { x, f, g, iterations, status: InnerStatus::IterationLimit });
        }

        // variables pinned at a bound with the gradient pushing outward stay fixed
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lb[i] && g[i] > 0.0) || (x[i] >= ub[i] && g[i] < 0.0)))
            .collect();
        let gf: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();

        let mut step = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !pairs.is_empty();
            let mut d = if use_memory { two_loop(&gf, &pairs) } else { gf.clone() };
            for i in 0..n {
                d[i] = if free[i] { -d[i] } else { 0.0 };
            }
            if use_memory && dot(&d, &gf) >= 0.0 {
                continue;
            }
            let alpha0 = if use_memory {
                1.0
            } else {
                1.0 / gf.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0)
            };
            if let Some(s) = line_search(value, &x, f, &g, &d, lb, ub, alpha0) {
                step = Some(s);
                break;
            }
            pairs.clear();
        }
        let Some((x_new, _)) = step else {
            return Ok(InnerOutcome { x, f, g, iterations, status: InnerStatus::LineSearchFailure });
        };

        let (f_acc, g_new) = value_grad(&x_new)?;
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_acc;
        g = g_new;
        iterations += 1;

    }
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for i in 0..q.len() {
            q[i] -= a * y[i];
        }
        alphas.push(a);
    }
    let (s, y, _) = pairs.back().expect("non-empty memory");
    let gamma = dot(s, y) / dot(y, y);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for i in 0..q.len() {
            q[i] += s[i] * (a - b);
        }
    }
    q
}

/// Backtracking along the projected path `P(x + a d)` with the Armijo test
/// `f(x_a) <= f(x) + c g.(x_a - x)`, shortening by safeguarded quadratic
/// interpolation.
#[allow(clippy::too_many_arguments)]
fn line_search(
    value: &mut dyn FnMut(&[f64]) -> Option<f64>,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    lb: &[f64],
    ub: &[f64],
    alpha0: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    let mut alpha = alpha0;
    for _ in 0..MAX_BACKTRACKS {
        let mut xt: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
        project(&mut xt, lb, ub);
        let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
        if decrease >= 0.0 {
            return None;
        }
        match value(&xt).filter(|v| v.is_finite()) {
            Some(ft) if ft <= f + ARMIJO * decrease => return Some((xt, ft)),
            // minimizer of the quadratic through f, the slope and ft, kept in [0.1, 0.5] alpha
            Some(ft) => {
                let curvature = 2.0 * (ft - f - decrease);
                let ratio = if curvature > 0.0 { -decrease / curvature } else { 0.5 };
                alpha *= ratio.clamp(0.1, 0.5);
            }
            None => alpha *= 0.5,
        }
    }
    None
}
