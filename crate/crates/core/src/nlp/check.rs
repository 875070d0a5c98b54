use super::{Derivatives, NlpError, NlpProblem, Values};

/// Difference step on (scaled) decision variables.
pub const FD_STEP: f64 = 1e-6;

/// Central differences of objective and constraints, switching to one-sided
/// differences where a central step would leave the bounds. Steps never leave
/// the box; fixed variables get zero columns.
pub fn finite_difference_derivatives<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    step: f64,
) -> Result<Derivatives, NlpError> {
    let (lb, ub) = problem.bounds();
    columns(problem, x, |i, xi| {
        let up = xi + step <= ub[i];
        let dn = xi - step >= lb[i];
        match (dn, up) {
            (true, true) => (xi - step, xi + step),
            (false, false) => ((xi - step).max(lb[i]), (xi + step).min(ub[i])),
            (false, true) => (xi, xi + step),
            (true, false) => (xi - step, xi),
        }
    })
}

fn columns<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    mut pair: impl FnMut(usize, f64) -> (f64, f64),
) -> Result<Derivatives, NlpError> {
    let n = problem.dimension();
    let m = problem.num_constraints();
    let mut gradient = vec![0.0; n];
    let mut jacobian = vec![0.0; m * n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let (lo, hi) = pair(i, x[i]);
        if hi <= lo {
            continue;
        }
        xp[i] = hi;
        let fh = problem.values(&xp)?;
        xp[i] = lo;
        let fl = problem.values(&xp)?;
        xp[i] = x[i];
        let h = hi - lo;
        gradient[i] = (fh.objective - fl.objective) / h;
        for r in 0..m {
            jacobian[r * n + i] = (fh.constraints[r] - fl.constraints[r]) / h;
        }
    }
    Ok(Derivatives { gradient, jacobian })
}

/// Worst component-wise relative error between `problem.derivatives` and
/// finite differences with `step`.
///
/// Each entry is compared relative to `max(|analytic|, |fd|, 1e-4 * row_max)`,
/// where `row_max` is the largest analytic magnitude in the objective gradient
/// or in that constraint row, so structural zeros are judged against the
/// scale of their row. The central difference is the reference; an entry
/// also passes on the second-order forward or backward difference, which keeps the check
/// meaningful next to slope breaks of piecewise-linear data (there the
/// analytic value is the slope of the side containing `x`).
pub fn check_gradient<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    step: f64,
) -> Result<f64, NlpError> {
    let n = problem.dimension();
    let m = problem.num_constraints();
    let analytic = problem.derivatives(x)?;
    let center = problem.values(x)?;
    let mut stencils = [vec![0.0; n * (m + 1)], vec![0.0; n * (m + 1)], vec![0.0; n * (m + 1)]];
    let mut xp = x.to_vec();
    let mut at = |i: usize, k: f64| -> Result<Values, NlpError> {
        xp[i] = x[i] + k * step;
        let v = problem.values(&xp);
        xp[i] = x[i];
        v
    };
    for i in 0..n {
        let (p1, p2, m1, m2) = (at(i, 1.0)?, at(i, 2.0)?, at(i, -1.0)?, at(i, -2.0)?);
        let row = |v: &Values, r: usize| if r == 0 { v.objective } else { v.constraints[r - 1] };
        for r in 0..=m {
            let (f0, fp1, fp2, fm1, fm2) = (row(&center, r), row(&p1, r), row(&p2, r), row(&m1, r), row(&m2, r));
            stencils[0][r * n + i] = (fp1 - fm1) / (2.0 * step);
            stencils[1][r * n + i] = (-3.0 * f0 + 4.0 * fp1 - fp2) / (2.0 * step);
            stencils[2][r * n + i] = (3.0 * f0 - 4.0 * fm1 + fm2) / (2.0 * step);
        }
    }
    let mut worst: f64 = 0.0;
    for r in 0..=m {
        let a = if r == 0 { &analytic.gradient[..] } else { &analytic.jacobian[(r - 1) * n..r * n] };
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (j, ai) in a.iter().enumerate() {
            let err = stencils
                .iter()
                .map(|s| {
                    let fd = s[r * n + j];
                    let denom = ai.abs().max(fd.abs()).max(1e-4 * scale);
                    if denom > 0.0 { (ai - fd).abs() / denom } else { 0.0 }
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
