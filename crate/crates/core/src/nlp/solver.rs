use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, projected_gradient_norm, InnerStatus};
use super::{NlpError, NlpProblem};

const RHO_INIT: f64 = 10.0;
const RHO_GROWTH: f64 = 10.0;
const RHO_MAX: f64 = 1e12;
/// Penalty grows unless the violation shrinks at least this much.
const REQUIRED_REDUCTION: f64 = 0.25;
const MULTIPLIER_CAP: f64 = 1e8;
/// Share of the remaining iterations one constrained inner solve may use, so
/// multipliers keep updating when slope breaks stall the inner tolerance.
const INNER_SHARE: f64 = 0.5;
const MIN_INNER: usize = 100;
/// Restart jitter as a fraction of the box width (or of `1 + |x|` if unbounded).
const JITTER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// total inner iterations per attempt
    pub max_iterations: usize,
    pub max_outer: usize,
    pub max_restarts: usize,
    pub lbfgs_memory: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            optimality_tol: 1e-6,
            max_iterations: 5000,
            max_outer: 40,
            max_restarts: 3,
            lbfgs_memory: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationLimit,
    LineSearchFailure,
}

/// One augmented Lagrangian outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub attempt: usize,
    pub outer: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    /// merit at the start and end of the inner solve, same multipliers
    pub merit_start: f64,
    pub merit_end: f64,
    pub objective: f64,
    pub violation: f64,
    pub optimality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    /// projected Lagrangian gradient, infinity norm
    pub optimality: f64,
    pub iterations: usize,
    pub status: Status,
    pub multipliers: Vec<f64>,
    pub restarts: usize,
    pub history: Vec<OuterRecord>,
}

impl NlpSolution {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Largest equality residual or positive inequality value.
pub fn max_violation(constraints: &[f64], num_equalities: usize) -> f64 {
    constraints.iter().enumerate().fold(0.0, |m, (i, &c)| {
        m.max(if i < num_equalities { c.abs() } else { c.max(0.0) })
    })
}

/// Projected gradient of `f + multipliers . c` at `x`.
pub fn lagrangian_optimality<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    multipliers: &[f64],
) -> Result<f64, NlpError> {
    let (lb, ub) = problem.bounds();
    let d = problem.derivatives(x)?;
    let g = lagrangian_gradient(&d.gradient, &d.jacobian, multipliers, x.len());
    Ok(projected_gradient_norm(x, &g, &lb, &ub))
}

fn lagrangian_gradient(grad: &[f64], jac: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    let mut g = grad.to_vec();
    for (r, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            for (gi, j) in g.iter_mut().zip(&jac[r * n..(r + 1) * n]) {
                *gi += w * j;
            }
        }
    }
    g
}

pub fn write_json_lines(records: &[OuterRecord], out: &mut dyn Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Augmented Lagrangian with projected L-BFGS inner solves, restarted from
/// jittered copies of `x0` while not converged. The best attempt is returned:
/// converged before feasible before infeasible, then by objective (or
/// violation when infeasible).
pub fn solve<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<NlpSolution, NlpError> {
    validate(problem, x0, settings)?;
    let (lb, ub) = problem.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best = attempt(problem, x0, settings, 0)?;
    let mut history = std::mem::take(&mut best.history);
    for k in 1..=settings.max_restarts {
        if best.converged() {
            break;
        }
        let start: Vec<f64> = (0..x0.len())
            .map(|i| {
                let width = if (ub[i] - lb[i]).is_finite() { ub[i] - lb[i] } else { 1.0 + x0[i].abs() };
                (x0[i] + JITTER * width * rng.random_range(-1.0..=1.0)).clamp(lb[i], ub[i])
            })
            .collect();
        let mut trial = match attempt(problem, &start, settings, k) {
            Ok(t) => t,
            Err(_) => continue,
        };
        history.append(&mut trial.history);
        if better(&trial, &best, settings.feasibility_tol) {
            best = trial;
        }
        best.restarts = k;
    }
    best.history = history;
    Ok(best)
}

fn inner_budget(remaining: usize, num_constraints: usize) -> usize {
    if num_constraints == 0 {
        return remaining;
    }
    ((remaining as f64 * INNER_SHARE) as usize).max(MIN_INNER).min(remaining)
}

fn better(a: &NlpSolution, b: &NlpSolution, feas: f64) -> bool {
    let rank = |s: &NlpSolution| {
        if s.converged() {
            0
        } else if s.max_violation <= feas {
            1
        } else {
            2
        }
    };
    match rank(a).cmp(&rank(b)) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal if rank(a) == 2 => a.max_violation < b.max_violation,
        std::cmp::Ordering::Equal => a.objective < b.objective,
    }
}

fn validate<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<(), NlpError> {
    let n = problem.dimension();
    let (lb, ub) = problem.bounds();
    if x0.len() != n || lb.len() != n || ub.len() != n {
        return Err(NlpError::InvalidProblem(format!(
            "dimension {n} but x0 {}, bounds {}/{}",
            x0.len(),
            lb.len(),
            ub.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| !(lb[i] <= ub[i])) {
        return Err(NlpError::InvalidProblem(format!("bound {i}: {} > {}", lb[i], ub[i])));
    }
    if !(settings.feasibility_tol > 0.0 && settings.optimality_tol > 0.0) {
        return Err(NlpError::InvalidProblem("tolerances must be > 0".into()));
    }
    if settings.lbfgs_memory == 0 {
        return Err(NlpError::InvalidProblem("L-BFGS memory must be >= 1".into()));
    }
    Ok(())
}

struct Merit<'a, P: ?Sized> {
    problem: &'a P,
    m_eq: usize,
    lambda: Vec<f64>,
    rho: f64,
}

impl<P: NlpProblem + ?Sized> Merit<'_, P> {
    /// Effective constraint weights `lambda + rho c` (equalities) and
    /// `max(0, mu + rho g)` (inequalities).
    fn weights(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .enumerate()
            .map(|(i, &ci)| {
                let w = self.lambda[i] + self.rho * ci;
                if i < self.m_eq {
                    w
                } else {
                    w.max(0.0)
                }
            })
            .collect()
    }

    fn value_of(&self, objective: f64, c: &[f64]) -> f64 {
        let mut v = objective;
        for (i, &ci) in c.iter().enumerate() {
            let l = self.lambda[i];
            if i < self.m_eq {
                v += l * ci + 0.5 * self.rho * ci * ci;
            } else {
                let w = (l + self.rho * ci).max(0.0);
                v += (w * w - l * l) / (2.0 * self.rho);
            }
        }
        v
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        let v = self.problem.values(x).ok()?;
        Some(self.value_of(v.objective, &v.constraints)).filter(|m| m.is_finite())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), NlpError> {
        let v = self.problem.values(x).map_err(|e| at_point(e, x))?;
        let d = self.problem.derivatives(x).map_err(|e| at_point(e, x))?;
        let m = self.value_of(v.objective, &v.constraints);
        let g = lagrangian_gradient(&d.gradient, &d.jacobian, &self.weights(&v.constraints), x.len());
        if !m.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(NlpError::NonFinite { what: "merit or gradient".into(), x: x.to_vec() });
        }
        Ok((m, g))
    }
}

fn at_point(e: NlpError, x: &[f64]) -> NlpError {
    match e {
        NlpError::Evaluation { message, .. } => NlpError::Evaluation { message, x: x.to_vec() },
        other => other,
    }
}

fn attempt<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &SolverSettings,
    attempt_index: usize,
) -> Result<NlpSolution, NlpError> {
    let n = problem.dimension();
    let m_eq = problem.num_equalities();
    let m = problem.num_constraints();
    let (lb, ub) = problem.bounds();
    let mut merit = Merit { problem, m_eq, lambda: vec![0.0; m], rho: RHO_INIT };
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lb[i], ub[i])).collect();
    let mut used = 0;
    let mut history = Vec::new();
    let mut prev_violation = max_violation(&problem.values(&x).map_err(|e| at_point(e, &x))?.constraints, m_eq);
    let mut status = Status::IterationLimit;
    let mut stalled = 0;

    for outer in 0..settings.max_outer.max(1) {
        let tol = if m == 0 {
            settings.optimality_tol
        } else {
            settings.optimality_tol.max(0.1f64.powi(outer as i32 + 2))
        };
        let (merit_start, _) = merit.value_grad(&x)?;
        let mut value = |z: &[f64]| merit.value(z);
        let mut value_grad = |z: &[f64]| merit.value_grad(z);
        let inner = minimize(
            &mut value,
            &mut value_grad,
            &x,
            &lb,
            &ub,
            tol,
            inner_budget(settings.max_iterations.saturating_sub(used), m),
            settings.lbfgs_memory,
        )?;
        used += inner.iterations;
        let moved = inner.x != x;
        x = inner.x;
        let vals = problem.values(&x).map_err(|e| at_point(e, &x))?;
        let violation = max_violation(&vals.constraints, m_eq);
        // with the updated multipliers the Lagrangian gradient equals the merit gradient
        let optimality = projected_gradient_norm(&x, &inner.g, &lb, &ub);
        let new_lambda = merit.weights(&vals.constraints);
        history.push(OuterRecord {
            attempt: attempt_index,
            outer,
            inner_iterations: inner.iterations,
            penalty: merit.rho,
            merit_start,
            merit_end: inner.f,
            objective: vals.objective,
            violation,
            optimality,
        });
        merit.lambda = new_lambda.iter().map(|l| l.clamp(-MULTIPLIER_CAP, MULTIPLIER_CAP)).collect();

        if violation <= settings.feasibility_tol && optimality <= settings.optimality_tol {
            status = Status::Converged;
            break;
        }
        if used >= settings.max_iterations {
            status = Status::IterationLimit;
            break;
        }
        if m == 0 {
            status = match inner.status {
                InnerStatus::LineSearchFailure => Status::LineSearchFailure,
                _ => Status::IterationLimit,
            };
            break;
        }
        stalled = if !moved && inner.status == InnerStatus::LineSearchFailure { stalled + 1 } else { 0 };
        if stalled >= 2 {
            status = Status::LineSearchFailure;
            break;
        }
        if violation > REQUIRED_REDUCTION * prev_violation {
            merit.rho = (merit.rho * RHO_GROWTH).min(RHO_MAX);
        }
        prev_violation = violation;
    }

    let vals = problem.values(&x).map_err(|e| at_point(e, &x))?;
    let multipliers = merit.lambda.clone();
    let optimality = lagrangian_optimality(problem, &x, &multipliers)?;
    let max_violation = max_violation(&vals.constraints, m_eq);
    if status == Status::Converged
        && !(max_violation <= settings.feasibility_tol && optimality <= settings.optimality_tol)
    {
        status = Status::IterationLimit;
    }
    Ok(NlpSolution {
        x,
        objective: vals.objective,
        max_violation,
        optimality,
        iterations: used,
        status,
        multipliers,
        restarts: 0,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{Derivatives, GradientMode, Values};

    struct Shifted;

    impl NlpProblem for Shifted {
        fn dimension(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY], vec![1.0])
        }
        fn values(&self, x: &[f64]) -> Result<Values, NlpError> {
            Ok(Values { objective: (x[0] - 2.0).powi(2), constraints: vec![] })
        }
        fn gradient_mode(&self) -> GradientMode {
            GradientMode::Analytic
        }
        fn derivatives(&self, x: &[f64]) -> Result<Derivatives, NlpError> {
            Ok(Derivatives { gradient: vec![2.0 * (x[0] - 2.0)], jacobian: vec![] })
        }
    }

    #[test]
    fn active_upper_bound() {
        let s = solve(&Shifted, &[-3.0], &SolverSettings::default()).unwrap();
        assert!(s.converged());
        assert_eq!(s.x, vec![1.0]);
    }

    #[test]
    fn violation_measure() {
        assert_eq!(max_violation(&[-0.5, 0.2, -3.0, 0.1], 2), 0.5);
        assert_eq!(max_violation(&[], 0), 0.0);
    }
}
