//! Accelerated proximal-gradient LASSO over complex DFT coefficients.
//!
//! Minimizes `J(theta) = lambda * ||theta||_1 + ||e - A theta||^2` where
//! `A` is the subsampled unitary DFT synthesis operator and `||.||_1` sums
//! complex magnitudes. The gradient of the quadratic term is
//! `2 A^H (A theta - e)` with Lipschitz constant 2, so the proximal step
//! size is fixed at 1/2 and the shrinkage threshold is `lambda / 2`.

use num_complex::Complex64;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{adjoint, forward, CoeffVolume, Dims3, SamplingPlan, SolverParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub rel_change: f64,
}

#[derive(Debug)]
pub struct SolveResult {
    pub theta: CoeffVolume,
    pub lambda: f64,
    pub iterations: Vec<IterationRecord>,
}

impl SolveResult {
    /// Plain-text iteration log: one `iter objective rel_change` line each.
    pub fn format_log(&self) -> String {
        let mut out = String::new();
        for rec in &self.iterations {
            out.push_str(&format!(
                "{} {:.12e} {:.6e}\n",
                rec.iter, rec.objective, rec.rel_change
            ));
        }
        out
    }
}

/// Complex soft-thresholding: shrink the magnitude, keep the phase.
#[inline]
fn shrink(v: Complex64, threshold: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= threshold {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((mag - threshold) / mag)
    }
}

fn objective(theta: &[Complex64], residual: &[Complex64], lambda: f64) -> f64 {
    let l1: f64 = theta.iter().map(|v| v.norm()).sum();
    let data: f64 = residual.iter().map(|v| v.norm_sqr()).sum();
    lambda * l1 + data
}

fn residual_at(theta: &CoeffVolume, plan: &SamplingPlan) -> Vec<Complex64> {
    forward(theta, plan)
        .iter()
        .zip(plan.measurements())
        .map(|(p, e)| e - p)
        .collect()
}

/// One proximal-gradient step from `point` with step 1/2.
fn prox_step(point: &CoeffVolume, plan: &SamplingPlan, lambda: f64) -> CoeffVolume {
    let residual = residual_at(point, plan);
    // gradient of the quadratic term is -2 A^H residual; step 1/2 gives
    // point + A^H residual before shrinkage.
    let grad_term = adjoint(&residual, plan);
    let mut values = point.values().to_vec();
    for (v, g) in values.iter_mut().zip(grad_term.values()) {
        *v = shrink(*v + g, lambda / 2.0);
    }
    CoeffVolume::new(point.dims(), values).expect("dims preserved")
}

/// Solves the LASSO with FISTA-style acceleration and a monotone restart
/// rule: if the accelerated candidate raises the objective, momentum is
/// reset and a plain proximal step from the previous iterate is taken,
/// which cannot increase the objective.
pub fn solve_lasso(plan: &SamplingPlan, dims: Dims3, params: &SolverParams) -> Result<SolveResult> {
    if plan.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: format!("{dims:?}"),
            got: format!("{:?}", plan.dims()),
        });
    }
    let lambda = params.lambda;
    let mut x = CoeffVolume::zeros(dims);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut iterations = Vec::new();
    let mut j_prev = objective(x.values(), plan.measurements(), lambda);
    if !j_prev.is_finite() {
        return Err(Error::NonFiniteObjective { iter: 0 });
    }

    for iter in 1..=params.max_iters {
        let mut x_new = prox_step(&y, plan, lambda);
        let mut j_new = objective(&x_new.values(), &residual_at(&x_new, plan), lambda);
        if !j_new.is_finite() {
            return Err(Error::NonFiniteObjective { iter });
        }
        if j_new > j_prev {
            // restart: plain proximal step from x is a guaranteed descent
            momentum = 1.0;
            x_new = prox_step(&x, plan, lambda);
            j_new = objective(&x_new.values(), &residual_at(&x_new, plan), lambda);
            if !j_new.is_finite() {
                return Err(Error::NonFiniteObjective { iter });
            }
        }

        let momentum_new = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / momentum_new;
        let mut y_vals = Vec::with_capacity(dims.len());
        for (new, old) in x_new.values().iter().zip(x.values()) {
            y_vals.push(new + (new - old) * beta);
        }
        y = CoeffVolume::new(dims, y_vals).expect("dims preserved");
        momentum = momentum_new;

        let rel_change = (j_prev - j_new).abs() / j_prev.abs().max(1e-30);
        iterations.push(IterationRecord {
            iter,
            objective: j_new,
            rel_change,
        });
        x = x_new;
        j_prev = j_new;
        if rel_change < params.tol {
            break;
        }
    }

    Ok(SolveResult {
        theta: x,
        lambda,
        iterations,
    })
}

#[derive(Debug)]
pub struct CrossValReport {
    pub chosen_lambda: f64,
    /// `(lambda, holdout error)` per candidate.
    pub scores: Vec<(f64, f64)>,
    pub result: SolveResult,
}

/// Default candidate grid: 8 log-spaced values in
/// `[1e-4, 1e-1] * ||A^H e||_inf`.
pub fn default_lambda_grid(plan: &SamplingPlan) -> Vec<f64> {
    let corr = adjoint(plan.measurements(), plan);
    let linf = corr
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    let lo = 1e-4f64;
    let hi = 1e-1f64;
    (0..8)
        .map(|k| linf * lo * (hi / lo).powf(k as f64 / 7.0))
        .collect()
}

/// Picks lambda by holdout cross-validation: fit each candidate on the
/// training split, score the squared residual on the holdout, then refit on
/// all measurements with the winner. Deterministic given `seed`.
pub fn cross_validate(
    plan: &SamplingPlan,
    dims: Dims3,
    params: &SolverParams,
    seed: u64,
) -> Result<CrossValReport> {
    if plan.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "cross-validation needs at least 20 measurements, got {}",
            plan.len()
        )));
    }
    let grid = if params.lambda_grid.is_empty() {
        default_lambda_grid(plan)
    } else {
        params.lambda_grid.clone()
    };

    let mut indices: Vec<usize> = (0..plan.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let holdout_len = ((plan.len() as f64 * params.cv_holdout).round() as usize)
        .clamp(1, plan.len() - 1);
    let (holdout_idx, train_idx) = indices.split_at(holdout_len);
    let train = plan.subset(train_idx);
    let holdout = plan.subset(holdout_idx);

    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lam in &grid {
        let mut p = params.clone();
        p.lambda = lam;
        let fit = solve_lasso(&train, dims, &p)?;
        let pred = forward(&fit.theta, &holdout);
        let err: f64 = pred
            .iter()
            .zip(holdout.measurements())
            .map(|(p, e)| (e - p).norm_sqr())
            .sum();
        scores.push((lam, err));
        match best {
            Some((_, be)) if be <= err => {}
            _ => best = Some((lam, err)),
        }
    }
    let (chosen, _) = best.expect("grid non-empty");
    let mut p = params.clone();
    p.lambda = chosen;
    let result = solve_lasso(plan, dims, &p)?;
    Ok(CrossValReport {
        chosen_lambda: chosen,
        scores,
        result,
    })
}
