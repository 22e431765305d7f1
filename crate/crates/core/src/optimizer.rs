//! Conjugate-gradient ascent on the product of `N` complex unit circles.
//!
//! Each iteration restarts the search direction if it stopped being an
//! ascent direction, picks a step by Armijo backtracking, retracts back to
//! the manifold, and mixes the new Riemannian gradient with the previous
//! direction through a clamped Polak-Ribière coefficient. Tangent vectors
//! are moved between points by projection onto the new tangent space.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::PhaseVector;
use crate::objective::SecureIsacObjective;
use crate::{CVector, Complex64, Error, Result};

/// A smooth real function of a complex vector, maximized on the manifold.
pub trait ManifoldObjective {
    fn value(&self, x: &CVector) -> Result<f64>;

    /// Steepest-ascent direction in the ambient space for `Re(aᴴb)`.
    fn euclidean_gradient(&self, x: &CVector) -> Result<CVector>;
}

impl ManifoldObjective for SecureIsacObjective<'_> {
    fn value(&self, x: &CVector) -> Result<f64> {
        SecureIsacObjective::value(self, x)
    }

    fn euclidean_gradient(&self, x: &CVector) -> Result<CVector> {
        self.gradient(x)
    }
}

/// Real inner product `Re(aᴴb)`.
pub fn inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

/// `(x + αξ) / |x + αξ|` element-wise.
pub fn retract(x: &CVector, xi: &CVector, alpha: f64) -> Result<PhaseVector> {
    PhaseVector::normalized(&(x + xi * Complex64::from(alpha)))
}

/// Remove the radial component of `grad` at each entry of `x`.
pub fn project_tangent(grad: &CVector, x: &CVector) -> CVector {
    grad.zip_map(x, |g, xn| g - xn * (g * xn.conj()).re)
}

/// Largest radial component `|Re(ξ_n conj(x_n))|`.
pub fn tangency_error(xi: &CVector, x: &CVector) -> f64 {
    xi.iter().zip(x.iter()).map(|(d, xn)| (d * xn.conj()).re.abs()).fold(0.0, f64::max)
}

/// Clamped Polak-Ribière coefficient
/// `max(0, ⟨r_next − r_prev_transported, r_next⟩ / ⟨r_prev, ξ_prev⟩)`.
pub fn polak_ribiere_beta(r_prev_transported: &CVector, r_next: &CVector, r_prev: &CVector, xi_prev: &CVector) -> f64 {
    let den = inner(r_prev, xi_prev);
    if den == 0.0 || !den.is_finite() {
        return 0.0;
    }
    let beta = inner(&(r_next - r_prev_transported), r_next) / den;
    if beta.is_finite() {
        beta.max(0.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionRule {
    /// Polak-Ribière momentum with restart.
    #[default]
    PolakRibiere,
    /// Plain Riemannian steepest ascent.
    SteepestAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub armijo_init_step: f64,
    pub armijo_max_backtracks: usize,
    pub seed: u64,
    pub rule: DirectionRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            armijo_init_step: 1.0,
            armijo_max_backtracks: 50,
            seed: 0,
            rule: DirectionRule::PolakRibiere,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c", "must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink", "must lie in (0, 1)");
        }
        if !(self.armijo_init_step > 0.0) {
            return bad("armijo_init_step", "must be positive");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol", "must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub backtracks: usize,
    /// Accepted point and its objective value; `None` when stalled.
    pub accepted: Option<(PhaseVector, f64)>,
}

impl ArmijoOutcome {
    pub fn stalled(&self) -> bool {
        self.accepted.is_none()
    }
}

/// Backtracking search for the largest `α = init·shrink^m`, `m ≤ cap`, with
/// `f(R(x, αd)) ≥ f(x) + c·α·D`.
pub fn armijo_search<F>(
    x: &CVector,
    direction: &CVector,
    current_value: f64,
    directional_derivative: f64,
    cfg: &OptimizerConfig,
    mut f: F,
) -> Result<ArmijoOutcome>
where
    F: FnMut(&CVector) -> Result<f64>,
{
    let stall = |backtracks| Ok(ArmijoOutcome { step: 0.0, backtracks, accepted: None });
    if !(directional_derivative > 0.0) || direction.iter().all(|d| *d == Complex64::new(0.0, 0.0)) {
        return stall(0);
    }
    let mut step = cfg.armijo_init_step;
    for m in 0..=cfg.armijo_max_backtracks {
        match retract(x, direction, step) {
            Ok(trial) => {
                let value = f(&trial)?;
                if value >= current_value + cfg.armijo_c * step * directional_derivative {
                    return Ok(ArmijoOutcome { step, backtracks: m, accepted: Some((trial, value)) });
                }
            }
            Err(Error::PathologicalStep(_)) => {}
            Err(e) => return Err(e),
        }
        step *= cfg.armijo_shrink;
    }
    stall(cfg.armijo_max_backtracks + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Objective after the step.
    pub objective: f64,
    /// Norm of the Riemannian gradient at the start of the iteration.
    pub grad_norm: f64,
    pub step: f64,
    /// Coefficient used to form the next direction.
    pub beta: f64,
    /// Whether the direction was reset to the gradient at the loop top.
    pub restart: bool,
    /// `max |Re(ξ_n conj(φ_n))|` of the executed direction.
    pub direction_tangency: f64,
    /// `max |ξ_n|`; the scale that rounding error in the tangency follows.
    pub direction_magnitude: f64,
    /// `max ||φ_n| − 1|` of the new iterate.
    pub modulus_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Armijo exhausted its backtracking budget.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub initial_value: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl OptimizerTrace {
    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(self.initial_value, |r| r.objective)
    }

    /// CSV with columns `iter,objective,grad_norm,step,beta,restart`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,objective,grad_norm,step,beta,restart")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.iter, r.objective, r.grad_norm, r.step, r.beta, r.restart as u8
            )?;
        }
        Ok(())
    }
}

/// Run from a seeded uniform-phase initialization.
pub fn optimize<O: ManifoldObjective + ?Sized>(
    objective: &O,
    elements: usize,
    cfg: &OptimizerConfig,
) -> Result<(PhaseVector, OptimizerTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = PhaseVector::random(elements, &mut rng);
    optimize_from(objective, x0, cfg)
}

pub fn optimize_from<O: ManifoldObjective + ?Sized>(
    objective: &O,
    start: PhaseVector,
    cfg: &OptimizerConfig,
) -> Result<(PhaseVector, OptimizerTrace)> {
    cfg.validate()?;
    let mut x = start;
    let mut value = objective.value(&x)?;
    let mut r = project_tangent(&objective.euclidean_gradient(&x)?, &x);
    let mut xi = r.clone();
    let mut trace = OptimizerTrace {
        initial_value: value,
        initial_grad_norm: r.norm(),
        records: Vec::new(),
        stop: StopReason::MaxIterations,
    };

    for iter in 0..cfg.max_iters {
        let grad_norm = r.norm();
        if grad_norm < cfg.grad_tol {
            trace.stop = StopReason::Converged;
            break;
        }
        let restart = inner(&r, &xi) <= 0.0;
        if restart {
            xi = r.clone();
        }
        let slope = inner(&r, &xi);
        let outcome = armijo_search(&x, &xi, value, slope, cfg, |p| objective.value(p))?;
        let Some((next, next_value)) = outcome.accepted else {
            trace.stop = StopReason::Stalled;
            break;
        };
        let direction_tangency = tangency_error(&xi, &x);
        let direction_magnitude = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);

        let r_next = project_tangent(&objective.euclidean_gradient(&next)?, &next);
        let beta = match cfg.rule {
            DirectionRule::PolakRibiere => {
                let r_transported = project_tangent(&r, &next);
                polak_ribiere_beta(&r_transported, &r_next, &r, &xi)
            }
            DirectionRule::SteepestAscent => 0.0,
        };
        let xi_next =
            if beta > 0.0 { &r_next + project_tangent(&xi, &next) * Complex64::from(beta) } else { r_next.clone() };

        trace.records.push(IterationRecord {
            iter,
            objective: next_value,
            grad_norm,
            step: outcome.step,
            beta,
            restart,
            direction_tangency,
            direction_magnitude,
            modulus_error: next.modulus_error(),
        });
        x = next;
        value = next_value;
        r = r_next;
        xi = xi_next;
    }
    if trace.stop == StopReason::MaxIterations && r.norm() < cfg.grad_tol {
        trace.stop = StopReason::Converged;
    }
    Ok((x, trace))
}
