//! Log-barrier interior point method.
//!
//! The problem is written as the cone program
//! `min sum_i y_i  s.t.  ||x - s_i||_{L_i} <= y_i` and solved by centering
//! `f(t, x, y) = t sum_i y_i - sum_i ln(y_i^2 - ||x - s_i||^2_{L_i})` with
//! damped Newton steps for a geometrically increasing `t`.
//!
//! Each second-order cone barrier has degree 2, so at an exactly centered
//! point `sum_i y_i - OPT <= 2k/t`. The reported certificate adds the
//! standard correction for the Newton decrement left after centering.

mod hessian;

pub use hessian::{hessian_solve, hessian_solve_with, HessianMethod};

use crate::error::{check_len, GlsError, Result};
use crate::instance::{Certificate, Instance, IpmRecord, Solution, Trace, Weights};
use hessian::Curvature;

/// Relative precision of barrier values; smaller Newton decrements are not
/// resolvable.
const VALUE_ROUNDING: f64 = 1e-15;

/// Smallest step length tried before the line search gives up.
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl BarrierPoint {
    /// Checks `y_i > 0` and `y_i^2 > ||x - s_i||^2_{L_i}` for every group.
    pub fn check_feasible(&self, inst: &Instance) -> Result<()> {
        Curvature::at(inst, self).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Sufficient-decrease slope, in `(0, 0.5)`.
    pub alpha: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmConfig {
    /// Target additive suboptimality.
    pub eps: f64,
    /// Initial barrier parameter; `k / max(1, obj(x_init))` when unset.
    pub t0: Option<f64>,
    pub t_factor: f64,
    /// Centering stops once half the squared Newton decrement drops below
    /// this value.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub line_search: LineSearch,
    /// Relative tolerance of the inner linear solves.
    pub solve_tol: f64,
    pub hessian: HessianMethod,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            t0: None,
            t_factor: 20.0,
            newton_tol: 1e-10,
            max_newton: 50,
            line_search: LineSearch {
                alpha: 0.1,
                beta: 0.5,
            },
            solve_tol: 1e-12,
            hessian: HessianMethod::Auto,
        }
    }
}

impl IpmConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GlsError::InvalidArgument(msg.into()));
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if matches!(self.t0, Some(t) if !(t > 0.0 && t.is_finite())) {
            return bad("t0 must be positive");
        }
        if !(self.t_factor > 1.0) {
            return bad("t_factor must exceed 1");
        }
        let LineSearch { alpha, beta } = self.line_search;
        if !(alpha > 0.0 && alpha < 0.5) {
            return bad("line search slope must lie in (0, 0.5)");
        }
        if !(beta > 0.0 && beta < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if self.max_newton == 0 {
            return bad("max_newton must be positive");
        }
        Ok(())
    }
}

/// Strictly feasible start: `x` minimizes the unit-weight quadratic problem,
/// `y_i = ||x - s_i||_{L_i} + 1`.
pub fn feasible_init(inst: &Instance, config: &IpmConfig) -> Result<BarrierPoint> {
    let q = inst.quad_min(&Weights::uniform(inst.k()), config.solve_tol)?;
    let norms = inst.group_norms(&q.x)?;
    let obj: f64 = norms.iter().sum();
    let t = config
        .t0
        .unwrap_or_else(|| inst.k() as f64 / obj.max(1.0));
    Ok(BarrierPoint {
        x: q.x,
        y: norms.iter().map(|v| v + 1.0).collect(),
        t,
    })
}

/// `f(t, x, y)`; infinite outside the domain.
pub fn barrier_value(inst: &Instance, p: &BarrierPoint) -> Result<f64> {
    check_len(inst.n(), p.x.len())?;
    check_len(inst.k(), p.y.len())?;
    let mut f = 0.0;
    for (g, &y) in inst.groups().iter().zip(&p.y) {
        let d = y * y - g.residual_sq(&p.x);
        if !(y > 0.0 && d > 0.0) {
            return Ok(f64::INFINITY);
        }
        f += p.t * y - d.ln();
    }
    Ok(f)
}

/// Gradient of `f(t, ., .)`:
/// `g_x = sum_i (2/D_i) L_i (x - s_i)` and `g_y_i = t - 2 y_i / D_i`.
pub fn barrier_grad(inst: &Instance, p: &BarrierPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let curv = Curvature::at(inst, p)?;
    Ok(grad_at(inst, &curv, p))
}

fn grad_at(inst: &Instance, curv: &Curvature, p: &BarrierPoint) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; inst.n()];
    let mut gy = Vec::with_capacity(inst.k());
    for (i, g) in inst.groups().iter().enumerate() {
        g.accumulate_gradient(&p.x, 2.0 / curv.d[i], &mut gx);
        gy.push(p.t - 2.0 * p.y[i] / curv.d[i]);
    }
    (gx, gy)
}

/// Minimizer of `t y - ln(y^2 - q)` over `y`, `(1 + sqrt(1 + t^2 q)) / t`.
/// Its slack is exactly `y^2 - q = 2y / t`.
fn best_y(t: f64, q: f64) -> f64 {
    (1.0 + (1.0 + t * t * q).sqrt()) / t
}

/// `min_y f(t, x, y)` together with the curvature at the minimizing `y`.
/// The slacks come from `2y / t`, which avoids the cancellation in
/// `y^2 - q` once `t` is large.
fn partial_barrier(inst: &Instance, x: &[f64], t: f64) -> (f64, Curvature) {
    let q: Vec<f64> = inst.groups().iter().map(|g| g.residual_sq(x)).collect();
    let y: Vec<f64> = q.iter().map(|&qi| best_y(t, qi)).collect();
    let d: Vec<f64> = y.iter().map(|&yi| 2.0 * yi / t).collect();
    let value = y.iter().zip(&d).map(|(yi, di)| t * yi - di.ln()).sum();
    (value, Curvature { q, d, y })
}

#[derive(Debug)]
struct Centering {
    steps: usize,
    grad_norm: f64,
    converged: bool,
    /// Newton decrement `sqrt(-g^T H^{-1} g)` at the returned point.
    decrement: f64,
}

/// Suboptimality bound at a point of the barrier path with Newton decrement
/// `lambda < 1` for a barrier of parameter `nu`:
/// `(nu + (lambda + sqrt(nu)) lambda / (1 - lambda)) / t`.
fn gap_bound(nu: f64, lambda: f64, t: f64) -> f64 {
    (nu + (lambda + nu.sqrt()) * lambda / (1.0 - lambda)) / t
}

/// Damped Newton iterations at fixed `t` on `phi(x) = min_y f(t, x, y)`.
///
/// The Newton direction is that of the full system at the minimizing `y`
/// (whose `x` part is the Newton direction of `phi`); the line search moves
/// `x` only and re-minimizes `y`, so no trial point leaves the domain.
fn center(inst: &Instance, p: &mut BarrierPoint, config: &IpmConfig) -> Result<Centering> {
    let LineSearch { alpha, beta } = config.line_search;
    let mut steps = 0;
    let (mut value, mut curv) = partial_barrier(inst, &p.x, p.t);
    p.y.clone_from(&curv.y);
    loop {
        let (gx, gy) = grad_at(inst, &curv, p);
        let grad_norm = gx.iter().chain(&gy).map(|v| v * v).sum::<f64>().sqrt();
        if steps == config.max_newton {
            return Ok(Centering {
                steps,
                grad_norm,
                converged: false,
                decrement: f64::INFINITY,
            });
        }
        let neg_x: Vec<f64> = gx.iter().map(|v| -v).collect();
        let neg_y: Vec<f64> = gy.iter().map(|v| -v).collect();
        let (dx, dy) = hessian::solve_at(
            inst,
            &curv,
            &p.x,
            &neg_x,
            &neg_y,
            config.hessian,
            config.solve_tol,
        )?;
        let slope: f64 = gx.iter().zip(&dx).chain(gy.iter().zip(&dy)).map(|(a, b)| a * b).sum();
        // below the rounding level of f no decrease can be verified
        let tol = config.newton_tol.max(VALUE_ROUNDING * value.abs());
        if -slope / 2.0 <= tol {
            return Ok(Centering {
                steps,
                grad_norm,
                converged: true,
                decrement: slope.abs().sqrt(),
            });
        }
        if !(slope < 0.0) {
            return Err(GlsError::NewtonFailure(format!(
                "Newton direction is not a descent direction (slope {slope:e})"
            )));
        }

        let mut s = 1.0;
        let accepted = loop {
            if s < MIN_STEP {
                break None;
            }
            let x: Vec<f64> = p.x.iter().zip(&dx).map(|(a, b)| a + s * b).collect();
            let (v, c) = partial_barrier(inst, &x, p.t);
            if v <= value + alpha * s * slope {
                break Some((x, v, c));
            }
            s *= beta;
        };
        match accepted {
            Some((x, v, c)) => {
                p.x = x;
                p.y.clone_from(&c.y);
                value = v;
                curv = c;
            }
            None => {
                return Err(GlsError::NewtonFailure(format!(
                    "line search stalled at t = {:e} after {steps} steps",
                    p.t
                )))
            }
        }
        steps += 1;
    }
}

/// Runs the barrier method until the certified gap, `2k/t` plus a
/// correction for inexact centering, is at most `eps`.
///
/// Centering keeps `y` at its exact minimizer for the current `x`. If a centering fails or does not converge after at
/// least one stage has been completed, the last centered point is returned
/// with its certificate.
pub fn solve_ipm(inst: &Instance, config: &IpmConfig) -> Result<Solution> {
    config.validate()?;
    let k = inst.k() as f64;
    let mut p = feasible_init(inst, config)?;
    let mut records = Vec::new();
    let mut total_steps = 0;
    let mut last_centered: Option<(BarrierPoint, f64)> = None;

    for stage in 0.. {
        match center(inst, &mut p, config) {
            Ok(c) => {
                total_steps += c.steps;
                let sum_y: f64 = p.y.iter().sum();
                records.push(IpmRecord {
                    stage,
                    t: p.t,
                    newton_steps: c.steps,
                    grad_norm: c.grad_norm,
                    sum_y,
                    obj: inst.obj(&p.x)?,
                });
                if !(c.converged && c.decrement < 1.0) {
                    if last_centered.is_none() {
                        return Err(GlsError::NewtonFailure(format!(
                            "first centering did not converge in {} steps",
                            config.max_newton
                        )));
                    }
                    break;
                }
                let gap = gap_bound(2.0 * k, c.decrement, p.t);
                last_centered = Some((p.clone(), gap));
                if gap <= config.eps {
                    break;
                }
                p.t *= config.t_factor;
            }
            Err(e @ (GlsError::NewtonFailure(_) | GlsError::Singular | GlsError::Infeasible { .. })) => {
                if last_centered.is_none() {
                    return Err(e);
                }
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let (point, gap) = last_centered.expect("at least one stage completes");
    let sum_y = point.y.iter().sum();
    let objective = inst.obj(&point.x)?;
    Ok(Solution {
        x: point.x,
        objective,
        iterations: total_steps,
        trace: Trace::Ipm(records),
        solver_tag: "ipm",
        certificate: Some(Certificate {
            sum_y,
            gap_bound: gap,
        }),
    })
}
