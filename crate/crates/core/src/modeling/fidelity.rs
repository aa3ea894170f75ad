//! Objectives with a separate fidelity term.
//!
//! The squared fidelity `||x - s0||_2^2 + sum_i ||x - s_i||_{L_i}` is handled
//! by two nested one-dimensional searches. Writing `t` for the fidelity
//! radius, the outer search minimizes `h(t) + t^2` where
//! `h(t) = min { sum_i ||x - s_i|| : ||x - s0|| <= t }`; by duality
//! `h(t) = max_{lambda >= 0} G(lambda) - lambda t` with
//! `G(lambda) = min_x sum_i ||x - s_i|| + lambda ||x - s0||`, a plain grouped
//! least squares problem, and the inner search maximizes over `lambda`.
//!
//! The L1 fidelity `sum_u |x_u - s_u|` is itself grouped least squares with
//! one group per coordinate.

use crate::error::{check_finite, check_len, GlsError, Result};
use crate::instance::{Group, Instance, Solution};
use crate::linalg::{SddMatrix, SparseVector};
use crate::solver::SolverChoice;

/// Iteration cap of each golden-section search.
pub const MAX_SEARCH_ITERS: usize = 60;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[a, b]`, stopping when
/// the bracket shrinks below `width_tol`. Returns the best evaluated point.
pub(crate) fn golden_min(
    mut a: f64,
    mut b: f64,
    width_tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..MAX_SEARCH_ITERS {
        if b - a <= width_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

struct Probe {
    lambda: f64,
    x: Vec<f64>,
    smooth: f64,
    radius: f64,
}

fn dist_sq(x: &[f64], s0: &[f64]) -> f64 {
    x.iter().zip(s0).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `||x - s0||_2^2 + sum_i ||x - s_i||_{L_i}`.
pub fn l22_objective(smooth: &[Group], s0: &[f64], x: &[f64]) -> Result<f64> {
    check_len(s0.len(), x.len())?;
    Ok(dist_sq(x, s0) + smooth.iter().map(|g| g.residual_norm(x)).sum::<f64>())
}

/// Minimizes `||x - s0||_2^2 + sum_i ||x - s_i||_{L_i}` by nested
/// golden-section searches, each inner evaluation solving one grouped least
/// squares instance with `solver`. Searches stop when their bracket falls
/// below `search_tol` times its initial width.
///
/// The returned solution is the best point found by the full objective,
/// including `s0` itself; `iterations` counts inner solves.
pub fn l22_fidelity_solve(
    smooth: &[Group],
    s0: &[f64],
    solver: &SolverChoice,
    search_tol: f64,
) -> Result<Solution> {
    let n = s0.len();
    check_finite(s0, "fidelity target")?;
    for g in smooth {
        check_len(n, g.matrix().n())?;
    }
    if !(search_tol > 0.0) {
        return Err(GlsError::InvalidArgument("search tolerance must be positive".into()));
    }

    let smooth_at_s0: f64 = smooth.iter().map(|g| g.residual_norm(s0)).sum();
    let mut best = Solution {
        x: s0.to_vec(),
        objective: smooth_at_s0,
        iterations: 0,
        trace: crate::instance::Trace::Mw(Vec::new()),
        solver_tag: solver.name(),
        certificate: None,
    };
    if smooth.is_empty() || smooth_at_s0 == 0.0 {
        return Ok(best);
    }

    let target = SparseVector::from_dense(s0)?;
    let s0_norm = s0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let t_hi = s0_norm + smooth_at_s0 + smooth_at_s0.sqrt();
    // G(lambda) is constant once lambda exceeds the Lipschitz constant of the
    // smooth part, which is at most sum_i sqrt(lambda_max(L_i))
    let lam_hi = 1.01
        * smooth
            .iter()
            .map(|g| g.matrix().spectral_upper_bound().sqrt())
            .sum::<f64>()
        + 1.0;

    let mut solves = 0usize;
    let consider = |x: Vec<f64>, sol: Option<&Solution>, best: &mut Solution| -> Result<()> {
        let full = l22_objective(smooth, s0, &x)?;
        if full < best.objective {
            best.x = x;
            best.objective = full;
            if let Some(sol) = sol {
                best.trace = sol.trace.clone();
                best.solver_tag = sol.solver_tag;
            }
        }
        Ok(())
    };
    let mut evaluate = |lambda: f64, best: &mut Solution| -> Result<Probe> {
        let mut groups = smooth.to_vec();
        groups.push(Group::new(SddMatrix::scaled_identity(n, lambda * lambda), target.clone()));
        let sol = solver.solve(&Instance::new(n, groups)?)?;
        solves += 1;
        let probe = Probe {
            lambda,
            smooth: smooth.iter().map(|g| g.residual_norm(&sol.x)).sum(),
            radius: dist_sq(&sol.x, s0).sqrt(),
            x: sol.x.clone(),
        };
        consider(sol.x.clone(), Some(&sol), best)?;
        Ok(probe)
    };

    let mut outer = |t: f64, best: &mut Solution| -> Result<f64> {
        // closest probes on either side of the constraint ||x - s0|| = t
        let mut outside: Option<Probe> = None;
        let mut inside: Option<Probe> = None;
        let (_, neg_h) = golden_min(0.0, lam_hi, search_tol * lam_hi, |lambda| {
            let p = evaluate(lambda, best)?;
            let value = p.smooth + lambda * p.radius - lambda * t;
            if p.radius >= t {
                if outside.as_ref().is_none_or(|o| o.lambda < lambda) {
                    outside = Some(p);
                }
            } else if inside.as_ref().is_none_or(|o| o.lambda > lambda) {
                inside = Some(p);
            }
            Ok(-value)
        })?;
        // at a degenerate multiplier the minimizers on both sides can sit
        // away from the constraint; their interpolation at radius t is
        // feasible and attains the dual value
        if let (Some(a), Some(b)) = (&outside, &inside) {
            if a.radius > b.radius {
                let theta = (t - b.radius) / (a.radius - b.radius);
                let x = a.x.iter().zip(&b.x).map(|(p, q)| theta * p + (1.0 - theta) * q).collect();
                consider(x, None, best)?;
            }
        }
        Ok(-neg_h + t * t)
    };
    golden_min(0.0, t_hi, search_tol * t_hi, |t| outer(t, &mut best))?;
    best.iterations = solves;
    Ok(best)
}

/// Appends one single-coordinate group `|x_u - s_u|` per variable.
pub fn l1_expand(n: usize, base: Vec<Group>, s: &[f64]) -> Result<Instance> {
    check_len(n, s.len())?;
    check_finite(s, "fidelity target")?;
    let mut groups = base;
    for (u, &su) in s.iter().enumerate() {
        groups.push(Group::new(
            SddMatrix::assemble_laplacian(n, &[], &[(u, 1.0)])?,
            SparseVector::from_pairs(n, vec![(u, su)])?,
        ));
    }
    Instance::new(n, groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipm::IpmConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ipm() -> SolverChoice {
        SolverChoice::Ipm(IpmConfig::with_eps(1e-9))
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_min(-3.0, 5.0, 1e-9, |x| Ok((x - 1.25).powi(2) + 2.0)).unwrap();
        assert!((x - 1.25).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_tension_returns_target() {
        let s0 = [0.5, 0.5, 0.5];
        let smooth = vec![Group::centered(
            SddMatrix::assemble_laplacian(3, &[(0, 1, 1.0), (1, 2, 1.0)], &[]).unwrap(),
        )];
        let sol = l22_fidelity_solve(&smooth, &s0, &ipm(), 1e-6).unwrap();
        assert_eq!(sol.x, s0);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn one_dimensional_calculus() {
        // (x - 4)^2 + |x| is minimized at x = 3.5 with value 3.75
        let smooth = vec![Group::centered(SddMatrix::identity(1))];
        let sol = l22_fidelity_solve(&smooth, &[4.0], &ipm(), 1e-7).unwrap();
        assert!((sol.x[0] - 3.5).abs() < 1e-3, "{}", sol.x[0]);
        assert!((sol.objective - 3.75).abs() < 1e-3);
    }

    #[test]
    fn two_variable_tv_matches_grid_scan() {
        let smooth = vec![Group::centered(SddMatrix::assemble_laplacian(2, &[(0, 1, 1.0)], &[]).unwrap())];
        let s0 = [0.0, 2.0];
        let sol = l22_fidelity_solve(&smooth, &s0, &ipm(), 1e-7).unwrap();
        let f = |a: f64, b: f64| a * a + (b - 2.0).powi(2) + (a - b).abs();
        let mut oracle = f64::INFINITY;
        let steps = 2000;
        for i in 0..=steps {
            for j in 0..=steps {
                let a = -0.5 + 3.0 * i as f64 / steps as f64;
                let b = -0.5 + 3.0 * j as f64 / steps as f64;
                oracle = oracle.min(f(a, b));
            }
        }
        assert!((sol.objective - oracle).abs() <= 1e-3, "{} vs {oracle}", sol.objective);
        assert!((f(sol.x[0], sol.x[1]) - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn l1_expansion_adds_absolute_deviations() {
        let inst = l1_expand(2, vec![], &[1.0, 2.0]).unwrap();
        assert_eq!(inst.obj(&[1.0, 2.0]).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base: Vec<Group> = (0..3)
            .map(|_| {
                let (u, v) = (rng.random_range(0..5), rng.random_range(0..5));
                let edges = if u != v { vec![(u, v, 1.5)] } else { vec![] };
                Group::centered(SddMatrix::assemble_laplacian(5, &edges, &[(u, 0.5)]).unwrap())
            })
            .collect();
        let s: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base_inst = Instance::new(5, base.clone()).unwrap();
        let expanded = l1_expand(5, base, &s).unwrap();
        assert_eq!(expanded.k(), 8);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let direct: f64 = x.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
            let lhs = expanded.obj(&x).unwrap();
            let rhs = base_inst.obj(&x).unwrap() + direct;
            assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs));
        }
    }
}
