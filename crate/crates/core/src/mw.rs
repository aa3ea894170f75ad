//! Multiplicative-weights approximation algorithm.
//!
//! Each iteration solves the weighted quadratic problem with
//! `alpha_i = 1 / w_i`, measures every group's norm at the minimizer and
//! grows each weight by
//! `(eps / rho * ||x - s_i||_{L_i} / lambda + 2 eps^2 / (k rho)) * mu`,
//! where `mu = sum_i w_i` and `lambda = sqrt(mu * OBJ2(x))` upper-bounds
//! `OBJ(x)`. The best iterate by objective is returned.
//!
//! Weights grow geometrically, so they are stored relative to a running
//! scale `exp(log_scale)`; the algorithm only depends on weight ratios.

use crate::error::{GlsError, Result};
use crate::instance::{Instance, MwRecord, Solution, Trace, Weights};

/// Stored weights are renormalized once their sum passes this value.
const RENORMALIZE_ABOVE: f64 = 1e150;

/// Stall length (iterations without sufficient improvement) that ends a
/// default-mode run.
pub const STALL_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MwConfig {
    pub eps: f64,
    pub rho_override: Option<f64>,
    pub max_iters_override: Option<usize>,
    /// Relative improvement of the best objective that resets the stall
    /// counter. Ignored in strict mode.
    pub early_stop_rel: Option<f64>,
    /// Run the full theoretical iteration count.
    pub strict_mode: bool,
    /// Relative residual for the inner linear solves.
    pub solve_tol: f64,
    pub record_group_norms: bool,
}

impl Default for MwConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            rho_override: None,
            max_iters_override: None,
            early_stop_rel: Some(1e-4),
            strict_mode: false,
            solve_tol: 1e-10,
            record_group_norms: false,
        }
    }
}

impl MwConfig {
    pub fn strict(eps: f64) -> Self {
        Self {
            eps,
            strict_mode: true,
            early_stop_rel: None,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(GlsError::InvalidArgument(format!(
                "eps must lie in (0, 0.5], got {}",
                self.eps
            )));
        }
        if matches!(self.rho_override, Some(r) if !(r > 0.0 && r.is_finite())) {
            return Err(GlsError::InvalidArgument("rho override must be positive".into()));
        }
        if self.max_iters_override == Some(0) {
            return Err(GlsError::InvalidArgument("iteration override must be positive".into()));
        }
        if matches!(self.early_stop_rel, Some(r) if !(r >= 0.0)) {
            return Err(GlsError::InvalidArgument("early stop threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Width parameter `rho = 2 k^(1/3) eps^(-2/3)` and iteration count
/// `N = ceil(10 rho ln(n) / eps^2)`.
///
/// `ln(n)` is evaluated at `max(n, 2)` so one-variable instances still run.
pub fn mw_defaults(n: usize, k: usize, eps: f64) -> (f64, usize) {
    let rho = 2.0 * (k as f64).cbrt() * eps.powf(-2.0 / 3.0);
    let ln_n = (n.max(2) as f64).ln();
    let iters = (10.0 * rho * ln_n / (eps * eps)).ceil() as usize;
    (rho, iters.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwState {
    /// Weights in the stored scale; true weights are `w * exp(log_scale)`.
    pub w: Weights,
    /// Sum of the stored weights.
    pub mu: f64,
    pub log_scale: f64,
    /// Number of completed steps.
    pub t: usize,
    pub best_x: Option<Vec<f64>>,
    pub best_obj: f64,
    /// Most recent minimizer, used to warm-start the next solve.
    last_x: Option<Vec<f64>>,
}

impl MwState {
    pub fn new(inst: &Instance) -> Self {
        let k = inst.k();
        Self {
            w: Weights::uniform(k),
            mu: k as f64,
            log_scale: 0.0,
            t: 0,
            best_x: None,
            best_obj: f64::INFINITY,
            last_x: None,
        }
    }

    /// `ln` of the true weight of group `i`.
    pub fn log_weight(&self, i: usize) -> f64 {
        self.w.as_slice()[i].ln() + self.log_scale
    }

    /// `ln` of the true weight sum.
    pub fn log_mu(&self) -> f64 {
        self.mu.ln() + self.log_scale
    }

    /// The potential `(1/OPT) sum_i ||xbar - s_i|| ln w_i` on the true weights.
    pub fn kl_potential(&self, inst: &Instance, xbar: &[f64], opt_val: f64) -> Result<f64> {
        if !(opt_val > 0.0) {
            return Err(GlsError::InvalidArgument(format!(
                "optimum must be positive, got {opt_val}"
            )));
        }
        let norms = inst.group_norms(xbar)?;
        Ok(norms
            .iter()
            .enumerate()
            .map(|(i, q)| q * self.log_weight(i))
            .sum::<f64>()
            / opt_val)
    }
}

/// `(1/OPT) sum_i ||xbar - s_i||_{L_i} ln w_i`.
pub fn kl_potential(inst: &Instance, w: &Weights, xbar: &[f64], opt_val: f64) -> Result<f64> {
    if !(opt_val > 0.0) {
        return Err(GlsError::InvalidArgument(format!(
            "optimum must be positive, got {opt_val}"
        )));
    }
    crate::error::check_len(inst.k(), w.len())?;
    let norms = inst.group_norms(xbar)?;
    Ok(norms
        .iter()
        .zip(w.as_slice())
        .map(|(q, wi)| q * wi.ln())
        .sum::<f64>()
        / opt_val)
}

/// Quantities observed in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct MwStep {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub obj: f64,
    /// `OBJ2` at `x` under the pre-update weights, in the stored scale.
    pub opt2: f64,
    /// Weight sum before the update, in the stored scale.
    pub mu_before: f64,
    pub group_norms: Vec<f64>,
    /// The iterate fits every group (objective at the numerical zero floor);
    /// weights were not updated.
    pub exact: bool,
}

/// Objective value treated as an exact fit: `1e-12` relative to the
/// objective at the origin.
fn zero_floor(inst: &Instance) -> f64 {
    let at_origin: f64 = inst
        .groups()
        .iter()
        .map(|g| g.matrix().quad_form_with(|j| g.potentials().get(j)).max(0.0).sqrt())
        .sum();
    1e-12 * at_origin.max(1.0)
}

/// One iteration: solve, measure, reweight.
pub fn mw_step(
    inst: &Instance,
    state: &mut MwState,
    rho: f64,
    eps: f64,
    solve_tol: f64,
) -> Result<MwStep> {
    mw_step_with_floor(inst, state, rho, eps, solve_tol, zero_floor(inst))
}

fn mw_step_with_floor(
    inst: &Instance,
    state: &mut MwState,
    rho: f64,
    eps: f64,
    solve_tol: f64,
    floor: f64,
) -> Result<MwStep> {
    let k = inst.k() as f64;
    let mu = state.w.sum();
    state.mu = mu;
    let q = inst.quad_min_from(&state.w, solve_tol, state.last_x.as_deref())?;
    let group_norms = inst.group_norms(&q.x)?;
    let obj: f64 = group_norms.iter().sum();
    let lambda = (mu * q.opt2).max(0.0).sqrt();
    state.t += 1;
    if obj < state.best_obj {
        state.best_obj = obj;
        state.best_x = Some(q.x.clone());
    }
    let exact = obj <= floor || lambda == 0.0;
    if !exact {
        let floor_term = 2.0 * eps * eps / (k * rho);
        for (wi, norm) in state.w.as_mut_slice().iter_mut().zip(&group_norms) {
            *wi += (eps / rho * norm / lambda + floor_term) * mu;
        }
        let new_mu = state.w.sum();
        if new_mu > RENORMALIZE_ABOVE {
            for wi in state.w.as_mut_slice() {
                *wi /= new_mu;
            }
            state.log_scale += new_mu.ln();
            state.mu = state.w.sum();
        } else {
            state.mu = new_mu;
        }
    }
    state.last_x = Some(q.x.clone());
    Ok(MwStep {
        x: q.x,
        lambda,
        obj,
        opt2: q.opt2,
        mu_before: mu,
        group_norms,
        exact,
    })
}

/// Runs the multiplicative-weights loop and returns the best iterate.
pub fn solve_mw(inst: &Instance, config: &MwConfig) -> Result<Solution> {
    config.validate()?;
    let (default_rho, default_iters) = mw_defaults(inst.n(), inst.k(), config.eps);
    let rho = config.rho_override.unwrap_or(default_rho);
    let max_iters = config.max_iters_override.unwrap_or(default_iters);
    let floor = zero_floor(inst);

    let mut state = MwState::new(inst);
    let mut records = Vec::new();
    let mut stall = 0usize;
    let mut reference = f64::INFINITY;

    for _ in 0..max_iters {
        let log_scale = state.log_scale;
        let step = mw_step_with_floor(inst, &mut state, rho, config.eps, config.solve_tol, floor)?;
        records.push(MwRecord {
            iter: state.t,
            mu: step.mu_before,
            lambda: step.lambda,
            obj: step.obj,
            opt2: step.opt2,
            log_scale,
            group_norms: config.record_group_norms.then(|| step.group_norms.clone()),
        });
        if step.exact {
            break;
        }
        if !config.strict_mode {
            if let Some(rel) = config.early_stop_rel {
                if state.best_obj < reference * (1.0 - rel) {
                    reference = state.best_obj;
                    stall = 0;
                } else {
                    stall += 1;
                    if stall >= STALL_ITERATIONS {
                        break;
                    }
                }
            }
        }
    }

    let x = state
        .best_x
        .take()
        .ok_or_else(|| GlsError::InvalidArgument("no iterations were run".into()))?;
    let objective = inst.obj(&x)?;
    Ok(Solution {
        x,
        objective,
        iterations: state.t,
        trace: Trace::Mw(records),
        solver_tag: "mw",
        certificate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Group;
    use crate::linalg::{SddMatrix, SparseVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_parameters() {
        let (rho, _) = mw_defaults(10, 1, 1.0);
        assert!((rho - 2.0).abs() < 1e-12);
        let (rho, _) = mw_defaults(10, 8, 0.5);
        assert!((rho - 6.349_604_207_872_798).abs() < 1e-9);
        // 10 * (2 * 2^(1/3) * 0.2^(-2/3)) * ln 10 * 25 = 4241.6...
        let (_, n_iter) = mw_defaults(10, 2, 0.2);
        assert_eq!(n_iter, 4242);
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Instance {
        let groups = (0..k)
            .map(|_| {
                let mut edges = Vec::new();
                for _ in 0..rng.random_range(1..n + 2) {
                    let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
                    if u != v {
                        edges.push((u, v, rng.random_range(0.2..3.0)));
                    }
                }
                let diag = vec![(rng.random_range(0..n), rng.random_range(0.2..2.0))];
                let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                Group::new(
                    SddMatrix::assemble_laplacian(n, &edges, &diag).unwrap(),
                    SparseVector::from_dense(&s).unwrap(),
                )
            })
            .collect();
        Instance::new(n, groups).unwrap()
    }

    #[test]
    fn single_group_first_step_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(&mut rng, 6, 1);
        let mut state = MwState::new(&inst);
        let (rho, _) = mw_defaults(6, 1, 0.1);
        let step = mw_step(&inst, &mut state, rho, 0.1, 1e-12).unwrap();
        let direct = inst.quad_min(&Weights::uniform(1), 1e-12).unwrap();
        assert!((step.lambda - direct.opt2.sqrt()).abs() <= 1e-9 * (1.0 + step.lambda));
        assert!((step.obj - step.lambda).abs() <= 1e-9 * (1.0 + step.lambda));
    }

    #[test]
    fn identical_groups_update_symmetrically() {
        let l = SddMatrix::assemble_laplacian(3, &[(0, 1, 1.0), (1, 2, 2.0)], &[(0, 1.0)]).unwrap();
        let s = SparseVector::from_dense(&[1.0, -1.0, 0.5]).unwrap();
        let inst = Instance::new(3, vec![Group::new(l.clone(), s.clone()), Group::new(l, s)]).unwrap();
        let mut state = MwState::new(&inst);
        let step = mw_step(&inst, &mut state, 3.0, 0.1, 1e-12).unwrap();
        let q = step.group_norms[0];
        assert!((step.group_norms[1] - q).abs() < 1e-15);
        assert!((step.lambda - 2.0 * q).abs() <= 1e-12 * (1.0 + q));
        let w = state.w.as_slice();
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn weight_update_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = random_instance(&mut rng, 6, 3);
        let (eps, rho) = (0.2, 4.0);
        let mut state = MwState::new(&inst);
        mw_step(&inst, &mut state, rho, eps, 1e-12).unwrap();
        let w_before = state.w.as_slice().to_vec();
        let step = mw_step(&inst, &mut state, rho, eps, 1e-12).unwrap();
        // recompute every quantity independently of the solver internals
        let mu: f64 = w_before.iter().sum();
        let norms: Vec<f64> = inst.groups().iter().map(|g| g.residual_norm(&step.x)).collect();
        let obj2: f64 = inst
            .groups()
            .iter()
            .zip(&w_before)
            .map(|(g, w)| g.residual_sq(&step.x) / w)
            .sum();
        let lambda = (mu * obj2).sqrt();
        assert!((lambda - step.lambda).abs() <= 1e-12 * lambda);
        for i in 0..3 {
            let expected = w_before[i] + (eps / rho * norms[i] / lambda + 2.0 * eps * eps / (3.0 * rho)) * mu;
            let got = state.w.as_slice()[i];
            assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
        }
    }

    #[test]
    fn exact_fit_terminates_immediately() {
        let s = SparseVector::from_dense(&[1.0, 2.0, 3.0]).unwrap();
        let l1 = SddMatrix::assemble_laplacian(3, &[(0, 1, 1.0)], &[(2, 1.0)]).unwrap();
        let l2 = SddMatrix::assemble_laplacian(3, &[(1, 2, 2.0)], &[(0, 0.5)]).unwrap();
        let inst = Instance::new(3, vec![Group::new(l1, s.clone()), Group::new(l2, s)]).unwrap();
        let sol = solve_mw(&inst, &MwConfig::default()).unwrap();
        assert!(sol.objective <= 1e-9, "{}", sol.objective);
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn kl_potential_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(&mut rng, 5, 3);
        let xbar = vec![0.1; 5];
        let opt = inst.obj(&xbar).unwrap();
        assert_eq!(kl_potential(&inst, &Weights::uniform(3), &xbar, opt).unwrap(), 0.0);
        let e = Weights::new(vec![std::f64::consts::E; 3]).unwrap();
        assert!((kl_potential(&inst, &e, &xbar, opt).unwrap() - 1.0).abs() < 1e-12);
        assert!(kl_potential(&inst, &e, &xbar, 0.0).is_err());
    }

    #[test]
    fn kl_potential_change_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&mut rng, 6, 3);
        let xbar: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let opt = inst.obj(&xbar).unwrap();
        let mut state = MwState::new(&inst);
        mw_step(&inst, &mut state, 3.0, 0.1, 1e-12).unwrap();
        let before = state.clone();
        mw_step(&inst, &mut state, 3.0, 0.1, 1e-12).unwrap();
        let delta = state.kl_potential(&inst, &xbar, opt).unwrap()
            - before.kl_potential(&inst, &xbar, opt).unwrap();
        let direct: f64 = inst
            .groups()
            .iter()
            .enumerate()
            .map(|(i, g)| g.residual_norm(&xbar) * (state.w.as_slice()[i] / before.w.as_slice()[i]).ln())
            .sum::<f64>()
            / opt;
        assert!((delta - direct).abs() < 1e-12);
    }

    #[test]
    fn per_iteration_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.random_range(3..10);
            let k = rng.random_range(1..5);
            let inst = random_instance(&mut rng, n, k);
            let eps = 0.2;
            let (rho, _) = mw_defaults(n, k, eps);
            let mut state = MwState::new(&inst);
            let mut prev_opt2: Option<f64> = None;
            for _ in 0..200 {
                let mu_before = state.mu;
                let scale_before = state.log_scale;
                let step = mw_step(&inst, &mut state, rho, eps, 1e-12).unwrap();
                if step.exact {
                    break;
                }
                assert!(step.obj <= step.lambda * (1.0 + 1e-9));
                let growth = (state.log_mu() - (mu_before.ln() + scale_before)).exp();
                assert!(growth <= 1.0 + eps * (1.0 + 2.0 * eps) / rho + 1e-9);
                for i in 0..k {
                    assert!(state.w.as_slice()[i] >= eps / k as f64 * state.mu * (1.0 - 1e-12));
                }
                let opt2_true = step.opt2 * (-scale_before).exp();
                if let Some(p) = prev_opt2 {
                    assert!(opt2_true <= p * (1.0 + 1e-7));
                }
                prev_opt2 = Some(opt2_true);
            }
        }
    }

    #[test]
    fn deterministic_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inst = random_instance(&mut rng, 8, 4);
        let cfg = MwConfig {
            record_group_norms: true,
            ..MwConfig::default()
        };
        let a = solve_mw(&inst, &cfg).unwrap();
        let b = solve_mw(&inst, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_iterate_is_returned() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let inst = random_instance(&mut rng, 8, 4);
        let sol = solve_mw(&inst, &MwConfig::default()).unwrap();
        let Trace::Mw(records) = &sol.trace else { panic!() };
        let best = records.iter().map(|r| r.obj).fold(f64::INFINITY, f64::min);
        assert_eq!(sol.objective, inst.obj(&sol.x).unwrap());
        assert!((sol.objective - best).abs() <= 1e-12 * best);
    }

    #[test]
    fn renormalization_preserves_the_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let inst = random_instance(&mut rng, 5, 3);
        let cfg = MwConfig {
            eps: 0.5,
            rho_override: Some(0.05),
            max_iters_override: Some(200),
            early_stop_rel: None,
            ..MwConfig::default()
        };
        let sol = solve_mw(&inst, &cfg).unwrap();
        let Trace::Mw(records) = &sol.trace else { panic!() };
        assert!(records.last().unwrap().log_scale > 0.0);
        assert!(records.iter().all(|r| r.mu.is_finite() && r.lambda.is_finite()));
    }

    #[test]
    fn config_validation() {
        let inst = Instance::new(1, vec![Group::centered(SddMatrix::identity(1))]).unwrap();
        for cfg in [
            MwConfig { eps: 0.0, ..MwConfig::default() },
            MwConfig { eps: 0.7, ..MwConfig::default() },
            MwConfig { rho_override: Some(-1.0), ..MwConfig::default() },
            MwConfig { max_iters_override: Some(0), ..MwConfig::default() },
        ] {
            assert!(solve_mw(&inst, &cfg).is_err());
        }
    }
}
