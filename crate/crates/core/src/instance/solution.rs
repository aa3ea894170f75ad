use std::fmt::Write as _;

/// Per-iteration record of the multiplicative-weights solver.
///
/// `mu` and `opt2` are expressed in the solver's internal weight scale;
/// the true weight sum is `mu * exp(log_scale)` and the true quadratic
/// optimum is `opt2 * exp(-log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MwRecord {
    pub iter: usize,
    pub mu: f64,
    pub lambda: f64,
    pub obj: f64,
    pub opt2: f64,
    pub log_scale: f64,
    pub group_norms: Option<Vec<f64>>,
}

/// Per-stage record of the barrier solver, written after each centering.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmRecord {
    pub stage: usize,
    pub t: f64,
    pub newton_steps: usize,
    pub grad_norm: f64,
    pub sum_y: f64,
    pub obj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Mw(Vec<MwRecord>),
    Ipm(Vec<IpmRecord>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Mw(r) => r.len(),
            Trace::Ipm(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn header(&self) -> &'static str {
        match self {
            Trace::Mw(_) => "iter mu lambda obj opt2 log_scale",
            Trace::Ipm(_) => "stage t newton_steps grad_norm sum_y obj",
        }
    }

    /// Whitespace-separated table with a `#`-prefixed header line. Group
    /// norms, when recorded, follow as extra `g<i>` columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        match self {
            Trace::Mw(records) => {
                let extra = records
                    .first()
                    .and_then(|r| r.group_norms.as_ref())
                    .map_or(0, |g| g.len());
                out.push_str("# ");
                out.push_str(self.header());
                for i in 0..extra {
                    let _ = write!(out, " g{i}");
                }
                out.push('\n');
                for r in records {
                    let _ = write!(
                        out,
                        "{} {:e} {:e} {:e} {:e} {:e}",
                        r.iter, r.mu, r.lambda, r.obj, r.opt2, r.log_scale
                    );
                    if let Some(g) = &r.group_norms {
                        for v in g {
                            let _ = write!(out, " {v:e}");
                        }
                    }
                    out.push('\n');
                }
            }
            Trace::Ipm(records) => {
                let _ = writeln!(out, "# {}", self.header());
                for r in records {
                    let _ = writeln!(
                        out,
                        "{} {:e} {} {:e} {:e} {:e}",
                        r.stage, r.t, r.newton_steps, r.grad_norm, r.sum_y, r.obj
                    );
                }
            }
        }
        out
    }
}

/// Barrier-method optimality certificate: `sum_y - OPT <= gap_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub sum_y: f64,
    pub gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub trace: Trace,
    pub solver_tag: &'static str,
    pub certificate: Option<Certificate>,
}
