use crate::error::Result;
use crate::instance::{Instance, Solution};
use crate::ipm::{solve_ipm, IpmConfig};
use crate::mw::{solve_mw, MwConfig};

/// Which algorithm to run on an instance, with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Mw(MwConfig),
    Ipm(IpmConfig),
}

impl SolverChoice {
    pub fn solve(&self, inst: &Instance) -> Result<Solution> {
        match self {
            SolverChoice::Mw(cfg) => solve_mw(inst, cfg),
            SolverChoice::Ipm(cfg) => solve_ipm(inst, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Mw(_) => "mw",
            SolverChoice::Ipm(_) => "ipm",
        }
    }
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Mw(MwConfig::default())
    }
}
