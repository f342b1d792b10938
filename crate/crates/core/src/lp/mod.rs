//! Linear programming: problem representation, a revised simplex solver and
//! the min-MLU / joint placement+routing program builders.

mod builders;
mod format;
mod simplex;

use std::fmt;

use thiserror::Error;

pub use builders::{build_joint_lp, build_min_mlu_lp, tie_break_costs, tie_break_joint_lp, Assignment, JointLpOptions, JointProgram, MinMluProgram, SourceFlows};
pub use simplex::{solve_lp_two_stage, solve_lp_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse coefficients; each variable appears at most once.
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

/// `minimize c·x` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint references variable {var} but the program has {count} variables")]
    Dimension { var: usize, count: usize },
    #[error("variable `{label}` has invalid bounds [{lower}, {upper}]")]
    Bounds { label: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient or right-hand side in constraint {row}")]
    NonFinite { row: usize },
    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, label: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Result<VarId, LpError> {
        let label = label.into();
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::Bounds { label, lower, upper });
        }
        self.vars.push(Variable { label, lower, upper, cost });
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> Result<usize, LpError> {
        let row = self.rows.len();
        if !rhs.is_finite() || coeffs.iter().any(|(_, c)| !c.is_finite()) {
            return Err(LpError::NonFinite { row });
        }
        if let Some((v, _)) = coeffs.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(LpError::Dimension { var: v.0, count: self.vars.len() });
        }
        self.rows.push(Constraint { coeffs, relation, rhs });
        Ok(row)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    /// Human-readable CPLEX-style LP text.
    pub fn to_lp_format(&self) -> String {
        format::write_lp(self)
    }

    /// Largest constraint violation of `x`, with each row divided by its
    /// largest absolute coefficient.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let scale = r.coeffs.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs())).max(1e-300);
                let lhs: f64 = r.coeffs.iter().map(|(v, c)| c * x[v.0]).sum();
                let viol = match r.relation {
                    Relation::Le => lhs - r.rhs,
                    Relation::Ge => r.rhs - lhs,
                    Relation::Eq => (lhs - r.rhs).abs(),
                };
                (viol / scale).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value (meaningful only when optimal).
    pub objective: f64,
    /// Variable assignment (empty unless optimal).
    pub values: Vec<f64>,
    /// Row duals in the original row scaling (empty unless optimal).
    pub duals: Vec<f64>,
    /// Objective of the dual program built from `duals` and reduced costs.
    pub dual_objective: f64,
    /// Largest dual-feasibility violation at the reported optimum.
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// `|primal - dual| / max(1, |primal|)`.
    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs() / self.objective.abs().max(1.0)
    }
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub duality_tol: f64,
    pub pivot_tol: f64,
    /// Refactorize the basis after this many eta updates.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// `None` picks a limit from the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            duality_tol: 1e-6,
            pivot_tol: 1e-9,
            refactor_interval: 64,
            degenerate_limit: 50,
            max_iterations: None,
        }
    }
}

/// Solves `lp` with default tolerances.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bounded_minimum() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 3.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 10.0).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 3.0).abs() < 1e-12);
        assert!(sol.duality_gap() < 1e-9);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, -1.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 0.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

        let mut lp = LinearProgram::new();
        lp.add_var("x", 0.0, f64::INFINITY, -1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn construction_errors() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            lp.add_constraint(vec![(x, 1.0), (VarId(7), 1.0)], Relation::Le, 1.0),
            Err(LpError::Dimension { var: 7, count: 1 })
        ));
        assert!(matches!(lp.add_var("bad", 2.0, 1.0, 0.0), Err(LpError::Bounds { .. })));
        assert!(matches!(
            lp.add_constraint(vec![(x, f64::NAN)], Relation::Le, 1.0),
            Err(LpError::NonFinite { row: 0 })
        ));
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  x=2, y=6, obj 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -3.0).unwrap();
        let y = lp.add_var("y", 0.0, f64::INFINITY, -5.0).unwrap();
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 4.0).unwrap();
        lp.add_constraint(vec![(y, 2.0)], Relation::Le, 12.0).unwrap();
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.value(x) - 2.0).abs() < 1e-9);
        assert!((sol.value(y) - 6.0).abs() < 1e-9);
        // Duals: rows 2 and 3 bind with shadow prices -3/2 and -1.
        assert!((sol.duals[1] + 1.5).abs() < 1e-9);
        assert!((sol.duals[2] + 1.0).abs() < 1e-9);
        assert!(sol.duality_gap() < 1e-9);
    }

    #[test]
    fn lp_text_dump() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0, 1.0).unwrap();
        let y = lp.add_var("flow(a,b)", f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
        lp.add_constraint(vec![(x, 1.0), (y, -2.5)], Relation::Ge, 1.0).unwrap();
        let text = lp.to_lp_format();
        assert!(text.starts_with("Minimize"));
        assert!(text.contains("c0: x - 2.5 flow_a_b_ >= 1"));
        assert!(text.contains("flow_a_b_ free"));
        assert!(text.trim_end().ends_with("End"));
    }
}
