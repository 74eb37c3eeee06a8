//! Exact linear programming machinery: a dense revised-simplex solver for
//! general LPs, a successive-shortest-path min-cost-flow solver for the
//! totally unimodular subproblems, an exact integral wrapper, and the
//! assembly of the global space-charge-time profit LP.

mod assemble;
mod integral;
mod mcf;
mod simplex;

pub use assemble::{assemble_global_lp, GlobalLp, WindowBoundary};
pub use integral::solve_lp_integral;
pub use mcf::{solve_min_cost_flow, FlowArc, FlowNetwork, McfSolution};
pub use simplex::{solve_lp, solve_lp_with_diagnostics, SolverDiagnostics};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Feasibility tolerance for accepting a solution.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Values this close to an integer are snapped when integral output is required.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One constraint row with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub coeffs: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
}

/// Maps LP columns back to their domain meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarLabel {
    /// Passenger flow on a graph edge departing at an absolute step.
    Passenger { edge: usize, step: usize },
    /// Rebalancing or charging flow on a graph edge departing at a step.
    Rebalance { edge: usize, step: usize },
    /// Deviation slack attached to a space-charge node.
    DeviationSlack { node: usize },
    Anonymous,
}

/// A general LP in `maximize c'x` form with sparse constraint rows and
/// per-variable bounds (lower defaults to 0, upper to +inf).
#[derive(Debug, Clone)]
pub struct LinearProgramSpec<S> {
    pub objective: Vec<S>,
    pub constraints: Vec<Constraint<S>>,
    pub lower: Vec<S>,
    pub upper: Vec<Option<S>>,
    pub labels: Vec<VarLabel>,
    /// Optional warm-start basis: for constraint row `i`, a structural
    /// column known to form a feasible starting basis (assemblers use the
    /// idle self-loop flows). Invalid hints fall back to the two-phase
    /// start, so this is purely an accelerator.
    pub basis_hint: Option<Vec<Option<usize>>>,
}

impl<S: Scalar> LinearProgramSpec<S> {
    /// Spec with `n` variables, default bounds, and no constraints yet.
    pub fn with_vars(n: usize) -> Self {
        LinearProgramSpec {
            objective: vec![S::zero(); n],
            constraints: Vec::new(),
            lower: vec![S::zero(); n],
            upper: vec![None; n],
            labels: vec![VarLabel::Anonymous; n],
            basis_hint: None,
        }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn push_constraint(&mut self, coeffs: Vec<(usize, S)>, relation: Relation, rhs: S) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.var_count()));
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Largest violation of constraints and bounds at `values`.
    pub fn feasibility_residual(&self, values: &[S]) -> S {
        let mut worst = S::zero();
        for c in &self.constraints {
            let lhs: S = c.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            if gap > worst {
                worst = gap;
            }
        }
        for j in 0..self.var_count() {
            let below = self.lower[j] - values[j];
            if below > worst {
                worst = below;
            }
            if let Some(u) = self.upper[j] {
                let above = values[j] - u;
                if above > worst {
                    worst = above;
                }
            }
        }
        worst
    }

    pub fn objective_value(&self, values: &[S]) -> S {
        self.objective.iter().zip(values).map(|(&c, &x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP or flow solve. `values` is only meaningful when the
/// status is `Optimal`.
#[derive(Debug, Clone)]
pub struct FlowSolution<S> {
    pub values: Vec<S>,
    pub objective_value: S,
    pub status: SolveStatus,
}

impl<S: Scalar> FlowSolution<S> {
    pub fn infeasible(n: usize) -> Self {
        FlowSolution { values: vec![S::zero(); n], objective_value: S::zero(), status: SolveStatus::Infeasible }
    }

    pub fn unbounded(n: usize) -> Self {
        FlowSolution { values: vec![S::zero(); n], objective_value: S::zero(), status: SolveStatus::Unbounded }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("numerical trouble: {0}")]
    Numerical(String),
    #[error("branch and bound node limit reached")]
    BranchLimit,
    #[error("flow network is malformed: {0}")]
    BadNetwork(String),
    #[error("planning horizon must be at least one step")]
    EmptyHorizon,
}

/// Renders the program in a line-oriented text format for cross-checking
/// against external solvers: the objective first, then one constraint per
/// line, then any non-default bounds.
pub fn dump_lp<S: Scalar>(spec: &LinearProgramSpec<S>) -> String {
    fn terms<S: Scalar>(coeffs: impl Iterator<Item = (usize, S)>) -> String {
        let mut out = String::new();
        for (j, a) in coeffs {
            if a == S::zero() {
                continue;
            }
            if !out.is_empty() {
                out.push_str(if a < S::zero() { " - " } else { " + " });
            } else if a < S::zero() {
                out.push_str("-");
            }
            out.push_str(&format!("{} x{}", a.abs(), j));
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }

    let mut lines = Vec::new();
    lines.push(format!("max: {};", terms(spec.objective.iter().copied().enumerate())));
    for (k, c) in spec.constraints.iter().enumerate() {
        lines.push(format!(
            "r{}: {} {} {};",
            k,
            terms(c.coeffs.iter().copied()),
            c.relation.symbol(),
            c.rhs
        ));
    }
    for j in 0..spec.var_count() {
        if spec.lower[j] != S::zero() {
            lines.push(format!("x{} >= {};", j, spec.lower[j]));
        }
        if let Some(u) = spec.upper[j] {
            lines.push(format!("x{} <= {};", j, u));
        }
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_renders_objective_constraints_and_bounds() {
        let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(2);
        spec.objective = vec![3.0, -2.0];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 4.0);
        spec.push_constraint(vec![(0, 1.0)], Relation::Ge, 1.0);
        spec.upper[1] = Some(2.0);
        let text = dump_lp(&spec);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "max: 3 x0 - 2 x1;");
        assert_eq!(lines[1], "r0: 1 x0 + 1 x1 <= 4;");
        assert_eq!(lines[2], "r1: 1 x0 >= 1;");
        assert_eq!(lines[3], "x1 <= 2;");
    }
}
