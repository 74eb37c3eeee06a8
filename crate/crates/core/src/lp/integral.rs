//! Integral LP solving for flow-shaped programs. The simplex returns vertex
//! solutions, which for the totally unimodular subproblems here are already
//! integral; the branch-and-bound fallback covers the rare fractional vertex
//! introduced by the charger-capacity side constraints.

use crate::scalar::Scalar;

use super::simplex::solve_with_bounds;
use super::{FlowSolution, LinearProgramSpec, LpError, SolveStatus, INTEGRALITY_TOL};

const NODE_LIMIT: usize = 20_000;

fn fractional_var<S: Scalar>(values: &[S], integral: &[bool]) -> Option<(usize, S)> {
    let tol = S::cast_f64(INTEGRALITY_TOL);
    let mut worst: Option<(usize, S)> = None;
    for (j, (&v, &is_int)) in values.iter().zip(integral).enumerate() {
        if !is_int {
            continue;
        }
        let frac = (v - v.round()).abs();
        if frac > tol {
            match worst {
                Some((_, w)) if frac <= w => {}
                _ => worst = Some((j, frac)),
            }
        }
    }
    worst
}

fn snap<S: Scalar>(values: &mut [S], integral: &[bool]) {
    let tol = S::cast_f64(INTEGRALITY_TOL);
    for (v, &is_int) in values.iter_mut().zip(integral) {
        if is_int && (*v - v.round()).abs() <= tol {
            *v = v.round();
        }
    }
}

/// Maximizes `spec` with the variables flagged in `integral` restricted to
/// integer values. Returns `Infeasible`/`Unbounded` statuses like the plain
/// solver; errors only on malformed input or when the search blows up.
pub fn solve_lp_integral<S: Scalar>(
    spec: &LinearProgramSpec<S>,
    integral: &[bool],
) -> Result<FlowSolution<S>, LpError> {
    assert_eq!(integral.len(), spec.var_count());
    let (root, _) = solve_with_bounds(spec, &spec.lower, &spec.upper)?;
    match root.status {
        SolveStatus::Optimal => {}
        _ => return Ok(root),
    }
    if fractional_var(&root.values, integral).is_none() {
        let mut sol = root;
        snap(&mut sol.values, integral);
        sol.objective_value = spec.objective_value(&sol.values);
        return Ok(sol);
    }

    // Depth-first branch and bound on the fractional variables.
    struct Node<S> {
        lower: Vec<S>,
        upper: Vec<Option<S>>,
    }
    let mut stack = vec![Node { lower: spec.lower.clone(), upper: spec.upper.clone() }];
    let mut incumbent: Option<FlowSolution<S>> = None;
    let mut explored = 0usize;
    let gap = S::cast_f64(1e-9);
    while let Some(node) = stack.pop() {
        explored += 1;
        if explored > NODE_LIMIT {
            return Err(LpError::BranchLimit);
        }
        let (relax, _) = solve_with_bounds(spec, &node.lower, &node.upper)?;
        match relax.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => return Ok(relax),
        }
        if let Some(inc) = &incumbent {
            if relax.objective_value <= inc.objective_value + gap {
                continue;
            }
        }
        match fractional_var(&relax.values, integral) {
            None => {
                let mut sol = relax;
                snap(&mut sol.values, integral);
                sol.objective_value = spec.objective_value(&sol.values);
                let better = incumbent
                    .as_ref()
                    .map(|inc| sol.objective_value > inc.objective_value + gap)
                    .unwrap_or(true);
                if better {
                    incumbent = Some(sol);
                }
            }
            Some((j, _)) => {
                let v = relax.values[j];
                let floor = v.floor();
                let mut down = Node { lower: node.lower.clone(), upper: node.upper.clone() };
                down.upper[j] = Some(match down.upper[j] {
                    Some(u) => u.min(floor),
                    None => floor,
                });
                let mut up = Node { lower: node.lower, upper: node.upper };
                up.lower[j] = up.lower[j].max(floor + S::one());
                // Explore the branch nearer the relaxation value first.
                if v - floor <= S::cast_f64(0.5) {
                    stack.push(up);
                    stack.push(down);
                } else {
                    stack.push(down);
                    stack.push(up);
                }
            }
        }
    }
    match incumbent {
        Some(sol) => Ok(sol),
        None => Ok(FlowSolution::infeasible(spec.var_count())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;

    #[test]
    fn already_integral_solution_passes_through() {
        let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(2);
        spec.objective = vec![1.0, 1.0];
        spec.push_constraint(vec![(0, 1.0)], Relation::Le, 2.0);
        spec.push_constraint(vec![(1, 1.0)], Relation::Le, 3.0);
        let sol = solve_lp_integral(&spec, &[true, true]).unwrap();
        assert_eq!(sol.values, vec![2.0, 3.0]);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5a + 4b s.t. 6a + 5b <= 10, integer: best is a=0, b=2 -> 8
        // (the LP relaxation sits at a=10/6).
        let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(2);
        spec.objective = vec![5.0, 4.0];
        spec.push_constraint(vec![(0, 6.0), (1, 5.0)], Relation::Le, 10.0);
        let relaxed = crate::lp::solve_lp(&spec).unwrap();
        assert!(relaxed.objective_value > 8.0 + 1e-6);
        let sol = solve_lp_integral(&spec, &[true, true]).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 8.0).abs() < 1e-9);
        assert_eq!(sol.values, vec![0.0, 2.0]);
    }

    #[test]
    fn mixed_integrality_leaves_continuous_vars_alone() {
        // max a + b s.t. a + b <= 2.5 with only a integer: a=2, b=0.5.
        let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(2);
        spec.objective = vec![1.0, 0.9];
        spec.push_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 2.5);
        let sol = solve_lp_integral(&spec, &[true, false]).unwrap();
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
        assert!((sol.values[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn integer_infeasibility_detected() {
        // 0.4 <= x <= 0.6 has no integer point.
        let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(1);
        spec.objective = vec![1.0];
        spec.push_constraint(vec![(0, 1.0)], Relation::Ge, 0.4);
        spec.push_constraint(vec![(0, 1.0)], Relation::Le, 0.6);
        let sol = solve_lp_integral(&spec, &[true]).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}
