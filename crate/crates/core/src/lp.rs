//! Support (adaptive) method for linear programs with two-sided bounds:
//!
//! ```text
//! max cᵀx   s.t.   Bx = b,   l ≤ x ≤ u
//! ```
//!
//! The solver works on a *support plan* `{x, J_B}`: a feasible point that need
//! not be a vertex, paired with `m` basic indexes whose columns of `B` are
//! nonsingular. Each iteration computes the reduced costs
//! `Δᵀ = c_Bᵀ B_B⁻¹ B − cᵀ` and the suboptimality estimate `β`, which bounds the
//! gap `cᵀx* − cᵀx`. When `β = 0` the plan is optimal. Otherwise all nonbasic
//! variables move together toward their favorable bounds (primal step); if a
//! basic variable blocks, the support is changed by a dual ratio test that
//! lowers the dual bound (dual step). A feasible point that is already optimal
//! never moves: the primal step raises the objective by exactly `θβ`, so only
//! `θ = 0` is possible and the loop only exchanges support indexes until the
//! certificate appears.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{midpoint, rank, scalar_serde, Matrix, Scalar, Vector};

/// `max cᵀx s.t. Bx = b, l ≤ x ≤ u` with every bound finite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedLp<T: Scalar> {
    matrix: Matrix<T>,
    rhs: Vector<T>,
    cost: Vector<T>,
    lower: Vector<T>,
    upper: Vector<T>,
}

impl<T: Scalar> BoundedLp<T> {
    pub fn new(matrix: Matrix<T>, rhs: Vector<T>, cost: Vector<T>, lower: Vector<T>, upper: Vector<T>) -> Result<Self> {
        let (m, n) = (matrix.nrows(), matrix.ncols());
        let check = |context: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { context: context.into(), expected, found })
            }
        };
        check("right-hand side", m, rhs.len())?;
        check("cost vector", n, cost.len())?;
        check("lower bounds", n, lower.len())?;
        check("upper bounds", n, upper.len())?;
        if let Some(index) = (0..n).find(|&j| lower[j] > upper[j]) {
            return Err(Error::InvalidBounds { index });
        }
        if m > n || rank(&matrix) != m {
            return Err(Error::RankDeficient);
        }
        Ok(Self { matrix, rhs, cost, lower, upper })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn rhs(&self) -> &Vector<T> {
        &self.rhs
    }

    pub fn cost(&self) -> &Vector<T> {
        &self.cost
    }

    pub fn lower(&self) -> &Vector<T> {
        &self.lower
    }

    pub fn upper(&self) -> &Vector<T> {
        &self.upper
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_vars(&self) -> usize {
        self.matrix.ncols()
    }

    /// Same constraints, different objective.
    pub fn with_cost(&self, cost: Vector<T>) -> Result<Self> {
        if cost.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                context: "cost vector".into(),
                expected: self.num_vars(),
                found: cost.len(),
            });
        }
        Ok(Self { cost, ..self.clone() })
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.cost.dot(x)
    }

    pub fn is_feasible(&self, x: &[T]) -> bool {
        x.len() == self.num_vars()
            && self.lower.le(x)
            && Vector::from(x.to_vec()).le(&self.upper)
            && self.matrix.mul_vec(x) == self.rhs
    }
}

/// Feasible point plus support index set `J_B` (0-based column indexes).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SupportPlan<T: Scalar> {
    pub x: Vector<T>,
    pub support: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Reserved for reporting; a [`BoundedLp`] has finite bounds and cannot produce it.
    Unbounded,
}

/// One visited support plan with its estimate, before the iteration's step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationRecord<T: Scalar> {
    pub x: Vector<T>,
    pub support: Vec<usize>,
    #[serde(with = "scalar_serde")]
    pub beta: T,
    #[serde(with = "scalar_serde")]
    pub objective: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpOutcome<T: Scalar> {
    pub status: LpStatus,
    pub x: Option<Vector<T>>,
    pub objective: Option<T>,
    pub support: Option<SupportPlan<T>>,
    /// Plans visited by the final optimization run (phase-1 excluded).
    pub trace: Vec<IterationRecord<T>>,
}

impl<T: Scalar> LpOutcome<T> {
    fn infeasible() -> Self {
        Self { status: LpStatus::Infeasible, x: None, objective: None, support: None, trace: Vec::new() }
    }

    /// Number of primal/dual steps taken (zero when the start was already certified).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Reduced costs `Δ` and suboptimality estimate `β` of a support plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Estimate<T: Scalar> {
    pub beta: T,
    pub reduced_costs: Vector<T>,
}

/// Validates `plan` against `lp` and returns its estimate.
pub fn suboptimality_estimate<T: Scalar>(lp: &BoundedLp<T>, plan: &SupportPlan<T>) -> Result<Estimate<T>> {
    validate_plan(lp, plan)?;
    let inv = support_inverse(lp, &plan.support)?;
    let reduced_costs = reduced_costs(lp, &plan.support, &inv);
    let beta = beta(lp, &plan.x, &reduced_costs);
    Ok(Estimate { beta, reduced_costs })
}

fn validate_plan<T: Scalar>(lp: &BoundedLp<T>, plan: &SupportPlan<T>) -> Result<()> {
    let (m, n) = (lp.num_rows(), lp.num_vars());
    if plan.support.len() != m {
        return Err(Error::InvalidSupport(format!("support has {} indexes, expected {m}", plan.support.len())));
    }
    let mut seen = vec![false; n];
    for &j in &plan.support {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidSupport(format!("support index {j} is out of range or repeated")));
        }
    }
    if !lp.is_feasible(&plan.x) {
        return Err(Error::InvalidSupport("plan point is not feasible".into()));
    }
    Ok(())
}

fn support_inverse<T: Scalar>(lp: &BoundedLp<T>, support: &[usize]) -> Result<Matrix<T>> {
    lp.matrix
        .select_columns(support)
        .inverse()
        .ok_or_else(|| Error::InvalidSupport("support columns are singular".into()))
}

fn reduced_costs<T: Scalar>(lp: &BoundedLp<T>, support: &[usize], inv: &Matrix<T>) -> Vector<T> {
    let c_b: Vec<T> = support.iter().map(|&j| lp.cost[j].clone()).collect();
    // yᵀ = c_Bᵀ B_B⁻¹
    let y = inv.tr_mul_vec(&c_b);
    let mut delta = lp.matrix.tr_mul_vec(&y).sub(&lp.cost);
    for &j in support {
        // exact already; pin to zero so basic entries never carry noise
        delta[j] = T::zero();
    }
    delta
}

fn beta<T: Scalar>(lp: &BoundedLp<T>, x: &[T], delta: &[T]) -> T {
    delta.iter().enumerate().fold(T::zero(), |acc, (j, d)| {
        if d.is_positive() {
            acc + d.clone() * (x[j].clone() - lp.lower[j].clone())
        } else if d.is_negative() {
            acc + d.clone() * (x[j].clone() - lp.upper[j].clone())
        } else {
            acc
        }
    })
}

/// Iteration cap; finite termination holds under the smallest-index rules,
/// the cap only turns an unexpected cycle into an error.
fn iteration_cap(lp_vars: usize) -> usize {
    10_000 + 100 * lp_vars * lp_vars
}

struct Engine<'a, T: Scalar> {
    lp: &'a BoundedLp<T>,
    x: Vector<T>,
    support: Vec<usize>,
    trace: Vec<IterationRecord<T>>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn run(&mut self) -> Result<()> {
        let n = self.lp.num_vars();
        let cap = iteration_cap(n);
        for _ in 0..cap {
            let inv = support_inverse(self.lp, &self.support)?;
            let delta = reduced_costs(self.lp, &self.support, &inv);
            let beta = beta(self.lp, &self.x, &delta);
            self.trace.push(IterationRecord {
                x: self.x.clone(),
                support: self.support.clone(),
                beta: beta.clone(),
                objective: self.lp.objective(&self.x),
            });
            if beta.is_zero() {
                return Ok(());
            }
            self.step(&inv, &delta);
        }
        Err(Error::IterationLimit(cap))
    }

    fn step(&mut self, inv: &Matrix<T>, delta: &Vector<T>) {
        let lp = self.lp;
        let n = lp.num_vars();
        let mut is_basic = vec![false; n];
        for &j in &self.support {
            is_basic[j] = true;
        }

        // Primal direction: nonbasic variables head for their favorable bound.
        let mut dir = Vector::zeros(n);
        for j in (0..n).filter(|&j| !is_basic[j]) {
            if delta[j].is_positive() {
                dir[j] = lp.lower[j].clone() - self.x[j].clone();
            } else if delta[j].is_negative() {
                dir[j] = lp.upper[j].clone() - self.x[j].clone();
            }
        }
        let dir_basic = inv.mul_vec(&lp.matrix.mul_vec(&dir));
        for (k, &j) in self.support.iter().enumerate() {
            dir[j] = -dir_basic[k].clone();
        }

        // Ratio test over basic variables; ties go to the smallest variable index.
        let mut theta = T::one();
        let mut blocking: Option<usize> = None;
        let mut order: Vec<usize> = (0..self.support.len()).collect();
        order.sort_by_key(|&k| self.support[k]);
        for k in order {
            let j = self.support[k];
            let ratio = if dir[j].is_negative() {
                (lp.lower[j].clone() - self.x[j].clone()) / dir[j].clone()
            } else if dir[j].is_positive() {
                (lp.upper[j].clone() - self.x[j].clone()) / dir[j].clone()
            } else {
                continue;
            };
            if ratio < theta {
                theta = ratio;
                blocking = Some(k);
            }
        }
        for j in 0..n {
            if !dir[j].is_zero() {
                self.x[j] = self.x[j].clone() + theta.clone() * dir[j].clone();
            }
        }
        let Some(k_out) = blocking else {
            return;
        };
        let leaving = self.support[k_out];
        // The blocking variable now sits at a bound. +1: it reached its lower bound.
        let toward_lower = dir[leaving].is_negative();
        if toward_lower {
            self.x[leaving] = lp.lower[leaving].clone();
        } else {
            self.x[leaving] = lp.upper[leaving].clone();
        }

        // Dual step along Δ(σ) = Δ + σ·s·ρ, ρ = row of B_B⁻¹B for the leaving index.
        let inv_row = inv.row(k_out);
        let mut best: Option<(T, usize)> = None;
        for j in (0..n).filter(|&j| !is_basic[j]) {
            let rho = (0..lp.num_rows()).fold(T::zero(), |acc, i| {
                acc + inv_row[i].clone() * lp.matrix[(i, j)].clone()
            });
            if rho.is_zero() {
                continue;
            }
            let slope = if toward_lower { rho.clone() } else { -rho.clone() };
            let sigma = if delta[j].is_zero() {
                // Δ_j leaves zero toward the sign of `slope`; that is a breakpoint
                // unless x_j already sits on the bound the new sign favors.
                let settled = if slope.is_positive() { self.x[j] == lp.lower[j] } else { self.x[j] == lp.upper[j] };
                if settled {
                    continue;
                }
                T::zero()
            } else if delta[j].is_positive() != slope.is_positive() {
                delta[j].abs() / rho.abs()
            } else {
                continue;
            };
            // Scanning j upward keeps the smallest index on ties.
            if best.as_ref().is_none_or(|(s, _)| sigma < *s) {
                best = Some((sigma, j));
            }
        }
        let (_, entering) = best.expect("a blocked primal step always admits an entering index");
        self.support[k_out] = entering;
    }
}

/// Maximizes `lp` from `init` when given, otherwise from a phase-1 plan.
pub fn solve_bounded_lp<T: Scalar>(lp: &BoundedLp<T>, init: Option<&SupportPlan<T>>) -> Result<LpOutcome<T>> {
    let start = match init {
        Some(plan) => {
            validate_plan(lp, plan)?;
            support_inverse(lp, &plan.support)?;
            plan.clone()
        }
        None => match find_initial_feasible(lp)? {
            Some(plan) => plan,
            None => return Ok(LpOutcome::infeasible()),
        },
    };
    let mut engine = Engine { lp, x: start.x, support: start.support, trace: Vec::new() };
    engine.run()?;
    let objective = lp.objective(&engine.x);
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        x: Some(engine.x.clone()),
        objective: Some(objective),
        support: Some(SupportPlan { x: engine.x, support: engine.support }),
        trace: engine.trace,
    })
}

/// Phase 1: starts from the box midpoint and drives artificial residual
/// variables to zero with the same engine. `None` means infeasible.
pub fn find_initial_feasible<T: Scalar>(lp: &BoundedLp<T>) -> Result<Option<SupportPlan<T>>> {
    let (m, n) = (lp.num_rows(), lp.num_vars());
    let start = midpoint(&lp.lower, &lp.upper);
    let residual = lp.rhs.sub(&lp.matrix.mul_vec(&start));

    // Columns: original | signed identity for the artificials.
    let mut signs = Matrix::zeros(m, m);
    for i in 0..m {
        signs[(i, i)] = if residual[i].is_negative() { -T::one() } else { T::one() };
    }
    let matrix = lp.matrix.hstack(&signs);
    let abs_res: Vec<T> = residual.iter().map(Signed::abs).collect();
    let cost = Vector::zeros(n).concat(&vec![-T::one(); m]);
    let lower = lp.lower.concat(&vec![T::zero(); m]);
    let upper = lp.upper.concat(&abs_res);
    let aux = BoundedLp { matrix, rhs: lp.rhs.clone(), cost, lower, upper };

    let mut engine = Engine { lp: &aux, x: start.concat(&abs_res), support: (n..n + m).collect(), trace: Vec::new() };
    engine.run()?;
    if !aux.objective(&engine.x).is_zero() {
        return Ok(None);
    }

    // Pivot artificials out of the support; x is unchanged since they are zero.
    let mut support = engine.support;
    for k in 0..m {
        if support[k] < n {
            continue;
        }
        let inv = support_inverse(&aux, &support)?;
        let row = inv.row(k);
        let entering = (0..n)
            .filter(|j| !support.contains(j))
            .find(|&j| {
                !(0..m).fold(T::zero(), |acc, i| acc + row[i].clone() * aux.matrix[(i, j)].clone()).is_zero()
            })
            .ok_or(Error::RankDeficient)?;
        support[k] = entering;
    }
    Ok(Some(SupportPlan { x: engine.x.head(n), support }))
}
