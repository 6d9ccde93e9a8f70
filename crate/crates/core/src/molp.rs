//! Multiobjective layer over the support method: slack form, weight
//! elicitation through the auxiliary problem, and the weighted solve.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{find_initial_feasible, solve_bounded_lp, suboptimality_estimate, BoundedLp, LpStatus, SupportPlan};
use crate::numeric::{scalar_serde, Matrix, Scalar, Vector};

/// Objective rows `c_p` of one level (`k_p × n`, all variables).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LevelObjectives<T: Scalar> {
    pub level: usize,
    pub objectives: Matrix<T>,
}

impl<T: Scalar> LevelObjectives<T> {
    pub fn new(level: usize, objectives: Matrix<T>) -> Result<Self> {
        if objectives.nrows() == 0 {
            return Err(Error::DimensionMismatch { context: format!("level {} objectives", level + 1), expected: 1, found: 0 });
        }
        Ok(Self { level, objectives })
    }

    pub fn count(&self) -> usize {
        self.objectives.nrows()
    }

    pub fn values(&self, x: &[T]) -> Vector<T> {
        self.objectives.mul_vec(x)
    }
}

/// Scalarization weights `λ = r⁰ + 1`, so every entry is at least one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct WeightVector<T: Scalar>(pub Vector<T>);

/// Optimal point `(y, r, v, w)` of the weight-elicitation problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AuxSolution<T: Scalar> {
    pub y: Vector<T>,
    pub r: Vector<T>,
    pub v: Vector<T>,
    pub w: Vector<T>,
    #[serde(with = "scalar_serde")]
    pub objective: T,
}

/// `Bx = b` with `B = (A | I)`, structural box intersected with `x ≥ 0`,
/// slack box `[0, M]`, and the objective rows padded with zero columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackForm<T: Scalar> {
    structural: usize,
    lp: BoundedLp<T>,
    objectives: Matrix<T>,
}

pub fn slackify<T: Scalar>(
    a: &Matrix<T>,
    b: &Vector<T>,
    objectives: &Matrix<T>,
    lower: &Vector<T>,
    upper: &Vector<T>,
    big_m: &T,
) -> Result<SlackForm<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    let dims = [
        ("right-hand side", m, b.len()),
        ("objective columns", n, objectives.ncols()),
        ("lower bounds", n, lower.len()),
        ("upper bounds", n, upper.len()),
    ];
    for (context, expected, found) in dims {
        if expected != found {
            return Err(Error::DimensionMismatch { context: context.into(), expected, found });
        }
    }
    if !big_m.is_positive() {
        return Err(Error::InvalidParameter(format!("bigM must be positive, got {big_m}")));
    }
    let matrix = a.hstack(&Matrix::identity(m));
    let lower: Vector<T> = lower.iter().map(|l| l.clone().max(T::zero())).chain(std::iter::repeat_n(T::zero(), m)).collect();
    let upper = upper.concat(&vec![big_m.clone(); m]);
    let lp = BoundedLp::new(matrix, b.clone(), Vector::zeros(n + m), lower, upper)?;
    let objectives = objectives.hstack(&Matrix::zeros(objectives.nrows(), m));
    Ok(SlackForm { structural: n, lp, objectives })
}

impl<T: Scalar> SlackForm<T> {
    pub fn structural(&self) -> usize {
        self.structural
    }

    pub fn lp(&self) -> &BoundedLp<T> {
        &self.lp
    }

    pub fn objectives(&self) -> &Matrix<T> {
        &self.objectives
    }

    /// Restricts to the face where the given rows of `Ã = (A; −I)` are tight:
    /// constraint rows fix their slack at zero, sign rows fix `x_j = 0`.
    pub fn with_tight_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = self.lp.num_rows();
        let mut lower = self.lp.lower().clone();
        let mut upper = self.lp.upper().clone();
        for &q in rows {
            let j = if q < m { self.structural + q } else { q - m };
            if lower[j].is_positive() {
                return Err(Error::InfeasibleRegion(format!("row {} cannot be tight inside the box", q + 1)));
            }
            lower[j] = T::zero();
            upper[j] = T::zero();
        }
        let lp = BoundedLp::new(self.lp.matrix().clone(), self.lp.rhs().clone(), Vector::zeros(self.lp.num_vars()), lower, upper)?;
        Ok(Self { lp, ..self.clone() })
    }

    /// Appends slack values `b − Ax` to a structural point.
    pub fn extend(&self, x: &[T]) -> Vector<T> {
        let n = self.structural;
        let a_part = self.lp.matrix().select_columns(&(0..n).collect::<Vec<_>>());
        let slack = self.lp.rhs().sub(&a_part.mul_vec(x));
        Vector::from(x.to_vec()).concat(&slack)
    }

    /// Support made of the slack columns (always nonsingular).
    pub fn slack_support(&self) -> Vec<usize> {
        (self.structural..self.lp.num_vars()).collect()
    }
}

/// Record of one multiobjective solve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MolpTrace<T: Scalar> {
    pub start: Vector<T>,
    pub lambda: WeightVector<T>,
    #[serde(with = "scalar_serde")]
    pub aux_objective: T,
    pub aux_box_retries: usize,
    pub beta_history: Vec<String>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolpSolution<T: Scalar> {
    pub x: Vector<T>,
    pub lambda: WeightVector<T>,
    pub aux: AuxSolution<T>,
    pub trace: MolpTrace<T>,
}

const MAX_AUX_RETRIES: usize = 3;

/// Weight elicitation at a feasible `x0` (full slack-form vector).
///
/// Minimizes `yᵀb − rᵀc x0 − vᵀl + wᵀu` subject to
/// `yᵀB − rᵀc − vᵀ + wᵀ = sᵀc`, `r, v, w ≥ 0`, `y` free, then returns
/// `λ = r + s`. This is the dual of `max sᵀcx` over the points dominating
/// `x0`, so `(y, v, w)` is dual feasible for `max λᵀcx` and certifies `x0`
/// whenever `x0` is efficient. Free `y` is boxed in `[−M, M]`; the box is
/// doubled (up to three times) while any artificial bound carries a nonzero
/// reduced cost.
pub fn auxiliary_weights<T: Scalar>(form: &SlackForm<T>, x0: &Vector<T>, big_m: &T) -> Result<(WeightVector<T>, AuxSolution<T>, usize)> {
    let lp = &form.lp;
    if !lp.is_feasible(x0) {
        return Err(Error::InfeasibleInitialPoint(format!("{x0} violates the slack form")));
    }
    let (m, nv, k) = (lp.num_rows(), lp.num_vars(), form.objectives.nrows());
    let c = &form.objectives;
    let ones = vec![T::one(); k];
    let target = c.tr_mul_vec(&ones);
    let cx0 = c.mul_vec(x0);

    // Columns: y (m) | r (k) | v (nv) | w (nv); one row per slack-form variable.
    let matrix = lp
        .matrix()
        .transpose()
        .hstack(&c.transpose().neg())
        .hstack(&Matrix::identity(nv).neg())
        .hstack(&Matrix::identity(nv));
    // Maximize the negated objective.
    let cost = lp.rhs().neg_vec().concat(&cx0).concat(lp.lower()).concat(&lp.upper().neg_vec());

    let widest = target.iter().map(Signed::abs).max().unwrap_or_else(T::zero);
    let mut bound = big_m.clone().max(widest);
    for attempt in 0..=MAX_AUX_RETRIES {
        let lower = Vector::filled(m, -bound.clone()).concat(&vec![T::zero(); k + 2 * nv]);
        let upper = Vector::filled(m + k + 2 * nv, bound.clone());
        let aux = BoundedLp::new(matrix.clone(), target.clone(), cost.clone(), lower, upper)?;

        let mut start = Vector::zeros(m + k + 2 * nv);
        let mut support = Vec::with_capacity(nv);
        for j in 0..nv {
            if target[j].is_negative() {
                start[m + k + j] = -target[j].clone();
                support.push(m + k + j);
            } else {
                start[m + k + nv + j] = target[j].clone();
                support.push(m + k + nv + j);
            }
        }
        let plan = SupportPlan { x: start, support };
        let out = solve_bounded_lp(&aux, Some(&plan))?;
        if out.status != LpStatus::Optimal {
            return Err(Error::AuxiliaryInfeasible);
        }
        let z = out.x.expect("optimal outcome carries a point");
        let est = suboptimality_estimate(&aux, out.support.as_ref().expect("optimal outcome carries a support"))?;
        let binding = (0..m + k + 2 * nv).find(|&j| {
            let at_artificial = z[j] == bound || (j < m && z[j] == -bound.clone());
            at_artificial && !est.reduced_costs[j].is_zero()
        });
        match binding {
            None => {
                let sol = AuxSolution {
                    y: z[..m].iter().cloned().collect(),
                    r: z[m..m + k].iter().cloned().collect(),
                    v: z[m + k..m + k + nv].iter().cloned().collect(),
                    w: z[m + k + nv..].iter().cloned().collect(),
                    objective: -out.objective.expect("optimal outcome carries an objective"),
                };
                let lambda = sol.r.iter().map(|r| r.clone() + T::one()).collect();
                return Ok((WeightVector(lambda), sol, attempt));
            }
            Some(j) if attempt == MAX_AUX_RETRIES => {
                return Err(Error::AuxiliaryUnboundedAfterRetries(format!("variable {j} with box {bound}")));
            }
            Some(_) => bound = bound.clone() + bound,
        }
    }
    unreachable!("retry loop returns on its last attempt")
}

trait NegVec<T> {
    fn neg_vec(&self) -> Vector<T>;
}

impl<T: Scalar> NegVec<T> for Vector<T> {
    fn neg_vec(&self) -> Vector<T> {
        self.iter().map(|v| -v.clone()).collect()
    }
}

/// Steps 1–5 on an already built slack form. `x0` is structural.
pub fn solve_molp_on<T: Scalar>(form: &SlackForm<T>, x0: Option<&Vector<T>>, big_m: &T) -> Result<MolpSolution<T>> {
    let start = match x0 {
        Some(x) => {
            if x.len() != form.structural {
                return Err(Error::DimensionMismatch { context: "initial point".into(), expected: form.structural, found: x.len() });
            }
            let full = form.extend(x);
            if !form.lp.is_feasible(&full) {
                return Err(Error::InfeasibleInitialPoint(format!("{x} is outside the bounded region")));
            }
            full
        }
        None => find_initial_feasible(&form.lp)?
            .ok_or_else(|| Error::InfeasibleRegion("no point satisfies the constraints inside the bounds".into()))?
            .x,
    };

    let (lambda, aux, retries) = auxiliary_weights(form, &start, big_m)?;
    let weighted_cost = form.objectives.tr_mul_vec(&lambda.0);
    let weighted = form.lp.with_cost(weighted_cost)?;
    let plan = SupportPlan { x: start.clone(), support: form.slack_support() };
    let out = solve_bounded_lp(&weighted, Some(&plan))?;
    let x = out.x.clone().expect("seeded solve is optimal");
    let trace = MolpTrace {
        start: start.head(form.structural),
        lambda: lambda.clone(),
        aux_objective: aux.objective.clone(),
        aux_box_retries: retries,
        beta_history: out.trace.iter().map(|r| r.beta.to_string()).collect(),
        iterations: out.iterations(),
    };
    Ok(MolpSolution { x: x.head(form.structural), lambda, aux, trace })
}

/// Solves `max c_p x` over `{Ax ≤ b, l ≤ x ≤ u, x ≥ 0}` for one level.
pub fn solve_molp<T: Scalar>(
    level: &LevelObjectives<T>,
    a: &Matrix<T>,
    b: &Vector<T>,
    lower: &Vector<T>,
    upper: &Vector<T>,
    x0: Option<&Vector<T>>,
    big_m: &T,
) -> Result<MolpSolution<T>> {
    let form = slackify(a, b, &level.objectives, lower, upper, big_m)?;
    solve_molp_on(&form, x0, big_m)
}

/// Default slack bound used when none is configured.
pub fn default_big_m<T: Scalar>() -> T {
    crate::numeric::from_int(1_000_000)
}
