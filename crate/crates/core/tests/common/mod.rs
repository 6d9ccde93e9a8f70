//! Random instance generators and property checkers shared by the property
//! tests and the acceptance suite. Each checker returns a one-line summary on
//! success and a description of the first counterexample on failure.

#![allow(dead_code)]

use std::sync::Arc;

use cascade_core::lp::IterationRecord;
use cascade_core::{
    enumerate_vertices, run_batch_with, solve_bounded_lp, solve_molp, start_session, suboptimality_estimate, BatchConfig,
    BoundedLp, DmSlacks, EfficiencyOracle, Error, Level, LpStatus, Matrix, MlProblem, Phase, Polytope,
    Rational, SessionConfig, SortingChoice, SupportPlan, Vector, Vertex,
};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn r(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Bounded LPs against brute-force vertex enumeration.

/// `max cᵀx` s.t. `Ax ≤ b`, `l ≤ x ≤ u`, integer data.
#[derive(Clone, Debug)]
pub struct LpInstance {
    pub a: Vec<Vec<i64>>,
    pub b: Vec<i64>,
    pub c: Vec<i64>,
    pub l: Vec<i64>,
    pub u: Vec<i64>,
}

/// At most 6 variables and 8 rows, entries in `[−9, 9]`, feasible because `b`
/// is built from a point of the box.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpInstance {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=8);
    let mut l = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-9..=9);
        l.push(lo);
        u.push(rng.gen_range(lo..=9));
    }
    let xstar: Vec<i64> = (0..n).map(|j| rng.gen_range(l[j]..=u[j])).collect();
    let a: Vec<Vec<i64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-9..=9)).collect()).collect();
    let b = a.iter().map(|row| row.iter().zip(&xstar).map(|(p, q)| p * q).sum::<i64>() + rng.gen_range(0..=9)).collect();
    let c = (0..n).map(|_| rng.gen_range(-9..=9)).collect();
    LpInstance { a, b, c, l, u }
}

/// Solves `M y = r` with fraction-free elimination; `(numerators, det)` with
/// `det > 0`, or `None` when `M` is singular.
pub fn bareiss(mut mat: Vec<Vec<i128>>, rhs: Vec<i128>) -> Option<(Vec<i128>, i128)> {
    let n = mat.len();
    for (row, v) in mat.iter_mut().zip(rhs) {
        row.push(v);
    }
    let mut prev = 1i128;
    for k in 0..n {
        let pivot = (k..n).find(|&i| mat[i][k] != 0)?;
        mat.swap(k, pivot);
        for i in k + 1..n {
            for j in k + 1..=n {
                mat[i][j] = (mat[i][j] * mat[k][k] - mat[i][k] * mat[k][j]) / prev;
            }
            mat[i][k] = 0;
        }
        prev = mat[k][k];
    }
    let det = mat[n - 1][n - 1];
    let mut x = vec![0i128; n];
    for i in (0..n).rev() {
        let mut acc = mat[i][n] * det;
        for j in i + 1..n {
            acc -= mat[i][j] * x[j];
        }
        x[i] = acc / mat[i][i];
    }
    if det < 0 {
        Some((x.into_iter().map(|v| -v).collect(), -det))
    } else {
        Some((x, det))
    }
}

pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Maximum of `cᵀx` over the vertices of `{Ax ≤ b, l ≤ x ≤ u}`.
pub fn brute_force_max(inst: &LpInstance) -> Option<Rational> {
    let n = inst.c.len();
    let mut g: Vec<Vec<i128>> = inst.a.iter().map(|row| row.iter().map(|&v| v as i128).collect()).collect();
    let mut h: Vec<i128> = inst.b.iter().map(|&v| v as i128).collect();
    for j in 0..n {
        let mut e = vec![0i128; n];
        e[j] = 1;
        g.push(e.clone());
        h.push(inst.u[j] as i128);
        e[j] = -1;
        g.push(e);
        h.push(-inst.l[j] as i128);
    }
    let mut best: Option<Rational> = None;
    for rows in k_subsets(g.len(), n) {
        let mat = rows.iter().map(|&i| g[i].clone()).collect();
        let rhs = rows.iter().map(|&i| h[i]).collect();
        let Some((num, den)) = bareiss(mat, rhs) else { continue };
        if !g.iter().zip(&h).all(|(row, &hi)| row.iter().zip(&num).map(|(a, x)| a * x).sum::<i128>() <= hi * den) {
            continue;
        }
        let val: i128 = inst.c.iter().zip(&num).map(|(&c, x)| c as i128 * x).sum();
        let val = Rational::new(BigInt::from(val), BigInt::from(den));
        if best.as_ref().is_none_or(|b| val > *b) {
            best = Some(val);
        }
    }
    best
}

/// Slack form `[A I](x, s) = b` with exact slack ranges over the box.
pub fn lp_slack_form(inst: &LpInstance) -> BoundedLp<Rational> {
    let m = inst.a.len();
    let rows: Vec<Vec<Rational>> = inst
        .a
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|&v| r(v)).chain((0..m).map(|k| r((k == i) as i64))).collect())
        .collect();
    let smax = inst.a.iter().zip(&inst.b).map(|(row, &bi)| {
        let min_ax: i64 = row.iter().enumerate().map(|(j, &a)| if a >= 0 { a * inst.l[j] } else { a * inst.u[j] }).sum();
        r(bi - min_ax)
    });
    let cost: Vector<Rational> = inst.c.iter().map(|&v| r(v)).chain((0..m).map(|_| r(0))).collect();
    let lower: Vector<Rational> = inst.l.iter().map(|&v| r(v)).chain((0..m).map(|_| r(0))).collect();
    let upper: Vector<Rational> = inst.u.iter().map(|&v| r(v)).chain(smax).collect();
    BoundedLp::new(Matrix::from_rows(rows).unwrap(), inst.b.iter().map(|&v| r(v)).collect(), cost, lower, upper).unwrap()
}

/// `β = 0` at the last plan; `β > 0` and `c x* − c x ≤ β` at every earlier one.
pub fn check_certificates(lp: &BoundedLp<Rational>, optimum: &Rational, trace: &[IterationRecord<Rational>]) -> Result<usize, String> {
    let (last, earlier) = trace.split_last().ok_or("empty trace")?;
    let plan = |rec: &IterationRecord<Rational>| SupportPlan { x: rec.x.clone(), support: rec.support.clone() };
    let est = suboptimality_estimate(lp, &plan(last)).map_err(|e| e.to_string())?;
    if !est.beta.is_zero() {
        return Err(format!("returned plan has beta {}", est.beta));
    }
    for rec in earlier {
        let est = suboptimality_estimate(lp, &plan(rec)).map_err(|e| e.to_string())?;
        if est.beta != rec.beta {
            return Err(format!("recorded beta {} differs from recomputed {}", rec.beta, est.beta));
        }
        if !est.beta.is_positive() {
            return Err(format!("intermediate plan {} has beta {}", rec.x, est.beta));
        }
        let gap = optimum.clone() - lp.objective(&rec.x);
        if gap > est.beta {
            return Err(format!("gap {gap} exceeds beta {} at {}", est.beta, rec.x));
        }
    }
    Ok(earlier.len())
}

/// Solver optimum equals the brute-force maximum on `cases` random LPs.
pub fn lp_oracle_suite(cases: usize, seed: u64) -> Result<String, String> {
    let mut rng = rng(seed);
    let mut steps = 0;
    for case in 0..cases {
        let inst = random_lp(&mut rng);
        let expected = brute_force_max(&inst).ok_or_else(|| format!("case {case}: generator produced an empty LP"))?;
        let lp = lp_slack_form(&inst);
        let out = solve_bounded_lp(&lp, None).map_err(|e| format!("case {case}: {e}"))?;
        if out.status != LpStatus::Optimal {
            return Err(format!("case {case}: status {:?} for {inst:?}", out.status));
        }
        let x = out.x.as_ref().unwrap();
        if !lp.is_feasible(x) {
            return Err(format!("case {case}: infeasible answer {x}"));
        }
        let got = out.objective.as_ref().unwrap();
        if *got != expected {
            return Err(format!("case {case}: objective {got}, brute force {expected}, {inst:?}"));
        }
        steps += out.iterations();
    }
    Ok(format!("{cases} LPs, {steps} adaptive steps"))
}

/// β certificates along solver traces, including traces of seeded solves
/// that start from the all-slack support.
pub fn beta_certificate_suite(cases: usize, seed: u64) -> Result<String, String> {
    let mut rng = rng(seed);
    let mut plans = 0;
    for case in 0..cases {
        let inst = random_lp(&mut rng);
        let expected = brute_force_max(&inst).unwrap();
        let lp = lp_slack_form(&inst);
        let out = solve_bounded_lp(&lp, None).map_err(|e| format!("case {case}: {e}"))?;
        plans += check_certificates(&lp, &expected, &out.trace).map_err(|e| format!("case {case}: {e}"))?;

        let n = inst.c.len();
        let m = inst.a.len();
        let slack = inst.a.iter().zip(&inst.b).map(|(row, &bi)| r(bi - row.iter().zip(&inst.l).map(|(a, l)| a * l).sum::<i64>()));
        let start: Vector<Rational> = inst.l.iter().map(|&v| r(v)).chain(slack).collect();
        if lp.is_feasible(&start) {
            let seeded = solve_bounded_lp(&lp, Some(&SupportPlan { x: start, support: (n..n + m).collect() }))
                .map_err(|e| format!("case {case}: {e}"))?;
            if seeded.objective.as_ref() != Some(&expected) {
                return Err(format!("case {case}: seeded solve reached {:?}", seeded.objective));
            }
            plans += check_certificates(&lp, &expected, &seeded.trace).map_err(|e| format!("case {case} (seeded): {e}"))?;
        }
    }
    Ok(format!("{cases} LPs, {plans} intermediate plans certified"))
}

// ---------------------------------------------------------------------------
// Random multilevel problems.

/// `P` levels over `n ∈ [P, P+1]` variables. Constraints hold a random point
/// with positive coordinates, and a budget row keeps the set bounded.
pub fn random_ml_problem(rng: &mut ChaCha8Rng, levels: usize) -> MlProblem<Rational> {
    let n = rng.gen_range(levels..=levels + 1);
    let mut owned = vec![1usize; levels];
    for _ in levels..n {
        owned[rng.gen_range(0..levels)] += 1;
    }
    let xstar: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    let m = rng.gen_range(1..=3);
    let mut rows: Vec<Vec<i64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-4..=5)).collect()).collect();
    let mut b: Vec<i64> = rows.iter().map(|row| row.iter().zip(&xstar).map(|(a, x)| a * x).sum::<i64>() + rng.gen_range(1..=5)).collect();
    rows.push(vec![1; n]);
    b.push(xstar.iter().sum::<i64>() + rng.gen_range(1..=6));
    let levels = owned
        .iter()
        .map(|&nv| {
            let k = rng.gen_range(1..=3);
            let obj = (0..k).map(|_| (0..n).map(|_| r(rng.gen_range(-2..=5))).collect()).collect();
            Level { num_vars: nv, objectives: Matrix::from_rows(obj).unwrap() }
        })
        .collect();
    let a = Matrix::from_rows(rows.into_iter().map(|row| row.into_iter().map(r).collect()).collect()).unwrap();
    MlProblem::new(levels, a, b.into_iter().map(r).collect()).unwrap()
}

/// Problems likely to meet the driver's assumptions: a down-closed polytope
/// (nonnegative rows plus a budget row) and levels that value every
/// coordinate besides their own random criteria, so the common efficient set
/// contains the whole upper frontier.
pub fn random_hierarchical_problem(rng: &mut ChaCha8Rng, levels: usize) -> MlProblem<Rational> {
    let n = rng.gen_range(levels..=levels + 1);
    let mut owned = vec![1usize; levels];
    for _ in levels..n {
        owned[rng.gen_range(0..levels)] += 1;
    }
    let xstar: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    let m = rng.gen_range(2..=4);
    let mut rows: Vec<Vec<i64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..=5)).collect()).collect();
    rows.push(vec![1; n]);
    let b: Vec<i64> = rows.iter().map(|row| row.iter().zip(&xstar).map(|(a, x)| a * x).sum::<i64>() + rng.gen_range(1..=5)).collect();
    let levels = owned
        .iter()
        .map(|&nv| {
            let k = rng.gen_range(1..=3);
            let mut obj: Vec<Vec<Rational>> = (0..k).map(|_| (0..n).map(|_| r(rng.gen_range(-1..=4))).collect()).collect();
            obj.extend((0..n).map(|j| (0..n).map(|i| r((i == j) as i64)).collect()));
            Level { num_vars: nv, objectives: Matrix::from_rows(obj).unwrap() }
        })
        .collect();
    let a = Matrix::from_rows(rows.into_iter().map(|row| row.into_iter().map(r).collect()).collect()).unwrap();
    MlProblem::new(levels, a, b.into_iter().map(r).collect()).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vector<Rational> {
    (0..k).map(|_| frac(rng.gen_range(1..=12), rng.gen_range(1..=4))).collect()
}

/// `max wᵀx` over `{Ax ≤ b, x ≥ 0}` with bounds read off the vertex list.
fn weighted_optimum(poly: &Polytope<Rational>, vertices: &[Vertex<Rational>], w: &Vector<Rational>) -> Result<Vector<Rational>, Error> {
    let (m, n) = (poly.num_constraints(), poly.dim());
    let coord_max: Vec<Rational> = (0..n).map(|j| vertices.iter().map(|v| v.coords[j].clone()).max().unwrap()).collect();
    let slack_max: Vec<Rational> = (0..m)
        .map(|i| vertices.iter().map(|v| poly.b()[i].clone() - v.coords.dot(poly.a().row(i))).max().unwrap())
        .collect();
    let matrix = poly.a().hstack(&Matrix::identity(m));
    let cost = w.concat(&vec![r(0); m]);
    let upper: Vector<Rational> = coord_max.into_iter().chain(slack_max).collect();
    let lp = BoundedLp::new(matrix, poly.b().clone(), cost, Vector::zeros(n + m), upper)?;
    let out = solve_bounded_lp(&lp, None)?;
    Ok(out.x.expect("nonempty polytope").head(n))
}

/// Weighted optima with positive weights, and `solve_molp` outputs over
/// random sub-boxes, all pass the efficiency test.
pub fn scalarization_suite(problems: usize, weights: usize, seed: u64) -> Result<String, String> {
    let mut rng = rng(seed);
    let mut checked = 0;
    for case in 0..problems {
        let problem = random_ml_problem(&mut rng, 2);
        let poly = problem.polytope();
        let vertices = enumerate_vertices(&poly).map_err(|e| format!("problem {case}: {e}"))?;
        let oracle = EfficiencyOracle::new(&poly, &vertices);
        for p in 0..problem.num_levels() {
            let level = problem.level_objectives(p);
            for _ in 0..weights {
                let lambda = random_weights(&mut rng, level.count());
                let w = level.objectives.tr_mul_vec(&lambda);
                let x = weighted_optimum(&poly, &vertices, &w).map_err(|e| format!("problem {case}: {e}"))?;
                if !oracle.test(&x, &level).map_err(|e| e.to_string())?.efficient {
                    return Err(format!("problem {case} level {}: weighted optimum {x} for {lambda} is dominated", p + 1));
                }
                checked += 1;
            }
            // Box spanned by two vertices: nonempty, and a strict sub-region.
            let v1 = vertices.choose(&mut rng).unwrap().coords.clone();
            let v2 = vertices.choose(&mut rng).unwrap().coords.clone();
            let lower: Vector<Rational> = v1.iter().zip(v2.iter()).map(|(a, b)| a.min(b).clone()).collect();
            let upper: Vector<Rational> = v1.iter().zip(v2.iter()).map(|(a, b)| a.max(b).clone()).collect();
            let boxed = Polytope::boxed(problem.a(), problem.b(), &lower, &upper).unwrap();
            let mid: Vector<Rational> = v1.iter().zip(v2.iter()).map(|(a, b)| (a.clone() + b.clone()) / r(2)).collect();
            for start in [None, Some(&mid)] {
                let sol = solve_molp(&level, problem.a(), problem.b(), &lower, &upper, start, &r(1_000_000))
                    .map_err(|e| format!("problem {case} level {}: {e}", p + 1))?;
                let verdict = cascade_core::efficiency_test(&sol.x, &level, &boxed).map_err(|e| e.to_string())?;
                if !verdict.efficient {
                    return Err(format!("problem {case} level {}: solve_molp returned dominated {}", p + 1, sol.x));
                }
                if sol.lambda.0.iter().any(|l| !l.is_positive()) {
                    return Err(format!("problem {case}: non-positive weight {}", sol.lambda.0));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} efficient outputs over {problems} problems"))
}

// ---------------------------------------------------------------------------
// Driver runs.

#[derive(Debug)]
pub struct DriverOutcome {
    pub problem: Arc<MlProblem<Rational>>,
    pub sorting_index: usize,
    pub slacks: Vec<DmSlacks<Rational>>,
    pub boxes: Vec<(Vector<Rational>, Vector<Rational>)>,
    pub compromises: Vec<Vector<Rational>>,
}

/// Picks a slack in `(0, room]` for every owned variable, or `None` when some
/// variable has no room on that side.
fn admissible(rng: &mut ChaCha8Rng, rooms: impl Iterator<Item = Rational>) -> Option<Vector<Rational>> {
    rooms.map(|room| room.is_positive().then(|| room * frac(rng.gen_range(1..=4), 4))).collect::<Option<Vec<_>>>().map(Vector::from)
}

fn nested(l1: &[Rational], u1: &[Rational], l: &[Rational], u: &[Rational]) -> bool {
    (0..l1.len()).all(|j| l1[j] <= l[j] && l[j] <= u[j] && u[j] <= u1[j])
}

/// One full session on a random problem. `Ok(None)` means the instance does
/// not meet the method's assumptions (rejected, not a failure).
pub fn drive_random_problem(rng: &mut ChaCha8Rng) -> Result<Option<DriverOutcome>, String> {
    let levels = rng.gen_range(2..=3);
    let problem = Arc::new(random_hierarchical_problem(rng, levels));
    let geometry = match problem.geometry() {
        Ok(g) => Arc::new(g),
        Err(Error::EmptyCompromiseSet) => return Ok(None),
        Err(e) => return Err(format!("geometry: {e}")),
    };
    let faces = geometry.compromise.maximal_faces.len();
    let mut session = None;
    for i in 0..faces {
        match start_session(problem.clone(), geometry.clone(), SortingChoice::Index(i), SessionConfig::default()) {
            Ok(s) => {
                session = Some((i, s));
                break;
            }
            Err(Error::AssumptionViolated { .. }) => continue,
            Err(e) => return Err(format!("sorting set {}: {e}", i + 1)),
        }
    }
    let Some((sorting_index, mut session)) = session else { return Ok(None) };
    let (l1, u1) = session.initial_bounds().map(|(l, u)| (l.clone(), u.clone())).unwrap();
    let poly = problem.polytope();
    let mut boxes = vec![(l1.clone(), u1.clone())];
    let mut slacks = Vec::new();
    for p in 0..levels {
        let (l, u) = session.current_bounds().map(|(l, u)| (l.clone(), u.clone())).unwrap();
        let x = session.solve_current_level(None).map_err(|e| format!("level {} solve: {e}", p + 1))?.clone();
        if !poly.contains(&x) || !x.le(&u) || !l.le(&x) {
            return Err(format!("level {} compromise {x} outside S or box [{l}, {u}]", p + 1));
        }
        if p + 1 == levels {
            break;
        }
        let owned = problem.ownership(p);
        let lower = admissible(rng, owned.clone().map(|j| x[j].clone() - l1[j].clone()));
        let upper = admissible(rng, owned.map(|j| u1[j].clone() - x[j].clone()));
        let (Some(lower), Some(upper)) = (lower, upper) else { return Ok(None) };
        let s = DmSlacks { lower, upper };
        session.apply_dm_slacks(&s).map_err(|e| format!("level {} slacks: {e}", p + 1))?;
        let (l, u) = session.current_bounds().map(|(l, u)| (l.clone(), u.clone())).unwrap();
        if !nested(&l1, &u1, &l, &u) {
            return Err(format!("after level {} slacks: [{l}, {u}] not nested in [{l1}, {u1}]", p + 1));
        }
        boxes.push((l, u));
        slacks.push(s);
    }
    if session.phase() != Phase::Done {
        return Err(format!("session ended in {}", session.phase()));
    }
    let fin = session.final_compromise().unwrap();
    let (l, u) = boxes.last().unwrap().clone();
    let region = Polytope::boxed(problem.a(), problem.b(), &l, &u).unwrap();
    let last = problem.level_objectives(levels - 1);
    let verdict = cascade_core::efficiency_test(&fin.x, &last, &region).map_err(|e| e.to_string())?;
    if !verdict.efficient {
        return Err(format!("final compromise {} is dominated for level {levels}", fin.x));
    }

    let config = BatchConfig {
        sorting_choice: SortingChoice::Index(sorting_index),
        initial_points: Vec::new(),
        slacks: slacks.clone(),
        session: SessionConfig::default(),
    };
    let a = run_batch_with(problem.clone(), geometry.clone(), &config).map_err(|e| format!("replay: {e}"))?;
    let b = run_batch_with(problem.clone(), geometry, &config).map_err(|e| format!("replay: {e}"))?;
    let (ja, jb) = (serde_json::to_vec(&a.result).unwrap(), serde_json::to_vec(&b.result).unwrap());
    if ja != jb || a.result.trace != session.trace() {
        return Err("replayed traces differ".into());
    }
    Ok(Some(DriverOutcome { problem, sorting_index, slacks, boxes, compromises: session.compromises().to_vec() }))
}

/// Full sessions on `problems` accepted random instances.
pub fn driver_suite(problems: usize, seed: u64) -> Result<String, String> {
    let mut rng = rng(seed);
    let (mut accepted, mut tried, mut three_level) = (0, 0, 0);
    while accepted < problems {
        tried += 1;
        if tried > 200 * problems {
            return Err(format!("only {accepted} of {tried} random problems met the assumptions"));
        }
        match drive_random_problem(&mut rng).map_err(|e| format!("attempt {tried}: {e}"))? {
            Some(out) => {
                accepted += 1;
                three_level += (out.problem.num_levels() == 3) as usize;
            }
            None => continue,
        }
    }
    Ok(format!("{accepted} sessions ({three_level} with 3 levels) from {tried} random problems"))
}

