//! Extreme points of `S = {x : Ax ≤ b, x ≥ 0}`, per-level efficiency, the
//! faces of `S` lying in every level's efficient set, and the inclusion-maximal
//! ones among them (sorting-set candidates).
//!
//! Rows of `Ã = (A; −I)` are indexed `0..m+n`: the first `m` are the
//! constraints, row `m + j` is `x_j ≥ 0`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{find_initial_feasible, solve_bounded_lp, BoundedLp, LpStatus, SupportPlan};
use crate::molp::LevelObjectives;
use crate::numeric::{affine_dimension, barycenter, solve_linear_system, Matrix, Scalar, Vector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polytope<T: Scalar> {
    a: Matrix<T>,
    b: Vector<T>,
    a_tilde: Matrix<T>,
    b_tilde: Vector<T>,
}

impl<T: Scalar> Polytope<T> {
    pub fn new(a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { context: "right-hand side".into(), expected: a.nrows(), found: b.len() });
        }
        let n = a.ncols();
        let a_tilde = a.vstack(&Matrix::identity(n).neg());
        let b_tilde = b.concat(&vec![T::zero(); n]);
        Ok(Self { a, b, a_tilde, b_tilde })
    }

    /// `{Ax ≤ b, lower ≤ x ≤ upper, x ≥ 0}` as a plain polytope.
    pub fn boxed(a: &Matrix<T>, b: &Vector<T>, lower: &Vector<T>, upper: &Vector<T>) -> Result<Self> {
        let n = a.ncols();
        let rows = a.vstack(&Matrix::identity(n)).vstack(&Matrix::identity(n).neg());
        let rhs = b.concat(upper).concat(&lower.iter().map(|l| -l.clone()).collect::<Vec<_>>());
        Self::new(rows, rhs)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Vector<T> {
        &self.b
    }

    pub fn a_tilde(&self) -> &Matrix<T> {
        &self.a_tilde
    }

    pub fn b_tilde(&self) -> &Vector<T> {
        &self.b_tilde
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.a_tilde.mul_vec(x).le(&self.b_tilde)
    }

    /// All rows of `Ã` holding with equality at `x`.
    pub fn tight_rows(&self, x: &[T]) -> Vec<usize> {
        let lhs = self.a_tilde.mul_vec(x);
        (0..lhs.len()).filter(|&i| lhs[i] == self.b_tilde[i]).collect()
    }

    /// True when some nonzero `d ≥ 0` has `Ad ≤ 0`.
    fn has_recession_direction(&self) -> Result<bool> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        // Variables d (n) in [0,1] and s (m); rows: A d + s = 0, 1ᵀd = 1.
        let mut matrix = self.a.hstack(&Matrix::identity(m));
        let mut normalize = vec![T::one(); n];
        normalize.extend(vec![T::zero(); m]);
        matrix = matrix.vstack(&Matrix::from_row_slices(n + m, &[&normalize]));
        let mut rhs = Vector::zeros(m).into_vec();
        rhs.push(T::one());
        let slack_cap = self.a.rows().map(|row| row.iter().map(Signed::abs).fold(T::zero(), |a, b| a + b));
        let upper: Vector<T> = std::iter::repeat_n(T::one(), n).chain(slack_cap).collect();
        let lp = BoundedLp::new(matrix, rhs.into(), Vector::zeros(n + m), Vector::zeros(n + m), upper)?;
        Ok(find_initial_feasible(&lp)?.is_some())
    }
}

/// Extreme point with its full tight row set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Vertex<T: Scalar> {
    pub coords: Vector<T>,
    pub tight: Vec<usize>,
}

/// Descending lexicographic order on coordinates.
pub fn vertex_order<T: Scalar>(a: &Vertex<T>, b: &Vertex<T>) -> Ordering {
    b.coords.cmp(&a.coords)
}

/// Solves every nonsingular `n`-row subsystem of `Ã x = b̃` and keeps the
/// feasible, distinct solutions, sorted descending.
pub fn enumerate_vertices<T: Scalar>(poly: &Polytope<T>) -> Result<Vec<Vertex<T>>> {
    let n = poly.dim();
    let total = poly.a_tilde.nrows();
    let mut found: BTreeSet<Vector<T>> = BTreeSet::new();
    for rows in (0..total).combinations(n) {
        let sub = poly.a_tilde.select_rows(&rows);
        let rhs: Vec<T> = rows.iter().map(|&i| poly.b_tilde[i].clone()).collect();
        if let Some(x) = solve_linear_system(&sub, &rhs) {
            if poly.contains(&x) {
                found.insert(x);
            }
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    if poly.has_recession_direction()? {
        return Err(Error::UnboundedPolytope);
    }
    Ok(found
        .into_iter()
        .rev()
        .map(|coords| Vertex { tight: poly.tight_rows(&coords), coords })
        .collect())
}

/// Outcome of the domination test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EfficiencyVerdict<T: Scalar> {
    pub efficient: bool,
    /// A feasible point whose objective vector dominates the tested one.
    pub dominating: Option<Vector<T>>,
}

/// Domination tests against a fixed polytope. Variable boxes come from the
/// vertex list, so every bound in the test problem is exact.
#[derive(Clone, Debug)]
pub struct EfficiencyOracle<'a, T: Scalar> {
    poly: &'a Polytope<T>,
    vertices: &'a [Vertex<T>],
    coord_max: Vector<T>,
    slack_max: Vector<T>,
}

impl<'a, T: Scalar> EfficiencyOracle<'a, T> {
    pub fn new(poly: &'a Polytope<T>, vertices: &'a [Vertex<T>]) -> Self {
        assert!(!vertices.is_empty(), "efficiency oracle needs the vertex list");
        let n = poly.dim();
        let coord_max = (0..n).map(|j| vertices.iter().map(|v| v.coords[j].clone()).max().unwrap()).collect();
        let slack_max = (0..poly.num_constraints())
            .map(|i| {
                let row = poly.a.row(i);
                vertices.iter().map(|v| poly.b[i].clone() - v.coords.dot(row)).max().unwrap()
            })
            .collect();
        Self { poly, vertices, coord_max, slack_max }
    }

    /// Decides whether some `y ∈ S` has `c y ≥ c x` with `c y ≠ c x` by
    /// maximizing `1ᵀw` subject to `c y − w = c x`, `y ∈ S`, `w ≥ 0`.
    pub fn test(&self, x: &Vector<T>, level: &LevelObjectives<T>) -> Result<EfficiencyVerdict<T>> {
        let poly = self.poly;
        if !poly.contains(x) {
            return Err(Error::InfeasibleRegion(format!("{x} is not in the feasible set")));
        }
        let c = &level.objectives;
        let (n, m, k) = (poly.dim(), poly.num_constraints(), c.nrows());
        if c.ncols() != n {
            return Err(Error::DimensionMismatch { context: "objective columns".into(), expected: n, found: c.ncols() });
        }
        let cx = c.mul_vec(x);
        let gain_cap: Vec<T> = (0..k)
            .map(|q| {
                let best = self.vertices.iter().map(|v| v.coords.dot(c.row(q))).max().unwrap();
                (best - cx[q].clone()).max(T::zero())
            })
            .collect();

        // Columns: y (n) | s (m) | w (k). Rows: c y − w = c x, then A y + s = b.
        let top = c.hstack(&Matrix::zeros(k, m)).hstack(&Matrix::identity(k).neg());
        let bottom = poly.a.hstack(&Matrix::identity(m)).hstack(&Matrix::zeros(m, k));
        let matrix = top.vstack(&bottom);
        let rhs = cx.concat(&poly.b);
        let cost = Vector::zeros(n + m).concat(&vec![T::one(); k]);
        let lower = Vector::zeros(n + m + k);
        let upper = self.coord_max.concat(&self.slack_max).concat(&gain_cap);
        let lp = BoundedLp::new(matrix, rhs, cost, lower, upper)?;

        let slack = poly.b.sub(&poly.a.mul_vec(x));
        let start = x.concat(&slack).concat(&vec![T::zero(); k]);
        let plan = SupportPlan { x: start, support: (n..n + m + k).collect() };
        let out = solve_bounded_lp(&lp, Some(&plan))?;
        debug_assert_eq!(out.status, LpStatus::Optimal);
        let best = out.objective.expect("seeded solve is optimal");
        if best.is_zero() {
            Ok(EfficiencyVerdict { efficient: true, dominating: None })
        } else {
            let y = out.x.expect("seeded solve is optimal").head(n);
            Ok(EfficiencyVerdict { efficient: false, dominating: Some(y) })
        }
    }
}

/// Convenience wrapper: enumerates vertices and runs one test.
pub fn efficiency_test<T: Scalar>(x: &Vector<T>, level: &LevelObjectives<T>, poly: &Polytope<T>) -> Result<EfficiencyVerdict<T>> {
    let vertices = enumerate_vertices(poly)?;
    EfficiencyOracle::new(poly, &vertices).test(x, level)
}

/// `N_p^dex`: the vertices passing the efficiency test for one level.
pub fn efficient_extreme_points<T: Scalar>(
    oracle: &EfficiencyOracle<'_, T>,
    level: &LevelObjectives<T>,
) -> Result<Vec<Vertex<T>>> {
    let mut out = Vec::new();
    for v in oracle.vertices {
        if oracle.test(&v.coords, level)?.efficient {
            out.push(v.clone());
        }
    }
    Ok(out)
}

/// Exact intersection of the per-level efficient vertex sets, descending.
pub fn common_efficient_extremes<T: Scalar>(per_level: &[Vec<Vertex<T>>]) -> Vec<Vertex<T>> {
    let Some((first, rest)) = per_level.split_first() else {
        return Vec::new();
    };
    let mut common: Vec<Vertex<T>> = first
        .iter()
        .filter(|v| rest.iter().all(|set| set.iter().any(|w| w.coords == v.coords)))
        .cloned()
        .collect();
    common.sort_by(vertex_order);
    common
}

/// A face `F(Q)` of `S` with the enumerated vertices it contains.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Face<T: Scalar> {
    /// Largest row set tight on the whole face.
    pub q: Vec<usize>,
    pub vertices: Vec<Vertex<T>>,
    pub dim: usize,
    /// Levels (0-based) whose efficiency test the barycenter passes.
    pub efficient_for: Vec<usize>,
    pub barycenter: Vector<T>,
}

impl<T: Scalar> Face<T> {
    pub fn contains_face(&self, other: &Face<T>) -> bool {
        other.vertices.iter().all(|v| self.vertices.iter().any(|w| w.coords == v.coords))
    }
}

/// Sort key: higher dimension first, then vertex lists compared in
/// descending lexicographic order.
pub fn face_order<T: Scalar>(a: &Face<T>, b: &Face<T>) -> Ordering {
    b.dim.cmp(&a.dim).then_with(|| {
        let key = |f: &Face<T>| {
            let mut coords: Vec<Vector<T>> = f.vertices.iter().map(|v| v.coords.clone()).collect();
            coords.sort_by(|x, y| y.cmp(x));
            coords
        };
        key(b).cmp(&key(a))
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CompromiseSet<T: Scalar> {
    pub n_hat_dex: Vec<Vertex<T>>,
    pub maximal_faces: Vec<Face<T>>,
    pub per_level_dex: Vec<Vec<Vertex<T>>>,
}

/// Faces of `S` contained in every level's efficient set, reduced to the
/// inclusion-maximal ones.
///
/// Candidate faces are the row sets obtained by intersecting tight sets of
/// common efficient vertices. A candidate survives when every vertex it
/// contains is a common efficient vertex and its barycenter (a relative
/// interior point) is efficient for every level.
pub fn compromise_faces<T: Scalar>(
    oracle: &EfficiencyOracle<'_, T>,
    levels: &[LevelObjectives<T>],
) -> Result<CompromiseSet<T>> {
    let mut per_level_dex = Vec::with_capacity(levels.len());
    for level in levels {
        per_level_dex.push(efficient_extreme_points(oracle, level)?);
    }
    let n_hat_dex = common_efficient_extremes(&per_level_dex);
    if n_hat_dex.is_empty() {
        return Err(Error::EmptyCompromiseSet);
    }

    let generators: Vec<BTreeSet<usize>> = n_hat_dex.iter().map(|v| v.tight.iter().copied().collect()).collect();
    let mut candidates: BTreeSet<BTreeSet<usize>> = generators.iter().cloned().collect();
    let mut frontier: Vec<BTreeSet<usize>> = candidates.iter().cloned().collect();
    while let Some(q) = frontier.pop() {
        for g in &generators {
            let meet: BTreeSet<usize> = q.intersection(g).copied().collect();
            if candidates.insert(meet.clone()) {
                frontier.push(meet);
            }
        }
    }

    let is_common = |v: &Vertex<T>| n_hat_dex.iter().any(|w| w.coords == v.coords);
    let mut faces: BTreeMap<Vec<usize>, Face<T>> = BTreeMap::new();
    for q in candidates {
        let members: Vec<Vertex<T>> =
            oracle.vertices.iter().filter(|v| q.iter().all(|r| v.tight.contains(r))).cloned().collect();
        if members.is_empty() || !members.iter().all(is_common) {
            continue;
        }
        let canonical: Vec<usize> = members
            .iter()
            .map(|v| v.tight.iter().copied().collect::<BTreeSet<_>>())
            .reduce(|a, b| a.intersection(&b).copied().collect())
            .unwrap()
            .into_iter()
            .collect();
        if faces.contains_key(&canonical) {
            continue;
        }
        let coords: Vec<Vector<T>> = members.iter().map(|v| v.coords.clone()).collect();
        let center = barycenter(&coords);
        let mut efficient_for = Vec::new();
        for (p, level) in levels.iter().enumerate() {
            if oracle.test(&center, level)?.efficient {
                efficient_for.push(p);
            }
        }
        if efficient_for.len() != levels.len() {
            continue;
        }
        let dim = affine_dimension(&coords)?;
        let mut vertices = members;
        vertices.sort_by(vertex_order);
        faces.insert(canonical.clone(), Face { q: canonical, vertices, dim, efficient_for, barycenter: center });
    }

    let all: Vec<Face<T>> = faces.into_values().collect();
    let mut maximal: Vec<Face<T>> = all
        .iter()
        .filter(|f| !all.iter().any(|g| g.q != f.q && g.contains_face(f)))
        .cloned()
        .collect();
    if maximal.is_empty() {
        return Err(Error::EmptyCompromiseSet);
    }
    sort_faces(&mut maximal);
    Ok(CompromiseSet { n_hat_dex, maximal_faces: maximal, per_level_dex })
}

pub fn sort_faces<T: Scalar>(faces: &mut [Face<T>]) {
    faces.sort_by(face_order);
}

/// Sorting-set candidates in presentation order.
pub fn sorting_sets<T: Scalar>(cs: &CompromiseSet<T>) -> Vec<Face<T>> {
    let mut faces = cs.maximal_faces.clone();
    sort_faces(&mut faces);
    faces
}

/// Phase-1 artifacts of a problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Geometry<T: Scalar> {
    pub vertices: Vec<Vertex<T>>,
    pub compromise: CompromiseSet<T>,
}

/// Vertices, per-level efficiency, and the compromise faces.
pub fn analyze<T: Scalar>(poly: &Polytope<T>, levels: &[LevelObjectives<T>]) -> Result<Geometry<T>> {
    let vertices = enumerate_vertices(poly)?;
    let oracle = EfficiencyOracle::new(poly, &vertices);
    let compromise = compromise_faces(&oracle, levels)?;
    Ok(Geometry { vertices, compromise })
}
