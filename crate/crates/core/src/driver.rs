//! Multilevel driver: sorting-set choice, initial bounds, the per-level solve
//! loop, and decision-maker slack handling, as a pausable session.
//!
//! Legal phase chain:
//! `AwaitSortingSet → AwaitSolve → (AwaitSlacks → AwaitSolve)* → Done`.
//! Every mutating call validates fully before touching state, so a failed
//! call leaves the session exactly as it was.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BoundSide, Error, Result};
use crate::geometry::{analyze, Face, Geometry, Polytope, Vertex};
use crate::molp::{default_big_m, slackify, solve_molp_on, LevelObjectives, WeightVector};
use crate::numeric::{Matrix, Scalar, Vector};

/// One decision maker: the variables it controls and its objective rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Level<T: Scalar> {
    pub num_vars: usize,
    pub objectives: Matrix<T>,
}

/// `P` levels over shared constraints `Ax ≤ b, x ≥ 0`. Level `p` owns a
/// contiguous block of variables, in level order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlProblem<T: Scalar> {
    levels: Vec<Level<T>>,
    a: Matrix<T>,
    b: Vector<T>,
}

impl<T: Scalar> MlProblem<T> {
    pub fn new(levels: Vec<Level<T>>, a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::DimensionMismatch { context: "levels".into(), expected: 1, found: 0 });
        }
        let n: usize = levels.iter().map(|l| l.num_vars).sum();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { context: "constraint columns".into(), expected: n, found: a.ncols() });
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { context: "right-hand side".into(), expected: a.nrows(), found: b.len() });
        }
        for (p, level) in levels.iter().enumerate() {
            if level.num_vars == 0 {
                return Err(Error::DimensionMismatch { context: format!("level {} variable count", p + 1), expected: 1, found: 0 });
            }
            if level.objectives.nrows() == 0 {
                return Err(Error::DimensionMismatch { context: format!("level {} objectives", p + 1), expected: 1, found: 0 });
            }
            if level.objectives.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("level {} objective row length", p + 1),
                    expected: n,
                    found: level.objectives.ncols(),
                });
            }
        }
        Ok(Self { levels, a, b })
    }

    pub fn levels(&self) -> &[Level<T>] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn num_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Vector<T> {
        &self.b
    }

    /// Variable indexes controlled by level `p` (0-based).
    pub fn ownership(&self, p: usize) -> Range<usize> {
        let start: usize = self.levels[..p].iter().map(|l| l.num_vars).sum();
        start..start + self.levels[p].num_vars
    }

    pub fn level_objectives(&self, p: usize) -> LevelObjectives<T> {
        LevelObjectives { level: p, objectives: self.levels[p].objectives.clone() }
    }

    pub fn all_level_objectives(&self) -> Vec<LevelObjectives<T>> {
        (0..self.num_levels()).map(|p| self.level_objectives(p)).collect()
    }

    pub fn polytope(&self) -> Polytope<T> {
        Polytope::new(self.a.clone(), self.b.clone()).expect("dimensions checked at construction")
    }

    /// `F_p(x)` for every level.
    pub fn objective_values(&self, x: &[T]) -> Vec<Vector<T>> {
        self.levels.iter().map(|l| l.objectives.mul_vec(x)).collect()
    }

    /// Phase 1: vertices, efficient sets, and compromise faces.
    pub fn geometry(&self) -> Result<Geometry<T>> {
        analyze(&self.polytope(), &self.all_level_objectives())
    }
}

/// Half-widths a decision maker places around its compromise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DmSlacks<T: Scalar> {
    #[serde(rename = "l")]
    pub lower: Vector<T>,
    #[serde(rename = "r")]
    pub upper: Vector<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    AwaitSortingSet,
    AwaitSolve,
    AwaitSlacks,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which maximal face becomes the working region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortingChoice {
    /// First face in presentation order.
    Auto,
    /// 0-based position in presentation order.
    Index(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionConfig<T: Scalar> {
    pub big_m: T,
    /// Restrict each level's region to the sorting-set face itself.
    pub strict_sp: bool,
}

impl<T: Scalar> Default for SessionConfig<T> {
    fn default() -> Self {
        Self { big_m: default_big_m(), strict_sp: false }
    }
}

/// Componentwise min/max over the sorting set's extreme points.
pub fn initial_bounds<T: Scalar>(spdex: &[Vertex<T>]) -> Result<(Vector<T>, Vector<T>)> {
    let first = spdex.first().ok_or(Error::EmptySortingSet)?;
    let n = first.coords.len();
    let lower = (0..n).map(|j| spdex.iter().map(|v| v.coords[j].clone()).min().unwrap()).collect();
    let upper = (0..n).map(|j| spdex.iter().map(|v| v.coords[j].clone()).max().unwrap()).collect();
    Ok((lower, upper))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", bound = "T: Scalar")]
pub enum TraceEvent<T: Scalar> {
    SortingSetChosen {
        /// 1-based, as presented.
        index: usize,
        spdex: Vec<Vector<T>>,
        card_spdex: usize,
        lower: Vector<T>,
        upper: Vector<T>,
    },
    LevelSolved {
        /// 1-based.
        level: usize,
        lower: Vector<T>,
        upper: Vector<T>,
        start: Vector<T>,
        lambda: WeightVector<T>,
        aux_box_retries: usize,
        beta_history: Vec<String>,
        iterations: usize,
        compromise: Vector<T>,
        objectives: Vector<T>,
    },
    SlacksApplied {
        level: usize,
        slacks: DmSlacks<T>,
        lower: Vector<T>,
        upper: Vector<T>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FinalCompromise<T: Scalar> {
    pub x: Vector<T>,
    pub objectives: Vec<Vector<T>>,
    pub trace: Vec<TraceEvent<T>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortingSelection<T: Scalar> {
    /// 0-based position in presentation order.
    pub index: usize,
    pub face: Face<T>,
}

/// Driver state; see the module docs for the phase chain.
#[derive(Clone, Debug)]
pub struct Session<T: Scalar> {
    problem: Arc<MlProblem<T>>,
    geometry: Arc<Geometry<T>>,
    config: SessionConfig<T>,
    sorting: Option<SortingSelection<T>>,
    initial: Option<(Vector<T>, Vector<T>)>,
    lower: Option<Vector<T>>,
    upper: Option<Vector<T>>,
    level: usize,
    compromises: Vec<Vector<T>>,
    phase: Phase,
    trace: Vec<TraceEvent<T>>,
}

impl<T: Scalar> Session<T> {
    pub fn new(problem: Arc<MlProblem<T>>, geometry: Arc<Geometry<T>>, config: SessionConfig<T>) -> Self {
        Self {
            problem,
            geometry,
            config,
            sorting: None,
            initial: None,
            lower: None,
            upper: None,
            level: 0,
            compromises: Vec::new(),
            phase: Phase::AwaitSortingSet,
            trace: Vec::new(),
        }
    }

    pub fn problem(&self) -> &MlProblem<T> {
        &self.problem
    }

    pub fn geometry(&self) -> &Geometry<T> {
        &self.geometry
    }

    pub fn config(&self) -> &SessionConfig<T> {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// 0-based level currently awaiting a solve or slacks.
    pub fn current_level(&self) -> usize {
        self.level
    }

    pub fn sorting_set(&self) -> Option<&SortingSelection<T>> {
        self.sorting.as_ref()
    }

    /// `|SP^dex|`.
    pub fn card_spdex(&self) -> Option<usize> {
        self.sorting.as_ref().map(|s| s.face.vertices.len())
    }

    pub fn initial_bounds(&self) -> Option<(&Vector<T>, &Vector<T>)> {
        self.initial.as_ref().map(|(l, u)| (l, u))
    }

    pub fn current_bounds(&self) -> Option<(&Vector<T>, &Vector<T>)> {
        self.lower.as_ref().zip(self.upper.as_ref())
    }

    pub fn compromises(&self) -> &[Vector<T>] {
        &self.compromises
    }

    pub fn trace(&self) -> &[TraceEvent<T>] {
        &self.trace
    }

    /// `WrongPhase` unless the session is in `expected`.
    pub fn expect_phase(&self, action: &str, expected: Phase) -> Result<()> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(Error::WrongPhase { action: action.into(), expected: expected.to_string(), found: self.phase.to_string() })
        }
    }

    /// Picks the working face and derives the initial bounds.
    pub fn choose_sorting_set(&mut self, choice: SortingChoice) -> Result<()> {
        self.expect_phase("choose sorting set", Phase::AwaitSortingSet)?;
        let cs = &self.geometry.compromise;
        let candidates = &cs.maximal_faces;
        let index = match choice {
            SortingChoice::Auto => 0,
            SortingChoice::Index(i) => i,
        };
        let face = candidates
            .get(index)
            .ok_or(Error::InvalidSortingIndex { index: index + 1, available: candidates.len() })?;
        if cs.n_hat_dex.len() < 2 {
            return Err(Error::AssumptionViolated {
                assumption: "|N̂^dex| ≥ 2".into(),
                detail: format!("only {} common efficient extreme point(s)", cs.n_hat_dex.len()),
            });
        }
        if face.vertices.is_empty() {
            return Err(Error::AssumptionViolated { assumption: "SP ≠ ∅".into(), detail: "sorting set is empty".into() });
        }
        let same_as_all = face.vertices.len() == cs.n_hat_dex.len()
            && cs.n_hat_dex.iter().all(|v| face.vertices.iter().any(|w| w.coords == v.coords));
        if same_as_all {
            return Err(Error::AssumptionViolated {
                assumption: "SP ≠ N̂^dex".into(),
                detail: format!("sorting set {} spans all {} common extreme points", index + 1, cs.n_hat_dex.len()),
            });
        }
        let (lower, upper) = initial_bounds(&face.vertices)?;
        self.trace.push(TraceEvent::SortingSetChosen {
            index: index + 1,
            spdex: face.vertices.iter().map(|v| v.coords.clone()).collect(),
            card_spdex: face.vertices.len(),
            lower: lower.clone(),
            upper: upper.clone(),
        });
        self.sorting = Some(SortingSelection { index, face: face.clone() });
        self.initial = Some((lower.clone(), upper.clone()));
        self.lower = Some(lower);
        self.upper = Some(upper);
        self.level = 0;
        self.phase = Phase::AwaitSolve;
        Ok(())
    }

    /// Solves the current level over `{Ax ≤ b, l ≤ x ≤ u, x ≥ 0}` (plus the
    /// sorting face's equalities in strict mode). Without `x0`, the previous
    /// compromise is used when it fits the box, else a phase-1 point.
    pub fn solve_current_level(&mut self, x0: Option<&Vector<T>>) -> Result<&Vector<T>> {
        self.expect_phase("solve", Phase::AwaitSolve)?;
        let problem = &self.problem;
        let (lower, upper) = (self.lower.as_ref().unwrap(), self.upper.as_ref().unwrap());
        let p = self.level;
        let level = problem.level_objectives(p);
        let mut form = slackify(problem.a(), problem.b(), &level.objectives, lower, upper, &self.config.big_m)?;
        if self.config.strict_sp {
            form = form.with_tight_rows(&self.sorting.as_ref().unwrap().face.q)?;
        }
        let fallback = self.compromises.last().filter(|prev| form.lp().is_feasible(&form.extend(prev)));
        let start = x0.or(fallback);
        let sol = solve_molp_on(&form, start, &self.config.big_m)?;

        self.trace.push(TraceEvent::LevelSolved {
            level: p + 1,
            lower: lower.clone(),
            upper: upper.clone(),
            start: sol.trace.start.clone(),
            lambda: sol.lambda.clone(),
            aux_box_retries: sol.trace.aux_box_retries,
            beta_history: sol.trace.beta_history.clone(),
            iterations: sol.trace.iterations,
            objectives: level.values(&sol.x),
            compromise: sol.x.clone(),
        });
        self.compromises.push(sol.x);
        self.phase = if p + 1 < problem.num_levels() { Phase::AwaitSlacks } else { Phase::Done };
        Ok(self.compromises.last().unwrap())
    }

    /// Tightens the bounds of the just-solved level's own variables to
    /// `[x^c − l, x^c + r]`, which must stay inside the initial bounds.
    pub fn apply_dm_slacks(&mut self, slacks: &DmSlacks<T>) -> Result<()> {
        self.expect_phase("apply slacks", Phase::AwaitSlacks)?;
        let p = self.level;
        let owned = self.problem.ownership(p);
        for (side, v) in [(BoundSide::Lower, &slacks.lower), (BoundSide::Upper, &slacks.upper)] {
            if v.len() != owned.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("level {} {side} slack", p + 1),
                    expected: owned.len(),
                    found: v.len(),
                });
            }
            if let Some(component) = v.iter().position(|s| !s.is_positive()) {
                return Err(Error::NonPositiveSlack { side, component, value: v[component].to_string() });
            }
        }
        let xc = self.compromises.last().expect("a solved level precedes slacks");
        let (l1, u1) = self.initial.as_ref().unwrap();
        let mut lower = self.lower.clone().unwrap();
        let mut upper = self.upper.clone().unwrap();
        for (k, j) in owned.enumerate() {
            let lo = xc[j].clone() - slacks.lower[k].clone();
            let hi = xc[j].clone() + slacks.upper[k].clone();
            if lo < l1[j] {
                return Err(Error::DmBoundsViolation {
                    variable: j,
                    side: BoundSide::Lower,
                    excess: (l1[j].clone() - lo.clone()).to_string(),
                    value: lo.to_string(),
                    limit: l1[j].to_string(),
                });
            }
            if hi > u1[j] {
                return Err(Error::DmBoundsViolation {
                    variable: j,
                    side: BoundSide::Upper,
                    excess: (hi.clone() - u1[j].clone()).to_string(),
                    value: hi.to_string(),
                    limit: u1[j].to_string(),
                });
            }
            lower[j] = lo;
            upper[j] = hi;
        }
        self.trace.push(TraceEvent::SlacksApplied {
            level: p + 1,
            slacks: slacks.clone(),
            lower: lower.clone(),
            upper: upper.clone(),
        });
        self.lower = Some(lower);
        self.upper = Some(upper);
        self.level += 1;
        self.phase = Phase::AwaitSolve;
        Ok(())
    }

    pub fn final_compromise(&self) -> Option<FinalCompromise<T>> {
        if self.phase != Phase::Done {
            return None;
        }
        let x = self.compromises.last()?.clone();
        Some(FinalCompromise { objectives: self.problem.objective_values(&x), x, trace: self.trace.clone() })
    }
}

/// Builds a session and immediately picks the sorting set.
pub fn start_session<T: Scalar>(
    problem: Arc<MlProblem<T>>,
    geometry: Arc<Geometry<T>>,
    choice: SortingChoice,
    config: SessionConfig<T>,
) -> Result<Session<T>> {
    let mut session = Session::new(problem, geometry, config);
    session.choose_sorting_set(choice)?;
    Ok(session)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchConfig<T: Scalar> {
    pub sorting_choice: SortingChoice,
    /// Per-level starting points; missing or `None` entries use the default rule.
    pub initial_points: Vec<Option<Vector<T>>>,
    /// Slacks for levels `1..P-1`.
    pub slacks: Vec<DmSlacks<T>>,
    pub session: SessionConfig<T>,
}

impl<T: Scalar> Default for BatchConfig<T> {
    fn default() -> Self {
        Self { sorting_choice: SortingChoice::Auto, initial_points: Vec::new(), slacks: Vec::new(), session: SessionConfig::default() }
    }
}

#[derive(Clone, Debug)]
pub struct BatchRun<T: Scalar> {
    pub geometry: Arc<Geometry<T>>,
    pub session: Session<T>,
    pub result: FinalCompromise<T>,
}

/// Both phases without pauses. Errors name the step they came from.
pub fn run_batch<T: Scalar>(problem: &MlProblem<T>, config: &BatchConfig<T>) -> Result<BatchRun<T>> {
    let problem = Arc::new(problem.clone());
    let geometry = Arc::new(problem.geometry().map_err(|e| e.in_step("phase 1 (compromise set)"))?);
    run_batch_with(problem, geometry, config)
}

/// [`run_batch`] over precomputed phase-1 artifacts.
pub fn run_batch_with<T: Scalar>(
    problem: Arc<MlProblem<T>>,
    geometry: Arc<Geometry<T>>,
    config: &BatchConfig<T>,
) -> Result<BatchRun<T>> {
    let levels = problem.num_levels();
    if config.slacks.len() + 1 < levels {
        return Err(Error::DimensionMismatch {
            context: "slack sets (one per level except the last)".into(),
            expected: levels - 1,
            found: config.slacks.len(),
        });
    }
    let mut session = start_session(problem, geometry.clone(), config.sorting_choice, config.session.clone())
        .map_err(|e| e.in_step("phase 1 (sorting set)"))?;
    for p in 0..levels {
        let x0 = config.initial_points.get(p).and_then(Option::as_ref);
        session.solve_current_level(x0).map_err(|e| e.in_step(format!("phase 2, level {} solve", p + 1)))?;
        if p + 1 < levels {
            session
                .apply_dm_slacks(&config.slacks[p])
                .map_err(|e| e.in_step(format!("phase 2, level {} slacks", p + 1)))?;
        }
    }
    let result = session.final_compromise().expect("all levels solved");
    Ok(BatchRun { geometry, session, result })
}
