//! Problem files, run reports, and their plain-text table rendering.
//!
//! Every number in a document is an integer or a `"p/q"` string; external
//! indexes (levels, sorting sets, constraint rows) are 1-based.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::driver::{BatchConfig, BatchRun, DmSlacks, Level, MlProblem, SessionConfig, SortingChoice, TraceEvent};
use crate::error::{Error, Result};
use crate::geometry::{Face, Geometry, Vertex};
use crate::molp::default_big_m;
use crate::numeric::{scalar_serde, Matrix, Scalar, Vector};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct LevelSpec<T: Scalar> {
    pub num_vars: usize,
    pub objectives: Vec<Vector<T>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ConstraintSpec<T: Scalar> {
    #[serde(rename = "A")]
    pub a: Vec<Vector<T>>,
    pub b: Vector<T>,
}

/// `"auto"` or a 1-based face position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SortingSpec {
    Index(usize),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl SortingSpec {
    pub fn to_choice(self) -> Result<SortingChoice> {
        match self {
            SortingSpec::Auto(_) => Ok(SortingChoice::Auto),
            SortingSpec::Index(0) => Err(Error::InvalidSortingIndex { index: 0, available: 0 }),
            SortingSpec::Index(i) => Ok(SortingChoice::Index(i - 1)),
        }
    }

    pub fn from_choice(choice: SortingChoice) -> Self {
        match choice {
            SortingChoice::Auto => SortingSpec::Auto(AutoTag::Auto),
            SortingChoice::Index(i) => SortingSpec::Index(i + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ConfigSpec<T: Scalar> {
    #[serde(rename = "bigM", default, skip_serializing_if = "Option::is_none", with = "crate::numeric::opt_scalar_serde")]
    pub big_m: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sorting_choice: Option<SortingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_sp: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_points: Vec<Option<Vector<T>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slacks: Vec<DmSlacks<T>>,
}

impl<T: Scalar> ConfigSpec<T> {
    /// Batch configuration with defaults filled in.
    pub fn to_batch(&self) -> Result<BatchConfig<T>> {
        let big_m = self.big_m.clone().unwrap_or_else(default_big_m);
        Ok(BatchConfig {
            sorting_choice: self.sorting_choice.map(SortingSpec::to_choice).transpose()?.unwrap_or(SortingChoice::Auto),
            initial_points: self.initial_points.clone(),
            slacks: self.slacks.clone(),
            session: SessionConfig { big_m, strict_sp: self.strict_sp.unwrap_or(false) },
        })
    }
}

/// On-disk problem document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ProblemFile<T: Scalar> {
    pub levels: Vec<LevelSpec<T>>,
    pub constraints: ConstraintSpec<T>,
    #[serde(default = "ConfigSpec::default", skip_serializing_if = "ConfigSpec::is_empty")]
    pub config: ConfigSpec<T>,
}

impl<T: Scalar> ConfigSpec<T> {
    fn is_empty(&self) -> bool {
        self.big_m.is_none()
            && self.sorting_choice.is_none()
            && self.strict_sp.is_none()
            && self.initial_points.is_empty()
            && self.slacks.is_empty()
    }
}

impl<T: Scalar> Default for ConfigSpec<T> {
    fn default() -> Self {
        Self { big_m: None, sorting_choice: None, strict_sp: None, initial_points: Vec::new(), slacks: Vec::new() }
    }
}

impl<T: Scalar> ProblemFile<T> {
    /// Validates dimensions and builds the problem.
    pub fn to_problem(&self) -> Result<MlProblem<T>> {
        let levels = self
            .levels
            .iter()
            .map(|l| Ok(Level { num_vars: l.num_vars, objectives: Matrix::from_rows(l.objectives.iter().map(|r| r.to_vec()).collect())? }))
            .collect::<Result<Vec<_>>>()?;
        let a = Matrix::from_rows(self.constraints.a.iter().map(|r| r.to_vec()).collect())?;
        let problem = MlProblem::new(levels, a, self.constraints.b.clone())?;
        self.check_config(&problem)?;
        Ok(problem)
    }

    fn check_config(&self, problem: &MlProblem<T>) -> Result<()> {
        let n = problem.num_vars();
        let p = problem.num_levels();
        if self.config.initial_points.len() > p {
            return Err(Error::DimensionMismatch { context: "config.initial_points entries".into(), expected: p, found: self.config.initial_points.len() });
        }
        for (i, x) in self.config.initial_points.iter().enumerate() {
            if let Some(x) = x {
                if x.len() != n {
                    return Err(Error::DimensionMismatch { context: format!("config.initial_points[{i}]"), expected: n, found: x.len() });
                }
            }
        }
        if self.config.slacks.len() > p.saturating_sub(1) {
            return Err(Error::DimensionMismatch { context: "config.slacks entries".into(), expected: p - 1, found: self.config.slacks.len() });
        }
        for (i, s) in self.config.slacks.iter().enumerate() {
            let owned = problem.levels()[i].num_vars;
            for (name, v) in [("l", &s.lower), ("r", &s.upper)] {
                if v.len() != owned {
                    return Err(Error::DimensionMismatch { context: format!("config.slacks[{i}].{name}"), expected: owned, found: v.len() });
                }
            }
        }
        if let Some(SortingSpec::Index(0)) = self.config.sorting_choice {
            return Err(Error::Parse("config.sorting_choice: indexes start at 1".into()));
        }
        if let Some(m) = &self.config.big_m {
            if !m.is_positive() {
                return Err(Error::InvalidParameter(format!("bigM must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn from_problem(problem: &MlProblem<T>, config: ConfigSpec<T>) -> Self {
        Self {
            levels: problem
                .levels()
                .iter()
                .map(|l| LevelSpec { num_vars: l.num_vars, objectives: l.objectives.rows().map(|r| r.iter().cloned().collect()).collect() })
                .collect(),
            constraints: ConstraintSpec { a: problem.a().rows().map(|r| r.iter().cloned().collect()).collect(), b: problem.b().clone() },
            config,
        }
    }
}

/// Deserializes JSON, naming the offending field and position on failure.
pub fn from_json<D: serde::de::DeserializeOwned>(text: &str) -> Result<D> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("field `{path}`: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(value)
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize infallibly")
}

/// Parses a problem document into the problem and its optional config.
pub fn parse_problem<T: Scalar>(text: &str) -> Result<(MlProblem<T>, ConfigSpec<T>)> {
    let file: ProblemFile<T> = from_json(text)?;
    let problem = file.to_problem()?;
    Ok((problem, file.config))
}

pub fn read_problem<T: Scalar>(path: &std::path::Path) -> Result<(MlProblem<T>, ConfigSpec<T>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn serialize_problem<T: Scalar>(problem: &MlProblem<T>, config: &ConfigSpec<T>) -> String {
    to_json(&ProblemFile::from_problem(problem, config.clone()))
}

/// A vertex with 1-based tight rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VertexReport<T: Scalar> {
    pub x: Vector<T>,
    pub tight_rows: Vec<usize>,
}

impl<T: Scalar> From<&Vertex<T>> for VertexReport<T> {
    fn from(v: &Vertex<T>) -> Self {
        Self { x: v.coords.clone(), tight_rows: v.tight.iter().map(|r| r + 1).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FaceReport<T: Scalar> {
    /// 1-based presentation index.
    pub index: usize,
    pub dim: usize,
    pub tight_rows: Vec<usize>,
    pub vertices: Vec<Vector<T>>,
    pub barycenter: Vector<T>,
}

impl<T: Scalar> FaceReport<T> {
    pub fn new(index: usize, face: &Face<T>) -> Self {
        Self {
            index: index + 1,
            dim: face.dim,
            tight_rows: face.q.iter().map(|r| r + 1).collect(),
            vertices: face.vertices.iter().map(|v| v.coords.clone()).collect(),
            barycenter: face.barycenter.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Phase1Report<T: Scalar> {
    pub vertices: Vec<VertexReport<T>>,
    /// One list per level.
    pub efficient: Vec<Vec<Vector<T>>>,
    pub n_hat_dex: Vec<Vector<T>>,
    pub maximal_faces: Vec<FaceReport<T>>,
}

impl<T: Scalar> From<&Geometry<T>> for Phase1Report<T> {
    fn from(g: &Geometry<T>) -> Self {
        let coords = |vs: &[Vertex<T>]| vs.iter().map(|v| v.coords.clone()).collect::<Vec<_>>();
        Self {
            vertices: g.vertices.iter().map(VertexReport::from).collect(),
            efficient: g.compromise.per_level_dex.iter().map(|vs| coords(vs)).collect(),
            n_hat_dex: coords(&g.compromise.n_hat_dex),
            maximal_faces: g.compromise.maximal_faces.iter().enumerate().map(|(i, f)| FaceReport::new(i, f)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FinalReport<T: Scalar> {
    pub x: Vector<T>,
    /// `F_p(x)` per level.
    pub objectives: Vec<Vector<T>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub phase1_us: u64,
    pub phase2_us: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunReport<T: Scalar> {
    pub num_levels: usize,
    pub num_vars: usize,
    #[serde(with = "scalar_serde")]
    pub big_m: T,
    pub strict_sp: bool,
    #[serde(flatten)]
    pub phase1: Phase1Report<T>,
    pub sorting_set: usize,
    pub steps: Vec<TraceEvent<T>>,
    #[serde(rename = "final")]
    pub final_compromise: FinalReport<T>,
    pub timings: Timings,
}

impl<T: Scalar> RunReport<T> {
    pub fn from_run(problem: &MlProblem<T>, run: &BatchRun<T>, timings: Timings) -> Self {
        let config = run.session.config();
        Self {
            num_levels: problem.num_levels(),
            num_vars: problem.num_vars(),
            big_m: config.big_m.clone(),
            strict_sp: config.strict_sp,
            phase1: Phase1Report::from(run.geometry.as_ref()),
            sorting_set: run.session.sorting_set().map_or(0, |s| s.index + 1),
            steps: run.result.trace.clone(),
            final_compromise: FinalReport { x: run.result.x.clone(), objectives: run.result.objectives.clone() },
            timings,
        }
    }
}

fn join<T: Scalar>(v: &[T]) -> String {
    let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

fn rows(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn render_vertices<T: Scalar>(vertices: &[VertexReport<T>]) -> String {
    let mut out = format!("{:>3}  {:<28} {}\n", "#", "x", "tight rows");
    for (i, v) in vertices.iter().enumerate() {
        let _ = writeln!(out, "{:>3}  {:<28} {}", i + 1, join(&v.x), rows(&v.tight_rows));
    }
    out
}

pub fn render_points<T: Scalar>(title: &str, points: &[Vector<T>]) -> String {
    let mut out = format!("{title} ({} points)\n", points.len());
    for x in points {
        let _ = writeln!(out, "  {}", join(x));
    }
    out
}

pub fn render_faces<T: Scalar>(faces: &[FaceReport<T>]) -> String {
    let mut out = format!("{:>3}  {:>3}  {:<14} {}\n", "#", "dim", "tight rows", "vertices");
    for f in faces {
        let vs: Vec<String> = f.vertices.iter().map(|v| join(v)).collect();
        let _ = writeln!(out, "{:>3}  {:>3}  {:<14} {}", f.index, f.dim, rows(&f.tight_rows), vs.join(" "));
    }
    out
}

pub fn render_phase1<T: Scalar>(r: &Phase1Report<T>) -> String {
    let mut out = String::from("Vertices\n");
    out += &render_vertices(&r.vertices);
    for (p, eff) in r.efficient.iter().enumerate() {
        out += "\n";
        out += &render_points(&format!("Efficient extreme points, level {}", p + 1), eff);
    }
    out += "\n";
    out += &render_points("Common efficient extreme points", &r.n_hat_dex);
    out += "\nMaximal compromise faces\n";
    out += &render_faces(&r.maximal_faces);
    out
}

pub fn render_steps<T: Scalar>(steps: &[TraceEvent<T>]) -> String {
    let mut out = String::new();
    for step in steps {
        match step {
            TraceEvent::SortingSetChosen { index, card_spdex, lower, upper, .. } => {
                let _ = writeln!(out, "sorting set {index} ({card_spdex} extreme points): l = {}, u = {}", join(lower), join(upper));
            }
            TraceEvent::LevelSolved { level, lower, upper, start, lambda, iterations, compromise, objectives, .. } => {
                let _ = writeln!(
                    out,
                    "level {level}: box [{}, {}], x0 = {}, lambda = {}, {iterations} {} -> x = {}, F = {}",
                    join(lower),
                    join(upper),
                    join(start),
                    join(&lambda.0),
                    if *iterations == 1 { "step" } else { "steps" },
                    join(compromise),
                    join(objectives)
                );
            }
            TraceEvent::SlacksApplied { level, slacks, lower, upper } => {
                let _ = writeln!(
                    out,
                    "level {level} slacks l = {}, r = {}: l = {}, u = {}",
                    join(&slacks.lower),
                    join(&slacks.upper),
                    join(lower),
                    join(upper)
                );
            }
        }
    }
    out
}

/// Human-readable rendering of a whole run.
pub fn render_report<T: Scalar>(r: &RunReport<T>) -> String {
    let mut out = render_phase1(&r.phase1);
    out += "\nSteps\n";
    out += &render_steps(&r.steps);
    let _ = writeln!(out, "\nFinal compromise: {}", join(&r.final_compromise.x));
    for (p, f) in r.final_compromise.objectives.iter().enumerate() {
        let _ = writeln!(out, "  F{}(x) = {}", p + 1, join(f));
    }
    out
}
