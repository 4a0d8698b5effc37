use thiserror::Error;

use crate::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("AFEM iteration {iteration}: {source}")]
    Afem {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {tri} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        tri: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {tri} repeats vertex {vertex}")]
    DuplicateVertex { tri: usize, vertex: usize },
    #[error("triangle {tri} has zero area")]
    ZeroArea { tri: usize },
    #[error("edge ({a}, {b}) is shared by more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("triangles {first} and {second} overlap along edge ({a}, {b})")]
    Overlap {
        first: usize,
        second: usize,
        a: usize,
        b: usize,
    },
    #[error("edge {edge} is a boundary edge")]
    BoundaryEdge { edge: usize },
    #[error("index {index} out of range ({count} entities)")]
    InvalidIndex { index: usize, count: usize },
    #[error("refinement closure did not settle within {limit} passes")]
    ClosureDepth { limit: usize },
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("Euler characteristic V - E + T = {0}, expected 1")]
    Euler(i64),
    #[error("mesh file: {0}")]
    Parse(String),
    #[error("mesh generation failed: {0}")]
    Generation(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("edge Gauss rule with {0} points is not supported (1..=6)")]
    UnsupportedPointCount(usize),
    #[error("triangle rule of degree {0} is not supported (1..=20)")]
    UnsupportedDegree(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("RT degree {0} is not supported (0..=3)")]
    UnsupportedDegree(usize),
    #[error("triangle {tri}: degenerate local basis (condition estimate {condition:e})")]
    Degenerate { tri: usize, condition: f64 },
    #[error("RT_0 has no interior degrees of freedom")]
    NoInteriorDofs,
    #[error("point {point:?} lies outside triangle {tri}")]
    OutsideTriangle { tri: usize, point: Point },
    #[error("index out of range: {0}")]
    Index(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("coefficient a = {value} <= 0 at {point:?} (triangle {tri})")]
    NonPositiveCoefficient {
        tri: usize,
        point: Point,
        value: f64,
    },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("relative residual {0:e} exceeds 1e-9")]
    Residual(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("uniqueness criterion only covers r = 0 and r = 1 (got r = {0}); use the numerical rank check")]
    CriterionUnavailable(usize),
    #[error("vertex {vertex}: patch least-squares problem stays rank deficient (sigma ratio {ratio:e}) after enlarging to the whole mesh")]
    RankDeficient { vertex: usize, ratio: f64 },
    #[error("field degree {field} does not match requested degree {requested}")]
    DegreeMismatch { field: usize, requested: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("order fit needs at least two entries (got {0})")]
    TooFewPoints(usize),
    #[error("order fit needs positive values, found {0}")]
    NonPositive(f64),
    #[error("errors and ndofs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("Dörfler fraction must lie in (0, 1), got {0}")]
    InvalidTheta(f64),
}
