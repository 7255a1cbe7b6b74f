use crate::families::EllipsoidType;
use crate::normalform::ResonanceHit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("semiaxes ({b1}, {b2}) are outside the shape domain b1 > b2 > b1^(-1/2)")]
    OutsideDomain { b1: f64, b2: f64 },

    #[error("shape coordinates ({x}, {y}) are outside the triangle 0 < y < x < 1")]
    InvalidShapeCoords { x: f64, y: f64 },

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("{kind} equilibrium undefined at b = ({b1}, {b2}): {reason}")]
    Domain {
        kind: EllipsoidType,
        b1: f64,
        b2: f64,
        reason: String,
    },

    #[error("coincident semiaxes: |b_i^2 - b_j^2| = {gap:e}")]
    Singular { gap: f64 },

    #[error("point ({q}, {p}) outside the Poincaré disk of radius^2 {limit}")]
    ChartDomain { q: f64, p: f64, limit: f64 },

    #[error("Hessian block {block} is {residual:e}, expected zero; the chart frame is wrong")]
    FrameConstruction { block: &'static str, residual: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("resonance of order {order}: Omega.nu = {value:e} for nu = {nu:?}", order = .0.order, value = .0.value, nu = .0.nu)]
    Resonance(ResonanceHit),

    #[error("mode {mode} is degenerate: |Gamma| = {gamma:e}")]
    DegenerateMode { mode: usize, gamma: f64 },

    #[error("equilibrium is not elliptic")]
    NotElliptic,

    #[error("irrotational equilibrium: one momentum vanishes")]
    Irrotational,

    #[error("series error: {0}")]
    Series(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}
