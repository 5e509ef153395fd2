use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distance table is not symmetric at ({0}, {1})")]
    AsymmetricTable(usize, usize),
    #[error("triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("negative or non-zero-diagonal distance at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("scale parameter {0} outside (0, 1/10]")]
    EpsOutOfRange(f64),
    #[error("measure has zero total mass")]
    ZeroMassEverywhere,
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("set has zero mass")]
    ZeroMass,
    #[error("no admissible cover below the scale bound")]
    NoFeasibleCover,
    #[error("radius grid is empty")]
    EmptyRadiusGrid,
    #[error("net point {point} at level {level} has no parent within range")]
    OrphanPoint { level: i32, point: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("measure {index} is not supported exactly on the target set")]
    SupportMismatch { index: usize },
    #[error("negative or non-finite weight at point {0}")]
    NegativeWeight(usize),
    #[error("density vanishes at point {0}")]
    ZeroDensity(usize),
    #[error("exponents out of order: base {base} must not exceed target {target}")]
    ThetaOrder { base: f64, target: f64 },
    #[error("exponent {0} outside its admissible range")]
    ThetaOutOfRange(f64),
    #[error("grid spacing too coarse for the surviving intervals")]
    GridTooCoarse,
    #[error("cube at level {level}, index {index} is empty")]
    EmptyCube { level: i32, index: usize },
    #[error("scale level {needed} exceeds sequence depth {depth}")]
    SequenceDepthExceeded { needed: i64, depth: usize },
    #[error("point {0} is not covered by the partition of unity")]
    UncoveredPoint(usize),
    #[error("reference measure vanishes on a ball at point {0}")]
    ZeroMuBall(usize),
    #[error("right-hand side vanishes while the left-hand side is positive")]
    RhsZeroWithPositiveLhs,
}
