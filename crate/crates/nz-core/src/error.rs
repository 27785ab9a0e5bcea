use thiserror::Error;

/// Errors surfaced by the engine, module-qualified by variant.
#[derive(Error, Debug)]
pub enum Error {
    // nzio
    #[error("nzio: schema error at `{0}`: {1}")]
    SchemaError(String, String),
    #[error("nzio: integer entry out of 64-bit range at `{0}`")]
    IntegerOverflow(String),
    #[error("nzio: edge incidence violation: {0}")]
    IncidenceViolation(String),
    #[error("nzio: symplectic violation: {0}")]
    SymplecticViolation(String),

    // exact linear algebra / flattening / moves
    #[error("exactla: no integer solution to the flattening equations")]
    NoIntegerSolution,
    #[error("exactla: degenerate 2-3 move: {0}")]
    DegenerateMove(String),
    #[error("exactla: 2-3 site labeling inconsistent: {0}")]
    QuadMismatch(String),

    // mpnum
    #[error("mpnum: polylog pole at w = 1")]
    PoleAtOne,
    #[error("mpnum: branch point of the Bloch-Wigner function at {0}")]
    BranchPoint(String),

    // gluesolve
    #[error("gluesolve: Newton iteration did not converge ({0})")]
    NoConvergence(String),
    #[error("gluesolve: degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("gluesolve: singular Jacobian")]
    SingularJacobian,
    #[error("gluesolve: continuation branch jump near m = {0}")]
    BranchJump(String),
    #[error("gluesolve: residual is not in the 2-pi-i lattice: {0}")]
    NonLatticeResidual(String),

    // series / invariants
    #[error("series: singular Hessian (torsion vanishes?)")]
    SingularHessian,
    #[error("series: half-integer hbar power survived Gaussian expectation: {0}")]
    HalfIntegerSurvivor(String),
    #[error("invariants: torsion is zero to tolerance")]
    ZeroTorsion,
    #[error("cli: requested precision too low: {0}")]
    PrecisionTooLow(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
