use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unexpected end of input while reading {expected}")]
    UnexpectedEof { expected: &'static str },
    #[error("line {line}: trailing data")]
    TrailingData { line: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("cell {cell} references missing vertex {vertex}")]
    InvalidVertex { cell: usize, vertex: usize },
    #[error("cell {cell} has nonpositive signed area {area}")]
    InvertedCell { cell: usize, area: f64 },
    #[error("cells {first} and {second} coincide")]
    DuplicateCell { first: usize, second: usize },
    #[error("vertex {vertex} belongs to no cell")]
    DanglingVertex { vertex: usize },
    #[error("mesh is not conforming near edge {edge:?}")]
    NonConforming { edge: [usize; 2] },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("edge {edge} is not an edge of cell {cell}")]
    EdgeNotOnCell { edge: usize, cell: usize },
    #[error("field has {found} cells, mesh has {expected}")]
    CellCountMismatch { expected: usize, found: usize },
    #[error("field has {found} degrees of freedom, mesh needs {expected}")]
    DofCountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("interior penalty scheme needs polynomial degree >= 1, got {0}")]
    DegreeTooLow(usize),
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("system matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("material coefficient {name} on cell {cell} must be positive, got {value}")]
    InvalidMaterial { name: &'static str, cell: usize, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructionError {
    #[error("patch system of vertex {vertex} is singular")]
    SingularPatch { vertex: usize },
    #[error("reconstruction degree {q} must be at least p + 1 = {min}")]
    DegreeTooLow { q: usize, min: usize },
}
