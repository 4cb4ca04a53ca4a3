use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("ordering is not a perfect elimination ordering (vertex {vertex})")]
    NotPerfectElimination { vertex: usize },

    #[error("ordering is not a permutation of 0..{n}")]
    InvalidOrder { n: usize },

    #[error("cliques do not form a valid clique tree: {0}")]
    InvalidCliqueTree(String),

    #[error("entry ({i}, {j}) is not part of the sparsity pattern")]
    EntryNotInPattern { i: usize, j: usize },

    #[error("pattern mismatch between operands")]
    PatternMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not PSD-completable: clique {clique} has minimum eigenvalue {min_eig:.3e}")]
    NotCompletable { clique: usize, min_eig: f64 },

    #[error("pattern is not chordal")]
    NotChordal,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("reweighting round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
