use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        got: usize,
    },

    #[error("domain error in `{node}`: {detail}")]
    Domain { node: String, detail: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("singular Hessian (pivot ratio {ratio:e})")]
    SingularHessian { ratio: f64 },

    #[error("singular matrix in {what}")]
    Singular { what: String },

    #[error("almost tangent structure requires a (g,h) morphism")]
    MissingMorphism,

    #[error("section is in the adapted basis; convert to natural first")]
    Basis,

    #[error("singular transition at sample {sample}: {what}")]
    SingularTransition { sample: usize, what: String },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("bad d-tensor signature: {0}")]
    Signature(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("bad parameters for `{id}`: {detail}")]
    BadParams { id: String, detail: String },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("expression error at {path}: {source}")]
    Expression {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing payload: {0}")]
    MissingPayload(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
