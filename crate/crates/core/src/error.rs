use std::fmt;

/// Errors shared across the workbench.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("element out of domain: {0}")]
    ElementOutOfDomain(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("node limit exceeded after {nodes} nodes")]
    NodeLimitExceeded { nodes: u64 },
    #[error("arity too small: {0}")]
    ArityTooSmall(String),
    #[error("not a homomorphism: {0}")]
    NotAHomomorphism(String),
    #[error("partial assignment: {0}")]
    PartialAssignment(String),
    #[error("not a cover: {0}")]
    NotACover(String),
    #[error("non-binary entry: {0}")]
    NonBinaryEntry(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("coordinate {index} equals the forbidden value 1/3")]
    CoordinateEqualsOneThird { index: usize },
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("pigeonhole failure: {0}")]
    PigeonholeFailure(String),
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid structure:\n{0}")]
    InvalidStructure(ValidationReport),
}

/// One structural invariant violation, with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    ArityMismatch { expected: usize, found: usize },
    ElementOutOfDomain { element: usize, domain_size: usize },
    DuplicateRelationName(String),
    ZeroArity(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::ArityMismatch { expected, found } => {
                write!(f, "{}: arity mismatch (declared {expected}, tuple has {found})", self.location)
            }
            ViolationKind::ElementOutOfDomain { element, domain_size } => {
                write!(f, "{}: element {element} outside domain 0..{domain_size}", self.location)
            }
            ViolationKind::DuplicateRelationName(name) => {
                write!(f, "{}: duplicate relation name {name}", self.location)
            }
            ViolationKind::ZeroArity(name) => {
                write!(f, "{}: relation {name} declared with arity 0", self.location)
            }
        }
    }
}

/// Collected violations from [`crate::structure::validate_structure`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}
