use std::fmt;

use docsift::corpus::CorpusError;
use docsift::dependency::DepError;
use docsift::eval::EvalError;
use docsift::qa_client::QaError;
use docsift::retrieval::RetrievalError;
use docsift::tokenization::TokenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Input,
    Transport,
    Invariant,
}

/// A command failure tagged with the pipeline stage and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub stage: &'static str,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: Kind, stage: &'static str, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            stage,
            error: error.into(),
        }
    }

    pub fn config(stage: &'static str, msg: impl fmt::Display) -> Self {
        Self::new(Kind::Config, stage, anyhow::anyhow!("{msg}"))
    }

    pub fn input(stage: &'static str, msg: impl fmt::Display) -> Self {
        Self::new(Kind::Input, stage, anyhow::anyhow!("{msg}"))
    }

    pub fn code(&self) -> i32 {
        match self.kind {
            Kind::Config => 2,
            Kind::Input => 3,
            Kind::Transport => 4,
            Kind::Invariant => 5,
        }
    }

    pub fn corpus(stage: &'static str, e: CorpusError) -> Self {
        let kind = match e {
            CorpusError::Config(_) => Kind::Config,
            CorpusError::EmptyInput => Kind::Input,
        };
        Self::new(kind, stage, e)
    }

    pub fn dependency(stage: &'static str, e: DepError) -> Self {
        let kind = match e {
            DepError::Transport(_) | DepError::Protocol(_) => Kind::Transport,
            DepError::Parse { .. } | DepError::Validation { .. } | DepError::Io(_) => Kind::Input,
            DepError::Missing(_) | DepError::EmptySentence => Kind::Input,
        };
        Self::new(kind, stage, e)
    }

    pub fn token(stage: &'static str, e: TokenError) -> Self {
        let kind = match e {
            TokenError::Format(_) => Kind::Input,
            _ => Kind::Invariant,
        };
        Self::new(kind, stage, e)
    }

    pub fn retrieval(stage: &'static str, e: RetrievalError) -> Self {
        let kind = match e {
            RetrievalError::EmptyCorpus
            | RetrievalError::Argument(_)
            | RetrievalError::FormatVersion { .. }
            | RetrievalError::Format(_)
            | RetrievalError::Io(_) => Kind::Input,
            RetrievalError::Training(_) | RetrievalError::Mismatch => Kind::Invariant,
        };
        Self::new(kind, stage, e)
    }

    pub fn qa(stage: &'static str, e: QaError) -> Self {
        let kind = match e {
            QaError::AllFailed(_) | QaError::Protocol { .. } => Kind::Transport,
            QaError::NoCandidates => Kind::Input,
            QaError::Chunking(_) => Kind::Config,
        };
        Self::new(kind, stage, e)
    }

    pub fn eval(stage: &'static str, e: EvalError) -> Self {
        Self::new(Kind::Input, stage, e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:#}", self.stage, self.error)
    }
}
