//! The feedback engine: everything that happens to a finished session.
//!
//! A session archive is merged into a unified, anonymized transcript; the
//! transcript is wrapped in the prompt template and sent to a pluggable
//! inference backend; the returned completion is parsed, validated against
//! the session metadata, and turned into a directed interaction graph with
//! per-role network metrics, exporters, and agreement statistics against
//! expert annotations.

pub mod agreement;
pub mod backend;
pub mod extract;
pub mod graph;
pub mod prompt;
pub mod stats;
pub mod transcript;
pub mod validate;

pub use agreement::{agreement, AgreementError, AgreementReport, ExpertAnnotation, ExpertEdge};
pub use backend::{BackendError, BackendRegistry, InferenceBackend, InferenceParams};
pub use extract::{extract_graph_json, CandidateGraphDoc, ExtractError};
pub use graph::{InteractionEdge, InteractionGraph};
pub use prompt::{build_prompt, PromptTemplate};
pub use transcript::{
    merge_streams, render_transcript_text, ActionRecord, TranscriptEntry, TranscriptError,
    UnifiedTranscript, Utterance,
};
pub use validate::{
    validate_graph, GraphViolation, ValidationConfig, ValidationFailure, ValidationOutcome,
    ViolationKind,
};
