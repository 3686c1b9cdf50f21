//! Flow-field analysis of symbolically encoded scores.
//!
//! A score is a sequence of columns of pitched events. Events are linked into
//! pathlines (descending chromatic layers), and trailing windows over the
//! pathlines are labelled laminar, transitional, turbulent or sparse.

pub mod config;
pub mod flow;
pub mod ingest;
pub mod model;
pub mod pathline;
pub mod plot;
pub mod report;

pub use flow::{classify_phases, FlowConfig, Phase, PhaseSegment};
pub use ingest::{parse_score, read_score, write_score, LoadError, ParseError};
pub use model::{pitch_to_y, y_to_pitch, Dynamic, NoteEvent, PitchSpec, Score};
pub use pathline::{extract_pathlines, Pathline};
pub use report::{analyze, Analysis};
