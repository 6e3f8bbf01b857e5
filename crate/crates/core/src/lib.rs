//! A task-oriented dialogue engine.
//!
//! Language understanding translates each user message into a handful of
//! commands ([`command::Command`]). Everything after that is deterministic:
//! commands push flows onto a dialogue stack and set slots, and the
//! executor runs the topmost flow until it needs the user again.
//! Conversation repair (corrections, cancellations, clarifications,
//! digressions) is handled by built-in, overridable pattern flows.

pub mod actions;
pub mod assistant;
pub mod command;
pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod executor;
pub mod flow;
pub mod harness;
pub mod llm;
pub mod patterns;
pub mod processor;
pub mod response;
pub mod service;
pub mod state;
pub mod text;
pub mod understanding;
pub mod value;

pub use assistant::Assistant;
pub use command::{parse_commands, serialize_commands, Command, ValidatedCommand};
pub use domain::Domain;
pub use engine::{Engine, EngineConfig, TurnReport};
pub use error::{Error, Result};
pub use flow::{parse_flowbook, serialize_flowbook, validate_flowbook, FlowBook};
pub use state::{Tracker, TrackerSnapshot};
pub use value::Value;
