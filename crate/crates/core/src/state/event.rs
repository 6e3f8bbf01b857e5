use serde::{Deserialize, Serialize};

use super::{Frame, FrameId};
use crate::command::{Command, DroppedCommand};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotSource {
    /// Declared initial value, set when the conversation starts.
    Initial,
    Command,
    Flow,
    Pattern,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Milliseconds since the Unix epoch, or the event index under a
    /// logical clock.
    pub timestamp: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    UserMessage {
        text: String,
    },
    BotMessage {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        template: Option<String>,
        /// Templated text before rephrasing, when it was rephrased.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        original: Option<String>,
    },
    CommandsGenerated {
        raw: String,
        commands: Vec<Command>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        dropped: Vec<DroppedCommand>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        parse_errors: Vec<String>,
    },
    SlotSet {
        slot: String,
        value: Option<Value>,
        source: SlotSource,
    },
    ActionExecuted {
        name: String,
    },
    FramePushed {
        frame: Frame,
    },
    /// A user flow already on the stack was restarted and moved to the top.
    FrameMovedToTop {
        frame_id: FrameId,
    },
    FrameStepChanged {
        frame_id: FrameId,
        step_id: String,
    },
    StepPrompted {
        frame_id: FrameId,
        step_id: String,
    },
    CollectFulfilled {
        frame_id: FrameId,
        step_id: String,
    },
    FrameCompleted {
        frame_id: FrameId,
    },
    FrameCancelled {
        frame_id: FrameId,
    },
    ValidationRejected {
        slot: String,
        value: String,
    },
    Warning {
        message: String,
    },
}
