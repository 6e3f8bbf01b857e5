use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub type FrameId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    UserFlow,
    Pattern,
}

/// One activation of a flow on the dialogue stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: FrameId,
    pub kind: FrameKind,
    pub flow_id: String,
    /// Id of the step the frame is positioned at.
    pub cursor: String,
    /// Steps that have prompted the user in this activation.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub asked: BTreeSet<String>,
    /// Collect steps satisfied in this activation.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub fulfilled: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context: BTreeMap<String, Json>,
    /// Set when the frame was started by a `start_flow:` action of another
    /// frame rather than by the user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub called_by: Option<FrameId>,
}

impl Frame {
    pub fn context_str(&self, key: &str) -> Option<&str> {
        self.context.get(key).and_then(Json::as_str)
    }

    pub fn context_frame(&self, key: &str) -> Option<FrameId> {
        self.context.get(key).and_then(Json::as_u64)
    }
}

/// LIFO stack of frames; the last element is the active frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueStack {
    frames: Vec<Frame>,
}

impl DialogueStack {
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn top(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn top_user_flow(&self) -> Option<&Frame> {
        self.frames.iter().rev().find(|f| f.kind == FrameKind::UserFlow)
    }

    pub fn get(&self, id: FrameId) -> Option<&Frame> {
        self.frames.iter().find(|f| f.id == id)
    }

    pub(crate) fn get_mut(&mut self, id: FrameId) -> Option<&mut Frame> {
        self.frames.iter_mut().find(|f| f.id == id)
    }

    pub fn position(&self, id: FrameId) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn user_flow(&self, flow_id: &str) -> Option<&Frame> {
        self.frames
            .iter()
            .find(|f| f.kind == FrameKind::UserFlow && f.flow_id == flow_id)
    }

    /// Frames from top to bottom.
    pub fn iter_top_down(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter().rev()
    }

    pub(crate) fn push(&mut self, frame: Frame) {
        self.frames.push(frame);
    }

    pub(crate) fn move_to_top(&mut self, id: FrameId) {
        if let Some(pos) = self.position(id) {
            let frame = self.frames.remove(pos);
            self.frames.push(frame);
        }
    }

    pub(crate) fn remove(&mut self, id: FrameId) -> Option<Frame> {
        let pos = self.position(id)?;
        Some(self.frames.remove(pos))
    }
}
