//! End-to-end conversation tests: file format, runner and report.

mod format;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write;
use std::sync::Arc;

use serde::Serialize;

pub use format::{parse_test_file, Category, TestConversation, TestStep};

use crate::command::serialize_commands;
use crate::engine::Engine;
use crate::executor::BotUtterance;
use crate::state::Tracker;
use crate::understanding::{CommandProvider, ScriptedProvider};
use crate::value::display_optional;

/// Where a test first diverged from the expected conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// Index into the test's steps.
    pub step: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub category: Category,
    pub passed: bool,
    pub turns: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryCount {
    pub category: Category,
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub tests: Vec<TestResult>,
    /// Every category, in a fixed order, including empty ones.
    pub categories: Vec<CategoryCount>,
    pub total: usize,
    pub passed: usize,
    /// 1.0 for an empty suite.
    pub pass_rate: f64,
    pub turn_stats: Option<TurnStats>,
    /// Non-blank, non-comment lines of the assistant's domain and test files.
    pub lines_of_code: Option<usize>,
}

/// How understanding is driven during a test run.
#[derive(Clone, Default)]
pub enum ProviderMode {
    /// Each test's `commands` (or the shared message table) are replayed.
    #[default]
    Scripted,
    /// The engine's own provider is used, ignoring fixture commands.
    Engine,
    Custom(Arc<dyn CommandProvider>),
}

/// Runs one conversation in a fresh tracker. The tracker is returned for
/// further inspection.
pub fn run_test_case(
    engine: &Engine,
    test: &TestConversation,
    mode: &ProviderMode,
    shared_script: &HashMap<String, String>,
) -> (TestResult, Tracker) {
    let engine = match mode {
        ProviderMode::Scripted => engine.with_provider(Arc::new(script_for(test, shared_script))),
        ProviderMode::Engine => engine.clone(),
        ProviderMode::Custom(p) => engine.with_provider(p.clone()),
    };
    let mut tracker = engine.new_tracker(test.name.clone());
    let mut pending: VecDeque<BotUtterance> = VecDeque::new();
    let mut divergence = None;
    for (i, step) in test.steps.iter().enumerate() {
        let fail = |expected: String, actual: String| Some(Divergence { step: i, expected, actual });
        match step {
            TestStep::User { text, .. } => {
                if let Some(extra) = pending.front() {
                    divergence = fail(format!("user message `{text}`"), describe(extra));
                    break;
                }
                pending = engine.run_turn(&mut tracker, text).messages.into();
            }
            TestStep::Utter(id) => match pending.pop_front() {
                Some(m) if m.template.as_deref() == Some(id.as_str()) => {}
                Some(m) => {
                    divergence = fail(format!("utter `{id}`"), describe(&m));
                    break;
                }
                None => {
                    divergence = fail(format!("utter `{id}`"), "no further bot message".into());
                    break;
                }
            },
            TestStep::Bot(text) => match pending.pop_front() {
                Some(m) if &m.text == text => {}
                Some(m) => {
                    divergence = fail(format!("bot `{text}`"), describe(&m));
                    break;
                }
                None => {
                    divergence = fail(format!("bot `{text}`"), "no further bot message".into());
                    break;
                }
            },
            TestStep::SlotWasSet(expected) => {
                let wrong = expected.iter().find(|(slot, value)| tracker.slot(slot) != value.as_ref());
                if let Some((slot, value)) = wrong {
                    divergence = fail(
                        format!("slot `{slot}` = {}", display_optional(value.as_ref())),
                        format!("slot `{slot}` = {}", display_optional(tracker.slot(slot))),
                    );
                    break;
                }
            }
        }
    }
    if divergence.is_none() {
        if let Some(extra) = pending.front() {
            divergence = Some(Divergence {
                step: test.steps.len(),
                expected: "end of conversation".into(),
                actual: describe(extra),
            });
        }
    }
    let result = TestResult {
        name: test.name.clone(),
        category: test.category,
        passed: divergence.is_none(),
        turns: test.turns(),
        divergence,
    };
    (result, tracker)
}

fn describe(m: &BotUtterance) -> String {
    match &m.template {
        Some(t) => format!("bot `{}` ({t})", m.text),
        None => format!("bot `{}`", m.text),
    }
}

/// Turn-indexed script for a test: fixture commands where given, else the
/// shared message table.
fn script_for(test: &TestConversation, shared: &HashMap<String, String>) -> ScriptedProvider {
    let mut script = ScriptedProvider::new();
    let users = test.steps.iter().filter_map(|s| match s {
        TestStep::User { text, commands } => Some((text, commands)),
        _ => None,
    });
    for (turn, (text, commands)) in users.enumerate() {
        match commands {
            Some(c) => script.set_turn_raw(turn, serialize_commands(c)),
            None => {
                if let Some(raw) = shared.get(text) {
                    script.set_turn_raw(turn, raw.clone());
                }
            }
        }
    }
    script
}

pub fn run_tests(
    engine: &Engine,
    suite: &[TestConversation],
    mode: &ProviderMode,
    shared_script: &HashMap<String, String>,
) -> TestReport {
    let results: Vec<TestResult> = suite
        .iter()
        .map(|t| run_test_case(engine, t, mode, shared_script).0)
        .collect();
    summarize(results)
}

pub fn summarize(tests: Vec<TestResult>) -> TestReport {
    let categories = Category::ALL
        .iter()
        .map(|&category| CategoryCount {
            category,
            passed: tests.iter().filter(|t| t.category == category && t.passed).count(),
            total: tests.iter().filter(|t| t.category == category).count(),
        })
        .collect();
    let total = tests.len();
    let passed = tests.iter().filter(|t| t.passed).count();
    let turn_stats = (!tests.is_empty()).then(|| TurnStats {
        min: tests.iter().map(|t| t.turns).min().unwrap_or(0),
        max: tests.iter().map(|t| t.turns).max().unwrap_or(0),
        mean: tests.iter().map(|t| t.turns).sum::<usize>() as f64 / total as f64,
    });
    TestReport {
        tests,
        categories,
        total,
        passed,
        pass_rate: if total == 0 { 1.0 } else { passed as f64 / total as f64 },
        turn_stats,
        lines_of_code: None,
    }
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tests {
            let status = if t.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status}  {:<16} {}", t.category.as_str(), t.name);
            if let Some(d) = &t.divergence {
                let _ = writeln!(out, "      at step {}: expected {}, got {}", d.step, d.expected, d.actual);
            }
        }
        let _ = writeln!(out, "\n{:<18} {:>6} {:>6}", "category", "passed", "total");
        for c in &self.categories {
            let _ = writeln!(out, "{:<18} {:>6} {:>6}", c.category.as_str(), c.passed, c.total);
        }
        let _ = writeln!(
            out,
            "\ntotal: {}/{} passed ({:.1}%)",
            self.passed,
            self.total,
            self.pass_rate * 100.0
        );
        if let Some(s) = &self.turn_stats {
            let _ = writeln!(out, "turns per test: min {}, max {}, mean {:.1}", s.min, s.max, s.mean);
        }
        if let Some(loc) = self.lines_of_code {
            let _ = writeln!(out, "lines of code and data: {loc}");
        }
        out
    }
}

/// Lines that are neither blank nor `#` comments.
pub fn count_loc(text: &str) -> usize {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .count()
}
