//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Everything runs offline: scripted understanding
//! and the lexical embedder.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowstack::assistant::{load_flowbook, Assistant, EngineOptions};
use flowstack::command::{validate_commands, Command};
use flowstack::engine::{Engine, EngineConfig};
use flowstack::executor::TurnState;
use flowstack::flow::{Branch, Condition, NextSpec, StepKind, Target};
use flowstack::harness::{run_test_case, Category, ProviderMode, TestConversation, TestStep};
use flowstack::processor::process_commands;
use flowstack::response::{Responder, TableRephraser};
use flowstack::state::{Clock, EventKind, Tracker};
use flowstack::understanding::{hit_at_k, Preselector, ScriptedProvider};
use flowstack::{parse_commands, parse_flowbook, serialize_commands, serialize_flowbook, Value};

use common::load_assistant;

type Check = fn() -> Result<String, String>;

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn deterministic_engine(assistant: &Assistant) -> Engine {
    assistant.engine(&EngineOptions {
        provider: None,
        deterministic: true,
    })
}

fn find<'a>(suite: &'a [TestConversation], name: &str) -> Result<&'a TestConversation, String> {
    suite
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| format!("test `{name}` is missing"))
}

fn bot_texts(tracker: &Tracker) -> Vec<String> {
    tracker
        .events()
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::BotMessage { text, .. } => Some(text.clone()),
            _ => None,
        })
        .collect()
}

/// The three reference transcripts pass with exact bot turns.
fn reference_conversations() -> Result<String, String> {
    let bank = load_assistant("bank");
    let transfer = load_assistant("transfer");
    let cases: [(&Assistant, &str, &[&str]); 3] = [
        (
            &bank,
            "contact_disambiguation",
            &[
                "Would you like to add or remove a contact, or see a list of existing contacts?",
                "What's the handle of the user you want to add?",
            ],
        ),
        (
            &bank,
            "transfer_amount_correction",
            &[
                "Who do you want to transfer money to?",
                "How much money do you want to transfer?",
                "Please confirm: you want to transfer $100 to John?",
                "Ok, I have updated the amount to $110",
                "Please confirm: you want to transfer $110 to John?",
                "Ok. Your transfer is complete.",
            ],
        ),
        (
            &transfer,
            "fee_question_before_confirming",
            &[
                "Just to confirm: you want to transfer $50.00 to Justin?",
                "We will not charge you for this transfer",
                "Your transfer has been completed",
            ],
        ),
    ];
    for (assistant, name, expected) in cases {
        let suite = assistant.tests().map_err(|e| e.to_string())?;
        let test = find(&suite, name)?;
        let engine = deterministic_engine(assistant);
        let (result, tracker) = run_test_case(&engine, test, &ProviderMode::Scripted, &assistant.script);
        ensure(result.passed, || format!("{name} failed: {:?}", result.divergence))?;
        let actual = bot_texts(&tracker);
        ensure(actual == *expected, || format!("{name}: bot turns were {actual:?}"))?;
        if name == "transfer_amount_correction" {
            let confirmations = actual.iter().filter(|t| t.starts_with("Please confirm")).count();
            ensure(confirmations == 2, || format!("{confirmations} confirmation prompts"))?;
            let amount = tracker.slot("transfer_money_amount_of_money");
            ensure(amount == Some(&Value::Float(110.0)), || format!("final amount {amount:?}"))?;
        }
    }
    Ok("disambiguation, correction (2 confirmations, amount 110.0) and context switch match".into())
}

fn literal(raw: &str) -> String {
    format!("/{}", raw.replace('\n', ";"))
}

/// Structure of the complex transfer flow and both branch outcomes.
fn complex_flow() -> Result<String, String> {
    let dir = common::assistant_dir("bank");
    let book = load_flowbook(&dir).map_err(|e| e.to_string())?;
    let flow = book.flows.get("transfer_money").ok_or("transfer_money missing")?;
    ensure(flow.steps.len() == 5, || format!("{} top-level steps", flow.steps.len()))?;
    ensure(flow.steps[1].id.as_deref() == Some("ask_amount"), || "second step id".into())?;
    let NextSpec::Conditional { clauses, otherwise } = &flow.steps[2].next else {
        return Err("funds check has no conditional next".into());
    };
    let expected_condition =
        Condition::Not(Box::new(Condition::Slot("transfer_money_has_sufficient_funds".into())));
    ensure(clauses.len() == 1 && clauses[0].0 == expected_condition, || {
        format!("funds clause {:?}", clauses.first().map(|c| &c.0))
    })?;
    let Branch::Inline(branch) = &clauses[0].1 else {
        return Err("insufficient-funds branch is not inline".into());
    };
    let nulled = branch.iter().find_map(|s| match &s.kind {
        StepKind::SetSlots { assignments } => Some((assignments.clone(), s.next.clone())),
        _ => None,
    });
    let Some((assignments, next)) = nulled else {
        return Err("no set_slots step in the insufficient-funds branch".into());
    };
    let expected: Vec<(String, Option<Value>)> = vec![
        ("transfer_money_amount_of_money".into(), None),
        ("transfer_money_has_sufficient_funds".into(), None),
    ];
    ensure(assignments == expected, || format!("nulled slots {assignments:?}"))?;
    ensure(next == NextSpec::Goto(Target::Step("ask_amount".into())), || format!("jump {next:?}"))?;
    ensure(
        *otherwise == Some(Branch::Goto(Target::Step("transfer_money_final_confirmation".into()))),
        || format!("else branch {otherwise:?}"),
    )?;
    ensure(
        matches!(flow.steps[3].kind, StepKind::Collect { ask_before_filling: true, .. }),
        || "confirmation step does not ask before filling".into(),
    )?;

    // drive the executor through both outcomes of the funds check
    let bank = load_assistant("bank");
    let provider = Arc::new(ScriptedProvider::new().with_literal_prefix('/'));
    let engine = deterministic_engine(&bank).with_provider(provider);
    let mut tracker = engine.new_tracker("complex-flow");
    let start = "StartFlow(transfer_money)\nSetSlot(transfer_money_recipient, John)\nSetSlot(transfer_money_amount_of_money, 5000)";
    let report = engine.run_turn(&mut tracker, &literal(start));
    let texts: Vec<&str> = report.messages.iter().map(|m| m.text.as_str()).collect();
    ensure(
        texts == ["You don't have enough money in your account for this transfer.", "How much money do you want to transfer?"],
        || format!("insufficient branch said {texts:?}"),
    )?;
    ensure(tracker.slot("transfer_money_amount_of_money").is_none(), || "amount not nulled".into())?;
    ensure(tracker.slot("transfer_money_has_sufficient_funds").is_none(), || "funds flag not nulled".into())?;
    ensure(tracker.stack.top().map(|f| f.cursor.as_str()) == Some("ask_amount"), || "not at ask_amount".into())?;

    let report = engine.run_turn(&mut tracker, &literal("SetSlot(transfer_money_amount_of_money, 100)"));
    ensure(
        report.state
            == TurnState::Listening {
                slot: Some("transfer_money_final_confirmation".into()),
            },
        || format!("sufficient branch ended in {:?}", report.state),
    )?;
    let report = engine.run_turn(&mut tracker, &literal("SetSlot(transfer_money_final_confirmation, true)"));
    ensure(report.messages.last().map(|m| m.text.as_str()) == Some("Ok. Your transfer is complete."), || {
        format!("completion said {:?}", report.messages)
    })?;

    // the confirmation slot is still true from the first transfer, yet the
    // second transfer asks again
    ensure(
        tracker.slot("transfer_money_final_confirmation") == Some(&Value::Bool(true)),
        || "confirmation not pre-filled".into(),
    )?;
    let again = "StartFlow(transfer_money)\nSetSlot(transfer_money_recipient, Mary)\nSetSlot(transfer_money_amount_of_money, 20)";
    let report = engine.run_turn(&mut tracker, &literal(again));
    let texts: Vec<&str> = report.messages.iter().map(|m| m.text.as_str()).collect();
    ensure(texts == ["Please confirm: you want to transfer $20 to Mary?"], || {
        format!("pre-filled confirmation said {texts:?}")
    })?;
    Ok("5 steps, nulling branch jumps to ask_amount, both branches and ask_before_filling verified".into())
}

/// Random commands never remove or alter frames already on the stack.
fn injection_safety() -> Result<String, String> {
    const STATES: usize = 500;
    const SEQUENCES: usize = 100_000;
    let bank = load_assistant("bank");
    let domain = bank.domain.clone();
    let flows: Vec<String> = domain.book().flows.keys().cloned().collect();
    let slots: Vec<String> = domain.book().slots.keys().cloned().collect();
    let provider = Arc::new(ScriptedProvider::new().with_literal_prefix('/'));
    let engine = deterministic_engine(&bank).with_provider(provider);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    // reachable states: fresh trackers driven through random turns
    let mut states = Vec::with_capacity(STATES);
    for i in 0..STATES {
        let mut tracker = engine.new_tracker(format!("fuzz-{i}"));
        for _ in 0..rng.gen_range(0..8) {
            let cmds = common::commands(&mut rng, &flows, &slots, 3);
            engine.run_turn(&mut tracker, &literal(&serialize_commands(&cmds)));
        }
        states.push(tracker);
    }
    let deepest = states.iter().map(|t| t.stack.len()).max().unwrap_or(0);
    let non_empty = states.iter().filter(|t| !t.stack.is_empty()).count();

    let mut violations = Vec::new();
    for n in 0..SEQUENCES {
        let state = &states[rng.gen_range(0..states.len())];
        let mut tracker = state.clone();
        tracker.record(EventKind::UserMessage { text: format!("fuzz {n}") });
        let before = tracker.stack.frames().to_vec();
        let start = tracker.events().len();
        let cmds = common::commands(&mut rng, &flows, &slots, 5);
        let validation = validate_commands(&cmds, &domain, &tracker);
        process_commands(&mut tracker, &validation.commands, &domain);
        for event in &tracker.events()[start..] {
            let allowed = matches!(
                event.kind,
                EventKind::FramePushed { .. }
                    | EventKind::FrameMovedToTop { .. }
                    | EventKind::SlotSet { .. }
                    | EventKind::Warning { .. }
            );
            if !allowed {
                violations.push(format!("sequence {n}: emitted {:?}", event.kind));
            }
        }
        for frame in &before {
            if tracker.stack.get(frame.id) != Some(frame) {
                violations.push(format!("sequence {n}: frame {} removed or modified by {cmds:?}", frame.id));
            }
        }
        if violations.len() > 10 {
            break;
        }
    }
    ensure(violations.is_empty(), || violations.join("; "))?;
    Ok(format!(
        "{SEQUENCES} sequences over {STATES} reachable states ({non_empty} with active frames, max depth {deepest}): 0 violations"
    ))
}

/// Replaying each harness conversation's events reproduces its state.
fn event_sourcing() -> Result<String, String> {
    let mut checked = 0;
    for name in ["bank", "transfer"] {
        let assistant = load_assistant(name);
        let engine = deterministic_engine(&assistant);
        for test in assistant.tests().map_err(|e| e.to_string())? {
            let (_, tracker) = run_test_case(&engine, &test, &ProviderMode::Scripted, &assistant.script);
            let replayed = Tracker::replay(tracker.conversation_id.clone(), tracker.events().iter().cloned());
            ensure(replayed.slots == tracker.slots, || format!("{}: slots differ after replay", test.name))?;
            ensure(replayed.stack == tracker.stack, || format!("{}: stack differs after replay", test.name))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} conversations replay to identical slots and stack"))
}

/// Size, category spread, turn spread and pass rate of the bundled suite.
fn category_coverage() -> Result<String, String> {
    let bank = load_assistant("bank");
    let report = bank.run_tests(None).map_err(|e| e.to_string())?;
    ensure(report.total >= 40, || format!("only {} tests", report.total))?;
    for category in Category::ALL {
        let count = report.tests.iter().filter(|t| t.category == category).count();
        ensure(count >= 2, || format!("{category}: {count} tests"))?;
    }
    let min = report.tests.iter().map(|t| t.turns).min().unwrap_or(0);
    let max = report.tests.iter().map(|t| t.turns).max().unwrap_or(0);
    ensure(min == 2 && max >= 15, || format!("turns range {min}..{max}"))?;
    let failed: Vec<&str> = report.tests.iter().filter(|t| !t.passed).map(|t| t.name.as_str()).collect();
    ensure(failed.is_empty() && report.pass_rate == 1.0, || format!("failing: {failed:?}"))?;
    Ok(format!(
        "{} tests across 10 categories, turns {min}..{max}, pass rate 100%",
        report.total
    ))
}

#[derive(serde::Deserialize)]
struct QuerySet {
    queries: Vec<LabelledQuery>,
    #[serde(default)]
    disjoint: Vec<LabelledQuery>,
}

#[derive(serde::Deserialize)]
struct LabelledQuery {
    query: String,
    flow: String,
}

/// Flow pre-selection recall and monotonicity in k.
fn retrieval() -> Result<String, String> {
    let dir = common::assistant_dir("bank");
    let book = load_flowbook(&dir).map_err(|e| e.to_string())?;
    let n = book.flows.len();
    ensure(n >= 30, || format!("catalog has only {n} flows"))?;
    let preselector = Preselector::lexical(&book);
    let own: Vec<(String, String)> = book
        .flows
        .values()
        .map(|f| (f.description.clone(), f.id.clone()))
        .collect();
    let hit1 = hit_at_k(&own, 1, &preselector);
    ensure(hit1 == 1.0, || format!("self-description Hit@1 = {hit1}"))?;

    let text = std::fs::read_to_string(dir.join("retrieval/paraphrases.yml")).map_err(|e| e.to_string())?;
    let set: QuerySet = serde_yaml::from_str(&text).map_err(|e| e.to_string())?;
    let pairs = |qs: Vec<LabelledQuery>| -> Vec<(String, String)> { qs.into_iter().map(|q| (q.query, q.flow)).collect() };
    let disjoint = pairs(set.disjoint);
    let paraphrases = pairs(set.queries);
    for (_, flow) in &paraphrases {
        ensure(book.flows.contains_key(flow), || format!("query labelled with unknown flow {flow}"))?;
    }
    let hit20 = hit_at_k(&paraphrases, 20, &preselector);
    ensure(hit20 == 1.0, || format!("paraphrase Hit@20 = {hit20}"))?;
    let paraphrase_hit1 = hit_at_k(&paraphrases, 1, &preselector);
    let disjoint_hit20 = if disjoint.is_empty() { 0.0 } else { hit_at_k(&disjoint, 20, &preselector) };

    for (query, _) in own.iter().chain(&paraphrases) {
        let mut previous: BTreeSet<String> = BTreeSet::new();
        for k in 1..=n {
            let selected = preselector.preselect(query, k);
            let set: BTreeSet<String> = selected.iter().cloned().collect();
            ensure(selected.len() == k && set.len() == k, || format!("`{query}`: k={k} gave {}", selected.len()))?;
            ensure(previous.is_subset(&set), || format!("`{query}`: top-{} not within top-{k}", k - 1))?;
            previous = set;
        }
    }
    Ok(format!(
        "{n} flows: self Hit@1 = 1.00, paraphrase Hit@20 = {hit20:.2} over {} queries (Hit@1 {paraphrase_hit1:.2}), monotone for k = 1..{n}; {} disjoint-vocabulary queries (not gated) Hit@20 {disjoint_hit20:.2}",
        paraphrases.len(),
        disjoint.len()
    ))
}

/// Parsing inverts serialization for flow books and command lists.
fn round_trips() -> Result<String, String> {
    const INSTANCES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..INSTANCES {
        let book = common::flowbook(&mut rng);
        let text = serialize_flowbook(&book);
        let doc = flowstack::flow::SourceDocument::new("roundtrip", text.clone());
        let parsed = parse_flowbook(&[doc]).map_err(|e| format!("book {i} does not parse: {e:?}\n{text}"))?;
        ensure(parsed == book, || format!("book {i} changed in a round trip:\n{text}"))?;
    }
    let flows: Vec<String> = (0..8).map(|_| common::identifier(&mut rng)).collect();
    let slots: Vec<String> = (0..8).map(|_| common::identifier(&mut rng)).collect();
    for i in 0..INSTANCES {
        let cmds: Vec<Command> = common::commands(&mut rng, &flows, &slots, 6);
        let text = serialize_commands(&cmds);
        let (parsed, errors) = parse_commands(&text);
        ensure(errors.is_empty(), || format!("commands {i}: {errors:?}\n{text}"))?;
        ensure(parsed == cmds, || format!("commands {i} changed in a round trip:\n{text}"))?;
    }
    Ok(format!("{INSTANCES} flow books and {INSTANCES} command lists round-trip"))
}

/// Plays every user turn of a test regardless of what the bot says, so
/// reworded replies cannot cut the conversation short.
fn drive(engine: &Engine, test: &TestConversation, shared: &HashMap<String, String>) -> Tracker {
    let users: Vec<(&String, &Option<Vec<Command>>)> = test
        .steps
        .iter()
        .filter_map(|s| match s {
            TestStep::User { text, commands } => Some((text, commands)),
            _ => None,
        })
        .collect();
    let mut script = ScriptedProvider::new();
    for (turn, (text, commands)) in users.iter().enumerate() {
        let raw = match commands {
            Some(c) => Some(serialize_commands(c)),
            None => shared.get(*text).cloned(),
        };
        if let Some(raw) = raw {
            script.set_turn_raw(turn, raw);
        }
    }
    let engine = engine.with_provider(Arc::new(script));
    let mut tracker = engine.new_tracker(test.name.clone());
    for (text, _) in users {
        engine.run_turn(&mut tracker, text);
    }
    tracker
}

/// Reports are reproducible and rephrasing never touches dialogue state.
fn determinism() -> Result<String, String> {
    for name in ["bank", "transfer"] {
        let assistant = load_assistant(name);
        let first = assistant.run_tests(None).map_err(|e| e.to_string())?;
        let second = assistant.run_tests(None).map_err(|e| e.to_string())?;
        ensure(first.to_json() == second.to_json(), || format!("{name}: JSON reports differ"))?;
        ensure(first.to_text() == second.to_text(), || format!("{name}: text reports differ"))?;
        // and through the command line, as a user would run it
        for format in ["text", "json"] {
            let dir = common::assistant_dir(name);
            let run = || {
                std::process::Command::new(env!("CARGO_BIN_EXE_flowstack"))
                    .args(["test", dir.to_str().unwrap_or_default(), "--format", format])
                    .env("RUST_LOG", "off")
                    .output()
                    .map_err(|e| e.to_string())
            };
            let (a, b) = (run()?, run()?);
            ensure(a.status.success() && !a.stdout.is_empty(), || format!("{name}: `flowstack test` failed"))?;
            ensure(a.stdout == b.stdout, || format!("{name}: CLI {format} reports differ"))?;
        }
    }

    let bank = load_assistant("bank");
    let plain = deterministic_engine(&bank);
    let with_rephraser = |rephraser: TableRephraser| {
        let responder = Responder {
            knowledge: bank.knowledge.clone(),
            knowledge_top_k: bank.config.knowledge.top_k,
            rephraser: Some(Arc::new(rephraser)),
            ..Responder::new()
        };
        Engine::new(
            bank.domain.clone(),
            bank.registry.clone(),
            Arc::new(responder),
            Arc::new(ScriptedProvider::new()),
            EngineConfig {
                clock: Clock::Logical,
                ..EngineConfig::default()
            },
        )
    };
    let pass_through = with_rephraser(TableRephraser::default());
    let rewording = with_rephraser(TableRephraser::new(HashMap::from([
        ("How much money do you want to transfer?".to_string(), "And how much should I send?".to_string()),
        ("Ok. Your transfer is complete.".to_string(), "All done, the money is on its way.".to_string()),
    ])));
    let suite = bank.tests().map_err(|e| e.to_string())?;
    let mut reworded = 0;
    for test in &suite {
        let a = drive(&plain, test, &bank.script);
        let b = drive(&pass_through, test, &bank.script);
        ensure(a == b, || format!("{}: pass-through rephrasing changed the tracker", test.name))?;
        let c = drive(&rewording, test, &bank.script);
        ensure(a.slots == c.slots && a.stack == c.stack, || {
            format!("{}: rewording changed slots or stack", test.name)
        })?;
        reworded += c
            .events()
            .iter()
            .filter(|e| matches!(&e.kind, EventKind::BotMessage { original: Some(_), .. }))
            .count();
    }
    ensure(reworded > 0, || "the rewording table never applied".into())?;
    Ok(format!(
        "two runs give byte-identical reports (library and CLI, text and JSON); pass-through rephrasing leaves {} trackers identical; {reworded} reworded messages keep state",
        suite.len()
    ))
}

fn main() -> ExitCode {
    let checks: [(u8, &str, Check); 8] = [
        (1, "reference conversations", reference_conversations),
        (2, "complex flow parse and execution", complex_flow),
        (3, "injection safety", injection_safety),
        (4, "event sourcing", event_sourcing),
        (5, "category coverage", category_coverage),
        (6, "retrieval", retrieval),
        (7, "round trips", round_trips),
        (8, "determinism", determinism),
    ];
    let started = Instant::now();
    let mut failures = 0;
    panic::set_hook(Box::new(|_| {}));
    for (id, name, check) in checks {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let message = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {message}"))
        });
        let elapsed = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}, {elapsed:.1}s): {detail}"),
            Err(reason) => {
                failures += 1;
                println!("FAIL criterion {id} ({name}, {elapsed:.1}s): {reason}");
            }
        }
    }
    println!(
        "{} of 8 criteria passed in {:.1}s",
        8 - failures,
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
