mod common;

use gdsl_core::model::{CoordKind, GlyphDocument};
use gdsl_core::nlcmd::{
    fill_slot, parse_command, parse_commands, summarize_document, BackendError, LlmBackend,
    MockBackend, ParseResult, Proposal, SlotError, SlotValue,
};
use gdsl_core::ops::{apply, Operation};
use proptest::prelude::*;

use common::criteria::{self, fixture_doc};

#[test]
fn command_corpus() {
    criteria::nl_corpus();
}

#[test]
fn polar_and_vertical_details() {
    let doc = fixture_doc("snowflake@5");
    let r = parse_command("rotate and copy the branch 6 times", &doc, None, None);
    let Operation::CreateRepeater {
        coord_kind, count, ..
    } = &r.proposal().unwrap().operation
    else {
        panic!("repeater expected");
    };
    assert_eq!((*coord_kind, *count), (CoordKind::Polar, 6));

    let doc = fixture_doc("table1@5");
    let sel = "rect1";
    let r = parse_command("Vertically duplicate it twice", &doc, Some(sel), None);
    let Operation::CreateRepeater { coord_kind, .. } = &r.proposal().unwrap().operation else {
        panic!("repeater expected");
    };
    assert_eq!(*coord_kind, CoordKind::Cartesian);
    // without a selection the pronoun has nothing to refer to
    let r = parse_command("Vertically duplicate it twice", &doc, None, None);
    assert!(r.proposal().is_none());
}

#[test]
fn text_list_becomes_values() {
    let doc = fixture_doc("shapes");
    let r = parse_command(
        "change the text to California, Arizona, Texas",
        &doc,
        None,
        None,
    );
    let Operation::EncodeData {
        attribute_path,
        data,
        ..
    } = &r.proposal().unwrap().operation
    else {
        panic!("EncodeData expected");
    };
    assert_eq!(attribute_path, "instance.primitive.content");
    assert_eq!(
        serde_json::to_value(data).unwrap(),
        serde_json::json!({"values": ["California", "Arizona", "Texas"]})
    );
}

#[test]
fn slot_edits() {
    let doc = fixture_doc("shapes");
    let r = parse_command("Change the circle's fill to blue.", &doc, None, None);
    let r2 = fill_slot(&r, "value", SlotValue::Text("#00ff00".into()), &doc).unwrap();
    let Operation::ModifyParams { params, .. } = &r2.proposal().unwrap().operation else {
        panic!()
    };
    assert_eq!(params["primitive.fill"].as_str(), Some("#00ff00"));
    assert_eq!(
        fill_slot(&r, "nope", SlotValue::Number(1.0), &doc),
        Err(SlotError::UnknownSlot("nope".into()))
    );
    let s = parse_command("what day is it today", &doc, None, None);
    assert_eq!(
        fill_slot(&s, "value", SlotValue::Number(1.0), &doc),
        Err(SlotError::NotAProposal)
    );
}

#[test]
fn sentences_parse_in_order() {
    let doc = fixture_doc("table1@7");
    let rs = parse_commands(
        "Randomize petal sizes between 1 and 1.5. what day is it today",
        &doc,
        None,
        None,
    );
    assert_eq!(rs.len(), 2);
    assert!(rs[0].proposal().is_some());
    assert!(rs[1].proposal().is_none());
}

fn bare(operation: Operation) -> ParseResult {
    ParseResult::Proposal {
        proposal: Proposal {
            operation,
            slots: Vec::new(),
            explanation: String::new(),
        },
    }
}

struct Broken;

impl LlmBackend for Broken {
    fn translate(&self, _: &str, _: &str) -> Result<ParseResult, BackendError> {
        let op: Operation = serde_json::from_value(serde_json::json!({
            "op": "ModifyParams", "targetId": "ghost", "params": {"width": 1}
        }))
        .unwrap();
        Ok(bare(op))
    }
}

#[test]
fn backend_output_is_vetted() {
    let doc = fixture_doc("shapes");
    let r = parse_command("make something nice", &doc, None, Some(&Broken));
    assert!(r.proposal().is_none(), "{r:?}");

    let op: Operation = serde_json::from_value(serde_json::json!({
        "op": "ModifyParams", "targetId": "square", "params": {"primitive.width": 30}
    }))
    .unwrap();
    let mock = MockBackend::new().with_response("embiggen the square", bare(op.clone()));
    let r = parse_command("embiggen the square", &doc, None, Some(&mock));
    let p = r.proposal().unwrap();
    assert_eq!(p.operation, op);
    // slots are re-derived from the operation, not trusted from the backend
    assert!(p.slot("target").is_some());
    assert!(!p.explanation.is_empty());
}

#[test]
fn summaries() {
    assert_eq!(summarize_document(&GlyphDocument::new()), "(empty)");
    let doc = fixture_doc("fig4@4");
    let s = summarize_document(&doc);
    assert_eq!(s, summarize_document(&doc.clone()));
    assert_eq!(s.lines().count(), 4);
    for id in ["red circle", "red flower", "green stem", "flowerWithStem"] {
        assert!(s.contains(id), "{s}");
    }
}

proptest! {
    #[test]
    fn arbitrary_text_yields_applicable_proposals(text in "\\PC{0,60}", words in proptest::collection::vec(
        prop_oneof![
            Just("rotate"), Just("copy"), Just("the"), Just("circle"), Just("twice"),
            Just("above"), Just("square"), Just("6"), Just("times"), Just("change"),
            Just("fill"), Just("to"), Just("red"), Just("randomize"), Just("between"),
            Just("1"), Just("and"), Just("-3"), Just("it"), Just("labels"), Just("units"),
        ], 0..10)) {
        let doc = fixture_doc("shapes");
        let sel = "square";
        for input in [text, words.join(" ")] {
            let r = parse_command(&input, &doc, Some(sel), None);
            prop_assert_eq!(&r, &parse_command(&input, &doc, Some(sel), None));
            if let Some(p) = r.proposal() {
                prop_assert!(apply(&doc, &p.operation).is_ok(), "{}: {:?}", input, p.operation);
            }
        }
    }
}
