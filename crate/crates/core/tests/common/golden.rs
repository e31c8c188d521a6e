//! Golden serialization fixtures for the sample prompt and Seq(q) templates.

use std::path::PathBuf;

use concept_forge::quintuple::{format_seq, parse_seq, serialize_seq, BoundSentence, Quintuple};
use concept_forge::sampler::{parse_sample, serialize_sample, Label, LinkSample};
use concept_forge::PromptWord;
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden_cases() -> Vec<Value> {
    std::fs::read_to_string(fixture("serialization_golden.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Returns the number of golden cases whose serialization differs.
pub fn golden_mismatches() -> (usize, usize) {
    let cases = golden_cases();
    let mut bad = 0;
    for c in &cases {
        let s = |k: &str| c[k].as_str().unwrap().to_string();
        let expected = s("expected");
        let got = match c["kind"].as_str().unwrap() {
            "sample" => {
                let prompt: PromptWord = s("prompt").parse().unwrap();
                let t = c["t"].as_i64().unwrap() as i32;
                let text = serialize_sample(&s("c_u"), &s("c_v"), t, prompt);
                let via_sample = LinkSample::new(&s("c_u"), &s("c_v"), t, prompt, Label::Related).text;
                if via_sample != text || parse_sample(&text).unwrap() != (s("c_u"), s("c_v"), t, prompt) {
                    bad += 1;
                }
                text
            }
            _ => {
                let mut q = Quintuple::new("pi", "pj", &s("c_u"), &s("c_v"), "p");
                q.sent_i = Some(BoundSentence { index: 0, text: s("sent_i"), section: None });
                q.sent_j = Some(BoundSentence { index: 0, text: s("sent_j"), section: None });
                let text = serialize_seq(&q).unwrap();
                if text != format_seq(&s("c_u"), &s("c_v"), &s("sent_i"), &s("sent_j"))
                    || parse_seq(&text).unwrap() != (s("c_u"), s("c_v"), s("sent_i"), s("sent_j"))
                {
                    bad += 1;
                }
                text
            }
        };
        if got != expected {
            bad += 1;
        }
    }
    (bad, cases.len())
}

