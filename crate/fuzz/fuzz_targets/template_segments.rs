#![no_main]
use libfuzzer_sys::fuzz_target;
use storyloom_core::template::{parse_segments, PromptTemplate, Segment};

fuzz_target!(|body: &str| {
    let rebuilt: String = parse_segments(body)
        .iter()
        .map(|s| match s {
            Segment::Literal(text) => text.clone(),
            Segment::Placeholder(name) => format!("{{{name}}}"),
        })
        .collect();
    assert_eq!(rebuilt, body);

    let template = PromptTemplate::new("fuzz", body);
    let _ = template.extract_bindings(body);
    let _ = template.strip_bindings(body);
});
