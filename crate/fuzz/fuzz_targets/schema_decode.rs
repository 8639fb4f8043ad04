#![no_main]
use libfuzzer_sys::fuzz_target;
use storyloom_core::artifact::ArtifactKind;
use storyloom_core::schema;

fuzz_target!(|data: &[u8]| {
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(data) else {
        return;
    };
    for kind in [ArtifactKind::Persona, ArtifactKind::Problem, ArtifactKind::Solution] {
        if let Ok(items) = schema::decode_ideas(kind, &value) {
            let encoded = schema::encode_ideas(kind, &items);
            assert_eq!(schema::decode_ideas(kind, &encoded).ok(), Some(items));
        }
    }
    if let Ok(outline) = schema::decode_outline(&value) {
        assert!(outline.frames.len() >= schema::MIN_OUTLINE_FRAMES);
    }
    let _ = schema::decode_image_prompts(&value, 4);
    let _ = schema::decode_image_prompt(&value);
    let _ = schema::decode_character(&value);
    let _ = schema::decode_questions(&value);
    let _ = schema::decode_suggestions(&value);
});
