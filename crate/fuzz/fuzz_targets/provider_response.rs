#![no_main]
use libfuzzer_sys::fuzz_target;
use storyloom_service::http_provider::{decode_image_response, decode_text_response};

fuzz_target!(|data: &[u8]| {
    if let Ok(value) = decode_text_response(data) {
        assert!(value.is_object());
    }
    let _ = decode_image_response(data);
});
