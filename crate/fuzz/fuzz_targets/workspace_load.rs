#![no_main]
use libfuzzer_sys::fuzz_target;
use storyloom_core::workspace::{load_workspace, save_workspace};

fuzz_target!(|data: &[u8]| {
    if let Ok(ws) = load_workspace(data) {
        let bytes = save_workspace(&ws);
        let back = load_workspace(&bytes).expect("saved workspace must load");
        assert_eq!(back, ws);
        assert_eq!(save_workspace(&back), bytes);
    }
});
