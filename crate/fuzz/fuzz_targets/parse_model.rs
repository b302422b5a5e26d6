#![no_main]

use libfuzzer_sys::fuzz_target;
use numkit_core::model::{parse_model, serialize_model};

fuzz_target!(|data: &str| {
    if let Ok(model) = parse_model(data) {
        let text = serialize_model(&model);
        let again = parse_model(&text).expect("serialized model parses");
        assert_eq!(serialize_model(&again), text);
    }
});
