#![no_main]

use libfuzzer_sys::fuzz_target;
use numkit_core::mc::{encode_path_dump, read_path_dump};

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = read_path_dump(data) {
        assert_eq!(encode_path_dump(&dump), data);
    }
});
