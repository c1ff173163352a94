#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for line in text.lines() {
        if let Ok(entry) = arraysep::dataset::parse_manifest_line(line) {
            // Parsed entries must survive validation logic and re-serialize.
            let _ = entry.validate();
            let json = serde_json::to_string(&entry).unwrap();
            let back = arraysep::dataset::parse_manifest_line(&json).unwrap();
            assert_eq!(back.id, entry.id);
        }
    }
});
