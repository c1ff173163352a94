#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = arraysep::model::decode_checkpoint(data) {
        // Anything the decoder accepts must re-encode and decode to the
        // same parameters.
        let bytes = arraysep::model::encode_checkpoint(&state);
        let back = arraysep::model::decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.separator.params, state.separator.params);
        assert_eq!(back.step, state.step);
    }
});
