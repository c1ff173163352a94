#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Must never panic; on success the decoded audio must be structurally
    // sound and re-encodable.
    if let Ok(wav) = arraysep::signals::parse_wav(data) {
        assert!(wav.n_channels() >= 1 && wav.n_channels() <= 7);
        let len = wav.len();
        for ch in &wav.channels {
            assert_eq!(ch.len(), len);
        }
        let bytes =
            arraysep::signals::encode_wav(&wav, arraysep::signals::WavEncoding::Float32).unwrap();
        let back = arraysep::signals::parse_wav(&bytes).unwrap();
        assert_eq!(back.n_channels(), wav.n_channels());
        assert_eq!(back.len(), wav.len());
    }
});
