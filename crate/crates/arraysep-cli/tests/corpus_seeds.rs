//! Keeps the checked-in fuzz corpus seeds in sync with the parsers: the
//! "valid" seeds must parse, the "rejected" seeds must fail cleanly.

use std::path::PathBuf;

fn corpus(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

#[test]
fn wav_seeds() {
    let dir = corpus("wav_parse");
    let ok = ["pcm16_mono.wav", "float32_3ch.wav", "extra_chunk.wav"];
    for name in ok {
        let bytes = std::fs::read(dir.join(name)).unwrap();
        let wav = arraysep::signals::parse_wav(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(wav.len() > 0);
    }
    let bad = std::fs::read(dir.join("bad_rate.wav")).unwrap();
    assert!(matches!(
        arraysep::signals::parse_wav(&bad),
        Err(arraysep::signals::SignalError::SampleRate { found: 8000 })
    ));
}

#[test]
fn manifest_seed() {
    let line = std::fs::read_to_string(corpus("manifest_parse").join("entry.jsonl")).unwrap();
    let entry = arraysep::dataset::parse_manifest_line(line.lines().next().unwrap()).unwrap();
    entry.validate().unwrap();
    let garbage = std::fs::read_to_string(corpus("manifest_parse").join("garbage.jsonl")).unwrap();
    for l in garbage.lines() {
        assert!(arraysep::dataset::parse_manifest_line(l).is_err());
    }
}

#[test]
fn config_seeds() {
    for name in ["defaults.json", "full.json"] {
        let text = std::fs::read_to_string(corpus("config_parse").join(name)).unwrap();
        let cfg = arraysep_cli::config::parse_config(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(arraysep_cli::config::config_hash(&cfg).len(), 16);
    }
}

#[test]
fn checkpoint_seeds() {
    let dir = corpus("checkpoint_parse");
    let valid = std::fs::read(dir.join("micro_valid.ckpt")).unwrap();
    let state = arraysep::model::decode_checkpoint(&valid).expect("micro seed decodes");
    assert_eq!(state.step, 3);
    assert_eq!(state.separator.config.n_bins, 4);
    // Round trip through the encoder.
    let bytes = arraysep::model::encode_checkpoint(&state);
    let back = arraysep::model::decode_checkpoint(&bytes).unwrap();
    assert_eq!(back.separator.params, state.separator.params);

    let mismatch = std::fs::read(dir.join("shape_mismatch.ckpt")).unwrap();
    assert!(arraysep::model::decode_checkpoint(&mismatch).is_err());
}
