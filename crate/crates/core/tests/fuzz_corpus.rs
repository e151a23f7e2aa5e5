use std::fs;
use std::path::PathBuf;

use physbox::curriculum::{parse_log, replay};
use physbox::eval::ASuccessReport;
use physbox::gateway::{read_frame, FrameDecoder, Message, Session};
use physbox::nn::EncoderCheckpoint;
use physbox::worldgen::{generate, PuzzleConfig, TestSuite};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn frame_seeds_decode_identically_in_pieces() {
    for (name, data) in seeds("frame_decoder") {
        let mut whole = Vec::new();
        let mut r = &data[..];
        while let Ok(Some(f)) = read_frame(&mut r, 4096) {
            whole.push(f);
        }
        let mut d = FrameDecoder::new(4096);
        let mut split = Vec::new();
        'outer: for b in &data {
            d.push(std::slice::from_ref(b));
            loop {
                match d.next_frame() {
                    Ok(Some(f)) => split.push(f),
                    Ok(None) => break,
                    Err(_) => break 'outer,
                }
            }
        }
        assert_eq!(whole, split, "{name}");
    }
}

#[test]
fn message_seeds_round_trip() {
    for (name, data) in seeds("message") {
        let m = Message::from_bytes(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(m.to_bytes(), data, "{name}");
    }
}

#[test]
fn session_seed_runs_to_completion() {
    for (name, data) in seeds("session") {
        let mut s = Session::new(1);
        for payload in data.split(|&b| b == b'\n').filter(|p| !p.is_empty()) {
            let r = s.handle_frame(payload);
            assert!(!r.closes(), "{name}: {:?}", r.message);
        }
    }
}

#[test]
fn puzzle_seeds_parse_and_generate() {
    for (name, data) in seeds("puzzle_config") {
        let c = PuzzleConfig::from_text(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        generate(&c).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn suite_seeds_parse() {
    for (name, data) in seeds("test_suite") {
        let s = TestSuite::from_text(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.puzzles.len(), 100);
    }
}

#[test]
fn checkpoint_seeds_round_trip() {
    for (name, data) in seeds("checkpoint") {
        let ck = EncoderCheckpoint::from_bytes(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(ck.to_bytes().unwrap(), data, "{name}");
    }
}

#[test]
fn log_seeds_replay_consistently() {
    for (name, data) in seeds("exploration_log") {
        let records = parse_log(&data[..]).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(replay(&records).unwrap().is_consistent(), "{name}");
    }
}

#[test]
fn report_seeds_validate() {
    for (name, data) in seeds("report") {
        ASuccessReport::from_text(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
