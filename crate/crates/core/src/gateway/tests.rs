use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::*;
use crate::env::OBS_LEN;

fn req(kind: MessageType, seq: u64) -> Message {
    Message::new(kind, Some(seq))
}

fn greeted() -> Session {
    let mut s = Session::new(7);
    let r = s.handle(req(MessageType::Hello, 1).with("version", "1"));
    assert_eq!(r.message.kind, MessageType::Hello);
    s
}

fn text(r: &Reply, key: &str) -> String {
    r.message.payload[key].as_str().unwrap_or_default().to_string()
}

#[test]
fn frames_round_trip_in_any_chunking() {
    let payloads: Vec<Vec<u8>> = vec![b"{}".to_vec(), vec![], vec![7; 300]];
    let wire: Vec<u8> = payloads.iter().flat_map(|p| encode_frame(p)).collect();
    assert_eq!(&wire[..6], &[0, 0, 0, 2, b'{', b'}']);
    for chunk in [1, 3, 7, wire.len()] {
        let mut d = FrameDecoder::default();
        let mut got = Vec::new();
        for c in wire.chunks(chunk) {
            d.push(c);
            while let Some(f) = d.next_frame().unwrap() {
                got.push(f);
            }
        }
        assert_eq!(got, payloads);
        assert_eq!(d.pending(), 0);
    }
    let mut r = &wire[..];
    assert_eq!(read_frame(&mut r, MAX_FRAME_LEN).unwrap().unwrap(), b"{}");
    let mut cut = &wire[..wire.len() - 1];
    let _ = read_frame(&mut cut, MAX_FRAME_LEN).unwrap();
    let _ = read_frame(&mut cut, MAX_FRAME_LEN).unwrap();
    assert!(matches!(read_frame(&mut cut, MAX_FRAME_LEN), Err(FrameError::Truncated)));
    let mut d = FrameDecoder::new(10);
    d.push(&encode_frame(&[0; 11]));
    assert!(matches!(d.next_frame(), Err(FrameError::TooLarge { len: 11, max: 10 })));
}

#[test]
fn hello_acknowledges_with_session_and_version() {
    let mut s = Session::new(7);
    let r = s.handle(req(MessageType::Hello, 1).with("version", "1"));
    assert_eq!(r.message.kind, MessageType::Hello);
    assert_eq!(r.message.session, Some(7));
    assert_eq!(r.message.seq, Some(1));
    assert_eq!(text(&r, "version"), "1");
}

#[test]
fn protocol_violations_close_the_session() {
    let mut s = Session::new(1);
    let r = s.handle(req(MessageType::Hello, 1).with("version", "2"));
    assert!(r.closes());
    assert!(s.is_closed());

    let mut s = Session::new(1);
    assert!(s.handle(req(MessageType::Reset, 1)).closes());

    let mut s = greeted();
    assert!(s.handle(req(MessageType::Reset, 1)).closes());
}

#[test]
fn step_before_reset_is_an_error() {
    let mut s = greeted();
    let r = s.handle(req(MessageType::Step, 2).with("action", 0));
    assert_eq!(r.message.kind, MessageType::Error);
    assert_eq!(text(&r, "message"), "episode not started");
    assert!(!s.is_closed());
}

#[test]
fn malformed_and_unknown_messages_keep_the_session() {
    let mut s = greeted();
    let r = s.handle_frame(b"{not json");
    assert_eq!(r.message.kind, MessageType::Error);
    let r = s.handle_frame(br#"{"type":"teleport","seq":2}"#);
    assert_eq!(r.message.kind, MessageType::Error);
    let r = s.handle(req(MessageType::Result, 3));
    assert_eq!(r.message.kind, MessageType::Error);
    let r = s.handle(req(MessageType::Configure, 4).with("action_space", "small"));
    assert_eq!(r.message.kind, MessageType::Error);
    let r = s.handle(req(MessageType::AddChangePuzzle, 5).with("mode", 1).with("task", 9));
    assert_eq!(r.message.kind, MessageType::Error);
    let r = s.handle(req(MessageType::AddChangePuzzle, 6).with("mode", 0).with("seed", 3));
    assert_eq!(r.message.kind, MessageType::Result);
    assert!(!s.is_closed());
    let r = s.handle(req(MessageType::Step, 7).with("action", 8));
    assert_eq!(r.message.kind, MessageType::Error);
}

#[test]
fn task_codes_install_matching_worlds() {
    let mut s = greeted();
    let r = s.handle(req(MessageType::AddChangePuzzle, 2).with("mode", 1).with("task", 3).with("seed", 11));
    assert_eq!(text(&r, "task"), "avoidance");
    s.handle(req(MessageType::Reset, 3));
    let snap = s.handle(req(MessageType::StateSnapshot, 4));
    let kinds: Vec<String> = snap.message.payload["bodies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["kind"].as_str().unwrap().to_string())
        .collect();
    assert!(kinds.contains(&"danger_region".to_string()), "{kinds:?}");
}

#[test]
fn skip_frame_sets_ticks_per_step() {
    let mut s = greeted();
    s.handle(req(MessageType::AddChangePuzzle, 2).with("mode", 0).with("seed", 1));
    s.handle(req(MessageType::Reset, 3));
    let tick = |r: &Reply| r.message.payload["info"]["tick"].as_u64().unwrap();
    let cfg = s.handle(req(MessageType::Configure, 4).with("skip_frame", true));
    assert_eq!(cfg.message.payload["settings"]["frame_skip"], json!(4));
    let a = tick(&s.handle(req(MessageType::Step, 5).with("action", 1)));
    let b = tick(&s.handle(req(MessageType::Step, 6).with("action", 1)));
    assert_eq!(b - a, 4);
    s.handle(req(MessageType::Configure, 7).with("skip_frame", false));
    let c = tick(&s.handle(req(MessageType::Step, 8).with("action", 1)));
    assert_eq!(c - b, 1);
}

/// Greedy steering at the yellow goal from decoded pixels.
fn drive_to_goal(s: &mut Session, mut seq: u64, mut pixels: Vec<u8>) -> Vec<f64> {
    use crate::eval::{ColorSeeker, SuiteActor};
    let mut rewards = Vec::new();
    let mut rng = crate::seed::stream(0, "t", 0);
    for _ in 0..100 {
        let a = ColorSeeker::default().act(&pixels, &mut rng).unwrap();
        let r = s.handle(req(MessageType::Step, seq).with("action", a));
        seq += 1;
        rewards.push(r.message.payload["reward"].as_f64().unwrap());
        if r.message.payload["done"] == json!(true) {
            break;
        }
        pixels = base64::engine::general_purpose::STANDARD.decode(text(&r, "pixels")).unwrap();
    }
    rewards
}

#[test]
fn turning_off_reward_zeroes_it() {
    let mut totals = Vec::new();
    for off in [false, true] {
        let mut s = greeted();
        s.handle(req(MessageType::Configure, 2).with("turn_off_reward", off));
        s.handle(req(MessageType::AddChangePuzzle, 3).with("mode", 1).with("task", 1).with("seed", 5));
        let r = s.handle(req(MessageType::Reset, 4));
        let px = base64::engine::general_purpose::STANDARD.decode(text(&r, "pixels")).unwrap();
        assert_eq!(px.len(), OBS_LEN);
        totals.push(drive_to_goal(&mut s, 5, px).iter().sum::<f64>());
    }
    assert_eq!(totals, vec![1.0, 0.0]);
}

#[test]
fn binary_mode_sends_a_pixel_frame() {
    let mut s = greeted();
    s.handle(req(MessageType::Configure, 2).with("observation", "binary"));
    s.handle(req(MessageType::AddChangePuzzle, 3).with("mode", 0).with("seed", 2));
    let r = s.handle(req(MessageType::Reset, 4));
    assert_eq!(r.message.payload["pixel_frame"], Value::Bool(true));
    assert_eq!(r.binary.as_ref().unwrap().len(), OBS_LEN);
    let mut d = FrameDecoder::default();
    d.push(&r.to_wire());
    assert!(Message::from_bytes(&d.next_frame().unwrap().unwrap()).is_ok());
    assert_eq!(d.next_frame().unwrap().unwrap().len(), OBS_LEN);
}

#[test]
fn interleaved_sessions_are_isolated() {
    let script = |s: &mut Session, seq: u64| -> Vec<Vec<u8>> {
        let mut out = vec![s.handle(req(MessageType::AddChangePuzzle, seq).with("mode", 0).with("seed", 4)).to_wire()];
        out.push(s.handle(req(MessageType::Reset, seq + 1)).to_wire());
        for k in 0..5 {
            out.push(s.handle(req(MessageType::Step, seq + 2 + k).with("action", k as i64)).to_wire());
        }
        out
    };
    let mut alone = greeted();
    let want = script(&mut alone, 2);
    let (mut a, mut b) = (greeted(), greeted());
    let mut got_a = vec![a.handle(req(MessageType::AddChangePuzzle, 2).with("mode", 0).with("seed", 4)).to_wire()];
    b.handle(req(MessageType::AddChangePuzzle, 2).with("mode", 1).with("task", 2).with("seed", 4));
    got_a.push(a.handle(req(MessageType::Reset, 3)).to_wire());
    b.handle(req(MessageType::Reset, 3));
    for k in 0..5u64 {
        b.handle(req(MessageType::Step, 4 + k).with("action", 7 - k as i64));
        got_a.push(a.handle(req(MessageType::Step, 4 + k).with("action", k as i64)).to_wire());
    }
    assert_eq!(got_a, want);
}

fn exchange(stream: &mut TcpStream, msg: &Message) -> Message {
    stream.write_all(&encode_frame(&msg.to_bytes())).unwrap();
    Message::from_bytes(&read_frame(stream, usize::MAX).unwrap().unwrap()).unwrap()
}

#[test]
fn tcp_server_serves_and_expires_idle_sessions() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = Server::new(ServerConfig { idle_timeout: Duration::from_millis(300), ..ServerConfig::default() });
    let handle = {
        let server = server.clone();
        thread::spawn(move || server.run(listener))
    };
    let mut c = TcpStream::connect(addr).unwrap();
    let hello = exchange(&mut c, &req(MessageType::Hello, 1).with("version", "1"));
    assert_eq!(hello.kind, MessageType::Hello);
    // a frame split across writes is reassembled
    let frame = encode_frame(&req(MessageType::Step, 2).with("action", 0).to_bytes());
    c.write_all(&frame[..3]).unwrap();
    thread::sleep(Duration::from_millis(50));
    c.write_all(&frame[3..]).unwrap();
    let err = Message::from_bytes(&read_frame(&mut c, usize::MAX).unwrap().unwrap()).unwrap();
    assert_eq!(err.kind, MessageType::Error);
    assert_eq!(server.active_sessions().len(), 1);
    let bye = Message::from_bytes(&read_frame(&mut c, usize::MAX).unwrap().unwrap()).unwrap();
    assert_eq!(bye.kind, MessageType::Bye);
    assert_eq!(bye.payload["reason"], json!("idle timeout"));
    let mut rest = Vec::new();
    c.read_to_end(&mut rest).unwrap();
    assert!(rest.is_empty());

    let mut big = TcpStream::connect(addr).unwrap();
    big.write_all(&u32::MAX.to_be_bytes()).unwrap();
    let bye = Message::from_bytes(&read_frame(&mut big, usize::MAX).unwrap().unwrap()).unwrap();
    assert_eq!(bye.kind, MessageType::Bye);

    server.shutdown();
    handle.join().unwrap().unwrap();
}
