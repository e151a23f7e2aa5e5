use std::time::Instant;

use base64::Engine as _;
use serde_json::{json, Map, Value};

use super::frame::encode_frame;
use super::protocol::{Message, MessageType, PixelEncoding};
use super::PROTOCOL_VERSION;
use crate::env::{Action, Env, EnvConfig, EnvError, Observation, StepResult, NUM_ACTIONS, OBS_CHANNELS, OBS_SIZE};
use crate::worldgen::{sample_sandbox_pool, Mode, PuzzleConfig, Task};

/// The reply to one request, plus a raw pixel frame in binary mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub message: Message,
    pub binary: Option<Vec<u8>>,
}

impl Reply {
    fn of(message: Message) -> Self {
        Self { message, binary: None }
    }

    /// Wire bytes: one frame, or two in binary pixel mode.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = encode_frame(&self.message.to_bytes());
        if let Some(b) = &self.binary {
            out.extend(encode_frame(b));
        }
        out
    }

    pub fn closes(&self) -> bool {
        self.message.kind == MessageType::Bye
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Settings {
    frame_skip: u32,
    reward_off: bool,
    pixels: PixelEncoding,
    aux_state: bool,
}

/// One client's environment and protocol state.
#[derive(Debug)]
pub struct Session {
    pub id: u64,
    pub last_activity: Instant,
    greeted: bool,
    closed: bool,
    last_seq: Option<u64>,
    settings: Settings,
    env: Option<Env>,
    puzzle: Option<PuzzleConfig>,
}

enum Failure {
    /// Error reply, session kept.
    Recoverable(String),
    /// Bye reply, session closed.
    Fatal(String),
}

impl From<EnvError> for Failure {
    fn from(e: EnvError) -> Self {
        Failure::Recoverable(e.to_string())
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Recoverable(msg.into())
}

impl Session {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            last_activity: Instant::now(),
            greeted: false,
            closed: false,
            last_seq: None,
            settings: Settings { frame_skip: 4, reward_off: false, pixels: PixelEncoding::Base64, aux_state: false },
            env: None,
            puzzle: None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Parses and handles one frame payload. Unparseable payloads get an
    /// error reply and leave the session intact.
    pub fn handle_frame(&mut self, payload: &[u8]) -> Reply {
        match Message::from_bytes(payload) {
            Ok(msg) => self.handle(msg),
            Err(e) => {
                self.last_activity = Instant::now();
                Reply::of(self.stamp(Message::new(MessageType::Error, None).with("message", format!("malformed message: {e}"))))
            }
        }
    }

    pub fn handle(&mut self, msg: Message) -> Reply {
        self.last_activity = Instant::now();
        let seq = msg.seq;
        let reply = match self.dispatch(msg) {
            Ok(r) => r,
            Err(Failure::Recoverable(m)) => Reply::of(Message::new(MessageType::Error, seq).with("message", m)),
            Err(Failure::Fatal(m)) => {
                self.closed = true;
                Reply::of(Message::new(MessageType::Bye, seq).with("reason", m))
            }
        };
        Reply { message: self.stamp(reply.message), binary: reply.binary }
    }

    /// A bye for a session closed by the server.
    pub fn expire(&mut self, reason: &str) -> Reply {
        self.closed = true;
        Reply::of(self.stamp(Message::new(MessageType::Bye, None).with("reason", reason)))
    }

    fn stamp(&self, mut m: Message) -> Message {
        m.session = self.greeted.then_some(self.id);
        m
    }

    fn dispatch(&mut self, msg: Message) -> Result<Reply, Failure> {
        if self.closed {
            return Err(Failure::Fatal("session closed".into()));
        }
        let Some(seq) = msg.seq else { return Err(bad("missing sequence number")) };
        if self.last_seq.is_some_and(|last| seq <= last) {
            return Err(Failure::Fatal(format!("sequence number {seq} does not increase")));
        }
        if !self.greeted && msg.kind != MessageType::Hello {
            return Err(Failure::Fatal("expected hello".into()));
        }
        if self.greeted && msg.session.is_some_and(|s| s != self.id) {
            return Err(Failure::Fatal("session id mismatch".into()));
        }
        self.last_seq = Some(seq);
        let p = &msg.payload;
        let out = |m: Message| Ok(Reply::of(m));
        match msg.kind {
            MessageType::Hello => {
                if self.greeted {
                    return Err(bad("already greeted"));
                }
                let v = p.get("version").and_then(Value::as_str).unwrap_or(PROTOCOL_VERSION);
                if v != PROTOCOL_VERSION {
                    return Err(Failure::Fatal(format!("unsupported protocol version {v:?}, server speaks {PROTOCOL_VERSION:?}")));
                }
                self.greeted = true;
                out(Message::new(MessageType::Hello, Some(seq))
                    .with("version", PROTOCOL_VERSION)
                    .with("observation_shape", json!([OBS_SIZE, OBS_SIZE, OBS_CHANNELS]))
                    .with("actions", NUM_ACTIONS))
            }
            MessageType::Configure => {
                self.configure(p)?;
                out(Message::new(MessageType::Result, Some(seq)).with("settings", self.settings_value()))
            }
            MessageType::AddChangePuzzle => {
                let puzzle = puzzle_from(p)?;
                let mut config = EnvConfig::for_task(puzzle.task);
                self.apply(&mut config);
                self.env = Some(Env::new(config)?);
                let r = Message::new(MessageType::Result, Some(seq))
                    .with("mode", puzzle.mode.code())
                    .with("task", puzzle.task.name())
                    .with("seed", puzzle.seed);
                self.puzzle = Some(puzzle);
                out(r)
            }
            MessageType::Reset => {
                let (Some(env), Some(puzzle)) = (&mut self.env, &self.puzzle) else {
                    return Err(bad("no puzzle installed"));
                };
                let obs = env.reset(puzzle)?;
                Ok(self.observation(seq, &obs, None))
            }
            MessageType::Step => {
                let action = p.get("action").and_then(Value::as_i64).ok_or_else(|| bad("step needs an integer action"))?;
                let action = Action::new(action)?;
                let env = self.env.as_mut().ok_or(EnvError::NotStarted)?;
                let r = env.step(action)?;
                Ok(self.observation(seq, &r.observation, Some(&r)))
            }
            MessageType::StateSnapshot => {
                let world = self.env.as_ref().and_then(Env::world).ok_or(EnvError::NotStarted)?;
                out(Message::new(MessageType::StateSnapshot, Some(seq))
                    .with("tick", world.tick)
                    .with("table_half_extent", world.table_half_extent)
                    .with("bodies", serde_json::to_value(&world.bodies).map_err(|e| bad(e.to_string()))?))
            }
            MessageType::Bye => {
                self.closed = true;
                out(Message::new(MessageType::Bye, Some(seq)).with("reason", "client closed"))
            }
            MessageType::Observation | MessageType::Result | MessageType::Error => {
                Err(bad(format!("{:?} is a server message", msg.kind).to_lowercase()))
            }
        }
    }

    fn configure(&mut self, p: &Map<String, Value>) -> Result<(), Failure> {
        let mut s = self.settings.clone();
        for (k, v) in p {
            let flag = || v.as_bool().ok_or_else(|| bad(format!("{k} must be a boolean")));
            match k.as_str() {
                "skip_frame" => s.frame_skip = if flag()? { 4 } else { 1 },
                "frame_skip" => {
                    s.frame_skip = v
                        .as_u64()
                        .filter(|n| (1..=64).contains(n))
                        .ok_or_else(|| bad("frame_skip must be an integer in 1..=64"))? as u32
                }
                "turn_off_reward" => s.reward_off = flag()?,
                "include_aux_state" => s.aux_state = flag()?,
                "observation" => {
                    s.pixels = serde_json::from_value(v.clone()).map_err(|_| bad("observation must be base64, binary or none"))?
                }
                "action_space" => {
                    if v.as_str() != Some("full") {
                        return Err(bad("only the full action space is supported"));
                    }
                }
                _ => return Err(bad(format!("unknown setting {k}"))),
            }
        }
        self.settings = s;
        if let Some(env) = &mut self.env {
            let mut c = env.config().clone();
            Self::apply_settings(&self.settings, &mut c);
            *env.config_mut() = c;
        }
        Ok(())
    }

    fn apply(&self, c: &mut EnvConfig) {
        Self::apply_settings(&self.settings, c);
    }

    fn apply_settings(s: &Settings, c: &mut EnvConfig) {
        c.frame_skip = s.frame_skip;
        c.extrinsic_reward_enabled = c.mode == Mode::Task && !s.reward_off;
        c.include_aux_state = s.aux_state;
    }

    fn settings_value(&self) -> Value {
        let s = &self.settings;
        json!({
            "frame_skip": s.frame_skip,
            "turn_off_reward": s.reward_off,
            "observation": s.pixels,
            "include_aux_state": s.aux_state,
            "action_space": "full",
        })
    }

    fn observation(&self, seq: u64, obs: &Observation, step: Option<&StepResult>) -> Reply {
        let mut m = Message::new(MessageType::Observation, Some(seq));
        let mut binary = None;
        match self.settings.pixels {
            PixelEncoding::Base64 => {
                m = m.with("pixels", base64::engine::general_purpose::STANDARD.encode(&obs.pixels));
            }
            PixelEncoding::Binary => {
                m = m.with("pixel_frame", true);
                binary = Some(obs.pixels.clone());
            }
            PixelEncoding::None => {}
        }
        if let Some(aux) = &obs.aux_state {
            m = m.with("aux_state", json!(aux));
        }
        match step {
            Some(r) => {
                m = m
                    .with("reward", r.reward)
                    .with("done", r.done)
                    .with("info", serde_json::to_value(&r.info).expect("info serializes"));
            }
            None => m = m.with("reward", 0.0).with("done", false),
        }
        Reply { message: m, binary }
    }
}

fn puzzle_from(p: &Map<String, Value>) -> Result<PuzzleConfig, Failure> {
    if let Some(c) = p.get("config") {
        let c: PuzzleConfig = serde_json::from_value(c.clone()).map_err(|e| bad(format!("bad puzzle config: {e}")))?;
        c.validate().map_err(|e| bad(e.to_string()))?;
        return Ok(c);
    }
    let code = |k: &str| p.get(k).map(|v| v.as_u64().and_then(|n| u8::try_from(n).ok()).ok_or_else(|| bad(format!("{k} must be a small integer"))));
    let mode = match code("mode").transpose()? {
        Some(m) => Mode::from_code(m).ok_or_else(|| bad(format!("unknown mode {m}")))?,
        None => Mode::Sandbox,
    };
    let task = match code("task").transpose()? {
        Some(t) => Task::from_code(t).ok_or_else(|| bad(format!("unknown task {t}")))?,
        None => Task::None,
    };
    let seed = match p.get("seed") {
        Some(v) => v.as_u64().filter(|s| *s <= i64::MAX as u64).ok_or_else(|| bad("seed must be a non-negative integer"))?,
        None => 0,
    };
    match (mode, task) {
        (Mode::Sandbox, Task::None) => Ok(sample_sandbox_pool(1, seed).remove(0)),
        (Mode::Task, t) if t != Task::None => Ok(PuzzleConfig::for_task(t, seed)),
        _ => Err(bad("task mode needs a task in 1..=4 and sandbox mode needs task 0")),
    }
}
