use super::EngineError;
use fnv::FnvHasher;
use std::collections::VecDeque;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// A line-oriented duplex channel to a UCI engine.
pub trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<(), EngineError>;
    /// Next line from the engine; `Ok(None)` when nothing arrived in time.
    fn recv(&mut self, timeout: Duration) -> Result<Option<String>, EngineError>;
}

/// An engine running as a child process, spoken to over stdin/stdout.
pub struct ProcessTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl ProcessTransport {
    pub fn spawn(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let unreachable = |e: std::io::Error| EngineError::EngineUnreachable(format!("{}: {e}", path.display()));
        let mut child = Command::new(path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(unreachable)?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessTransport { child, stdin, lines })
    }
}

impl Transport for ProcessTransport {
    fn send(&mut self, line: &str) -> Result<(), EngineError> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EngineError::EngineUnreachable(format!("write failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<String>, EngineError> {
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Ok(Some(line)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(EngineError::EngineUnreachable("engine closed its output".into())),
        }
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "quit").and_then(|_| self.stdin.flush());
        for _ in 0..20 {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// What the mock engine reports for one `go` command.
#[derive(Debug, Clone, PartialEq)]
pub enum MockEval {
    /// Per-mille win/draw/loss for the side to move, with a centipawn score.
    Wdl { win: u32, draw: u32, lose: u32, cp: i32 },
    /// Centipawn score only, as from an engine without WDL support.
    Cp(i32),
    /// Mate in `n` moves (negative: getting mated).
    Mate(i32),
    /// A WDL triple derived from a hash of the current position command, so
    /// different positions get different but reproducible answers.
    Derived,
    /// `bestmove` with no info lines.
    NoInfo,
}

/// A scripted stand-in for a UCI engine that records every command.
pub struct MockEngine {
    /// Options advertised in reply to `uci`; others are answered with
    /// `No such option`.
    pub options: Vec<String>,
    /// Never answer anything.
    pub silent: bool,
    /// Answers for successive `go` commands; `default_eval` once exhausted.
    pub evaluations: VecDeque<MockEval>,
    pub default_eval: MockEval,
    transcript: Arc<Mutex<Vec<String>>>,
    pending: VecDeque<String>,
    position: String,
}

pub const MOCK_OPTIONS: [&str; 4] = ["Skill Level", "UCI_Elo", "UCI_LimitStrength", "UCI_ShowWDL"];

impl Default for MockEngine {
    fn default() -> Self {
        MockEngine {
            options: MOCK_OPTIONS.iter().map(|s| s.to_string()).collect(),
            silent: false,
            evaluations: VecDeque::new(),
            default_eval: MockEval::Derived,
            transcript: Arc::default(),
            pending: VecDeque::new(),
            position: String::new(),
        }
    }
}

impl MockEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_evaluations(evaluations: impl IntoIterator<Item = MockEval>) -> Self {
        MockEngine {
            evaluations: evaluations.into_iter().collect(),
            ..Self::default()
        }
    }

    /// An engine that never answers.
    pub fn silent() -> Self {
        MockEngine {
            silent: true,
            ..Self::default()
        }
    }

    /// Advertises only `options`.
    pub fn with_options(options: &[&str]) -> Self {
        MockEngine {
            options: options.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    /// Handle to the command log; stays readable after the engine is moved
    /// into a session.
    pub fn transcript(&self) -> Arc<Mutex<Vec<String>>> {
        Arc::clone(&self.transcript)
    }

    fn derived(&self) -> MockEval {
        let mut h = FnvHasher::default();
        h.write(self.position.as_bytes());
        let x = h.finish();
        let win = (x % 700) as u32 + 50;
        let draw = ((x >> 16) % (950 - win as u64)) as u32;
        let lose = 1000 - win - draw;
        MockEval::Wdl {
            win,
            draw,
            lose,
            cp: (win as i32 - lose as i32) / 3,
        }
    }

    fn answer_go(&mut self, depth: &str) {
        let eval = self.evaluations.pop_front().unwrap_or_else(|| self.default_eval.clone());
        let eval = if eval == MockEval::Derived { self.derived() } else { eval };
        let info = |score: String, wdl: String| format!("info depth {depth} seldepth {depth} multipv 1 score {score}{wdl} nodes 4096 nps 409600 time 10 pv e2e4");
        match eval {
            MockEval::Wdl { win, draw, lose, cp } => {
                self.pending.push_back(info(format!("cp {}", cp / 2), String::new()));
                self.pending.push_back(info(format!("cp {cp}"), format!(" wdl {win} {draw} {lose}")));
            }
            MockEval::Cp(cp) => self.pending.push_back(info(format!("cp {cp}"), String::new())),
            MockEval::Mate(n) => self.pending.push_back(info(format!("mate {n}"), String::new())),
            MockEval::NoInfo | MockEval::Derived => {}
        }
        self.pending.push_back("bestmove e2e4".into());
    }
}

impl Transport for MockEngine {
    fn send(&mut self, line: &str) -> Result<(), EngineError> {
        self.transcript.lock().expect("transcript lock").push(line.to_string());
        if self.silent {
            return Ok(());
        }
        let mut words = line.split_whitespace();
        match words.next() {
            Some("uci") => {
                self.pending.push_back("id name MockEngine".into());
                self.pending.push_back("id author movesense".into());
                for o in &self.options {
                    self.pending.push_back(format!("option name {o} type string default <empty>"));
                }
                self.pending.push_back("uciok".into());
            }
            Some("isready") => self.pending.push_back("readyok".into()),
            Some("setoption") => {
                let name = line
                    .strip_prefix("setoption name ")
                    .and_then(|rest| rest.split(" value").next())
                    .unwrap_or_default();
                if !self.options.iter().any(|o| o == name) {
                    self.pending.push_back(format!("No such option: {name}"));
                }
            }
            Some("position") => self.position = line.to_string(),
            Some("go") => {
                let depth = line.split_whitespace().skip_while(|w| *w != "depth").nth(1).unwrap_or("1").to_string();
                self.answer_go(&depth);
            }
            _ => {}
        }
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<Option<String>, EngineError> {
        Ok(self.pending.pop_front())
    }
}
