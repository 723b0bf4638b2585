use super::{EngineConfig, EngineError, Evaluation, Transport, WdlOutcome};
use crate::chess::{san_to_engine_coords, BoardState, MoveSequence};
use std::time::{Duration, Instant};

/// Per-mille `wdl w d l` triple of an info line, normalized to probabilities
/// as reported (side to move's view).
pub fn parse_wdl(line: &str) -> Option<WdlOutcome> {
    let mut words = line.split_whitespace().skip_while(|w| *w != "wdl").skip(1);
    let mut next = || words.next()?.parse::<u32>().ok();
    let (w, d, l) = (next()?, next()?, next()?);
    WdlOutcome::from_counts(w, d, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Score {
    Cp(i32),
    Mate(i32),
}

pub(crate) fn parse_score(line: &str) -> Option<Score> {
    let mut words = line.split_whitespace().skip_while(|w| *w != "score").skip(1);
    let kind = words.next()?;
    let value = words.next()?.parse().ok()?;
    match kind {
        "cp" => Some(Score::Cp(value)),
        "mate" => Some(Score::Mate(value)),
        _ => None,
    }
}

pub(crate) const FALLBACK_DRAW: f64 = 0.33;

/// Approximate WDL for the side to move from a score alone: the win share
/// follows `1 / (1 + 10^(-cp/400))` and splits the probability left after a
/// fixed draw share. A forced mate is decisive.
pub(crate) fn wdl_from_score(score: Score) -> WdlOutcome {
    match score {
        Score::Mate(n) if n > 0 => WdlOutcome::new(1.0, 0.0, 0.0),
        Score::Mate(_) => WdlOutcome::new(0.0, 0.0, 1.0),
        Score::Cp(cp) => {
            let share = 1.0 / (1.0 + 10f64.powf(-(cp as f64) / 400.0));
            let decisive = 1.0 - FALLBACK_DRAW;
            WdlOutcome::new(decisive * share, FALLBACK_DRAW, decisive * (1.0 - share))
        }
    }
}

fn setoption_commands(config: &EngineConfig) -> [(&'static str, String); 4] {
    [
        ("Skill Level", config.skill_level.to_string()),
        ("UCI_Elo", config.elo.to_string()),
        ("UCI_LimitStrength", config.limit_strength.to_string()),
        ("UCI_ShowWDL", config.show_wdl.to_string()),
    ]
}

/// One stateful UCI conversation. Commands are strictly serial.
pub struct EngineSession {
    transport: Box<dyn Transport>,
    config: EngineConfig,
    advertised: Vec<String>,
    rejected: Vec<String>,
}

impl std::fmt::Debug for EngineSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineSession")
            .field("config", &self.config)
            .field("rejected", &self.rejected)
            .finish_non_exhaustive()
    }
}

impl EngineSession {
    /// Runs the handshake: `uci` until `uciok`, the four strength and WDL
    /// options, then `isready` until `readyok`, all within the configured
    /// handshake timeout. Options the engine does not advertise or answers
    /// with `No such option` are logged and listed in [`Self::rejected_options`].
    pub fn start(transport: Box<dyn Transport>, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let deadline = Instant::now() + config.handshake_timeout;
        let mut session = EngineSession {
            transport,
            config,
            advertised: Vec::new(),
            rejected: Vec::new(),
        };
        session.transport.send("uci")?;
        for line in session.read_until("uciok", deadline, EngineError::HandshakeTimeout)? {
            if let Some(rest) = line.strip_prefix("option name ") {
                let name = rest.split(" type").next().unwrap_or(rest).trim();
                session.advertised.push(name.to_string());
            }
        }
        for (name, value) in setoption_commands(&session.config) {
            if !session.advertised.iter().any(|a| a == name) {
                session.reject(name);
            }
            session.transport.send(&format!("setoption name {name} value {value}"))?;
        }
        session.transport.send("isready")?;
        for line in session.read_until("readyok", deadline, EngineError::HandshakeTimeout)? {
            if let Some(name) = line.strip_prefix("No such option:") {
                session.reject(name.trim());
            }
        }
        Ok(session)
    }

    fn reject(&mut self, name: &str) {
        if !self.rejected.iter().any(|r| r == name) {
            log::warn!("engine rejected option {name}; continuing without it");
            self.rejected.push(name.to_string());
        }
    }

    /// Options the engine did not accept.
    pub fn rejected_options(&self) -> &[String] {
        &self.rejected
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Lines up to and including the first one that starts with `terminator`.
    fn read_until(&mut self, terminator: &str, deadline: Instant, timeout: fn(Duration) -> EngineError) -> Result<Vec<String>, EngineError> {
        let mut lines = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(timeout(self.config.handshake_timeout));
            }
            match self.transport.recv(left)? {
                Some(line) => {
                    let done = line.split_whitespace().next() == Some(terminator);
                    lines.push(line);
                    if done {
                        return Ok(lines);
                    }
                }
                None => return Err(timeout(self.config.handshake_timeout)),
            }
        }
    }

    /// Evaluates the first move of `moves` on `board`.
    ///
    /// Only that move is sent (`position fen <FEN> moves <coord>`), followed
    /// by `go depth <depth>`. The WDL triple of the last info line that has
    /// one is flipped to the mover's point of view. Without any WDL triple
    /// the last reported score is converted approximately.
    pub fn evaluate_move(&mut self, board: &BoardState, moves: &MoveSequence) -> Result<Evaluation, EngineError> {
        let coord = san_to_engine_coords(board, moves.first())?;
        let fen = board.to_fen();
        self.transport.send(&format!("position fen {fen} moves {coord}"))?;
        self.transport.send(&format!("go depth {}", self.config.depth))?;
        let deadline = Instant::now() + self.config.search_timeout;
        let lines = self.read_until("bestmove", deadline, EngineError::SearchTimeout)?;

        let infos: Vec<&String> = lines.iter().filter(|l| l.starts_with("info")).collect();
        if infos.is_empty() {
            return Err(EngineError::EngineProtocolError(format!(
                "no info line before bestmove for {coord} on {fen}"
            )));
        }
        let (engine_view, approximate) = if let Some(wdl) = infos.iter().rev().find_map(|l| parse_wdl(l)) {
            (wdl, false)
        } else if let Some(score) = infos.iter().rev().find_map(|l| parse_score(l)) {
            (wdl_from_score(score), true)
        } else {
            return Err(EngineError::WdlUnavailable(format!("no wdl or score for {coord} on {fen}")));
        };
        Ok(Evaluation {
            fen,
            coord_move: coord,
            outcome: engine_view.flipped(),
            engine_view,
            approximate,
            raw_output: lines,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{MockEngine, MockEval};

    #[test]
    fn wdl_fixture() {
        let line = "info depth 10 seldepth 14 multipv 1 score cp 38 wdl 512 389 99 nodes 1 pv e2e4";
        let w = parse_wdl(line).unwrap();
        assert!((w.win - 0.512).abs() < 1e-12);
        assert!((w.draw - 0.389).abs() < 1e-12);
        assert!((w.lose - 0.099).abs() < 1e-12);
        assert!((w.win + w.draw + w.lose - 1.0).abs() < 1e-6);
        assert_eq!(parse_wdl("info depth 3 score cp 12"), None);
        assert_eq!(parse_wdl("info wdl 0 0 0"), None);
        assert_eq!(parse_score(line), Some(Score::Cp(38)));
        assert_eq!(parse_score("info score mate -3"), Some(Score::Mate(-3)));
    }

    #[test]
    fn score_fallback() {
        let even = wdl_from_score(Score::Cp(0));
        assert!((even.win - 0.335).abs() < 1e-12 && (even.lose - 0.335).abs() < 1e-12);
        assert_eq!(even.draw, FALLBACK_DRAW);
        let plus = wdl_from_score(Score::Cp(400));
        assert!((plus.win - 0.67 * 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(wdl_from_score(Score::Mate(2)), WdlOutcome::new(1.0, 0.0, 0.0));
    }

    fn session(engine: MockEngine) -> EngineSession {
        EngineSession::start(Box::new(engine), EngineConfig::default()).unwrap()
    }

    #[test]
    fn orientation_and_fallback_flags() {
        let mut s = session(MockEngine::with_evaluations([
            MockEval::Wdl {
                win: 512,
                draw: 389,
                lose: 99,
                cp: 40,
            },
            MockEval::Cp(-120),
            MockEval::NoInfo,
        ]));
        let board = BoardState::starting();
        let e4 = MoveSequence::single("e4".parse().unwrap());
        let first = s.evaluate_move(&board, &e4).unwrap();
        assert_eq!(first.coord_move, "e2e4");
        assert!(!first.approximate);
        assert!((first.engine_view.win - 0.512).abs() < 1e-12);
        assert!((first.outcome.win - 0.099).abs() < 1e-12 && (first.outcome.lose - 0.512).abs() < 1e-12);

        let second = s.evaluate_move(&board, &e4).unwrap();
        assert!(second.approximate);
        assert!(second.outcome.win > second.outcome.lose);

        assert!(matches!(s.evaluate_move(&board, &e4), Err(EngineError::EngineProtocolError(_))));
    }

    #[test]
    fn illegal_first_move_is_not_sent() {
        let engine = MockEngine::new();
        let log = engine.transcript();
        let mut s = session(engine);
        let bad = MoveSequence::single("e5".parse().unwrap());
        assert!(matches!(s.evaluate_move(&BoardState::starting(), &bad), Err(EngineError::IllegalMove(_))));
        assert!(!log.lock().unwrap().iter().any(|l| l.starts_with("position")));
    }

    #[test]
    fn silent_engine_times_out() {
        let engine = MockEngine::silent();
        let config = EngineConfig {
            handshake_timeout: Duration::from_millis(50),
            ..EngineConfig::default()
        };
        assert!(matches!(EngineSession::start(Box::new(engine), config), Err(EngineError::HandshakeTimeout(_))));
    }

    #[test]
    fn missing_wdl_option_is_not_fatal() {
        let mut engine = MockEngine::with_options(&["Skill Level", "UCI_Elo", "UCI_LimitStrength"]);
        engine.default_eval = MockEval::Cp(15);
        let mut s = session(engine);
        assert_eq!(s.rejected_options(), ["UCI_ShowWDL"]);
        let e = s.evaluate_move(&BoardState::starting(), &MoveSequence::single("d4".parse().unwrap())).unwrap();
        assert!(e.approximate);
    }
}
