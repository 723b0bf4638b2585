//! UCI engine evaluation of annotated moves and the sentiment-versus-outcome
//! contingency analysis.

mod pool;
mod transport;
mod uci;

pub use pool::{EngineJob, EnginePool};
pub use transport::{MockEngine, MockEval, ProcessTransport, Transport, MOCK_OPTIONS};
pub use uci::{parse_wdl, EngineSession};

use crate::chess::ChessError;
use crate::corpus::Sentiment;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::time::Duration;
use thiserror::Error;

/// Environment variable that overrides the engine executable path.
pub const ENGINE_ENV: &str = "MOVESENSE_ENGINE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub skill_level: u32,
    pub elo: u32,
    pub limit_strength: bool,
    pub show_wdl: bool,
    pub depth: u32,
    pub handshake_timeout: Duration,
    pub search_timeout: Duration,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            skill_level: 8,
            elo: 2400,
            limit_strength: true,
            show_wdl: true,
            depth: 10,
            handshake_timeout: Duration::from_secs(10),
            search_timeout: Duration::from_secs(120),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.depth == 0 {
            return Err(EngineError::InvalidConfig("depth must be at least 1".into()));
        }
        if !(100..=4000).contains(&self.elo) {
            return Err(EngineError::InvalidConfig(format!("elo {} outside 100..=4000", self.elo)));
        }
        if self.skill_level > 20 {
            return Err(EngineError::InvalidConfig(format!("skill level {} above 20", self.skill_level)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine unreachable: {0}")]
    EngineUnreachable(String),
    #[error("engine did not finish the handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("engine did not finish the search within {0:?}")]
    SearchTimeout(Duration),
    #[error("illegal move: {0}")]
    IllegalMove(#[from] ChessError),
    #[error("engine protocol error: {0}")]
    EngineProtocolError(String),
    #[error("no win/draw/loss estimate: {0}")]
    WdlUnavailable(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}

/// Win, draw and loss probabilities; non-negative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdlOutcome {
    pub win: f64,
    pub draw: f64,
    pub lose: f64,
}

impl WdlOutcome {
    /// Normalizes the three values by their sum.
    pub fn new(win: f64, draw: f64, lose: f64) -> Self {
        let sum = win + draw + lose;
        WdlOutcome {
            win: win / sum,
            draw: draw / sum,
            lose: lose / sum,
        }
    }

    /// From per-mille (or any non-negative) counts; `None` when all are zero.
    pub fn from_counts(win: u32, draw: u32, lose: u32) -> Option<Self> {
        (win + draw + lose > 0).then(|| Self::new(win as f64, draw as f64, lose as f64))
    }

    /// The same outcome seen by the other side.
    pub fn flipped(self) -> Self {
        WdlOutcome {
            win: self.lose,
            draw: self.draw,
            lose: self.win,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Draw,
    Lose,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Win, Outcome::Draw, Outcome::Lose];
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Most probable category; ties go to Win, then Draw.
pub fn outcome_category(o: &WdlOutcome) -> Outcome {
    if o.win >= o.draw && o.win >= o.lose {
        Outcome::Win
    } else if o.draw >= o.lose {
        Outcome::Draw
    } else {
        Outcome::Lose
    }
}

/// Sentiment labels that take part in the contingency table, in its row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];
}

impl TryFrom<Sentiment> for Polarity {
    type Error = Sentiment;

    fn try_from(s: Sentiment) -> Result<Self, Sentiment> {
        match s {
            Sentiment::Positive => Ok(Polarity::Positive),
            Sentiment::Neutral => Ok(Polarity::Neutral),
            Sentiment::Negative => Ok(Polarity::Negative),
            Sentiment::NotSure => Err(s),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Result of evaluating one move.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fen: String,
    pub coord_move: String,
    /// From the point of view of the side that made the move.
    pub outcome: WdlOutcome,
    /// As reported by the engine, for the side to move after the move.
    pub engine_view: WdlOutcome,
    /// Derived from a score rather than an engine WDL estimate.
    pub approximate: bool,
    /// Engine output from the search, verbatim.
    pub raw_output: Vec<String>,
}

/// Counts of sentiment (rows: Positive, Neutral, Negative) against outcome
/// category (columns: Win, Draw, Lose).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: [[usize; 3]; 3],
}

impl ContingencyTable {
    pub fn get(&self, p: Polarity, o: Outcome) -> usize {
        self.counts[p as usize][o as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, p: Polarity) -> usize {
        self.counts[p as usize].iter().sum()
    }

    /// Comma-separated matrix with a header row and a label column.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once(String::new()).chain(Outcome::ALL.iter().map(ToString::to_string)))?;
        for p in Polarity::ALL {
            w.write_record(std::iter::once(p.to_string()).chain(Outcome::ALL.iter().map(|o| self.get(p, *o).to_string())))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

pub fn build_contingency(pairs: &[(Polarity, Outcome)]) -> ContingencyTable {
    let mut t = ContingencyTable::default();
    for (p, o) in pairs {
        t.counts[*p as usize][*o as usize] += 1;
    }
    t
}

/// One line of the engine results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub record_id: String,
    pub fen: String,
    #[serde(rename = "move")]
    pub coord_move: String,
    pub win: f64,
    pub draw: f64,
    pub lose: f64,
    pub category: Outcome,
    pub approximate: bool,
}

impl ResultRow {
    pub fn new(record_id: impl Into<String>, e: &Evaluation) -> Self {
        ResultRow {
            record_id: record_id.into(),
            fen: e.fen.clone(),
            coord_move: e.coord_move.clone(),
            win: e.outcome.win,
            draw: e.outcome.draw,
            lose: e.outcome.lose,
            category: outcome_category(&e.outcome),
            approximate: e.approximate,
        }
    }
}

pub fn write_results(rows: &[ResultRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(input: impl std::io::Read) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
