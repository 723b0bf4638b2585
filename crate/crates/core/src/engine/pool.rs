use super::{EngineError, EngineSession, Evaluation};
use crate::chess::{BoardState, MoveSequence};
use std::sync::Mutex;

#[derive(Debug, Clone)]
pub struct EngineJob {
    pub id: String,
    pub board: BoardState,
    pub moves: MoveSequence,
}

/// Independent engine sessions evaluating jobs in parallel, one thread per
/// session. Each session still handles one command at a time.
#[derive(Debug)]
pub struct EnginePool {
    sessions: Vec<EngineSession>,
}

impl EnginePool {
    pub fn new(sessions: Vec<EngineSession>) -> Self {
        assert!(!sessions.is_empty(), "engine pool needs at least one session");
        EnginePool { sessions }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Results in job order. Which session evaluates a job is unspecified.
    pub fn evaluate_all(&mut self, jobs: &[EngineJob]) -> Vec<Result<Evaluation, EngineError>> {
        let next = Mutex::new(0usize);
        let slots: Vec<Mutex<Option<Result<Evaluation, EngineError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for session in &mut self.sessions {
                let (next, slots) = (&next, &slots);
                scope.spawn(move || loop {
                    let i = {
                        let mut n = next.lock().expect("job counter lock");
                        let i = *n;
                        *n += 1;
                        i
                    };
                    let Some(job) = jobs.get(i) else { break };
                    let result = session.evaluate_move(&job.board, &job.moves);
                    *slots[i].lock().expect("result slot lock") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("result slot lock").expect("every job evaluated"))
            .collect()
    }
}
