//! Environment that replays recorded transitions.
//!
//! Applying a tactic looks up the first recorded execution of that exact
//! `(goal text, tactic text)` pair and returns its output and time. Pairs
//! the log never saw come back as an ordinary error outcome with zero cost,
//! not a transport failure: an unrecorded pair is a dead end for the
//! search, not a broken environment.

use crate::transitions::{TacticOutput, TransitionLog};

use super::{EnvError, EnvResponse, Environment};

/// Message returned for pairs absent from the log.
pub const UNRECORDED_MESSAGE: &str = "unrecorded goal/tactic pair";

pub struct ReplayEnvironment {
    log: TransitionLog,
}

impl ReplayEnvironment {
    pub fn new(log: TransitionLog) -> Self {
        Self { log }
    }

    pub fn log(&self) -> &TransitionLog {
        &self.log
    }
}

impl Environment for ReplayEnvironment {
    fn apply(
        &self,
        goal_text: &str,
        tactic_text: &str,
    ) -> std::result::Result<EnvResponse, EnvError> {
        Ok(match self.log.lookup(goal_text, tactic_text) {
            Some(rec) => EnvResponse {
                time_s: rec.time_s,
                output: rec.output.clone(),
            },
            None => EnvResponse {
                time_s: 0.0,
                output: TacticOutput::Error(UNRECORDED_MESSAGE.to_string()),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transitions::TransitionRecord;

    fn rec(goal: &str, tactic: &str, output: TacticOutput, time_s: f64) -> TransitionRecord {
        TransitionRecord {
            goal_id: "g".into(),
            goal_text: goal.into(),
            tactic_text: tactic.into(),
            time_s,
            output,
            node_id: "n0".into(),
            attempt_id: "a0".into(),
        }
    }

    #[test]
    fn replays_recorded_outputs_and_times() {
        let log = TransitionLog::from_records(vec![
            rec("A", "t1", TacticOutput::Subgoals(vec!["B".into()]), 0.25),
            rec("A", "t2", TacticOutput::Error("boom".into()), 0.5),
        ]);
        let env = ReplayEnvironment::new(log);
        let r = env.apply("A", "t1").unwrap();
        assert_eq!(r.time_s, 0.25);
        assert_eq!(r.output, TacticOutput::Subgoals(vec!["B".into()]));
        let r = env.apply("A", "t2").unwrap();
        assert_eq!(r.output, TacticOutput::Error("boom".into()));
    }

    #[test]
    fn unrecorded_pairs_error_with_zero_cost() {
        let env = ReplayEnvironment::new(TransitionLog::new());
        let r = env.apply("A", "t").unwrap();
        assert_eq!(r.time_s, 0.0);
        assert_eq!(
            r.output,
            TacticOutput::Error(UNRECORDED_MESSAGE.to_string())
        );
    }

    #[test]
    fn first_record_wins_for_duplicate_keys() {
        let log = TransitionLog::from_records(vec![
            rec("A", "t", TacticOutput::Error("first".into()), 0.1),
            rec("A", "t", TacticOutput::Error("second".into()), 0.2),
        ]);
        let env = ReplayEnvironment::new(log);
        let r = env.apply("A", "t").unwrap();
        assert_eq!(r.output, TacticOutput::Error("first".into()));
        assert_eq!(r.time_s, 0.1);
    }
}
