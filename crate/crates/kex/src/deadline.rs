//! Wall-clock limit per matching round.

use std::cell::Cell;
use std::time::{Duration, Instant};

use kex_core::solver::Interrupt;

/// Stops the solver once a round has run longer than `limit`. The clock
/// restarts at every round.
#[derive(Debug)]
pub struct Deadline {
    limit: Option<Duration>,
    started: Cell<Instant>,
}

impl Deadline {
    /// `None` never fires.
    pub fn new(limit: Option<Duration>) -> Self {
        Deadline { limit, started: Cell::new(Instant::now()) }
    }

    /// Zero or negative seconds disable the limit.
    pub fn from_secs(secs: f64) -> Self {
        Self::new((secs > 0.0).then(|| Duration::from_secs_f64(secs)))
    }
}

impl Interrupt for Deadline {
    fn should_stop(&self) -> bool {
        self.limit.is_some_and(|l| self.started.get().elapsed() >= l)
    }

    fn round_started(&self) {
        self.started.set(Instant::now());
    }
}
