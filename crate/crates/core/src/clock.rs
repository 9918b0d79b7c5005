//! Elapsed-time source for run metrics.

use std::time::Instant;

/// Measures wall-clock seconds since the start of a run. A frozen stopwatch
/// always reads 0, which makes metrics files byte-reproducible.
#[derive(Debug, Clone, Copy)]
pub enum Stopwatch {
    Wall(Instant),
    Frozen,
}

impl Stopwatch {
    pub fn start(frozen: bool) -> Self {
        if frozen {
            Stopwatch::Frozen
        } else {
            Stopwatch::Wall(Instant::now())
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        match self {
            Stopwatch::Wall(t) => t.elapsed().as_secs_f64(),
            Stopwatch::Frozen => 0.0,
        }
    }
}
