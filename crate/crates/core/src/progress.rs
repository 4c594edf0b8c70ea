//! Progress records emitted by the engines and the sinks that collect them.

use std::sync::mpsc::Sender;

use serde::{Deserialize, Serialize};

use crate::de::EvalTriplet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Worker {
    Ibc,
    De,
    Runner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "values", rename_all = "kebab-case")]
pub enum Event {
    /// Periodic IB&C state. Infinite bounds serialize as `null`.
    Progress {
        iteration: u64,
        f_best: Option<f64>,
        lower_bound: Option<f64>,
        queue: usize,
    },
    /// A new certified upper bound, found locally by the emitting worker.
    UpperBound {
        value: f64,
        point: Vec<f64>,
    },
    /// An upper bound received from the other worker and accepted.
    Received {
        value: f64,
    },
    Generation {
        generation: u64,
        best: EvalTriplet,
    },
    Injected {
        point: Vec<f64>,
    },
    Finished {
        status: String,
        f_best: Option<f64>,
        lower_bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub worker: Worker,
    #[serde(flatten)]
    pub event: Event,
}

pub trait Sink {
    fn emit(&mut self, worker: Worker, event: Event);
}

/// Drops everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl Sink for NullSink {
    fn emit(&mut self, _: Worker, _: Event) {}
}

impl Sink for Vec<Record> {
    fn emit(&mut self, worker: Worker, event: Event) {
        self.push(Record { worker, event });
    }
}

impl Sink for Sender<Record> {
    fn emit(&mut self, worker: Worker, event: Event) {
        // the consumer may have gone away at shutdown
        let _ = self.send(Record { worker, event });
    }
}

impl<S: Sink + ?Sized> Sink for &mut S {
    fn emit(&mut self, worker: Worker, event: Event) {
        (**self).emit(worker, event)
    }
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
