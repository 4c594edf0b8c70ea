//! Running the two engines together.
//!
//! DE publishes certified upper bounds to IB&C; IB&C sends improving box
//! midpoints back to DE, which replace its worst individual. When IB&C
//! finishes it broadcasts the result and DE stops. Messages travel through
//! in-process [`Mailbox`]es; the engines only see the [`IbcLink`] and
//! [`DeLink`] traits.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::de::{DeConfig, DeConfigError, DeEngine, DeOutcome};
use crate::ibc::{IbcConfig, IbcOutcome, IbcSolver};
use crate::problem::Problem;
use crate::progress::{Event, Record, Sink, Worker};

/// Pending injections kept per mailbox; older ones are dropped first.
pub const INJECT_CAPACITY: usize = 16;

/// IB&C's view of the other worker.
pub trait IbcLink {
    /// Best certified upper bound received since the last poll.
    fn poll_bound(&mut self) -> Option<(f64, Vec<f64>)>;
    fn send_injection(&mut self, point: Vec<f64>);
}

/// DE's view of the other worker.
pub trait DeLink {
    fn publish(&mut self, value: f64, point: Vec<f64>);
    fn poll_injections(&mut self) -> Vec<Vec<f64>>;
    fn should_stop(&self) -> bool;
}

/// No partner: nothing arrives and everything sent is dropped.
#[derive(Debug, Default, Clone, Copy)]
pub struct Detached;

impl IbcLink for Detached {
    fn poll_bound(&mut self) -> Option<(f64, Vec<f64>)> {
        None
    }
    fn send_injection(&mut self, _: Vec<f64>) {}
}

impl DeLink for Detached {
    fn publish(&mut self, _: f64, _: Vec<f64>) {}
    fn poll_injections(&mut self) -> Vec<Vec<f64>> {
        Vec::new()
    }
    fn should_stop(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    UpperBound(f64, Vec<f64>),
    Inject(Vec<f64>),
    Terminate(Box<IbcOutcome>),
}

#[derive(Debug, Default)]
struct Slots {
    bound: Option<(f64, Vec<f64>)>,
    inject: VecDeque<Vec<f64>>,
    result: Option<Box<IbcOutcome>>,
}

/// One direction of traffic. Sending never blocks: only the best pending
/// upper bound is kept, and injections beyond [`INJECT_CAPACITY`] push out
/// the oldest.
#[derive(Debug, Default)]
pub struct Mailbox {
    slots: Mutex<Slots>,
    terminated: AtomicBool,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&self, m: Message) {
        let mut s = self.slots.lock().expect("mailbox poisoned");
        match m {
            Message::UpperBound(v, x) => {
                if s.bound.as_ref().is_none_or(|(old, _)| v < *old) {
                    s.bound = Some((v, x));
                }
            }
            Message::Inject(x) => {
                if s.inject.len() == INJECT_CAPACITY {
                    s.inject.pop_front();
                }
                s.inject.push_back(x);
            }
            Message::Terminate(r) => {
                s.result = Some(r);
                self.terminated.store(true, Ordering::Release);
            }
        }
    }

    /// Everything pending, in the order bound, injections, termination.
    pub fn drain(&self) -> Vec<Message> {
        let mut s = self.slots.lock().expect("mailbox poisoned");
        let mut out = Vec::new();
        if let Some((v, x)) = s.bound.take() {
            out.push(Message::UpperBound(v, x));
        }
        out.extend(s.inject.drain(..).map(Message::Inject));
        if let Some(r) = s.result.take() {
            out.push(Message::Terminate(r));
        }
        out
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated.load(Ordering::Acquire)
    }
}

/// IB&C end: reads `inbox`, writes `outbox`.
pub struct IbcEnd<'a> {
    pub inbox: &'a Mailbox,
    pub outbox: &'a Mailbox,
}

impl IbcLink for IbcEnd<'_> {
    fn poll_bound(&mut self) -> Option<(f64, Vec<f64>)> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for m in self.inbox.drain() {
            if let Message::UpperBound(v, x) = m {
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, x));
                }
            }
        }
        best
    }

    fn send_injection(&mut self, point: Vec<f64>) {
        self.outbox.send(Message::Inject(point));
    }
}

/// DE end: reads `inbox`, writes `outbox`.
pub struct DeEnd<'a> {
    pub inbox: &'a Mailbox,
    pub outbox: &'a Mailbox,
}

impl DeLink for DeEnd<'_> {
    fn publish(&mut self, value: f64, point: Vec<f64>) {
        self.outbox.send(Message::UpperBound(value, point));
    }

    fn poll_injections(&mut self) -> Vec<Vec<f64>> {
        self.inbox
            .drain()
            .into_iter()
            .filter_map(|m| match m {
                Message::Inject(x) => Some(x),
                _ => None,
            })
            .collect()
    }

    fn should_stop(&self) -> bool {
        self.inbox.is_terminated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Hybrid,
    IbcOnly,
    DeOnly,
    DeterministicInterleaved,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::IbcOnly => "ibc-only",
            Mode::DeOnly => "de-only",
            Mode::DeterministicInterleaved => "deterministic-interleaved",
        }
    }
}

/// Result of one run in any mode. `ibc` is absent for `de-only`, `de`
/// for `ibc-only`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub ibc: Option<IbcOutcome>,
    pub de: Option<DeOutcome>,
}

/// DE and IB&C on two threads. Progress of both is forwarded to `sink`
/// from the calling thread.
pub fn run_hybrid<S: Sink + ?Sized>(
    problem: &Problem,
    de_cfg: DeConfig,
    ibc_cfg: IbcConfig,
    sink: &mut S,
) -> Result<RunOutcome, DeConfigError> {
    de_cfg.validate()?;
    let to_ibc = Mailbox::new();
    let to_de = Mailbox::new();
    let (tx, rx) = mpsc::channel::<Record>();
    let (ibc, de) = std::thread::scope(|s| {
        let mut de_tx = tx.clone();
        let (to_ibc, to_de) = (&to_ibc, &to_de);
        let de = s.spawn(move || {
            let mut link = DeEnd {
                inbox: to_de,
                outbox: to_ibc,
            };
            let engine = DeEngine::new(problem, de_cfg).expect("validated");
            engine.run(&mut link, &mut de_tx)
        });
        let mut ibc_tx = tx;
        let ibc = s.spawn(move || {
            let mut link = IbcEnd {
                inbox: to_ibc,
                outbox: to_de,
            };
            // make sure DE stops even if the solver panics
            struct Stop<'a>(&'a Mailbox, Option<IbcOutcome>);
            impl Drop for Stop<'_> {
                fn drop(&mut self) {
                    self.0.send(Message::Terminate(Box::new(
                        self.1.take().unwrap_or_else(placeholder_outcome),
                    )));
                }
            }
            let mut guard = Stop(to_de, None);
            let out = IbcSolver::new(problem, ibc_cfg).run(&mut link, &mut ibc_tx);
            guard.1 = Some(out.clone());
            out
        });
        for r in rx {
            sink.emit(r.worker, r.event);
        }
        (ibc.join(), de.join())
    });
    let ibc = ibc.unwrap_or_else(|e| std::panic::resume_unwind(e));
    let de = de.unwrap_or_else(|e| std::panic::resume_unwind(e));
    Ok(RunOutcome {
        ibc: Some(ibc),
        de: Some(de),
    })
}

fn placeholder_outcome() -> IbcOutcome {
    IbcOutcome {
        status: crate::ibc::Status::Timeout,
        f_best: f64::INFINITY,
        lower_bound: f64::NEG_INFINITY,
        x_best: None,
        iterations: 0,
        ne_ibc: 0,
        tiny_boxes: 0,
    }
}

/// One engine alone: certification without DE bounds, or the heuristic
/// without certification.
pub fn run_single<S: Sink + ?Sized>(
    problem: &Problem,
    mode: Mode,
    de_cfg: DeConfig,
    ibc_cfg: IbcConfig,
    sink: &mut S,
) -> Result<RunOutcome, DeConfigError> {
    match mode {
        Mode::IbcOnly => Ok(RunOutcome {
            ibc: Some(
                IbcSolver::new(problem, ibc_cfg).run(&mut crate::cooperation::Detached, sink),
            ),
            de: None,
        }),
        Mode::DeOnly => {
            let mut cfg = de_cfg;
            if cfg.max_generations.is_none() && cfg.time_limit.is_none() {
                cfg.time_limit = ibc_cfg.time_limit.or(Some(Duration::from_secs(10)));
            }
            let de = DeEngine::new(problem, cfg)?.run(&mut Detached, sink);
            Ok(RunOutcome {
                ibc: None,
                de: Some(de),
            })
        }
        Mode::Hybrid => run_hybrid(problem, de_cfg, ibc_cfg, sink),
        Mode::DeterministicInterleaved => run_interleaved(problem, de_cfg, ibc_cfg, 1, sink),
    }
}

/// Both engines on the calling thread, alternating `k` DE generations
/// with `k` IB&C iterations. Output depends only on the inputs.
pub fn run_interleaved<S: Sink + ?Sized>(
    problem: &Problem,
    de_cfg: DeConfig,
    ibc_cfg: IbcConfig,
    k: usize,
    sink: &mut S,
) -> Result<RunOutcome, DeConfigError> {
    let mut de = DeEngine::new(problem, de_cfg)?;
    let mut ibc = IbcSolver::new(problem, ibc_cfg);
    let to_ibc = Mailbox::new();
    let to_de = Mailbox::new();
    let mut de_link = DeEnd {
        inbox: &to_de,
        outbox: &to_ibc,
    };
    let mut ibc_link = IbcEnd {
        inbox: &to_ibc,
        outbox: &to_de,
    };
    let mut timed_out = false;
    'outer: loop {
        for _ in 0..k {
            de.generation_step(&mut de_link, sink);
        }
        for _ in 0..k {
            if ibc.limit_reached() {
                timed_out = true;
                break 'outer;
            }
            if !ibc.step(&mut ibc_link, sink) {
                break 'outer;
            }
        }
    }
    let out = ibc.outcome(timed_out);
    sink.emit(
        Worker::Ibc,
        Event::Finished {
            status: out.status.as_str().to_string(),
            f_best: crate::progress::finite(out.f_best),
            lower_bound: crate::progress::finite(out.lower_bound),
        },
    );
    Ok(RunOutcome {
        ibc: Some(out),
        de: Some(de.outcome()),
    })
}
