//! Discrete-event core: virtual clock, time-ordered event queue and named
//! random streams.
//!
//! All simulated time is kept in milliseconds as `f64`. Events that fire at
//! the same instant are dispatched in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;

/// A point (or span) of simulated time in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);
    pub const MAX: SimTime = SimTime(f64::INFINITY);

    /// Panics if `ms` is negative or NaN.
    pub fn from_ms(ms: f64) -> Self {
        assert!(ms >= 0.0, "simulated time must be non-negative, got {ms}");
        SimTime(ms)
    }

    pub fn from_secs(secs: f64) -> Self {
        Self::from_ms(secs * 1_000.0)
    }

    pub fn from_days(days: f64) -> Self {
        Self::from_secs(days * 86_400.0)
    }

    pub fn as_ms(self) -> f64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 / 1_000.0
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }

    /// Scales a duration.
    pub fn scale(self, factor: f64) -> SimTime {
        SimTime::from_ms(self.0 * factor)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    /// Saturates at zero.
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime((self.0 - rhs.0).max(0.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ms", self.0)
    }
}

/// Opaque handle used to cancel a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (then lowest seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .total_cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Time-ordered event queue owning the simulation clock.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    cancelled: HashSet<u64>,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Number of queued events that have not been cancelled.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> Result<EventHandle, EngineError> {
        if fire_at.as_ms().is_nan() || fire_at < self.now {
            return Err(EngineError::InPast {
                fire_at: fire_at.as_ms(),
                now: self.now.as_ms(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            event,
        });
        Ok(EventHandle(seq))
    }

    /// Schedules `event` a non-negative `delay` after the current clock.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event)
            .expect("relative schedule cannot be in the past")
    }

    /// Cancels a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq || !self.heap.iter().any(|e| e.seq == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Cancels without checking that the event is still queued. Cheaper than
    /// [`Scheduler::cancel`] for callers that track liveness themselves.
    pub(crate) fn cancel_unchecked(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    fn pop_live(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.fire_at > end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked entry");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            return Some((entry.fire_at, entry.event));
        }
    }

    /// Dispatches every live event with `fire_at <= end` in time order,
    /// calling `handler` for each. The handler may schedule further events.
    /// Returns the number of events dispatched by this call.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, E),
    {
        let mut count = 0;
        while let Some((at, event)) = self.pop_live(end) {
            debug_assert!(at >= self.now);
            self.now = at;
            self.dispatched += 1;
            count += 1;
            handler(self, event);
        }
        count
    }
}

/// Purpose labels for independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    Placement,
    /// Per-node arrival process.
    Traffic(u32),
    /// Per-node confirmed/unconfirmed marking.
    Marking(u32),
    /// Per-node shadowing draws for frames the node sends or receives.
    Shadowing(u32),
    /// Per-node retransmission backoff.
    Backoff(u32),
    /// Gateway downlink-data generation and addressing.
    Downlink,
}

impl StreamId {
    fn index(self) -> u64 {
        // Low byte tags the purpose; the node id sits above it.
        match self {
            StreamId::Placement => 0,
            StreamId::Downlink => 1,
            StreamId::Traffic(n) => (u64::from(n) << 8) | 2,
            StreamId::Marking(n) => (u64::from(n) << 8) | 3,
            StreamId::Shadowing(n) => (u64::from(n) << 8) | 4,
            StreamId::Backoff(n) => (u64::from(n) << 8) | 5,
        }
    }
}

/// A reproducible random stream keyed by `(seed, stream id)`.
pub type RngStream = ChaCha8Rng;

pub fn rng_stream(seed: u64, id: StreamId) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id.index());
    rng
}
