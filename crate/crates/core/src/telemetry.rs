//! One-way telemetry channel from the control loop to a sink.
//!
//! Sending never blocks and never fails while the receiver is alive: once
//! the queue holds `capacity` records the oldest one is dropped.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

struct Shared<T> {
    queue: VecDeque<T>,
    capacity: usize,
    dropped: u64,
}

pub struct TelemetrySender<T> {
    shared: Arc<Mutex<Shared<T>>>,
}

pub struct TelemetryReceiver<T> {
    shared: Arc<Mutex<Shared<T>>>,
}

pub fn channel<T>(capacity: usize) -> (TelemetrySender<T>, TelemetryReceiver<T>) {
    let shared = Arc::new(Mutex::new(Shared {
        queue: VecDeque::with_capacity(capacity.max(1)),
        capacity: capacity.max(1),
        dropped: 0,
    }));
    (
        TelemetrySender {
            shared: Arc::clone(&shared),
        },
        TelemetryReceiver { shared },
    )
}

impl<T> TelemetrySender<T> {
    pub fn send(&self, record: T) {
        let mut s = self.shared.lock().expect("telemetry lock poisoned");
        if s.queue.len() == s.capacity {
            s.queue.pop_front();
            s.dropped += 1;
        }
        s.queue.push_back(record);
    }
}

impl<T> TelemetryReceiver<T> {
    /// Takes every queued record, oldest first.
    pub fn drain(&self) -> Vec<T> {
        let mut s = self.shared.lock().expect("telemetry lock poisoned");
        s.queue.drain(..).collect()
    }

    pub fn try_recv(&self) -> Option<T> {
        self.shared
            .lock()
            .expect("telemetry lock poisoned")
            .queue
            .pop_front()
    }

    /// Records discarded because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.shared.lock().expect("telemetry lock poisoned").dropped
    }
}
