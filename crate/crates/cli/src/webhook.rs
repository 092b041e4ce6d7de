//! HTTP webhook sink.
//!
//! `emit` only enqueues. A worker thread POSTs each alert JSON object,
//! retrying failures `retry_count` times. The queue is bounded; when it is
//! full the oldest alert is discarded and counted, so a slow or dead
//! endpoint can never stall the engine.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use ppe_core::Alert;

use crate::sinks::{alert_json, AlertSink, SinkStats};

const RETRY_BACKOFF: Duration = Duration::from_millis(50);
/// How long a closing sink keeps draining its queue.
const CLOSE_GRACE: Duration = Duration::from_secs(2);

#[derive(Default)]
struct Queue {
    items: VecDeque<String>,
    closing_deadline: Option<Instant>,
}

#[derive(Default)]
struct Shared {
    queue: Mutex<Queue>,
    ready: Condvar,
    delivered: AtomicU64,
    failed: AtomicU64,
    dropped: AtomicU64,
    attempts: AtomicU64,
}

pub struct WebhookSink {
    url: String,
    capacity: usize,
    shared: Arc<Shared>,
    worker: Option<JoinHandle<()>>,
}

impl WebhookSink {
    pub fn spawn(url: String, timeout_ms: u64, retry_count: u32, capacity: usize) -> Self {
        let shared = Arc::new(Shared::default());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms.max(1))))
            .build()
            .into();
        let worker = {
            let shared = shared.clone();
            let url = url.clone();
            thread::Builder::new()
                .name("webhook".into())
                .spawn(move || worker_loop(&agent, &url, retry_count, &shared))
                .expect("spawn webhook worker")
        };
        WebhookSink {
            url,
            capacity: capacity.max(1),
            shared,
            worker: Some(worker),
        }
    }

    /// Total HTTP requests made so far, including retries.
    pub fn attempts(&self) -> u64 {
        self.shared.attempts.load(Ordering::SeqCst)
    }

    /// Stop accepting work, drain what is queued (up to a grace period) and
    /// join the worker.
    pub fn close(&mut self) {
        if let Some(worker) = self.worker.take() {
            self.shared.queue.lock().unwrap().closing_deadline = Some(Instant::now() + CLOSE_GRACE);
            self.shared.ready.notify_all();
            let _ = worker.join();
        }
    }
}

impl Drop for WebhookSink {
    fn drop(&mut self) {
        self.close();
    }
}

impl AlertSink for WebhookSink {
    fn name(&self) -> String {
        format!("webhook {}", self.url)
    }

    fn emit(&mut self, alert: &Alert) {
        let body = alert_json(alert);
        let mut q = self.shared.queue.lock().unwrap();
        if q.items.len() >= self.capacity {
            q.items.pop_front();
            self.shared.dropped.fetch_add(1, Ordering::SeqCst);
        }
        q.items.push_back(body);
        drop(q);
        self.shared.ready.notify_one();
    }

    fn stats(&self) -> SinkStats {
        SinkStats {
            delivered: self.shared.delivered.load(Ordering::SeqCst),
            failed: self.shared.failed.load(Ordering::SeqCst),
            dropped: self.shared.dropped.load(Ordering::SeqCst),
        }
    }
}

fn worker_loop(agent: &ureq::Agent, url: &str, retry_count: u32, shared: &Shared) {
    loop {
        let (body, deadline) = {
            let mut q = shared.queue.lock().unwrap();
            loop {
                if let Some(body) = q.items.pop_front() {
                    break (body, q.closing_deadline);
                }
                if q.closing_deadline.is_some() {
                    return;
                }
                q = shared.ready.wait(q).unwrap();
            }
        };
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let mut q = shared.queue.lock().unwrap();
            let n = 1 + q.items.len() as u64;
            q.items.clear();
            shared.dropped.fetch_add(n, Ordering::SeqCst);
            log::warn!("webhook {url}: discarded {n} undelivered alerts at shutdown");
            return;
        }

        let mut last_err = String::new();
        let mut ok = false;
        for attempt in 0..=retry_count {
            if attempt > 0 {
                thread::sleep(RETRY_BACKOFF * attempt);
            }
            shared.attempts.fetch_add(1, Ordering::SeqCst);
            match agent
                .post(url)
                .header("Content-Type", "application/json")
                .send(body.as_str())
            {
                Ok(_) => {
                    ok = true;
                    break;
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        if ok {
            shared.delivered.fetch_add(1, Ordering::SeqCst);
        } else {
            shared.failed.fetch_add(1, Ordering::SeqCst);
            log::warn!("webhook {url}: giving up after {} attempts: {last_err}", retry_count + 1);
        }
    }
}
