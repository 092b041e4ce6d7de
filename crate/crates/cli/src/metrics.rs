use std::fmt;
use std::time::Duration;

/// Counters and per-batch engine latencies for one run or session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub batches: u64,
    pub detections: u64,
    pub dropped: u64,
    pub alerts: u64,
    latencies_ns: Vec<u64>,
}

impl Metrics {
    pub fn record_batch(&mut self, detections: usize, alerts: usize, latency: Duration) {
        self.batches += 1;
        self.detections += detections as u64;
        self.alerts += alerts as u64;
        self.latencies_ns.push(latency.as_nanos() as u64);
    }

    /// Nearest-rank percentile of the per-batch latency, `q` in (0, 1].
    pub fn percentile(&self, q: f64) -> Option<Duration> {
        if self.latencies_ns.is_empty() {
            return None;
        }
        let mut v = self.latencies_ns.clone();
        v.sort_unstable();
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        Some(Duration::from_nanos(v[rank - 1]))
    }

    pub fn summary(&self) -> Summary {
        Summary {
            batches: self.batches,
            detections: self.detections,
            dropped: self.dropped,
            alerts: self.alerts,
            p50: self.percentile(0.5),
            p99: self.percentile(0.99),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub batches: u64,
    pub detections: u64,
    pub dropped: u64,
    pub alerts: u64,
    pub p50: Option<Duration>,
    pub p99: Option<Duration>,
}

fn micros(d: Option<Duration>) -> String {
    d.map_or_else(|| "-".into(), |d| format!("{:.1}us", d.as_secs_f64() * 1e6))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "batches={} detections={} dropped={} alerts={} p50={} p99={}",
            self.batches,
            self.detections,
            self.dropped,
            self.alerts,
            micros(self.p50),
            micros(self.p99)
        )
    }
}
