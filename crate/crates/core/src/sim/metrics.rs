use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CustomerId, Pid, RequestId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub customer: CustomerId,
    pub target: Pid,
    pub arrival: SimTime,
    pub response: Option<SimTime>,
    /// Weighted unhappiness returned at settle; `None` while open.
    pub realized_u: Option<f64>,
    /// Index of the stream work item this request came from.
    pub stream: Option<usize>,
    pub deadline: Option<SimTime>,
}

impl RequestRecord {
    pub fn latency(&self) -> Option<SimTime> {
        self.response.map(|r| r - self.arrival)
    }

    pub fn on_time(&self) -> bool {
        match (self.latency(), self.deadline) {
            (Some(l), Some(d)) => l <= d,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub horizon: SimTime,
    pub hogs: u32,
    pub requests: Vec<RequestRecord>,
    /// Open-request system unhappiness sampled at every arrival and settle.
    pub unhappiness: Vec<(SimTime, f64)>,
    pub idle: SimTime,
    pub cpu: BTreeMap<Pid, SimTime>,
    /// Times a process without unhappiness held the CPU while an unhappy one
    /// was ready.
    pub precedence_violations: u64,
    pub max_load: u64,
}

/// One row of the metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub requests_settled: usize,
    pub requests_open: usize,
    pub mean_latency_us: f64,
    pub p99_latency_us: f64,
    pub mean_realized_u: f64,
    pub deadline_misses: usize,
    pub achieved_rate_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineReport {
    pub count: usize,
    pub on_time: usize,
    /// Late or never answered.
    pub misses: usize,
    pub achieved_rate_per_s: f64,
}

impl Metrics {
    pub fn settled(&self) -> impl Iterator<Item = &RequestRecord> {
        self.requests.iter().filter(|r| r.response.is_some())
    }

    pub fn request(&self, id: RequestId) -> Option<&RequestRecord> {
        self.requests.iter().find(|r| r.id == id)
    }

    pub fn total_cpu(&self) -> SimTime {
        self.cpu.values().copied().sum()
    }

    pub fn cpu_of(&self, pid: Pid) -> SimTime {
        self.cpu.get(&pid).copied().unwrap_or(SimTime::ZERO)
    }

    pub fn summary(&self, stream_periods: &BTreeMap<usize, SimTime>) -> Summary {
        let mut lat: Vec<u64> = self.settled().filter_map(|r| r.latency()).map(|l| l.as_us()).collect();
        lat.sort_unstable();
        let n = lat.len();
        let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| {
            if n == 0 {
                0.0
            } else {
                xs.sum::<f64>() / n as f64
            }
        };
        let mean_latency_us = mean(&mut lat.iter().map(|&l| l as f64), n);
        let p99_latency_us = percentile(&lat, 0.99);
        let mean_realized_u = mean(&mut self.settled().filter_map(|r| r.realized_u), n);
        let mut misses = 0;
        let mut rate = 0.0;
        for (&idx, &period) in stream_periods {
            let d = deadline_metrics(self, idx, period);
            misses += d.misses;
            rate += d.achieved_rate_per_s;
        }
        Summary {
            requests_settled: n,
            requests_open: self.requests.len() - n,
            mean_latency_us,
            p99_latency_us,
            mean_realized_u,
            deadline_misses: misses,
            achieved_rate_per_s: rate,
        }
    }
}

/// Nearest-rank percentile of sorted values; 0 for an empty slice.
pub fn percentile(sorted: &[u64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64
}

/// Deadline outcome of one stream. A request misses when it settles after
/// its deadline or not at all; the rate is on-time answers per second of
/// stream duration (`count * period`).
pub fn deadline_metrics(metrics: &Metrics, stream: usize, period: SimTime) -> DeadlineReport {
    let reqs: Vec<_> = metrics
        .requests
        .iter()
        .filter(|r| r.stream == Some(stream))
        .collect();
    let count = reqs.len();
    let on_time = reqs.iter().filter(|r| r.on_time()).count();
    let span = count as f64 * period.as_secs_f64();
    DeadlineReport {
        count,
        on_time,
        misses: count - on_time,
        achieved_rate_per_s: if span > 0.0 { on_time as f64 / span } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64, arrival: u64, latency: Option<u64>) -> RequestRecord {
        RequestRecord {
            id: RequestId(i),
            customer: CustomerId(0),
            target: Pid(1),
            arrival: SimTime(arrival),
            response: latency.map(|l| SimTime(arrival + l)),
            realized_u: latency.map(|l| l as f64),
            stream: Some(0),
            deadline: Some(SimTime(100)),
        }
    }

    #[test]
    fn all_on_time_gives_full_rate() {
        let m = Metrics {
            requests: (0..10).map(|i| rec(i, i * 40_000, Some(50))).collect(),
            ..Default::default()
        };
        let d = deadline_metrics(&m, 0, SimTime(40_000));
        assert_eq!((d.misses, d.on_time), (0, 10));
        assert!((d.achieved_rate_per_s - 25.0).abs() < 1e-9);
    }

    #[test]
    fn every_second_late_halves_rate() {
        let m = Metrics {
            requests: (0..10)
                .map(|i| rec(i, i * 40_000, Some(if i % 2 == 0 { 50 } else { 500 })))
                .collect(),
            ..Default::default()
        };
        let d = deadline_metrics(&m, 0, SimTime(40_000));
        assert_eq!(d.misses, 5);
        assert!((d.achieved_rate_per_s - 12.5).abs() < 1e-9);
    }

    #[test]
    fn unanswered_counts_as_miss() {
        let m = Metrics {
            requests: vec![rec(0, 0, None)],
            ..Default::default()
        };
        assert_eq!(deadline_metrics(&m, 0, SimTime(1)).misses, 1);
    }

    #[test]
    fn percentiles() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[7], 0.99), 7.0);
        assert_eq!(percentile(&[], 0.5), 0.0);
    }
}
