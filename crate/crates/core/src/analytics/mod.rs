//! Closed-form unhappiness for the standard request scenarios, as printed
//! and with the dimensional slips fixed, plus a comparator against measured
//! values.
//!
//! All values are in microseconds. `corrected` is the pure-waiting form
//! unless a function says otherwise.

mod compare;

pub use compare::{compare, Comparison, CompareRow, PairingError, Tolerance};

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    RrMin,
    RrTypical,
    MlfqMin,
    MlfqTypical,
    CfsTypical,
    RbpeTypical,
}

impl Formula {
    pub fn name(self) -> &'static str {
        match self {
            Formula::RrMin => "rr_min",
            Formula::RrTypical => "rr_typical",
            Formula::MlfqMin => "mlfq_min",
            Formula::MlfqTypical => "mlfq_typical",
            Formula::CfsTypical => "cfs_typical",
            Formula::RbpeTypical => "rbpe_typical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub formula: Formula,
    pub verbatim: f64,
    pub corrected: f64,
    /// A second printed form of the same quantity, where one exists.
    pub simplified: Option<f64>,
    pub assumptions: Vec<String>,
    /// Inputs outside the formula's stated domain. Non-empty means the
    /// values should not be compared against anything.
    pub violations: Vec<String>,
}

impl OracleResult {
    fn new(formula: Formula, assumptions: &[&str]) -> Self {
        OracleResult {
            formula,
            verbatim: f64::NAN,
            corrected: f64::NAN,
            simplified: None,
            assumptions: assumptions.iter().map(|s| s.to_string()).collect(),
            violations: Vec::new(),
        }
    }

    pub fn in_domain(&self) -> bool {
        self.violations.is_empty()
    }

    fn violate(mut self, why: impl Into<String>) -> Self {
        self.violations.push(why.into());
        self
    }
}

fn us(t: SimTime) -> f64 {
    t.as_us() as f64
}

/// Direct request served in `z` quanta behind `n - 1` hogs.
/// Printed: q(Z(N-2)+1). Waiting only: Z q (N-1).
pub fn rr_min(q: SimTime, z: u32, n: u32) -> OracleResult {
    let mut r = OracleResult::new(Formula::RrMin, &["alpha = 0", "hogs use whole quanta"]);
    if n < 2 {
        return r.violate(format!("N = {n} < 2"));
    }
    if z < 1 {
        return r.violate("Z < 1");
    }
    let (q, z, n) = (us(q), z as f64, n as f64);
    r.verbatim = q * (z * (n - 2.0) + 1.0);
    r.corrected = z * q * (n - 1.0);
    r
}

/// Three-part chain requester, servicer, requester with `z1`, `z2`, `z3`
/// quanta. Printed: q((Z1+Z2+Z3)(N-2)+3). Waiting only: (Z1+Z2+Z3) q (N-1).
pub fn rr_typical(q: SimTime, z1: u32, z2: u32, z3: u32, n: u32) -> OracleResult {
    let mut r = OracleResult::new(
        Formula::RrTypical,
        &["alpha = 0", "always N runnable", "hogs use whole quanta"],
    );
    if z2 == 0 && z3 == 0 {
        return r.violate("no service segments; use rr_min");
    }
    if z1 < 1 || z2 < 1 || z3 < 1 {
        return r.violate("every Z must be at least 1");
    }
    if n < 2 {
        return r.violate(format!("N = {n} < 2"));
    }
    let (q, z, n) = (us(q), (z1 + z2 + z3) as f64, n as f64);
    r.verbatim = q * (z * (n - 2.0) + 3.0);
    r.corrected = z * q * (n - 1.0);
    r
}

/// Highest queue index touched by a request of `z` base quanta, when
/// z + 1 is a power of two.
pub fn mlfq_depth(z: u32) -> Option<u32> {
    let z1 = z.checked_add(1)?;
    (z >= 1 && z1.is_power_of_two()).then(|| z1.trailing_zeros() - 1)
}

/// Request of `z` base quanta entering the top queue with `a[i]` processes
/// (itself included) at level i.
///
/// `verbatim` is the summed form q(sum 2^i (a_i - 1) - sum_{i<x} 2^i);
/// `simplified` is the closed form whose last term is 2^x, one q lower;
/// `corrected` is waiting only, q sum 2^i (a_i - 1).
pub fn mlfq_min(q: SimTime, a: &[u32], z: u32) -> OracleResult {
    let mut r = OracleResult::new(
        Formula::MlfqMin,
        &["alpha = 0", "a_i counts the request's process", "no arrivals while served"],
    );
    let Some(x) = mlfq_depth(z) else {
        return r.violate(format!("Z + 1 = {} is not a power of two", z as u64 + 1));
    };
    if a.len() <= x as usize {
        return r.violate(format!("need {} queue populations, got {}", x + 1, a.len()));
    }
    if a.iter().any(|&ai| ai == 0) {
        return r.violate("every a_i must be at least 1");
    }
    let q = us(q);
    let waiting: f64 = (0..=x)
        .map(|i| f64::from(1u32 << i) * f64::from(a[i as usize] - 1))
        .sum();
    let ran_before_last: f64 = (0..x).map(|i| f64::from(1u32 << i)).sum();
    r.verbatim = q * (waiting - ran_before_last);
    r.simplified = Some(q * (waiting - f64::from(1u32 << x)));
    r.corrected = q * waiting;
    r
}

/// Three-part chain under MLFQ; every segment restarts at the top queue.
pub fn mlfq_typical(q: SimTime, a: &[u32], z1: u32, z2: u32, z3: u32) -> OracleResult {
    let parts = [mlfq_min(q, a, z1), mlfq_min(q, a, z2), mlfq_min(q, a, z3)];
    let mut r = OracleResult::new(Formula::MlfqTypical, &["alpha = 0", "each wakeup enters Q_0"]);
    for p in &parts {
        r.violations.extend(p.violations.iter().cloned());
    }
    if !r.in_domain() {
        return r;
    }
    r.verbatim = parts.iter().map(|p| p.verbatim).sum();
    r.corrected = parts.iter().map(|p| p.corrected).sum();
    r.simplified = Some(parts.iter().filter_map(|p| p.simplified).sum());
    r
}

/// Three-part chain under fair share with `n` equal-weight runnable
/// processes, slice q(N) = sch_lat / N.
///
/// Printed: (N-1)(tau/q(N) - 3) - tau. Corrected: (tau/q(N) - 3)(N-1) q(N),
/// the waiting rounds times the length of one round.
pub fn cfs_typical(sch_lat: SimTime, n: u32, tau1: SimTime, tau2: SimTime, tau3: SimTime) -> OracleResult {
    let mut r = OracleResult::new(
        Formula::CfsTypical,
        &["alpha = 0", "all nice 0", "woken processes go leftmost"],
    );
    if n < 2 {
        return r.violate(format!("N = {n} < 2"));
    }
    for (i, t) in [tau1, tau2, tau3].into_iter().enumerate() {
        if t.is_zero() || (t.as_us() * u64::from(n)) % sch_lat.as_us() != 0 {
            r = r.violate(format!("tau{} = {} is not a positive multiple of sch_lat/N", i + 1, t));
        }
    }
    if !r.in_domain() {
        return r;
    }
    let n = f64::from(n);
    let slice = us(sch_lat) / n;
    let tau = us(tau1) + us(tau2) + us(tau3);
    r.verbatim = (n - 1.0) * (tau / slice - 3.0) - tau;
    r.corrected = (tau / slice - 3.0) * (n - 1.0) * slice;
    r
}

/// Fraction of the CPU for one process boosted by `boost` nice levels among
/// `n - 1` nice-0 processes: 1.25^b / (N - 1 + 1.25^b).
pub fn rbpe_share(n: u32, boost: u32) -> f64 {
    let w = 1.25f64.powi(boost as i32);
    w / (f64::from(n) - 1.0 + w)
}

/// Three-part chain under boosted fair share, with the boost relaxing one
/// level per slice.
///
/// Printed: the waiting sums minus tau, where tau's sums lack the sch_lat
/// factor (so tau is dimensionless). `corrected` restores that factor.
pub fn rbpe_typical(sch_lat: SimTime, n: u32, boost: u32, z1: u32, z2: u32, z3: u32) -> OracleResult {
    let mut r = OracleResult::new(
        Formula::RbpeTypical,
        &["alpha = 0", "decay delay at most one slice", "others at nice 0"],
    );
    if boost == 0 || boost > 15 {
        return r.violate(format!("boost {boost} outside 1..=15"));
    }
    if n < 2 {
        return r.violate(format!("N = {n} < 2"));
    }
    for z in [z1, z2, z3] {
        if z < 1 || z > boost + 1 {
            r = r.violate(format!("Z = {z} outside 1..={}", boost + 1));
        }
    }
    if !r.in_domain() {
        return r;
    }
    let others = f64::from(n) - 1.0;
    let lat = us(sch_lat);
    let w = |i: u32| 1.25f64.powi(boost as i32 - i as i32);
    let wait = |z: u32| -> f64 { (0..z.saturating_sub(1)).map(|i| others * lat / (others + w(i))).sum() };
    let ran = |z: u32| -> f64 { (1..z).map(|i| w(i) / (others + w(i))).sum() };
    let waiting: f64 = [z1, z2, z3].into_iter().map(wait).sum();
    let tau: f64 = [z1, z2, z3].into_iter().map(ran).sum();
    r.verbatim = waiting - tau;
    r.corrected = waiting - tau * lat;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: u64 = 1_000_000;

    #[test]
    fn rr_examples() {
        assert_eq!(rr_min(SimTime(S), 1, 2).verbatim, S as f64);
        assert_eq!(rr_min(SimTime(S), 5, 2).verbatim, S as f64);
        // 10 * (3 * 3 + 1)
        assert_eq!(rr_min(SimTime(10), 3, 5).verbatim, 100.0);
        assert_eq!(rr_min(SimTime(10), 3, 5).corrected, 120.0);
        assert!(!rr_min(SimTime(1), 1, 1).in_domain());
        assert_eq!(rr_typical(SimTime(1), 1, 1, 1, 2).verbatim, 3.0);
        // 1 * (9 * 2 + 3)
        assert_eq!(rr_typical(SimTime(1), 2, 3, 4, 4).verbatim, 21.0);
        assert!(!rr_typical(SimTime(1), 3, 0, 0, 4).in_domain());
    }

    #[test]
    fn mlfq_examples() {
        assert_eq!(mlfq_min(SimTime(1), &[1], 1).verbatim, 0.0);
        let r = mlfq_min(SimTime(1), &[3, 3], 3);
        assert_eq!(r.verbatim, 5.0);
        assert_eq!(r.simplified, Some(4.0));
        assert_eq!(mlfq_min(SimTime(2), &[2, 2], 3).verbatim, 4.0);
        assert!(!mlfq_min(SimTime(1), &[1, 1], 2).in_domain());
        assert!(!mlfq_min(SimTime(1), &[1], 3).in_domain());
        assert_eq!(mlfq_typical(SimTime(1), &[1], 1, 1, 1).verbatim, 0.0);
        assert_eq!(mlfq_typical(SimTime(1), &[3, 3], 3, 3, 3).verbatim, 15.0);
        assert_eq!(mlfq_typical(SimTime(1), &[2, 2], 1, 3, 1).verbatim, 4.0);
    }

    #[test]
    fn simplified_mlfq_is_one_quantum_low() {
        for z in [1, 3, 7, 15] {
            let a = [4, 3, 2, 1];
            let r = mlfq_min(SimTime(7), &a, z);
            assert_eq!(r.verbatim - r.simplified.unwrap(), 7.0, "z = {z}");
        }
    }

    #[test]
    fn cfs_examples() {
        let q = SimTime(4000);
        let r = cfs_typical(SimTime(20_000), 5, q, q, q);
        assert_eq!(r.corrected, 0.0);
        assert_eq!(r.verbatim, -3.0 * 4000.0);
        let t = SimTime(12_000);
        assert_eq!(cfs_typical(SimTime(20_000), 5, t, t, t).corrected, 96_000.0);
        let q2 = SimTime(10_000);
        assert_eq!(cfs_typical(SimTime(20_000), 2, q2, q2, q2).corrected, 0.0);
        assert!(!cfs_typical(SimTime(20_000), 3, SimTime(5000), q, q).in_domain());
    }

    #[test]
    fn rbpe_examples() {
        let r = rbpe_typical(SimTime(20_000), 10, 4, 1, 1, 1);
        assert_eq!((r.verbatim, r.corrected), (0.0, 0.0));
        let r = rbpe_typical(SimTime(20_000), 10, 4, 2, 2, 2);
        let per_segment = 9.0 * 20_000.0 / (9.0 + 1.25f64.powi(4));
        assert!((per_segment - 15_732.0).abs() < 1.0);
        let ran = 1.25f64.powi(3) / (9.0 + 1.25f64.powi(3));
        assert!((r.verbatim - (3.0 * per_segment - 3.0 * ran)).abs() < 1e-9);
        assert!((r.corrected - 3.0 * (per_segment - 20_000.0 * ran)).abs() < 1e-9);
        assert!(!rbpe_typical(SimTime(20_000), 10, 2, 4, 1, 1).in_domain());
    }

    #[test]
    fn boosted_share_never_below_fair_share() {
        for n in 1..=64 {
            assert!((rbpe_share(n, 0) - 1.0 / n as f64).abs() < 1e-12);
            for b in 1..=15 {
                assert!(rbpe_share(n, b) >= 1.0 / n as f64);
            }
        }
        // nice -4 among ten: slice of 20ms
        let slice = rbpe_share(10, 4) * 20.0;
        assert!((slice - 4.2676).abs() < 1e-3);
    }
}
