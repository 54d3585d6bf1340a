use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Formula, OracleResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// Within 1e-9 absolute, for integer-microsecond closed forms.
    Exact,
    Absolute(f64),
    Relative(f64),
}

impl Tolerance {
    pub fn accepts(self, measured: f64, expected: f64) -> bool {
        if !measured.is_finite() || !expected.is_finite() {
            return false;
        }
        let diff = (measured - expected).abs();
        match self {
            Tolerance::Exact => diff <= 1e-9,
            Tolerance::Absolute(a) => diff <= a,
            Tolerance::Relative(r) => diff <= r * expected.abs().max(f64::MIN_POSITIVE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub formula: Formula,
    pub measured: f64,
    pub verbatim: f64,
    pub corrected: f64,
    pub verbatim_error: f64,
    pub corrected_error: f64,
    pub verbatim_ok: bool,
    pub corrected_ok: bool,
    /// Oracle inputs outside the formula's domain; the row is reported but
    /// does not count.
    pub excluded: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn counted(&self) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(|r| !r.excluded)
    }

    pub fn all_corrected_ok(&self) -> bool {
        self.counted().all(|r| r.corrected_ok)
    }

    pub fn all_verbatim_ok(&self) -> bool {
        self.counted().all(|r| r.verbatim_ok)
    }

    pub fn max_corrected_error(&self) -> f64 {
        self.counted().map(|r| r.corrected_error).fold(0.0, f64::max)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{measured} measured values for {oracles} oracle results")]
pub struct PairingError {
    pub measured: usize,
    pub oracles: usize,
}

pub fn compare(measured: &[f64], oracles: &[OracleResult], tol: Tolerance) -> Result<Comparison, PairingError> {
    if measured.len() != oracles.len() {
        return Err(PairingError { measured: measured.len(), oracles: oracles.len() });
    }
    let rows = measured
        .iter()
        .zip(oracles)
        .map(|(&m, o)| CompareRow {
            formula: o.formula,
            measured: m,
            verbatim: o.verbatim,
            corrected: o.corrected,
            verbatim_error: (m - o.verbatim).abs(),
            corrected_error: (m - o.corrected).abs(),
            verbatim_ok: o.in_domain() && tol.accepts(m, o.verbatim),
            corrected_ok: o.in_domain() && tol.accepts(m, o.corrected),
            excluded: !o.in_domain(),
        })
        .collect();
    Ok(Comparison { rows })
}
