//! JSON and CSV records written by the command line.

use serde::Serialize;

use mmacc_core::AccountingResult;

/// Stable JSON schema of one accounting run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccountingReport {
    pub epsilon: f64,
    pub delta_total: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub max_ptilde: f64,
    pub max_ptilde_over_p: f64,
    pub unique_rows: usize,
    pub rows: usize,
    pub runtime_ms: u64,
    pub non_adaptive_only: bool,
}

impl From<&AccountingResult> for AccountingReport {
    fn from(r: &AccountingResult) -> Self {
        Self {
            epsilon: r.epsilon,
            delta_total: r.delta_total,
            delta1: r.delta1,
            delta2: r.delta2,
            max_ptilde: r.max_ptilde,
            max_ptilde_over_p: r.max_ptilde_over_p,
            unique_rows: r.unique_rows,
            rows: r.rows,
            runtime_ms: r.runtime_ms,
            non_adaptive_only: r.non_adaptive_only,
        }
    }
}

/// Result of a single-mechanism query (`compose-sgd`, `apps`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub delta: f64,
    pub runtime_ms: u64,
}

/// One point of the amplification experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationRow {
    pub c: f64,
    pub n: usize,
    pub sigma: f64,
    pub eps_unamplified: f64,
    pub eps_amplified: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartRow {
    pub sigma: f64,
    pub eps_mmcc_iid: f64,
    pub eps_banded_minsep: f64,
}

/// CSV with a header row taken from the record's field names.
pub fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(header).expect("writing to memory");
    for r in rows {
        writer.serialize(r).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("utf-8 output")
}

pub const AMPLIFICATION_HEADER: [&str; 6] = ["c", "n", "sigma", "eps_unamplified", "eps_amplified", "ratio"];
pub const RESTART_HEADER: [&str; 3] = ["sigma", "eps_mmcc_iid", "eps_banded_minsep"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restart_header() {
        let csv = to_csv(
            &[RestartRow {
                sigma: 20.0,
                eps_mmcc_iid: 1.0,
                eps_banded_minsep: 2.0,
            }],
            &RESTART_HEADER,
        );
        assert_eq!(csv.lines().next(), Some("sigma,eps_mmcc_iid,eps_banded_minsep"));
        assert_eq!(csv.lines().nth(1), Some("20.0,1.0,2.0"));
    }
}
