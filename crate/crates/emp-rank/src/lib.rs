//! File formats, parallel drivers and report rendering behind the `emp-rank`
//! command-line tool. The numerics live in `emp-core`.

pub mod dataset;
pub mod manifest;
pub mod network;
pub mod parallel;
pub mod report;

pub use manifest::RunManifest;
pub use network::NetworkFile;
pub use report::Format;

/// Process exit status of a failed invocation.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use emp_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonInformative { .. } | E::TruncationNotConverged { .. } | E::EmptyRanking => 3,
                _ => 2,
            };
        }
    }
    2
}

/// A computation finished but its result failed a check.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericalFailure(pub String);
