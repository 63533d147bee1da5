//! Device characterization: pulse-train traces, ΔG-vs-G₀ tables and the
//! voltage-response fit.

mod build;
mod fit;
mod trace;

pub use build::{
    bin_transitions, build_table, build_tables, ProgramKey, TransitionBins, DEFAULT_BINS,
    DEFAULT_SAMPLES_PER_CDF,
};
pub use fit::{
    fit_voltage_response, read_response_points, response_points, BranchResiduals, FitOptions,
    FitReport, ResponsePoint,
};
pub(crate) use trace::open_maybe_gz;
pub use trace::{synthesize_trace, PulseProgram, PulseRecord, PulseTrace, TRACE_HEADER};
