//! Aggregation of node messages and weighted knockoff selection.

mod binomial;
mod confidence;
mod select;
mod summary;

pub use binomial::{aggregate_chi, binomial_pvalue, EXACT_BINOMIAL_LIMIT};
pub use confidence::{expected_omega, ConfidenceSpec};
pub use select::{
    aggregate_summaries, k_hat_from_confidences, knockoff_select, rank_by_w, selection_csv, selection_rows, wfdp,
    AggregateStats, SelectionResult, SelectionRow, SELECTION_CSV_HEADER,
};
pub use summary::{aggregate_w, SummarySpec};
