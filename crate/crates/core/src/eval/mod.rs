//! Backtesting: accuracy metrics, the Holt baseline and the expanding-window driver.

mod expanding;
mod holt;
mod metrics;

pub use expanding::{
    run_ensemble, run_expanding_window, ExpandingWindowPlan, MetricReport, WindowForecast,
    WindowRecord,
};
pub use holt::{holt_fit, holt_fit_forecast, HoltFit, HoltState};
pub use metrics::{coverage, directional_accuracy, mda, median, relative_error, Coverage};
