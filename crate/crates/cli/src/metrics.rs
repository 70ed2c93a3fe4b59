use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::commands::CliError;

/// Timing and counter rows collected during one command.
#[derive(Debug, Default)]
pub struct Metrics {
    rows: Vec<(String, String, String)>,
}

impl Metrics {
    pub fn record(&mut self, item: impl Into<String>, metric: &str, value: impl ToString) {
        self.rows
            .push((item.into(), metric.into(), value.to_string()));
    }

    pub fn seconds(&mut self, item: impl Into<String>, metric: &str, d: Duration) {
        self.record(item, metric, format!("{:.6}", d.as_secs_f64()));
    }

    /// Runs `f` and records how long it took.
    pub fn time<T>(&mut self, item: &str, metric: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.seconds(item, metric, start.elapsed());
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = String::from("item,metric,value\n");
        for (item, metric, value) in &self.rows {
            let _ = writeln!(text, "{item},{metric},{value}");
        }
        skyx_core::io::write_text(path, &text).map_err(CliError::Data)
    }
}
