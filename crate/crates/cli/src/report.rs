//! CSV tables with a trailing metadata comment.

use curlrec::estimator::Effectivity;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header plus rows of preformatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self, echo: &str) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s.push_str(&metadata(echo));
        s
    }
}

/// `# curlrec <version> <echo>` line closing every CSV file.
pub fn metadata(echo: &str) -> String {
    format!("# curlrec {VERSION} {echo}\n")
}

pub fn real(x: f64) -> String {
    format!("{x:.6e}")
}

pub fn optional(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), real)
}

pub fn effectivity(e: Option<Effectivity>) -> String {
    e.map_or_else(|| "NA".to_string(), |e| e.to_string())
}

/// `log2(previous / current)` when both are positive.
pub fn rate(previous: Option<f64>, current: Option<f64>) -> Option<f64> {
    match (previous, current) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
        _ => None,
    }
}
