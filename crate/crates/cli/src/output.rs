//! Report model shared by all subcommands and its CSV, table and JSON renderings.

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Table,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

/// Shortest round-trip form; exponent notation outside `[1e-5, 1e16)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => format!("{b}"),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Output of one subcommand.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Summary lines, rendered as `# key: value` comments in CSV.
    pub notes: Vec<(String, String)>,
    pub result: Value,
    /// Set when the run's verdict is negative; turns into exit status 3 under `--strict`.
    pub failure: Option<String>,
    /// Default `(x, y)` columns for `--plot`.
    pub plot: Option<(&'static str, &'static str)>,
}

impl Report {
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn note_num(&mut self, key: &str, value: f64) {
        self.notes.push((key.to_string(), fmt_num(value)));
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.columns.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::Config(format!(
                "no column '{name}' (have {})",
                self.columns.join(", ")
            ))
        })
    }

    pub fn series(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
        let (xi, yi) = (self.column(x)?, self.column(y)?);
        Ok(self
            .rows
            .iter()
            .filter_map(|r| Some((r[xi].as_f64()?, r[yi].as_f64()?)))
            .collect())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn one_line(s: &str) -> String {
    s.replace('\n', " ")
}

pub fn render(report: &Report, format: Format, command: &str, echo: &Value) -> String {
    let mut out = String::new();
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "command": command,
                "config": echo,
                "result": report.result,
            });
            out = serde_json::to_string_pretty(&doc).expect("report serializes");
            out.push('\n');
        }
        Format::Csv => {
            out.push_str(&format!("# config: {echo}\n"));
            for (k, v) in &report.notes {
                out.push_str(&format!("# {k}: {}\n", one_line(v)));
            }
            out.push_str(&report.columns.join(","));
            out.push('\n');
            for row in &report.rows {
                let cells: Vec<String> = row.iter().map(|c| csv_field(&c.render())).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        Format::Table => {
            out.push_str(&format!("config: {echo}\n"));
            let key_w = report.notes.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in &report.notes {
                out.push_str(&format!("{k:<key_w$}  {v}\n"));
            }
            if !report.columns.is_empty() {
                let cells: Vec<Vec<String>> = report
                    .rows
                    .iter()
                    .map(|r| r.iter().map(Cell::render).collect())
                    .collect();
                let widths: Vec<usize> = report
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        cells
                            .iter()
                            .map(|r| r[j].len())
                            .chain([c.len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                if !report.notes.is_empty() {
                    out.push('\n');
                }
                let line = |vals: Vec<&str>| {
                    let parts: Vec<String> = vals
                        .iter()
                        .zip(&widths)
                        .map(|(v, w)| format!("{v:<w$}"))
                        .collect();
                    parts.join("  ").trim_end().to_string() + "\n"
                };
                out.push_str(&line(report.columns.clone()));
                for r in &cells {
                    out.push_str(&line(r.iter().map(String::as_str).collect()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report {
            columns: vec!["r", "label"],
            rows: vec![
                vec![Cell::Num(0.5), "a,b".into()],
                vec![Cell::Num(2.0), Cell::Empty],
            ],
            ..Default::default()
        };
        r.note("verdict", "ok");
        r
    }

    #[test]
    fn csv_layout() {
        let s = render(&sample(), Format::Csv, "phi", &serde_json::json!({"k": 1}));
        assert_eq!(
            s,
            "# config: {\"k\":1}\n# verdict: ok\nr,label\n0.5,\"a,b\"\n2,\n"
        );
    }

    #[test]
    fn number_formatting_round_trips() {
        for v in [0.0, 1.5, 2.894983412964649e46, 1e-300, -3.25e-7, 12345.678] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert!(s.len() < 26, "{s}");
        }
    }

    #[test]
    fn json_wraps_config_and_result() {
        let s = render(&sample(), Format::Json, "phi", &serde_json::json!({}));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["command"], "phi");
        assert!(v.get("result").is_some());
    }

    #[test]
    fn series_skips_missing_cells() {
        let mut r = sample();
        r.columns = vec!["r", "y"];
        r.rows[0][1] = Cell::Num(1.0);
        assert_eq!(r.series("r", "y").unwrap(), vec![(0.5, 1.0)]);
        assert!(r.series("r", "z").is_err());
    }
}
