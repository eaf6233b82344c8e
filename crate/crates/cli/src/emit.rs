use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

/// Named numeric columns, one `Vec` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// 12 significant digits, fixed or scientific like C's `%.12g`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| format!("not a number: {s:?}")),
    }
}

/// Render `table` as text. CSV output starts with `#` lines echoing the
/// resolved config when one is given.
pub fn render(
    table: &Table,
    format: Format,
    config: Option<&ExperimentConfig>,
) -> Result<String, CliError> {
    if table.is_empty() {
        return Err(CliError::EmptyTable);
    }
    match format {
        Format::Csv => {
            let mut out = Vec::new();
            if let Some(cfg) = config {
                let mode = serde_json::to_value(cfg.mode).expect("mode serializes");
                writeln!(out, "# weakmeas {}", mode.as_str().unwrap_or_default())?;
                writeln!(out, "# config {}", cfg.echo())?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|&x| format_number(x)))?;
            }
            w.flush()?;
            drop(w);
            Ok(String::from_utf8(out).expect("CSV output is UTF-8"))
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, &x)| {
                            (
                                c.clone(),
                                serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number),
                            )
                        })
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            Ok(s)
        }
    }
}

/// Write `table` to `dest`, or to standard output when `dest` is `None`.
pub fn emit(
    table: &Table,
    format: Format,
    config: Option<&ExperimentConfig>,
    dest: Option<&Path>,
) -> Result<(), CliError> {
    let text = render(table, format, config)?;
    write_text(&text, dest)
}

pub fn write_text(text: &str, dest: Option<&Path>) -> Result<(), CliError> {
    match dest {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Read back CSV produced by [`render`], skipping `#` lines.
pub fn parse_csv(text: &str) -> Result<Table, String> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(String::from)
        .collect();
    let mut table = Table::new(columns);
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        table.push(rec.iter().map(parse_number).collect::<Result<_, _>>()?);
    }
    Ok(table)
}
