//! Numeric CSV tables with `#`-prefixed metadata lines.

use anyhow::{bail, ensure, Context, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// `key=value` pairs written after the schema line.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// 17 significant digits; `nan`, `inf` and `-inf` for non-finite values.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_num(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().with_context(|| format!("bad number '{s}'")),
    }
}

impl Table {
    pub fn new(kind: &str, columns: Vec<String>) -> Self {
        Table {
            meta: vec![("kind".into(), kind.into())],
            columns,
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# romlab-csv schema={SCHEMA_VERSION}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().context("empty CSV")?;
        let schema = first
            .strip_prefix("# romlab-csv schema=")
            .context("missing schema line")?;
        ensure!(
            schema.trim() == SCHEMA_VERSION.to_string(),
            "unsupported CSV schema {schema}"
        );
        let mut meta = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for (no, line) in lines.enumerate() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').with_context(|| format!("bad metadata line {}", no + 2))?;
                meta.push((k.to_string(), v.to_string()));
            } else if columns.is_none() {
                columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
            } else if !line.is_empty() {
                let row = line
                    .split(',')
                    .map(parse_num)
                    .collect::<Result<Vec<_>>>()
                    .with_context(|| format!("line {}", no + 2))?;
                rows.push(row);
            }
        }
        let columns = columns.context("missing column header")?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                bail!("row {i} has {} cells, expected {}", r.len(), columns.len());
            }
        }
        Ok(Table { meta, columns, rows })
    }
}
