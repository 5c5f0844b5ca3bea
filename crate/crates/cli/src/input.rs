//! CSV and JSON-lines ingestion.

use std::io::{BufRead, Read};

use anyhow::{anyhow, bail, Context, Result};
use covshift::Observations;
use serde::Deserialize;

/// Reads a time × variables CSV. The first record is treated as a header
/// when none of its cells parse as numbers.
pub fn read_csv<R: Read>(source: R) -> Result<Observations<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut out: Option<Observations<f64>> = None;
    let mut row = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => anyhow!("line {}: {e}", pos.line()),
            None => anyhow!("{e}"),
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        row.clear();
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| anyhow!("line {line}, column {}: cannot parse {cell:?} as a number", j + 1))?;
            if !v.is_finite() {
                bail!("line {line}, column {}: non-finite value {cell:?}", j + 1);
            }
            row.push(v);
        }
        let obs = out.get_or_insert_with(|| Observations::new(row.len()));
        if row.len() != obs.dim() {
            bail!("line {line}: {} columns, expected {}", row.len(), obs.dim());
        }
        obs.push(&row)?;
    }
    out.ok_or_else(|| anyhow!("no data rows"))
}

pub fn read_csv_path(path: &std::path::Path) -> Result<Observations<f64>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamLine {
    #[serde(default)]
    pub t: Option<i64>,
    pub x: Vec<f64>,
}

/// One JSON observation per line. Blank lines are skipped; a final line
/// without a terminating newline that fails to parse is treated as a
/// stream cut short and ends iteration.
pub struct JsonLines<R> {
    reader: R,
    line: usize,
    buf: String,
    last_t: Option<i64>,
}

impl<R: BufRead> JsonLines<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line: 0,
            buf: String::new(),
            last_t: None,
        }
    }
}

impl<R: BufRead> Iterator for JsonLines<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let parsed: StreamLine = match serde_json::from_str(text) {
                Ok(v) => v,
                Err(_) if !self.buf.ends_with('\n') => {
                    log::warn!("line {}: incomplete final record ignored", self.line);
                    return None;
                }
                Err(e) => return Some(Err(anyhow!("line {}: {e}", self.line))),
            };
            if let (Some(prev), Some(t)) = (self.last_t, parsed.t) {
                if t <= prev {
                    return Some(Err(anyhow!(
                        "line {}: time {t} does not follow {prev}",
                        self.line
                    )));
                }
            }
            self.last_t = parsed.t.or(self.last_t);
            return Some(Ok(parsed.x));
        }
    }
}
