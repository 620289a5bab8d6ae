//! Input readers for the small CSV formats the subcommands accept, and the
//! output directory writer that keeps the run log.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use marketmode::precursor::{CrashEvent, LabelSource};
use marketmode::time::{parse_date, parse_minute, Stamp};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Analysis(marketmode::Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    })
}

fn records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>, CliError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn column_index(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| parse_err(path, 1, format!("missing column {name:?}")))
}

/// A numeric series with optional timestamps.
pub struct Series {
    pub values: Vec<f64>,
    pub stamps: Option<Vec<Stamp>>,
}

/// Read one column of a CSV file. A file whose first row is numeric has no
/// header and must have a single column. Otherwise the column is `column`,
/// else `value`, else the only column besides `date`/`time`.
pub fn read_series(path: &Path, column: Option<&str>) -> Result<Series, CliError> {
    let rows = records(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(parse_err(path, 1, "file is empty"));
    };
    let numeric = first.iter().all(|f| f.parse::<f64>().is_ok());
    if numeric {
        if first.len() != 1 {
            return Err(parse_err(path, 1, "a header is required for multi-column files"));
        }
        let values = rows
            .iter()
            .map(|(line, r)| {
                r[0].parse::<f64>()
                    .map_err(|_| parse_err(path, *line, format!("bad number {:?}", &r[0])))
            })
            .collect::<Result<_, _>>()?;
        return Ok(Series { values, stamps: None });
    }
    let header = first.clone();
    let ci = match column {
        Some(name) => column_index(path, &header, name)?,
        None => {
            let data: Vec<usize> = (0..header.len())
                .filter(|&i| !["date", "time"].iter().any(|k| header[i].eq_ignore_ascii_case(k)))
                .collect();
            match (header.iter().position(|h| h.eq_ignore_ascii_case("value")), data.as_slice()) {
                (Some(i), _) => i,
                (None, [i]) => *i,
                _ => {
                    return Err(parse_err(
                        path,
                        1,
                        format!("cannot tell which column to use among {:?}; pass --column", header.iter().collect::<Vec<_>>()),
                    ))
                }
            }
        }
    };
    let date_col = header.iter().position(|h| h.eq_ignore_ascii_case("date"));
    let time_col = header.iter().position(|h| h.eq_ignore_ascii_case("time"));
    let mut values = Vec::with_capacity(rows.len());
    let mut stamps = Vec::new();
    for (line, r) in &rows[1..] {
        let field = |i: usize| r.get(i).unwrap_or("");
        let v: f64 = field(ci)
            .parse()
            .map_err(|_| parse_err(path, *line, format!("bad number {:?}", field(ci))))?;
        values.push(v);
        if let (Some(dc), Some(tc)) = (date_col, time_col) {
            let d = parse_date(field(dc)).map_err(|e| parse_err(path, *line, e.to_string()))?;
            let m = parse_minute(field(tc)).map_err(|e| parse_err(path, *line, e.to_string()))?;
            stamps.push(Stamp::new(d, m));
        }
    }
    let stamps = (date_col.is_some() && time_col.is_some()).then_some(stamps);
    Ok(Series { values, stamps })
}

/// One symbol per line; blank lines and `#` comments are skipped.
pub fn read_symbols(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Daily `date,open,close` rows in file order.
pub fn read_index(path: &Path) -> Result<Vec<(NaiveDate, f64, f64)>, CliError> {
    let rows = records(path)?;
    let Some((_, header)) = rows.first() else {
        return Err(parse_err(path, 1, "file is empty"));
    };
    let (cd, co, cc) = (
        column_index(path, header, "date")?,
        column_index(path, header, "open")?,
        column_index(path, header, "close")?,
    );
    let mut out = Vec::new();
    for (line, r) in &rows[1..] {
        let field = |i: usize| r.get(i).unwrap_or("");
        let date = parse_date(field(cd)).map_err(|e| parse_err(path, *line, e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            match field(i).parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
                _ => Err(parse_err(path, *line, format!("bad price {:?}", field(i)))),
            }
        };
        out.push((date, num(co)?, num(cc)?));
    }
    out.sort_by_key(|r| r.0);
    Ok(out)
}

/// Pre-labelled events; a blank return is read as unknown.
pub fn read_events(path: &Path) -> Result<Vec<CrashEvent>, CliError> {
    let rows = records(path)?;
    let Some((_, header)) = rows.first() else {
        return Err(parse_err(path, 1, "file is empty"));
    };
    let cd = column_index(path, header, "date")?;
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (cdr, cir) = (find("daily_return"), find("intraday_return"));
    let mut out = Vec::new();
    for (line, r) in &rows[1..] {
        let field = |i: Option<usize>| i.and_then(|i| r.get(i)).unwrap_or("");
        let date = parse_date(field(Some(cd))).map_err(|e| parse_err(path, *line, e.to_string()))?;
        let num = |i: Option<usize>| -> Result<f64, CliError> {
            let s = field(i);
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| parse_err(path, *line, format!("bad return {s:?}")))
            }
        };
        out.push(CrashEvent {
            date,
            daily_return: num(cdr)?,
            intraday_return: num(cir)?,
            source: LabelSource::Provided,
        });
    }
    Ok(out)
}

/// Empty for NaN, shortest round-trip decimal otherwise.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory of one run. Every file written through it is listed in
/// the run log with its checksum.
pub struct OutDir {
    dir: PathBuf,
    artifacts: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        self.artifacts.push((name.to_string(), sha256(contents.as_bytes())));
        Ok(())
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn extend_warnings(&mut self, ws: impl IntoIterator<Item = String>) {
        self.warnings.extend(ws);
    }

    /// `<command>.log` and the canonical config echo `<command>.config.toml`.
    /// Holds nothing that varies between identical runs.
    pub fn finish(&self, command: &str, cfg: &RunConfig, failure: Option<&str>) -> Result<(), CliError> {
        let mut log = String::new();
        let _ = writeln!(log, "marketmode {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(log, "command: {command}");
        let _ = writeln!(log, "config_sha256: {}", cfg.hash());
        for (name, hash) in &self.artifacts {
            let _ = writeln!(log, "artifact: {name} sha256={hash}");
        }
        let _ = writeln!(log, "warnings: {}", self.warnings.len());
        for w in &self.warnings {
            let _ = writeln!(log, "warning: {w}");
        }
        let _ = writeln!(log, "status: {}", failure.map_or("ok".to_string(), |f| format!("failed: {f}")));
        let log_path = self.dir.join(format!("{command}.log"));
        std::fs::write(&log_path, log).map_err(io_err(&log_path))?;
        let cfg_path = self.dir.join(format!("{command}.config.toml"));
        std::fs::write(&cfg_path, cfg.canonical()).map_err(io_err(&cfg_path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("marketmode-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn headerless_single_column() {
        let s = read_series(&tmp("a.csv", "0.5\n-1\n\n2e-3\n"), None).unwrap();
        assert_eq!(s.values, vec![0.5, -1.0, 0.002]);
        assert!(s.stamps.is_none());
    }

    #[test]
    fn market_mode_file_picks_value_and_stamps() {
        let s = read_series(&tmp("b.csv", "date,time,value\n2008-10-16,09:30,1.5\n2008-10-16,09:35,-0.5\n"), None).unwrap();
        assert_eq!(s.values, vec![1.5, -0.5]);
        assert_eq!(s.stamps.unwrap()[1].to_string(), "2008-10-16 09:35");
    }

    #[test]
    fn ambiguous_columns_need_a_name() {
        let p = tmp("c.csv", "a,b\n1,2\n");
        assert!(read_series(&p, None).is_err());
        assert_eq!(read_series(&p, Some("b")).unwrap().values, vec![2.0]);
    }

    #[test]
    fn bad_number_names_the_line() {
        let err = read_series(&tmp("d.csv", "value\n1\nx\n"), None).err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("d.csv") && msg.contains('3'), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn events_with_blank_returns() {
        let ev = read_events(&tmp("e.csv", "date,daily_return,intraday_return\n2008-10-16,,-0.1\n")).unwrap();
        assert!(ev[0].daily_return.is_nan());
        assert_eq!(ev[0].intraday_return, -0.1);
    }
}
