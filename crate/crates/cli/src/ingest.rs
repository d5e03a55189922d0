//! POI CSV reading and writing.
//!
//! The header must be exactly
//! `id,keywords,lon,lat,min_lon,min_lat,max_lon,max_lat`. The last four
//! columns are either all empty (point POI) or all present (rectangle POI).
//! Keywords are separated by `;`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use qqspm::index::IndexError;
use qqspm::{Geometry, Point, Poi, Rect};
use thiserror::Error;

pub const HEADER: [&str; 8] = ["id", "keywords", "lon", "lat", "min_lon", "min_lat", "max_lon", "max_lat"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line 1: header must be `{}`, found `{found}`", HEADER.join(","))]
    Header { found: String },
    #[error("line {line}, column {column}: {message}")]
    Field {
        line: u64,
        column: &'static str,
        message: String,
    },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("line {line}: {source}")]
    Poi { line: u64, source: IndexError },
}

pub fn load_pois_csv(path: impl AsRef<Path>) -> Result<Vec<Poi>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_pois(file)
}

pub fn read_pois(reader: impl Read) -> Result<Vec<Poi>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|source| IngestError::Csv { line: 1, source })?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(IngestError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|source| IngestError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = row.position().map_or(0, |p| p.line());
        out.push(parse_row(&row, line)?);
    }
    Ok(out)
}

fn field(row: &csv::StringRecord, i: usize) -> &str {
    row.get(i).map_or("", str::trim)
}

fn number(row: &csv::StringRecord, i: usize, line: u64) -> Result<Option<f64>, IngestError> {
    let raw = field(row, i);
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(IngestError::Field {
            line,
            column: HEADER[i],
            message: format!("`{raw}` is not a finite number"),
        }),
    }
}

fn required(row: &csv::StringRecord, i: usize, line: u64) -> Result<f64, IngestError> {
    number(row, i, line)?.ok_or(IngestError::Field {
        line,
        column: HEADER[i],
        message: "missing value".into(),
    })
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<Poi, IngestError> {
    if row.len() > HEADER.len() {
        return Err(IngestError::Field {
            line,
            column: HEADER[HEADER.len() - 1],
            message: format!("{} fields, expected {}", row.len(), HEADER.len()),
        });
    }
    let id = field(row, 0);
    if id.is_empty() {
        return Err(IngestError::Field {
            line,
            column: "id",
            message: "missing value".into(),
        });
    }
    let keywords: Vec<&str> = field(row, 1).split(';').map(str::trim).filter(|k| !k.is_empty()).collect();
    if keywords.is_empty() {
        return Err(IngestError::Field {
            line,
            column: "keywords",
            message: "no keywords".into(),
        });
    }
    let lon = required(row, 2, line)?;
    let lat = required(row, 3, line)?;
    let bounds: Vec<Option<f64>> = (4..8).map(|i| number(row, i, line)).collect::<Result<_, _>>()?;

    let location = Point { x: lon, y: lat };
    let geometry = if bounds.iter().all(Option::is_none) {
        Geometry::Point(location)
    } else {
        if let Some(i) = bounds.iter().position(Option::is_none) {
            return Err(IngestError::Field {
                line,
                column: HEADER[4 + i],
                message: "missing value (the four bound columns are all empty or all present)".into(),
            });
        }
        let [x0, y0, x1, y1] = [bounds[0].unwrap(), bounds[1].unwrap(), bounds[2].unwrap(), bounds[3].unwrap()];
        for (lo, hi, column) in [(x0, x1, "min_lon"), (y0, y1, "min_lat")] {
            if lo > hi {
                return Err(IngestError::Field {
                    line,
                    column,
                    message: format!("{lo} exceeds its maximum {hi}"),
                });
            }
        }
        Geometry::Rect(Rect::new(x0, y0, x1, y1).expect("bounds checked"))
    };
    Poi::new(id, keywords, location, geometry).map_err(|source| IngestError::Poi { line, source })
}

pub fn write_pois(writer: impl Write, pois: &[Poi]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for p in pois {
        let mut row = vec![
            p.id.clone(),
            p.keywords.join(";"),
            p.location.x.to_string(),
            p.location.y.to_string(),
        ];
        match p.geometry {
            Geometry::Point(_) => row.extend(std::iter::repeat_n(String::new(), 4)),
            Geometry::Rect(r) => row.extend([r.min_x, r.min_y, r.max_x, r.max_y].map(|v| v.to_string())),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pois_csv(path: impl AsRef<Path>, pois: &[Poi]) -> Result<(), IngestError> {
    let path = path.as_ref();
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_pois(file, pois).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(source),
        other => io_err(std::io::Error::other(format!("{other:?}"))),
    })
}
