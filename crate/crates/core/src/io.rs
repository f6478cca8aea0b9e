//! Delimited text formats for observed series and posterior samples, plus
//! atomic file writes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::ChainOutput;
use crate::paths::ObservedSeries;
use crate::ratematrix::{exchangeable_params, stationary_dist, FeatureSet, StateSpace};

/// Observation times are written with 12 significant digits so that a
/// write/read round trip reproduces them exactly.
pub fn canonical_time(t: f64) -> f64 {
    format_time(t).parse().expect("formatted float parses")
}

pub fn format_time(t: f64) -> String {
    let s = format!("{t:.11e}");
    let v: f64 = s.parse().expect("formatted float parses");
    format!("{v}")
}

/// Writes `series_id,time,state` rows with a header line.
pub fn write_series<W: Write>(out: W, series: &[ObservedSeries], states: &StateSpace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series_id", "time", "state"]).map_err(csv_err)?;
    for (i, s) in series.iter().enumerate() {
        for (&t, &x) in s.times().iter().zip(s.states()) {
            if x >= states.len() {
                return Err(Error::arg(format!("state {x} outside a space of {}", states.len())));
            }
            w.write_record([i.to_string(), format_time(t), states.label(x).to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `series_id,time,state` rows. Rows of one series need not be
/// contiguous; they are sorted by time. Series come back in order of first
/// appearance of their id.
pub fn read_series<R: Read>(input: R, states: &StateSpace) -> Result<Vec<ObservedSeries>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let (ci, ct, cs) = (col("series_id")?, col("time")?, col("state")?);
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(f64, usize)>> = BTreeMap::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(csv_err)?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::Parse { line, message: "short row".into() });
        let id = field(ci)?.to_string();
        let t: f64 = field(ct)?
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad time '{}'", &rec[ct]) })?;
        if !t.is_finite() {
            return Err(Error::Parse { line, message: format!("time must be finite, got {t}") });
        }
        let label = field(cs)?;
        let x = states
            .index_of(label)
            .ok_or_else(|| Error::Parse { line, message: format!("unknown state '{label}'") })?;
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((canonical_time(t), x));
    }
    order
        .into_iter()
        .map(|id| {
            let mut obs = rows.remove(&id).expect("id was recorded");
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (times, xs) = obs.into_iter().unzip();
            ObservedSeries::new(times, xs).map_err(|e| Error::Parse {
                line: 0,
                message: format!("series '{id}': {e}"),
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

/// Header of the samples table.
pub fn sample_columns(features: &FeatureSet) -> Vec<String> {
    let mut cols = vec!["iteration".to_string()];
    cols.extend((0..features.p1()).map(|k| format!("wu_{k}")));
    cols.extend((0..features.p2()).map(|k| format!("wb_{k}")));
    cols.extend((0..features.p2()).map(|k| format!("theta_{k}")));
    cols.extend((0..features.n_states()).map(|k| format!("pi_{k}")));
    cols
}

/// One row per retained sample: weights, exchangeable parameters by rank,
/// and the stationary distribution.
pub fn write_samples<W: Write>(out: W, chain: &ChainOutput, features: &FeatureSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sample_columns(features)).map_err(csv_err)?;
    for (it, s) in chain.iterations.iter().zip(&chain.samples) {
        let theta = exchangeable_params(&s[chain.p1..], features)?;
        let pi = stationary_dist(&s[..chain.p1], features)?;
        let mut row = vec![it.to_string()];
        row.extend(s.iter().chain(&theta).chain(&pi).map(|v| v.to_string()));
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a samples table back into `(iteration, values)` rows, where values
/// holds every column after `iteration`.
pub fn read_samples<R: Read>(input: R) -> Result<(Vec<String>, Vec<(usize, Vec<f64>)>)> {
    let mut r = csv::Reader::from_reader(input);
    let headers: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers.first().map(String::as_str) != Some("iteration") {
        return Err(Error::Parse { line: 1, message: "first column must be 'iteration'".into() });
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(csv_err)?;
        let bad = |s: &str| Error::Parse { line, message: format!("bad number '{s}'") };
        let it = rec[0].parse().map_err(|_| bad(&rec[0]))?;
        let vals = rec.iter().skip(1).map(|s| s.parse().map_err(|_| bad(s))).collect::<Result<_>>()?;
        rows.push((it, vals));
    }
    Ok((headers[1..].to_vec(), rows))
}

/// Writes `bytes` to a temporary file in the target directory and renames it
/// over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    res.map_err(Error::from)
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}
