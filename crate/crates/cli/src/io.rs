//! Longitudinal CSV files: `subject_id,time,value,censored`.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dlfpca::{Dataset, Trajectory};

pub const HEADER: [&str; 4] = ["subject_id", "time", "value", "censored"];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IngestOptions {
    /// Detection limit; inferred from the censored rows when absent.
    pub detection_limit: Option<f64>,
    /// Time domain; the observed time range when absent.
    pub domain: Option<(f64, f64)>,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_csv(&text, options).with_context(|| format!("in {}", path.display()))
}

struct Row {
    subject: String,
    time: f64,
    value: f64,
    censored: bool,
}

fn parse_number(field: &str, name: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| anyhow!("line {line}: {name} {field:?} is not a number"))?;
    if !v.is_finite() {
        bail!("line {line}: {name} {field:?} is not finite");
    }
    Ok(v)
}

pub fn parse_csv(text: &str, options: &IngestOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().context("line 1: unreadable header")?.clone();
    if header.is_empty() {
        bail!("empty file");
    }
    if header.iter().map(str::trim).ne(HEADER) {
        bail!(
            "line 1: expected header {:?}, found {:?}",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("line {line}: {e}")
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            bail!("line {line}: expected 4 fields, found {}", record.len());
        }
        let subject = record[0].trim().to_string();
        if subject.is_empty() {
            bail!("line {line}: empty subject_id");
        }
        let censored = match record[3].trim() {
            "0" => false,
            "1" => true,
            other => bail!("line {line}: censored must be 0 or 1, found {other:?}"),
        };
        rows.push((
            line,
            Row {
                subject,
                time: parse_number(&record[1], "time", line)?,
                value: parse_number(&record[2], "value", line)?,
                censored,
            },
        ));
    }
    if rows.is_empty() {
        bail!("no data rows");
    }

    let dl = match options.detection_limit {
        Some(c) => Some(c),
        None => {
            let mut limit: Option<(u64, f64)> = None;
            for (line, row) in rows.iter().filter(|(_, r)| r.censored) {
                match limit {
                    None => limit = Some((*line, row.value)),
                    Some((first, c)) if row.value != c => bail!(
                        "line {line}: censored value {} differs from the detection limit {c} set on line {first}",
                        row.value
                    ),
                    _ => {}
                }
            }
            limit.map(|(_, c)| c)
        }
    };
    if let Some(c) = dl {
        if let Some((line, row)) = rows.iter().find(|(_, r)| r.censored && r.value != c) {
            bail!("line {line}: censored value {} differs from the detection limit {c}", row.value);
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for (_, row) in rows {
        if !groups.contains_key(&row.subject) {
            order.push(row.subject.clone());
        }
        groups.entry(row.subject.clone()).or_default().push(row);
    }
    let mut trajectories = Vec::with_capacity(order.len());
    for id in order {
        let mut obs = groups.remove(&id).unwrap_or_default();
        obs.sort_by(|a, b| a.time.total_cmp(&b.time));
        let t = obs.iter().map(|r| r.time).collect();
        let y = obs.iter().map(|r| r.value).collect();
        let d = obs.iter().map(|r| r.censored).collect();
        trajectories.push(Trajectory::new(id, t, y, d)?);
    }
    Ok(Dataset::new(trajectories, dl, options.domain)?)
}

/// Serializes with shortest round-trip number formatting.
pub fn dataset_to_csv(dataset: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for tr in dataset.trajectories() {
        let raw = tr.raw_values();
        for j in 0..tr.len() {
            w.write_record([
                tr.subject_id().to_string(),
                tr.times()[j].to_string(),
                raw[j].to_string(),
                (tr.censored()[j] as u8).to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Builds a CSV document from a header and string rows.
pub fn table<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

/// Drops uncensored observations more than `k` pooled standard deviations from the pooled
/// uncensored mean. Subjects left without observations are removed.
pub fn exclude_outliers(dataset: &Dataset, k: f64) -> Result<(Dataset, usize)> {
    let vals: Vec<f64> = dataset
        .trajectories()
        .iter()
        .flat_map(|tr| tr.values().iter().zip(tr.censored()).filter(|(_, &d)| !d).map(|(&v, _)| v))
        .collect();
    if vals.len() < 2 {
        return Ok((dataset.clone(), 0));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut removed = 0;
    let mut kept = Vec::new();
    for tr in dataset.trajectories() {
        let keep: Vec<usize> = (0..tr.len())
            .filter(|&j| tr.censored()[j] || (tr.values()[j] - mean).abs() <= k * sd)
            .collect();
        removed += tr.len() - keep.len();
        if keep.is_empty() {
            continue;
        }
        kept.push(Trajectory::new(
            tr.subject_id(),
            keep.iter().map(|&j| tr.times()[j]).collect(),
            keep.iter().map(|&j| tr.values()[j]).collect(),
            keep.iter().map(|&j| tr.censored()[j]).collect(),
        )?);
    }
    if kept.is_empty() {
        bail!("outlier exclusion removed every observation");
    }
    Ok((Dataset::new(kept, dataset.detection_limit(), Some(dataset.domain()))?, removed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_subject_two_rows() {
        let ds = parse_csv("subject_id,time,value,censored\na,0.5,1.0,0\na,0.1,2.0,0\n", &Default::default()).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.trajectories()[0].times(), &[0.1, 0.5]);
        assert_eq!(ds.trajectories()[0].values(), &[2.0, 1.0]);
    }

    #[test]
    fn bad_time_names_line_two() {
        let err = parse_csv("subject_id,time,value,censored\na,abc,1.0,0\n", &Default::default()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_header_and_empty() {
        assert!(parse_csv("", &Default::default()).is_err());
        assert!(parse_csv("subject_id,time,value,censored\n", &Default::default()).is_err());
        assert!(parse_csv("id,time,value,censored\na,0.1,1,0\n", &Default::default()).is_err());
    }

    #[test]
    fn censored_value_must_match_limit() {
        let text = "subject_id,time,value,censored\na,0.1,0,1\na,0.2,1,0\nb,0.3,0.5,1\n";
        let err = parse_csv(text, &Default::default()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let opts = IngestOptions { detection_limit: Some(0.5), domain: None };
        assert!(parse_csv(text, &opts).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn infers_limit_and_keeps_first_appearance_order() {
        let text = "subject_id,time,value,censored\nz,0.1,-1,1\na,0.2,1,0\nz,0.05,2,0\n";
        let ds = parse_csv(text, &Default::default()).unwrap();
        assert_eq!(ds.detection_limit(), Some(-1.0));
        assert_eq!(ds.trajectories()[0].subject_id(), "z");
        assert_eq!(ds.trajectories()[0].times(), &[0.05, 0.1]);
    }

    #[test]
    fn outliers_are_dropped() {
        let mut text = String::from("subject_id,time,value,censored\n");
        for i in 0..30 {
            text += &format!("s{},{},{},0\n", i % 5, i as f64 / 30.0, (i % 3) as f64 * 0.1);
        }
        text += "s0,0.99,50,0\n";
        let ds = parse_csv(&text, &Default::default()).unwrap();
        let (kept, removed) = exclude_outliers(&ds, 3.0).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(kept.total_observations(), 30);
    }
}
