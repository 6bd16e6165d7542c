//! Report assembly: the reconstruction-error table (CSV + plain text), the
//! tiled target|percept image grid, and the run manifest tying artifacts
//! together by digest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{format_mean_std, EvalRecord, MODEL_INVERSE, MODEL_PSE, SIM_PSI, SIM_PSI_HAT};
use crate::percept::{write_pgm_bytes, PerceptFrame};

/// One parsed CSV row (the persisted summary of an [`EvalRecord`]).
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub subject: String,
    pub model: String,
    pub simulator: String,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub n: usize,
}

pub const CSV_HEADER: &str = "subject,model,simulator,mean_mse,std_mse,n";

/// Serialize records to CSV. Floats use shortest-round-trip formatting, so
/// parsing the output recovers the exact values.
pub fn write_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.subject,
            r.model,
            r.simulator,
            r.mean_mse,
            r.std_mse,
            r.per_sample_mse.len()
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "report CSV header: expected {CSV_HEADER:?}, found {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "report CSV line {}: expected 6 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let fl = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Format(format!("report CSV line {}: bad {what} {s:?}", lineno + 2)))
        };
        rows.push(CsvRow {
            subject: fields[0].to_string(),
            model: fields[1].to_string(),
            simulator: fields[2].to_string(),
            mean_mse: fl(fields[3], "mean")?,
            std_mse: fl(fields[4], "std")?,
            n: fields[5]
                .parse()
                .map_err(|_| Error::Format(format!("report CSV line {}: bad count {:?}", lineno + 2, fields[5])))?,
        });
    }
    Ok(rows)
}

pub struct TableOutput {
    pub text: String,
    pub csv: String,
    /// False when any (simulator × model × subject) cell is missing.
    pub complete: bool,
}

/// Render one table per simulator: rows = models, columns = subjects, cells =
/// "mean ± std". The per-column minimum mean gets a `*` marker; missing cells
/// read "absent" and mark the output incomplete.
pub fn report_table(records: &[EvalRecord]) -> TableOutput {
    let csv = write_csv(records);
    let mut subjects: Vec<String> = records.iter().map(|r| r.subject.clone()).collect();
    subjects.sort();
    subjects.dedup();
    let models = [MODEL_PSE, MODEL_INVERSE];
    let simulators = [SIM_PSI, SIM_PSI_HAT];

    let mut complete = !records.is_empty();
    let mut text = String::new();
    for sim in simulators {
        if !records.iter().any(|r| r.simulator == sim) {
            complete = false;
            continue;
        }
        text.push_str(&format!("reconstruction error (simulator: {sim})\n"));
        let cell = |model: &str, subject: &str| -> Option<&EvalRecord> {
            records.iter().find(|r| r.simulator == sim && r.model == model && r.subject == subject)
        };
        // Column-minimum means, for the lower-is-better marker.
        let col_min: Vec<Option<f64>> = subjects
            .iter()
            .map(|s| {
                models
                    .iter()
                    .filter_map(|m| cell(m, s))
                    .map(|r| r.mean_mse)
                    .min_by(|a, b| a.total_cmp(b))
            })
            .collect();

        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["model".to_string()];
        header.extend(subjects.iter().cloned());
        grid.push(header);
        for model in models {
            let mut row = vec![model.to_string()];
            for (ci, subject) in subjects.iter().enumerate() {
                match cell(model, subject) {
                    Some(r) => {
                        let marker = if Some(r.mean_mse) == col_min[ci] { " *" } else { "" };
                        row.push(format!("{}{marker}", format_mean_std(r.mean_mse, r.std_mse)));
                    }
                    None => {
                        complete = false;
                        row.push("absent".to_string());
                    }
                }
            }
            grid.push(row);
        }

        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        for row in &grid {
            let line: Vec<String> =
                row.iter().enumerate().map(|(c, v)| format!("{:<width$}", v, width = widths[c])).collect();
            text.push_str(line.join("  ").trim_end());
            text.push('\n');
        }
        text.push('\n');
    }
    TableOutput { text, csv, complete }
}

/// Tile target|percept pairs into one grayscale image: each pair side by side
/// with a 1-pixel white separator, pairs stacked with 1-pixel white rows.
pub fn render_grid_bytes(targets: &[PerceptFrame], percepts: &[PerceptFrame]) -> Result<(usize, usize, Vec<u8>)> {
    if targets.len() != percepts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} percepts",
            targets.len(),
            percepts.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument("nothing to render".into()));
    }
    let (h, w) = (targets[0].rows(), targets[0].cols());
    for f in targets.iter().chain(percepts) {
        if f.rows() != h || f.cols() != w {
            return Err(Error::InvalidArgument(format!(
                "frame shapes differ: expected {h}×{w}, found {}×{}",
                f.rows(),
                f.cols()
            )));
        }
    }
    let n = targets.len();
    let out_w = 2 * w + 1;
    let out_h = n * h + (n - 1);
    let mut img = vec![255u8; out_w * out_h];
    for (i, (t, p)) in targets.iter().zip(percepts).enumerate() {
        let top = i * (h + 1);
        let tb = t.to_bytes_clamped();
        let pb = p.to_bytes_clamped();
        for r in 0..h {
            let dst = (top + r) * out_w;
            img[dst..dst + w].copy_from_slice(&tb[r * w..(r + 1) * w]);
            img[dst + w] = 255;
            img[dst + w + 1..dst + out_w].copy_from_slice(&pb[r * w..(r + 1) * w]);
        }
    }
    Ok((out_w, out_h, img))
}

pub fn render_grid(targets: &[PerceptFrame], percepts: &[PerceptFrame], out: &Path) -> Result<()> {
    let (w, h, bytes) = render_grid_bytes(targets, percepts)?;
    write_pgm_bytes(out, w, h, &bytes)
}

/// Provenance for one CLI run: digests of the config and every artifact the
/// run read or wrote.
#[derive(Serialize, Deserialize, Clone, Debug, Default)]
pub struct RunManifest {
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub config_digest: String,
    pub dataset_digests: BTreeMap<String, String>,
    pub checkpoint_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_digest: String) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
            config_digest,
            dataset_digests: BTreeMap::new(),
            checkpoint_digests: BTreeMap::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(subject: &str, model: &str, simulator: &str, mses: Vec<f64>) -> EvalRecord {
        EvalRecord::from_samples(subject, model, simulator, mses).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records = vec![
            record("s1", MODEL_PSE, SIM_PSI, vec![0.1, 0.2, 0.30000000000000004]),
            record("s1", MODEL_INVERSE, SIM_PSI, vec![0.4, 0.5]),
        ];
        let csv = write_csv(&records);
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, rec) in rows.iter().zip(&records) {
            assert!((row.mean_mse - rec.mean_mse).abs() <= 1e-12);
            assert!((row.std_mse - rec.std_mse).abs() <= 1e-12);
            assert_eq!(row.n, rec.per_sample_mse.len());
        }
        assert!(parse_csv("bogus\n1,2,3").is_err());
    }

    #[test]
    fn table_marks_minimum_and_flags_missing_cells() {
        let mut records = Vec::new();
        for subject in ["a", "b"] {
            records.push(record(subject, MODEL_PSE, SIM_PSI, vec![0.01, 0.02]));
            records.push(record(subject, MODEL_INVERSE, SIM_PSI, vec![0.05, 0.06]));
            records.push(record(subject, MODEL_PSE, SIM_PSI_HAT, vec![0.01]));
            records.push(record(subject, MODEL_INVERSE, SIM_PSI_HAT, vec![0.02]));
        }
        let full = report_table(&records);
        assert!(full.complete, "{}", full.text);
        // The PSE row should carry the marker in every column here.
        let pse_line = full.text.lines().find(|l| l.starts_with("pse")).unwrap();
        assert_eq!(pse_line.matches('*').count(), 2, "{pse_line}");

        records.pop();
        let partial = report_table(&records);
        assert!(!partial.complete);
        assert!(partial.text.contains("absent"));
    }

    #[test]
    fn grid_layout_matches_the_contract() {
        let t = PerceptFrame::new(4, 5, vec![0.0; 20]).unwrap();
        let p = PerceptFrame::new(4, 5, vec![1.0; 20]).unwrap();
        let (w, h, bytes) = render_grid_bytes(&[t.clone(), t.clone()], &[p.clone(), p]).unwrap();
        assert_eq!((w, h), (11, 9));
        // Row 0: five black target pixels, separator, five white percept pixels.
        assert_eq!(&bytes[0..5], &[0; 5]);
        assert_eq!(bytes[5], 255);
        assert_eq!(&bytes[6..11], &[255; 5]);
        // Row 4 is the white separator row between the two pairs.
        assert!(bytes[4 * w..5 * w].iter().all(|&b| b == 255));

        let single = render_grid_bytes(&[t.clone()], &[t.clone()]).unwrap();
        assert_eq!((single.0, single.1), (11, 4));
        assert!(render_grid_bytes(&[t], &[]).is_err());
    }
}
