//! CSV input parsing and output writing.
//!
//! Inputs are plain comma-separated tables with a header row; `#` starts a
//! comment and blank lines are ignored, so a file the tool wrote (which
//! carries comment headers) is itself valid input. Outputs open with two
//! comment lines recording provenance:
//!
//! ```text
//! # config_hash=<16 hex chars of the resolved configuration>
//! # seed=<top-level seed>
//! ```
//!
//! followed by the column header and the rows. Floats are written with 17
//! significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use countproc_core::diagnostics::{mean, quantile, sd};
use countproc_core::hier::{
    AdditiveDataset, AdditiveSubject, FunctionalDataset, Subject, N_PREDICTORS,
};
use countproc_core::CountSeries;

use crate::{CliError, Result};

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Splits a data line into trimmed fields.
fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Lines of a CSV text that carry data: comment-stripped, trimmed,
/// non-empty, paired with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((idx + 1, line))
        }
    })
}

fn parse_location(source: &str, line: usize, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| {
        CliError::input(format!("{source} line {line}: location {raw:?} is not a number"))
    })?;
    if !v.is_finite() {
        return Err(CliError::input(format!(
            "{source} line {line}: location {raw:?} is not finite"
        )));
    }
    Ok(v)
}

fn parse_count(source: &str, line: usize, raw: &str) -> Result<u64> {
    raw.parse().map_err(|_| {
        CliError::input(format!(
            "{source} line {line}: count {raw:?} is not a non-negative integer"
        ))
    })
}

/// Parses a count series: header `s,y`, then one `location,count` row per
/// line. Rows may appear in any order; they are sorted by location, and
/// duplicate locations are rejected.
pub fn parse_count_series(text: &str, source: &str) -> Result<CountSeries> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, header)) if fields(header) == ["s", "y"] => {}
        Some((line, header)) => {
            return Err(CliError::input(format!(
                "{source} line {line}: expected header \"s,y\", got {header:?}"
            )));
        }
        None => return Err(CliError::input(format!("{source}: no header row"))),
    }

    let mut rows: Vec<(usize, f64, u64)> = Vec::new();
    for (line, text) in lines {
        let f = fields(text);
        if f.len() != 2 {
            return Err(CliError::input(format!(
                "{source} line {line}: expected 2 fields, got {}",
                f.len()
            )));
        }
        rows.push((
            line,
            parse_location(source, line, f[0])?,
            parse_count(source, line, f[1])?,
        ));
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{source}: no data rows")));
    }

    rows.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite locations"));
    for w in rows.windows(2) {
        if w[0].1 == w[1].1 {
            return Err(CliError::input(format!(
                "{source} lines {} and {}: duplicate location {}",
                w[0].0, w[1].0, w[0].1
            )));
        }
    }

    let (locations, counts) = rows.into_iter().map(|(_, s, y)| (s, y)).unzip();
    Ok(CountSeries::new(locations, counts)?)
}

/// One observation row of a functional input file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObs {
    pub s: f64,
    pub y: u64,
    pub x: Option<[f64; N_PREDICTORS]>,
}

/// One subject's rows, time-sorted, in first-appearance order within
/// [`FunctionalTable`].
#[derive(Debug, Clone)]
pub struct RawSubject {
    pub id: String,
    pub group: Option<usize>,
    pub rows: Vec<RawObs>,
}

/// Parsed functional input: several subjects' series, optionally labeled
/// with groups and carrying covariates.
#[derive(Debug, Clone)]
pub struct FunctionalTable {
    pub has_group: bool,
    pub has_covariates: bool,
    pub subjects: Vec<RawSubject>,
}

/// Parses a functional table. The header is `subject,s,y`, optionally
/// followed by `group` and/or the four covariate columns `x1,x2,x3,x4`
/// (in that order); every row must match the header's schema. Rows are
/// gathered per subject in order of first appearance and sorted by `s`
/// within each subject.
pub fn parse_functional(text: &str, source: &str) -> Result<FunctionalTable> {
    let mut lines = data_lines(text);
    let (has_group, has_covariates) = match lines.next() {
        Some((line, header)) => match fields(header).as_slice() {
            ["subject", "s", "y"] => (false, false),
            ["subject", "s", "y", "group"] => (true, false),
            ["subject", "s", "y", "x1", "x2", "x3", "x4"] => (false, true),
            ["subject", "s", "y", "group", "x1", "x2", "x3", "x4"] => (true, true),
            _ => {
                return Err(CliError::input(format!(
                    "{source} line {line}: expected header \"subject,s,y\" optionally \
                     followed by \"group\" and/or \"x1,x2,x3,x4\", got {header:?}"
                )));
            }
        },
        None => return Err(CliError::input(format!("{source}: no header row"))),
    };
    let n_fields = 3 + usize::from(has_group) + if has_covariates { N_PREDICTORS } else { 0 };

    let mut subjects: Vec<RawSubject> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (line, text) in lines {
        let f = fields(text);
        if f.len() != n_fields {
            return Err(CliError::input(format!(
                "{source} line {line}: expected {n_fields} fields, got {}",
                f.len()
            )));
        }
        let id = f[0];
        if id.is_empty() {
            return Err(CliError::input(format!(
                "{source} line {line}: empty subject id"
            )));
        }
        let s = parse_location(source, line, f[1])?;
        let y = parse_count(source, line, f[2])?;
        let mut next = 3;
        let group = if has_group {
            let g: usize = f[next].parse().map_err(|_| {
                CliError::input(format!(
                    "{source} line {line}: group {:?} is not a non-negative integer",
                    f[next]
                ))
            })?;
            next += 1;
            Some(g)
        } else {
            None
        };
        let x = if has_covariates {
            let mut x = [0.0f64; N_PREDICTORS];
            for (j, slot) in x.iter_mut().enumerate() {
                let raw = f[next + j];
                *slot = raw.parse().map_err(|_| {
                    CliError::input(format!(
                        "{source} line {line}: covariate x{} value {raw:?} is not a number",
                        j + 1
                    ))
                })?;
                if !slot.is_finite() {
                    return Err(CliError::input(format!(
                        "{source} line {line}: covariate x{} must be finite",
                        j + 1
                    )));
                }
            }
            Some(x)
        } else {
            None
        };

        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            subjects.push(RawSubject {
                id: id.to_string(),
                group,
                rows: Vec::new(),
            });
            subjects.len() - 1
        });
        if subjects[slot].group != group {
            return Err(CliError::input(format!(
                "{source} line {line}: subject {id:?} reassigned from group {:?} to {:?}",
                subjects[slot].group, group
            )));
        }
        subjects[slot].rows.push(RawObs { s, y, x });
    }
    if subjects.is_empty() {
        return Err(CliError::input(format!("{source}: no data rows")));
    }
    for subject in &mut subjects {
        subject
            .rows
            .sort_by(|a, b| a.s.partial_cmp(&b.s).expect("finite locations"));
    }
    Ok(FunctionalTable {
        has_group,
        has_covariates,
        subjects,
    })
}

impl FunctionalTable {
    /// Converts to the grouped-model dataset. Without a group column every
    /// subject lands in group 0.
    pub fn to_grouped_dataset(&self) -> Result<FunctionalDataset> {
        let subjects = self
            .subjects
            .iter()
            .map(|raw| {
                Subject::new(
                    raw.id.clone(),
                    raw.group.unwrap_or(0),
                    raw.rows.iter().map(|r| r.s).collect(),
                    raw.rows.iter().map(|r| r.y).collect(),
                )
            })
            .collect::<countproc_core::Result<Vec<Subject>>>()?;
        Ok(FunctionalDataset::new(subjects)?)
    }

    /// Converts to the additive-model dataset; the input must carry the
    /// covariate columns, and each subject's times must advance in unit
    /// steps.
    pub fn to_additive_dataset(&self) -> Result<AdditiveDataset> {
        if !self.has_covariates {
            return Err(CliError::input(
                "the additive model needs covariate columns x1,x2,x3,x4 in the input",
            ));
        }
        let subjects = self
            .subjects
            .iter()
            .map(|raw| {
                AdditiveSubject::new(
                    raw.id.clone(),
                    raw.rows.iter().map(|r| r.s).collect(),
                    raw.rows.iter().map(|r| r.x.expect("covariates present")).collect(),
                    raw.rows.iter().map(|r| r.y).collect(),
                )
            })
            .collect::<countproc_core::Result<Vec<AdditiveSubject>>>()?;
        Ok(AdditiveDataset::new(subjects)?)
    }

    /// Observed `[min, max]` of each covariate across all subjects.
    pub fn covariate_ranges(&self) -> Option<[(f64, f64); N_PREDICTORS]> {
        if !self.has_covariates {
            return None;
        }
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); N_PREDICTORS];
        for subject in &self.subjects {
            for row in &subject.rows {
                let x = row.x.expect("covariates present");
                for (j, range) in ranges.iter_mut().enumerate() {
                    range.0 = range.0.min(x[j]);
                    range.1 = range.1.max(x[j]);
                }
            }
        }
        Some(ranges)
    }
}

/// Creates the file with the provenance comments and a header row, then
/// streams pre-rendered data rows.
pub fn write_table(
    path: &Path,
    config_hash: &str,
    seed: u64,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# config_hash={config_hash}").expect("string write");
    writeln!(text, "# seed={seed}").expect("string write");
    writeln!(text, "{}", header.join(",")).expect("string write");
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(text, "{}", row.join(",")).expect("string write");
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Posterior draws of named scalar parameters, plus the provenance every
/// output records.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable {
    pub config_hash: String,
    pub seed: u64,
    pub columns: Vec<(String, Vec<f64>)>,
}

/// One parameter's row in a summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

impl DrawTable {
    /// Builds a table, checking the columns are named, non-empty, and of
    /// equal length.
    pub fn new(
        config_hash: impl Into<String>,
        seed: u64,
        columns: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let Some(n) = columns.first().map(|(_, v)| v.len()) else {
            return Err(CliError::input("a draw table needs at least one column"));
        };
        for (name, values) in &columns {
            if name.is_empty() {
                return Err(CliError::input("draw columns must be named"));
            }
            if values.len() != n || n == 0 {
                return Err(CliError::input(format!(
                    "draw column {name:?} has {} values, expected {n}",
                    values.len()
                )));
            }
        }
        Ok(DrawTable {
            config_hash: config_hash.into(),
            seed,
            columns,
        })
    }

    /// Number of kept draws.
    pub fn n_draws(&self) -> usize {
        self.columns[0].1.len()
    }

    /// Writes the draws file: one column per parameter, one row per draw.
    pub fn write(&self, path: &Path) -> Result<()> {
        let header: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        let rows = (0..self.n_draws()).map(|d| {
            self.columns
                .iter()
                .map(|(_, values)| fmt_float(values[d]))
                .collect()
        });
        write_table(path, &self.config_hash, self.seed, &header, rows)
    }

    /// Reads a draws file this tool wrote; the provenance comments must be
    /// present.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let source = path.display().to_string();

        let mut config_hash = None;
        let mut seed = None;
        for line in text.lines().map(str::trim) {
            if let Some(v) = line.strip_prefix("# config_hash=") {
                config_hash = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("# seed=") {
                seed = Some(v.trim().parse::<u64>().map_err(|_| {
                    CliError::input(format!("{source}: malformed # seed= header"))
                })?);
            }
        }
        let (Some(config_hash), Some(seed)) = (config_hash, seed) else {
            return Err(CliError::input(format!(
                "{source}: missing # config_hash= or # seed= header; \
                 not a draws file written by this tool"
            )));
        };

        let mut lines = data_lines(&text);
        let names: Vec<String> = match lines.next() {
            Some((_, header)) => fields(header).iter().map(|s| s.to_string()).collect(),
            None => return Err(CliError::input(format!("{source}: no header row"))),
        };
        let mut columns: Vec<(String, Vec<f64>)> =
            names.into_iter().map(|n| (n, Vec::new())).collect();
        for (line, text) in lines {
            let f = fields(text);
            if f.len() != columns.len() {
                return Err(CliError::input(format!(
                    "{source} line {line}: expected {} fields, got {}",
                    columns.len(),
                    f.len()
                )));
            }
            for (raw, (name, values)) in f.iter().zip(&mut columns) {
                values.push(raw.parse().map_err(|_| {
                    CliError::input(format!(
                        "{source} line {line}: column {name}: {raw:?} is not a number"
                    ))
                })?);
            }
        }
        DrawTable::new(config_hash, seed, columns)
    }

    /// Posterior summary of every column: mean, standard deviation, and the
    /// 2.5%, 50%, and 97.5% quantiles.
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.columns
            .iter()
            .map(|(name, values)| SummaryRow {
                name: name.clone(),
                mean: mean(values),
                sd: if values.len() > 1 { sd(values) } else { 0.0 },
                q025: quantile(values, 0.025),
                median: quantile(values, 0.5),
                q975: quantile(values, 0.975),
            })
            .collect()
    }

    /// Writes the summary file for these draws.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let rows = self.summary_rows().into_iter().map(|r| {
            vec![
                r.name,
                fmt_float(r.mean),
                fmt_float(r.sd),
                fmt_float(r.q025),
                fmt_float(r.median),
                fmt_float(r.q975),
            ]
        });
        write_table(
            path,
            &self.config_hash,
            self.seed,
            &["parameter", "mean", "sd", "q025", "median", "q975"],
            rows,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_series_parses_sorts_and_round_trips() {
        let text = "# provenance\ns,y\n2.0,3\n0.5,1\n1.25,0\n";
        let series = parse_count_series(text, "in.csv").unwrap();
        assert_eq!(series.locations(), &[0.5, 1.25, 2.0]);
        assert_eq!(series.counts(), &[1, 0, 3]);

        // A written file parses back to the same series.
        let rows = series
            .locations()
            .iter()
            .zip(series.counts())
            .map(|(&s, &y)| vec![fmt_float(s), y.to_string()]);
        let dir = std::env::temp_dir().join("countproc-table-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_table(&path, "abc", 7, &["s", "y"], rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_hash=abc\n# seed=7\ns,y\n"));
        let back = parse_count_series(&text, "roundtrip.csv").unwrap();
        assert_eq!(back.locations(), series.locations());
        assert_eq!(back.counts(), series.counts());
    }

    #[test]
    fn count_series_errors_carry_line_numbers() {
        let err = parse_count_series("s,y\n1.0,2\nx,3\n", "in.csv").unwrap_err();
        assert!(err.to_string().contains("in.csv line 3"), "{err}");

        let err = parse_count_series("s,y\n1.0,-2\n", "in.csv").unwrap_err();
        assert!(err.to_string().contains("non-negative integer"), "{err}");

        let err = parse_count_series("s,y\n1.0,2.5\n", "in.csv").unwrap_err();
        assert!(err.to_string().contains("\"2.5\""), "{err}");

        let err = parse_count_series("y,s\n", "in.csv").unwrap_err();
        assert!(err.to_string().contains("expected header"), "{err}");

        let err = parse_count_series("s,y\n# only comments\n", "in.csv").unwrap_err();
        assert!(err.to_string().contains("no data rows"), "{err}");

        let err = parse_count_series("s,y\n3.0,1\n1.0,2\n3.0,4\n", "in.csv").unwrap_err();
        assert!(
            err.to_string().contains("lines 2 and 4: duplicate location 3"),
            "{err}"
        );
    }

    #[test]
    fn functional_schemas_are_detected_from_the_header() {
        let plain = parse_functional("subject,s,y\nb,1,2\na,0,1\nb,0,3\n", "f.csv").unwrap();
        assert!(!plain.has_group && !plain.has_covariates);
        // First-appearance order, rows time-sorted within subject.
        assert_eq!(plain.subjects[0].id, "b");
        assert_eq!(plain.subjects[0].rows[0].s, 0.0);
        assert_eq!(plain.subjects[0].rows[1].s, 1.0);
        let data = plain.to_grouped_dataset().unwrap();
        assert_eq!(data.n_groups(), 1);

        let grouped =
            parse_functional("subject,s,y,group\na,0,1,0\nb,0,2,1\n", "f.csv").unwrap();
        assert!(grouped.has_group);
        assert_eq!(grouped.to_grouped_dataset().unwrap().n_groups(), 2);

        let with_x = parse_functional(
            "subject,s,y,x1,x2,x3,x4\na,1,1,0.1,0.2,0.3,0.4\na,2,0,0.5,0.6,0.7,0.8\n",
            "f.csv",
        )
        .unwrap();
        assert!(with_x.has_covariates);
        let ranges = with_x.covariate_ranges().unwrap();
        assert_eq!(ranges[0], (0.1, 0.5));
        assert_eq!(ranges[3], (0.4, 0.8));
        assert!(with_x.to_additive_dataset().is_ok());

        let err = parse_functional("subject,s,y,x1\n", "f.csv").unwrap_err();
        assert!(err.to_string().contains("expected header"), "{err}");
    }

    #[test]
    fn functional_rows_must_match_the_schema() {
        let err = parse_functional("subject,s,y\na,0,1,4\n", "f.csv").unwrap_err();
        assert!(err.to_string().contains("expected 3 fields, got 4"), "{err}");

        let err =
            parse_functional("subject,s,y,group\na,0,1,0\na,1,2,1\n", "f.csv").unwrap_err();
        assert!(err.to_string().contains("reassigned"), "{err}");

        let err = parse_functional("subject,s,y\na,0,1\n", "f.csv")
            .unwrap()
            .to_additive_dataset()
            .unwrap_err();
        assert!(err.to_string().contains("covariate columns"), "{err}");

        // Non-unit time steps are caught when converting for the additive
        // model, with the subject named.
        let err = parse_functional(
            "subject,s,y,x1,x2,x3,x4\na,1,1,0,0,0,0\na,3,1,0,0,0,0\n",
            "f.csv",
        )
        .unwrap()
        .to_additive_dataset()
        .unwrap_err();
        assert!(err.to_string().contains("unit steps"), "{err}");
    }

    #[test]
    fn draw_table_round_trips_and_summarizes() {
        let dir = std::env::temp_dir().join("countproc-table-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("draws.csv");

        let table = DrawTable::new(
            "0123456789abcdef",
            42,
            vec![
                ("tau".to_string(), vec![1.0, 2.0, 3.0, 4.0]),
                ("lambda".to_string(), vec![0.5, 0.5, 0.25, 0.125]),
            ],
        )
        .unwrap();
        table.write(&path).unwrap();
        let back = DrawTable::read(&path).unwrap();
        assert_eq!(back, table);

        let rows = table.summary_rows();
        assert_eq!(rows[0].name, "tau");
        assert_eq!(rows[0].mean, 2.5);
        assert_eq!(rows[0].median, 2.0);
        assert_eq!(rows[0].q025, 1.0);
        assert_eq!(rows[0].q975, 4.0);
        assert!((rows[0].sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);

        // Single-draw tables summarize with zero spread rather than failing.
        let single =
            DrawTable::new("h", 0, vec![("tau".to_string(), vec![2.0])]).unwrap();
        assert_eq!(single.summary_rows()[0].sd, 0.0);

        let err = DrawTable::new("h", 0, vec![]).unwrap_err();
        assert!(err.to_string().contains("at least one column"), "{err}");
    }

    #[test]
    fn draw_table_read_requires_provenance() {
        let dir = std::env::temp_dir().join("countproc-table-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bare.csv");
        std::fs::write(&path, "tau\n1.0\n").unwrap();
        let err = DrawTable::read(&path).unwrap_err();
        assert!(err.to_string().contains("config_hash"), "{err}");
    }
}
