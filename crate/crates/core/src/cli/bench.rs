//! Repeated clustering + evaluation runs and their report.
//!
//! Repetition `i` uses seed `seed + i`, so any single run can be replayed on
//! its own. Runs execute on the current rayon pool; rows are always reported
//! in repetition order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::commands::{compute_indexes, format_value, resolve_indexes, ClustererSpec, DatasetSource, JsonNumber};
use super::{CliError, IndexName, KSpec};
use crate::tree_index::{average_runs, ExtendedScore};

/// Everything needed to reproduce a bench.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub dataset: DatasetSource,
    pub clusterer: ClustererSpec,
    pub seed: u64,
    pub repetitions: usize,
    /// `None` means every applicable index.
    pub indexes: Option<Vec<IndexName>>,
    pub min_leaf_override: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub run: usize,
    pub seed: u64,
    pub requested_k: usize,
    pub declared_k: usize,
    /// One value per report index, in report order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub dataset: String,
    pub clusterer: String,
    pub k: String,
    pub indexes: Vec<IndexName>,
    pub runs: Vec<BenchRun>,
    pub averages: Vec<f64>,
}

fn average_column(index: IndexName, column: &[f64]) -> f64 {
    match index {
        IndexName::TreeIndex => {
            let scores: Vec<ExtendedScore> = column.iter().map(|&v| ExtendedScore::from_f64(v)).collect();
            average_runs(&scores).map(ExtendedScore::to_f64).unwrap_or(f64::NAN)
        }
        _ => {
            if column.iter().any(|v| v.is_infinite()) {
                f64::INFINITY
            } else {
                column.iter().sum::<f64>() / column.len() as f64
            }
        }
    }
}

pub(crate) fn run_bench(spec: &RunSpec) -> Result<BenchReport, CliError> {
    if spec.repetitions == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let ds = spec.dataset.load()?;
    let indexes = resolve_indexes(spec.indexes.as_deref(), &ds)?;
    let runs: Vec<BenchRun> = (0..spec.repetitions)
        .into_par_iter()
        .map(|run| {
            let seed = spec.seed.wrapping_add(run as u64);
            let outcome = spec.clusterer.run(&ds, seed).and_then(|(ca, requested_k, _)| {
                let (values, _, _) = compute_indexes(&ds, &ca, &indexes, spec.min_leaf_override)?;
                Ok(BenchRun {
                    run,
                    seed,
                    requested_k,
                    declared_k: ca.declared_k(),
                    values: values.into_iter().map(|v| v.value).collect(),
                })
            });
            outcome.map_err(|e| match e {
                CliError::Usage(m) => CliError::Usage(format!("run {run} (seed {seed}) failed: {m}")),
                CliError::Runtime(m) => CliError::Runtime(format!("run {run} (seed {seed}) failed: {m}")),
            })
        })
        .collect::<Result<_, _>>()?;

    let averages = indexes
        .iter()
        .enumerate()
        .map(|(j, &index)| {
            let column: Vec<f64> = runs.iter().map(|r| r.values[j]).collect();
            average_column(index, &column)
        })
        .collect();
    Ok(BenchReport {
        dataset: ds.name().to_string(),
        clusterer: spec.clusterer.name().to_string(),
        k: match (spec.clusterer.kind, spec.clusterer.k) {
            (super::ClustererKind::Degenerate, _) => "2".into(),
            (_, KSpec::Random) => "random".into(),
            (_, KSpec::Fixed(k)) => k.to_string(),
        },
        indexes,
        runs,
        averages,
    })
}

impl BenchReport {
    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn average(&self, name: &str) -> Option<f64> {
        self.indexes.iter().position(|i| i.name() == name).map(|j| self.averages[j])
    }

    /// Checks that every average is the average of its column.
    pub fn audit(&self) -> Result<(), String> {
        if self.averages.len() != self.indexes.len() {
            return Err("average row width differs from index list".into());
        }
        for (j, &index) in self.indexes.iter().enumerate() {
            let column: Vec<f64> = self.runs.iter().map(|r| r.values[j]).collect();
            let expected = average_column(index, &column);
            let got = self.averages[j];
            if !(expected == got || (expected - got).abs() <= 1e-12 * expected.abs().max(1.0)) {
                return Err(format!("{}: average {got} but runs average to {expected}", index.name()));
            }
        }
        Ok(())
    }

    /// `run,seed,k,declared_k,<indexes...>` rows, then an `average` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,seed,k,declared_k");
        for i in &self.indexes {
            out.push(',');
            out.push_str(i.name());
        }
        out.push('\n');
        for r in &self.runs {
            out.push_str(&format!("{},{},{},{}", r.run, r.seed, r.requested_k, r.declared_k));
            for v in &r.values {
                out.push(',');
                out.push_str(&format_value(*v));
            }
            out.push('\n');
        }
        out.push_str("average,,,");
        for v in &self.averages {
            out.push(',');
            out.push_str(&format_value(*v));
        }
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Run {
            run: usize,
            seed: u64,
            k: usize,
            declared_k: usize,
            values: BTreeMap<&'static str, JsonNumber>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            dataset: &'a str,
            clusterer: &'a str,
            k: &'a str,
            repetitions: usize,
            seeds: Vec<u64>,
            directions: BTreeMap<&'static str, &'static str>,
            runs: Vec<Run>,
            average: BTreeMap<&'static str, JsonNumber>,
        }
        let named = |values: &[f64]| {
            self.indexes
                .iter()
                .zip(values)
                .map(|(i, &v)| (i.name(), JsonNumber(v)))
                .collect()
        };
        let doc = Doc {
            dataset: &self.dataset,
            clusterer: &self.clusterer,
            k: &self.k,
            repetitions: self.runs.len(),
            seeds: self.seeds(),
            directions: self.indexes.iter().map(|i| (i.name(), i.direction().as_str())).collect(),
            runs: self
                .runs
                .iter()
                .map(|r| Run {
                    run: r.run,
                    seed: r.seed,
                    k: r.requested_k,
                    declared_k: r.declared_k,
                    values: named(&r.values),
                })
                .collect(),
            average: named(&self.averages),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    /// `average <name>=<value> ...`
    pub fn average_line(&self) -> String {
        let mut out = format!("average over {} runs:", self.runs.len());
        for (i, v) in self.indexes.iter().zip(&self.averages) {
            out.push_str(&format!(" {}={}", i.name(), format_value(*v)));
        }
        out
    }
}

/// Re-derives the average row of a rendered CSV report from its per-run
/// rows. Printed values carry six decimals, so finite averages must agree to
/// within rounding of the printed digits.
pub fn audit_csv(text: &str) -> Result<(), String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty report")?.split(',').collect();
    if header.len() < 4 || header[..4] != ["run", "seed", "k", "declared_k"] {
        return Err("unexpected report header".into());
    }
    let names = &header[4..];
    let parse = |cell: &str| -> Result<f64, String> {
        if cell == "inf" {
            Ok(f64::INFINITY)
        } else {
            cell.parse::<f64>().map_err(|_| format!("bad value `{cell}`"))
        }
    };
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut average: Option<Vec<f64>> = None;
    for (lineno, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", lineno + 1, cells.len(), header.len()));
        }
        if average.is_some() {
            return Err("rows after the average row".into());
        }
        if cells[0] == "average" {
            average = Some(cells[4..].iter().map(|c| parse(c)).collect::<Result<_, _>>()?);
            continue;
        }
        if cells[0].parse::<usize>() != Ok(columns[0].len()) {
            return Err(format!("run numbers out of order at row {}", lineno + 1));
        }
        for (col, cell) in columns.iter_mut().zip(&cells[4..]) {
            col.push(parse(cell)?);
        }
    }
    let average = average.ok_or("missing average row")?;
    if columns.first().is_some_and(Vec::is_empty) {
        return Err("no per-run rows".into());
    }
    for ((name, column), got) in names.iter().zip(&columns).zip(&average) {
        let expected = if column.iter().any(|v| v.is_infinite()) {
            f64::INFINITY
        } else {
            column.iter().sum::<f64>() / column.len() as f64
        };
        let ok = if expected.is_infinite() {
            got.is_infinite()
        } else {
            (expected - got).abs() <= 2e-6
        };
        if !ok {
            return Err(format!("{name}: average row says {got}, runs give {expected}"));
        }
    }
    Ok(())
}
