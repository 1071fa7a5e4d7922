//! Text formats read and written by the CLI.
//!
//! - design: first record `n,m`, then `n` rows of `m` numbers (row-major)
//! - vectors (response, p-values): one number per line, optional header
//! - schedule: header `index,value`, 1-based indices in order
//! - partition: header `feature_index,group_id[,weight]`, 0-based features

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::group::{GroupPartition, WeightScheme};
use crate::sim::{ExperimentConfig, SuiteSpec};
use crate::sorted_l1::LambdaSchedule;
use crate::stepdown::PValueSet;

/// Non-empty records with their 1-based line numbers.
fn records(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn number(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("'{field}' is not finite")));
    }
    Ok(v)
}

fn count(line: usize, field: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("'{field}' is not a non-negative integer")))
}

fn expect_fields(line: usize, rec: &[String], n: usize) -> Result<()> {
    if rec.len() != n {
        return Err(Error::parse(line, format!("expected {n} fields, found {}", rec.len())));
    }
    Ok(())
}

/// Dense design matrix.
pub fn parse_design_csv(text: &str) -> Result<DMatrix<f64>> {
    let recs = records(text)?;
    let Some((line, head)) = recs.first() else {
        return Err(Error::parse(1, "empty design file"));
    };
    expect_fields(*line, head, 2)?;
    let n = count(*line, &head[0])?;
    let m = count(*line, &head[1])?;
    if n == 0 || m == 0 {
        return Err(Error::parse(*line, "design dimensions must be positive"));
    }
    let rows = &recs[1..];
    if rows.len() != n {
        let line = rows.last().map_or(*line, |r| r.0);
        return Err(Error::parse(line, format!("expected {n} rows, found {}", rows.len())));
    }
    let mut values = Vec::new();
    for (line, rec) in rows {
        expect_fields(*line, rec, m)?;
        for f in rec {
            values.push(number(*line, f)?);
        }
    }
    Ok(DMatrix::from_row_slice(n, m, &values))
}

pub fn design_to_csv(x: &DMatrix<f64>) -> String {
    let mut s = format!("{},{}\n", x.nrows(), x.ncols());
    for row in x.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// One number per line. A first line that is not numeric is taken as a header.
pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>> {
    let recs = records(text)?;
    let mut out = Vec::with_capacity(recs.len());
    for (i, (line, rec)) in recs.iter().enumerate() {
        expect_fields(*line, rec, 1)?;
        if i == 0 && rec[0].parse::<f64>().is_err() {
            continue;
        }
        out.push(number(*line, &rec[0])?);
    }
    if out.is_empty() {
        return Err(Error::parse(1, "no values"));
    }
    Ok(out)
}

pub fn parse_pvalues_csv(text: &str) -> Result<PValueSet> {
    PValueSet::new(parse_vector_csv(text)?)
}

/// Schedule as `index,value`. The result is tagged custom.
pub fn parse_schedule_csv(text: &str) -> Result<LambdaSchedule> {
    let recs = records(text)?;
    let Some((line, head)) = recs.first() else {
        return Err(Error::parse(1, "empty schedule file"));
    };
    if head.len() != 2 || head[0] != "index" || head[1] != "value" {
        return Err(Error::parse(*line, "expected header 'index,value'"));
    }
    let mut values = Vec::with_capacity(recs.len() - 1);
    for (line, rec) in &recs[1..] {
        expect_fields(*line, rec, 2)?;
        let idx = count(*line, &rec[0])?;
        if idx != values.len() + 1 {
            return Err(Error::parse(
                *line,
                format!("expected index {}, found {idx}", values.len() + 1),
            ));
        }
        values.push(number(*line, &rec[1])?);
    }
    if values.is_empty() {
        return Err(Error::parse(*line, "schedule has no values"));
    }
    LambdaSchedule::custom(values)
}

/// `index,value` with 17 significant digits, so parsing reproduces the bits.
pub fn schedule_to_csv(lam: &LambdaSchedule) -> String {
    let mut s = String::from("index,value\n");
    for (i, v) in lam.values().iter().enumerate() {
        s.push_str(&format!("{},{v:.16e}\n", i + 1));
    }
    s
}

pub fn parse_schedule_json(text: &str) -> Result<LambdaSchedule> {
    Ok(serde_json::from_str(text)?)
}

pub fn schedule_to_json(lam: &LambdaSchedule) -> Result<String> {
    Ok(serde_json::to_string_pretty(lam)?)
}

/// Group partition. Groups are ordered by label; an optional third column
/// gives the group weight, which must agree across a group's rows. Without
/// weights, `scheme` is used.
pub fn parse_partition_csv(text: &str, scheme: WeightScheme) -> Result<GroupPartition> {
    let recs = records(text)?;
    let Some((line, head)) = recs.first() else {
        return Err(Error::parse(1, "empty partition file"));
    };
    let weighted = match head.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["feature_index", "group_id"] => false,
        ["feature_index", "group_id", "weight"] => true,
        _ => {
            return Err(Error::parse(
                *line,
                "expected header 'feature_index,group_id[,weight]'",
            ))
        }
    };
    let width = if weighted { 3 } else { 2 };
    let m = recs.len() - 1;
    let mut labels: Vec<Option<u64>> = vec![None; m];
    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    for (line, rec) in &recs[1..] {
        expect_fields(*line, rec, width)?;
        let j = count(*line, &rec[0])?;
        if j >= m {
            return Err(Error::parse(*line, format!("feature index {j} out of range 0..{m}")));
        }
        if labels[j].is_some() {
            return Err(Error::parse(*line, format!("feature {j} listed twice")));
        }
        let g: u64 = rec[1]
            .parse()
            .map_err(|_| Error::parse(*line, format!("'{}' is not a group id", rec[1])))?;
        labels[j] = Some(g);
        if weighted {
            let w = number(*line, &rec[2])?;
            if w <= 0.0 {
                return Err(Error::parse(*line, "weights must be positive"));
            }
            if let Some(prev) = weights.insert(g, w) {
                if prev != w {
                    return Err(Error::parse(*line, format!("group {g} has conflicting weights")));
                }
            }
        }
    }
    let labels: Vec<u64> = labels
        .into_iter()
        .map(|l| l.ok_or_else(|| Error::parse(*line, "features are not covered")))
        .collect::<Result<_>>()?;
    if m == 0 {
        return Err(Error::parse(*line, "partition has no features"));
    }
    let part = GroupPartition::from_labels(&labels, scheme)?;
    if weighted {
        part.with_weights(weights.into_values().collect())
    } else {
        Ok(part)
    }
}

/// A config file holds either one experiment or a suite with `blocks`.
pub fn parse_config_json(text: &str) -> Result<SuiteSpec> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("blocks").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        SuiteSpec::single(&cfg)
    }
}
