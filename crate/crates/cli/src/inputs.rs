use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use polarcap::MeanMatrix;

use crate::error::{CliError, CliResult};

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn parse_f64(field: &str, what: &str) -> CliResult<f64> {
    field.parse().map_err(|_| CliError::Data(format!("{what}: cannot parse '{field}' as a number")))
}

fn parse_usize(field: &str, what: &str) -> CliResult<usize> {
    field.parse().map_err(|_| CliError::Data(format!("{what}: cannot parse '{field}' as a non-negative integer")))
}

/// A means table `user_id,<arm>,<arm>,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeansFile {
    pub users: Vec<String>,
    pub arms: Vec<String>,
    pub means: MeanMatrix,
}

impl MeansFile {
    pub fn read<R: Read>(r: R) -> CliResult<Self> {
        let mut rdr = reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "user_id" {
            return Err(CliError::Data("means header must be user_id followed by at least two arm names".into()));
        }
        let arms: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut users = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(CliError::Data(format!("means row {line} has {} fields, expected {}", rec.len(), header.len())));
            }
            users.push(rec[0].to_string());
            let row = rec.iter().skip(1).map(|f| parse_f64(f, "means")).collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Data("means file has no users".into()));
        }
        Ok(Self { users, arms, means: MeanMatrix::new(rows)? })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::read(open(path)?)
    }

    /// Keeps the named arm columns, in the given order.
    pub fn select(&self, names: &[String]) -> CliResult<Self> {
        let idx = names
            .iter()
            .map(|name| {
                self.arms
                    .iter()
                    .position(|a| a == name)
                    .ok_or_else(|| CliError::Usage(format!("unknown arm '{name}'")))
            })
            .collect::<CliResult<Vec<usize>>>()?;
        Ok(Self { users: self.users.clone(), arms: names.to_vec(), means: self.means.select_arms(&idx)? })
    }

    pub fn table(&self) -> crate::table::Table {
        means_table(&self.users, &self.arms, &self.means)
    }
}

pub fn means_table(users: &[String], arms: &[String], means: &MeanMatrix) -> crate::table::Table {
    let mut t = crate::table::Table::new(std::iter::once("user_id".to_string()).chain(arms.iter().cloned()));
    for (u, row) in users.iter().zip(means.rows()) {
        t.push(std::iter::once(u.clone()).chain(row.iter().map(|&v| crate::table::fmt_num(v))).collect());
    }
    t
}

/// `user_id,group` rows; returns one label per entry of `users`.
pub fn read_labels<R: Read>(r: R, users: &[String]) -> CliResult<Vec<String>> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["user_id", "group"] {
        return Err(CliError::Data("labels header must be user_id,group".into()));
    }
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        map.insert(rec[0].to_string(), rec[1].to_string());
    }
    users
        .iter()
        .map(|u| map.get(u).cloned().ok_or_else(|| CliError::Data(format!("user {u} has no group label"))))
        .collect()
}

/// `"1,2,3"` or `"count@base"` for `base, base+1, ..., base+count-1`.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("cannot parse seeds '{s}'"));
    let seeds: Vec<u64> = if let Some((count, base)) = s.split_once('@') {
        let count: u64 = count.trim().parse().map_err(|_| bad())?;
        let base: u64 = base.trim().parse().map_err(|_| bad())?;
        (0..count).map(|i| base + i).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    if seeds.is_empty() {
        return Err(CliError::Usage("seed list is empty".into()));
    }
    Ok(seeds)
}

/// `points` equally spaced values on `[0, 1]`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// Parses a `0110`-style bit string.
pub fn parse_bits(s: &str) -> CliResult<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(CliError::Usage(format!("bit string '{s}' may only contain 0 and 1"))),
        })
        .collect()
}

/// One `t,user,arm` entry of an exposure log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub t: usize,
    pub user: usize,
    pub arm: usize,
}

pub fn read_log<R: Read>(r: R) -> CliResult<Vec<LogEntry>> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "user", "arm"] {
        return Err(CliError::Data("log header must be t,user,arm".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(LogEntry {
                t: parse_usize(&rec[0], "log t")?,
                user: parse_usize(&rec[1], "log user")?,
                arm: parse_usize(&rec[2], "log arm")?,
            })
        })
        .collect()
}
