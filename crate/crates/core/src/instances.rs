//! Instance construction: polarized populations, worst-case Bernoulli
//! instances used as regret benchmarks, and ratings-file ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use crate::error::{Error, Result};
use crate::model::MeanMatrix;

/// The first `majority` users prefer arm 0 exclusively, the rest arm 1.
pub fn polarized_instance(n: usize, majority: usize) -> Result<MeanMatrix> {
    if majority > n {
        return Err(Error::PreconditionViolated(format!("majority {majority} exceeds n = {n}")));
    }
    MeanMatrix::new(
        (0..n)
            .map(|i| if i < majority { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect(),
    )
}

/// Gap of the two-arm construction: `sqrt(1 / (8 T))`.
pub fn two_arm_gap(horizon: usize) -> f64 {
    (1.0 / (8.0 * horizon as f64)).sqrt()
}

/// Gap of the k-arm construction: `sqrt((k - 1) / (8 n T))`.
pub fn k_arm_gap(n: usize, k: usize, horizon: usize) -> f64 {
    ((k - 1) as f64 / (8.0 * n as f64 * horizon as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundSpec {
    /// `false` favours arm 0, `true` favours arm 1.
    pub bits: Vec<bool>,
    pub horizon: usize,
    pub epsilon: f64,
}

impl LowerBoundSpec {
    pub fn new(bits: Vec<bool>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        if bits.is_empty() {
            return Err(Error::InvalidParams("bit vector must be non-empty".into()));
        }
        Ok(Self { bits, horizon, epsilon: two_arm_gap(horizon) })
    }

    pub fn means(&self) -> Result<MeanMatrix> {
        let hi = 0.5 + self.epsilon;
        MeanMatrix::new(
            self.bits
                .iter()
                .map(|&b| if b { vec![0.5, hi] } else { vec![hi, 0.5] })
                .collect(),
        )
    }
}

/// Row `i` is `(1/2 + eps, 1/2)` when `bits[i]` is unset and `(1/2, 1/2 + eps)` otherwise.
pub fn lower_bound_instance_2arm(bits: &[bool], horizon: usize) -> Result<MeanMatrix> {
    LowerBoundSpec::new(bits.to_vec(), horizon)?.means()
}

/// Every row is `(1/2 + eps, 1/2, ..., 1/2)`; a `special_arm` (never arm 0)
/// is raised to `1/2 + 2 eps`.
pub fn lower_bound_instance_karm(
    n: usize,
    k: usize,
    horizon: usize,
    special_arm: Option<usize>,
) -> Result<MeanMatrix> {
    if n == 0 || k < 2 {
        return Err(Error::InvalidParams(format!("need n >= 1 and k >= 2, got n = {n}, k = {k}")));
    }
    let needed = 7 * (k - 1);
    if n * horizon < needed {
        return Err(Error::HorizonTooSmall { nt: n * horizon, needed });
    }
    if let Some(j) = special_arm {
        if j == 0 || j >= k {
            return Err(Error::InvalidParams(format!("special arm must lie in 1..{k}, got {j}")));
        }
    }
    let eps = k_arm_gap(n, k, horizon);
    let mut row = vec![0.5; k];
    row[0] = 0.5 + eps;
    if let Some(j) = special_arm {
        row[j] = 0.5 + 2.0 * eps;
    }
    MeanMatrix::new(vec![row; n])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rating {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingsDataset {
    pub ratings: Vec<Rating>,
    pub genres: BTreeMap<u64, BTreeSet<String>>,
}

fn is_half_star(r: f64) -> bool {
    (0.5..=5.0).contains(&r) && (2.0 * r).fract() == 0.0
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, line: usize) -> Result<&'a str> {
    record
        .get(idx)
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("line {line}: missing column {idx}")))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} '{s}'")))
}

fn reader<R: Read>(input: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let found = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(Error::Parse(format!("expected header {header:?}, found {found:?}")));
    }
    Ok(rdr)
}

impl RatingsDataset {
    /// Reads `user_id,item_id,rating,timestamp` and `item_id,genres` CSVs,
    /// where genres are `|`-separated.
    pub fn from_readers<R1: Read, R2: Read>(ratings: R1, genres: R2) -> Result<Self> {
        let mut dataset = RatingsDataset::default();
        let mut rdr = reader(genres, &["item_id", "genres"])?;
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let item: u64 = parse(field(&record, 0, line)?, "item id", line)?;
            let set: BTreeSet<String> = field(&record, 1, line)?
                .split('|')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(String::from)
                .collect();
            if set.is_empty() {
                return Err(Error::Parse(format!("line {line}: item {item} has no genres")));
            }
            dataset.genres.insert(item, set);
        }
        let mut rdr = reader(ratings, &["user_id", "item_id", "rating", "timestamp"])?;
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            dataset.ratings.push(Rating {
                user: parse(field(&record, 0, line)?, "user id", line)?,
                item: parse(field(&record, 1, line)?, "item id", line)?,
                rating: parse(field(&record, 2, line)?, "rating", line)?,
                timestamp: parse(field(&record, 3, line)?, "timestamp", line)?,
            });
        }
        Ok(dataset)
    }

    /// Alphabetically sorted genre names; position defines the arm index.
    pub fn genre_index(&self) -> Vec<String> {
        let all: BTreeSet<&String> = self.genres.values().flatten().collect();
        all.into_iter().cloned().collect()
    }

    /// Distinct user ids in ascending order.
    pub fn users(&self) -> Vec<u64> {
        let ids: BTreeSet<u64> = self.ratings.iter().map(|r| r.user).collect();
        ids.into_iter().collect()
    }

    /// Keeps only ratings by the listed users.
    pub fn restrict_users(&self, users: &[u64]) -> Self {
        let keep: BTreeSet<u64> = users.iter().copied().collect();
        Self {
            ratings: self.ratings.iter().filter(|r| keep.contains(&r.user)).cloned().collect(),
            genres: self.genres.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in &self.ratings {
            if !self.genres.contains_key(&r.item) {
                return Err(Error::UnknownItem(r.item));
            }
            if !is_half_star(r.rating) {
                return Err(Error::InvalidRating { user: r.user, item: r.item, rating: r.rating });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestResult {
    pub means: MeanMatrix,
    /// Row order of `means`.
    pub users: Vec<u64>,
    /// Column order of `means`.
    pub genres: Vec<String>,
    /// `(row, column)` cells with no ratings, set to zero.
    pub unrated: Vec<(usize, usize)>,
}

/// Per-user, per-genre mean rating divided by five. A movie counts toward
/// every genre it carries; genres a user never rated get mean zero.
pub fn ingest_ratings(dataset: &RatingsDataset) -> Result<IngestResult> {
    dataset.validate()?;
    let genres = dataset.genre_index();
    let column: BTreeMap<&str, usize> = genres.iter().enumerate().map(|(j, g)| (g.as_str(), j)).collect();
    let users = dataset.users();
    let row: BTreeMap<u64, usize> = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let k = genres.len();
    let mut sums = vec![0.0; users.len() * k];
    let mut counts = vec![0u32; users.len() * k];
    for r in &dataset.ratings {
        let i = row[&r.user];
        for g in &dataset.genres[&r.item] {
            let cell = i * k + column[g.as_str()];
            sums[cell] += r.rating;
            counts[cell] += 1;
        }
    }
    let mut unrated = Vec::new();
    let rows = (0..users.len())
        .map(|i| {
            (0..k)
                .map(|j| {
                    let cell = i * k + j;
                    if counts[cell] == 0 {
                        unrated.push((i, j));
                        0.0
                    } else {
                        sums[cell] / counts[cell] as f64 / 5.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(IngestResult { means: MeanMatrix::new(rows)?, users, genres, unrated })
}
