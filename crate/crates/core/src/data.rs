//! Roll-call matrices, vote-domain labels, covariates and anchor specs.
//!
//! File formats:
//! - `votes.csv` (wide): `legislator_id,<bill_1>,...,<bill_J>` with cells `0`, `1` or `NA`.
//!   A long layout `legislator_id,bill_id,vote` is also accepted.
//! - `vote_types.csv`: `bill_id,gamma` with gamma in `{0, 1}`.
//! - `covariates.csv`: `legislator_id,<name_1>,...,<name_p>`, numeric cells.
//! - `anchors.json`: `{"anchor_low": id, "anchor_high": id, "anchor_values": [-1, 1], "sign_legislator": id}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single roll-call cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Vote {
    Nay = 0,
    Yea = 1,
    Missing = 2,
}

impl Vote {
    pub fn parse(cell: &str) -> Option<Vote> {
        match cell.trim() {
            "0" => Some(Vote::Nay),
            "1" => Some(Vote::Yea),
            "NA" | "na" | "" | "." => Some(Vote::Missing),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Vote::Nay => "0",
            Vote::Yea => "1",
            Vote::Missing => "NA",
        }
    }

    pub fn observed(self) -> Option<bool> {
        match self {
            Vote::Nay => Some(false),
            Vote::Yea => Some(true),
            Vote::Missing => None,
        }
    }
}

/// Vote domain of a bill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Procedural = 0,
    FinalPassage = 1,
}

impl Domain {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Domain> {
        match code {
            0 => Some(Domain::Procedural),
            1 => Some(Domain::FinalPassage),
            _ => None,
        }
    }
}

/// I×J ternary roll-call matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    votes: Vec<Vote>,
    legislator_ids: Vec<String>,
    bill_ids: Vec<String>,
}

impl VoteMatrix {
    /// Builds a matrix and checks that every row and column has an observed vote.
    pub fn new(legislator_ids: Vec<String>, bill_ids: Vec<String>, votes: Vec<Vote>) -> Result<Self> {
        let m = Self::new_unchecked(legislator_ids, bill_ids, votes)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix checking only its shape. Intended for synthetic
    /// fixtures that deliberately contain empty rows or columns.
    pub fn new_unchecked(
        legislator_ids: Vec<String>,
        bill_ids: Vec<String>,
        votes: Vec<Vote>,
    ) -> Result<Self> {
        if votes.len() != legislator_ids.len() * bill_ids.len() {
            return Err(Error::InvalidData(format!(
                "vote matrix has {} cells, expected {}x{}",
                votes.len(),
                legislator_ids.len(),
                bill_ids.len()
            )));
        }
        Ok(Self {
            votes,
            legislator_ids,
            bill_ids,
        })
    }

    fn validate(&self) -> Result<()> {
        let (ni, nj) = (self.n_legislators(), self.n_bills());
        if ni < 3 {
            return Err(Error::InvalidData(format!("need at least 3 legislators, got {ni}")));
        }
        if nj < 2 {
            return Err(Error::InvalidData(format!("need at least 2 bills, got {nj}")));
        }
        for i in 0..ni {
            if self.row(i).iter().all(|v| *v == Vote::Missing) {
                return Err(Error::InvalidData(format!(
                    "legislator {} has no observed votes",
                    self.legislator_ids[i]
                )));
            }
        }
        for j in 0..nj {
            if (0..ni).all(|i| self.get(i, j) == Vote::Missing) {
                return Err(Error::InvalidData(format!("bill {} has no observed votes", self.bill_ids[j])));
            }
        }
        check_unique(&self.legislator_ids, "legislator id")?;
        check_unique(&self.bill_ids, "bill id")?;
        Ok(())
    }

    #[inline]
    pub fn n_legislators(&self) -> usize {
        self.legislator_ids.len()
    }

    #[inline]
    pub fn n_bills(&self) -> usize {
        self.bill_ids.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vote {
        self.votes[i * self.n_bills() + j]
    }

    pub fn row(&self, i: usize) -> &[Vote] {
        let nj = self.n_bills();
        &self.votes[i * nj..(i + 1) * nj]
    }

    pub fn cells(&self) -> &[Vote] {
        &self.votes
    }

    pub fn legislator_ids(&self) -> &[String] {
        &self.legislator_ids
    }

    pub fn bill_ids(&self) -> &[String] {
        &self.bill_ids
    }

    pub fn n_missing(&self) -> usize {
        self.votes.iter().filter(|v| **v == Vote::Missing).count()
    }

    pub fn legislator_index(&self, id: &str) -> Option<usize> {
        self.legislator_ids.iter().position(|x| x == id)
    }

    /// Observed yea proportion of bill `j`, or `None` if the column is empty.
    pub fn yea_rate(&self, j: usize) -> Option<f64> {
        let (mut yea, mut seen) = (0usize, 0usize);
        for i in 0..self.n_legislators() {
            if let Some(y) = self.get(i, j).observed() {
                seen += 1;
                yea += y as usize;
            }
        }
        (seen > 0).then(|| yea as f64 / seen as f64)
    }

    pub fn write_wide(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        write!(w, "legislator_id").map_err(io)?;
        for b in &self.bill_ids {
            write!(w, ",{b}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for i in 0..self.n_legislators() {
            write!(w, "{}", self.legislator_ids[i]).map_err(io)?;
            for v in self.row(i) {
                write!(w, ",{}", v.as_str()).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Per-bill domain labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTypeVector {
    gamma: Vec<Domain>,
}

impl VoteTypeVector {
    pub fn new(gamma: Vec<Domain>) -> Result<Self> {
        let v = Self { gamma };
        if !v.gamma.contains(&Domain::Procedural) {
            return Err(Error::InvalidData("no procedural (gamma = 0) bills".into()));
        }
        if !v.gamma.contains(&Domain::FinalPassage) {
            return Err(Error::InvalidData("no final-passage (gamma = 1) bills".into()));
        }
        Ok(v)
    }

    pub fn from_codes(codes: &[u8]) -> Result<Self> {
        let gamma = codes
            .iter()
            .map(|&c| Domain::from_code(c).ok_or_else(|| Error::InvalidData(format!("gamma must be 0 or 1, got {c}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(gamma)
    }

    #[inline]
    pub fn get(&self, j: usize) -> Domain {
        self.gamma[j]
    }

    pub fn as_slice(&self) -> &[Domain] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.gamma.iter().map(|d| *d as u8).collect()
    }

    pub fn write(&self, bill_ids: &[String], path: &Path) -> Result<()> {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "bill_id,gamma").map_err(io)?;
        for (b, g) in bill_ids.iter().zip(&self.gamma) {
            writeln!(w, "{b},{}", *g as u8).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Centered I×p covariate matrix for the bridge regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    column_names: Vec<String>,
    offsets: Vec<f64>,
    centered: bool,
}

impl DesignMatrix {
    /// Wraps raw (uncentered) columns, centers them and rejects constant columns.
    pub fn from_raw(x: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        if x.ncols() != column_names.len() {
            return Err(Error::InvalidData(format!(
                "{} covariate columns but {} names",
                x.ncols(),
                column_names.len()
            )));
        }
        check_unique(&column_names, "covariate name")?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite covariate value".into()));
        }
        let mut m = Self {
            x,
            column_names,
            offsets: Vec::new(),
            centered: false,
        };
        m.offsets = vec![0.0; m.x.ncols()];
        m.center();
        for (k, name) in m.column_names.iter().enumerate() {
            if m.x.column(k).iter().all(|v| v.abs() <= 1e-12) {
                return Err(Error::InvalidData(format!("covariate {name} is constant")));
            }
        }
        Ok(m)
    }

    /// Design with no covariates for `n_rows` legislators.
    pub fn empty(n_rows: usize) -> Self {
        Self {
            x: DMatrix::zeros(n_rows, 0),
            column_names: Vec::new(),
            offsets: Vec::new(),
            centered: true,
        }
    }

    /// Subtracts column means, accumulating the removed offsets. Idempotent up
    /// to rounding.
    pub fn center(&mut self) {
        let n = self.x.nrows();
        if n == 0 {
            return;
        }
        for k in 0..self.x.ncols() {
            let mean = self.x.column(k).iter().sum::<f64>() / n as f64;
            for v in self.x.column_mut(k).iter_mut() {
                *v -= mean;
            }
            self.offsets[k] += mean;
        }
        self.centered = true;
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Column means removed by centering, in original units.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// `x_iᵀ η`.
    pub fn row_dot(&self, i: usize, eta: &[f64]) -> f64 {
        eta.iter()
            .enumerate()
            .filter(|(_, e)| **e != 0.0)
            .map(|(k, e)| self.x[(i, k)] * e)
            .sum()
    }

    /// Writes the covariates in original (uncentered) units.
    pub fn write(&self, ids: &[String], path: &Path) -> Result<()> {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        write!(w, "legislator_id").map_err(io)?;
        for c in &self.column_names {
            write!(w, ",{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (i, id) in ids.iter().enumerate() {
            write!(w, "{id}").map_err(io)?;
            for k in 0..self.n_cols() {
                write!(w, ",{}", self.x[(i, k)] + self.offsets[k]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Anchor legislators fixing location, scale and orientation of the policy space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub anchor_low: usize,
    pub anchor_high: usize,
    pub anchor_values: (f64, f64),
    pub sign_legislator: usize,
}

impl AnchorSpec {
    pub const DEFAULT_VALUES: (f64, f64) = (-1.0, 1.0);
}

/// Checks anchor indices and target values against the vote matrix.
pub fn validate_anchors(spec: AnchorSpec, data: &VoteMatrix) -> Result<AnchorSpec> {
    let n = data.n_legislators();
    for (role, idx) in [
        ("anchor_low", spec.anchor_low),
        ("anchor_high", spec.anchor_high),
        ("sign_legislator", spec.sign_legislator),
    ] {
        if idx >= n {
            return Err(Error::InvalidData(format!("{role} index {idx} out of range for {n} legislators")));
        }
    }
    if spec.anchor_low == spec.anchor_high {
        return Err(Error::InvalidData("anchor_low and anchor_high are the same legislator".into()));
    }
    let (a, b) = spec.anchor_values;
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidData("anchor values must be finite".into()));
    }
    if a == b {
        return Err(Error::InvalidData("anchor values must be distinct".into()));
    }
    Ok(spec)
}

/// Everything the sampler needs about one chamber.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub votes: VoteMatrix,
    pub types: VoteTypeVector,
    pub covariates: DesignMatrix,
}

impl Dataset {
    pub fn new(votes: VoteMatrix, types: VoteTypeVector, covariates: DesignMatrix) -> Result<Self> {
        if types.len() != votes.n_bills() {
            return Err(Error::InvalidData(format!(
                "{} vote types for {} bills",
                types.len(),
                votes.n_bills()
            )));
        }
        if covariates.n_rows() != votes.n_legislators() {
            return Err(Error::InvalidData(format!(
                "{} covariate rows for {} legislators",
                covariates.n_rows(),
                votes.n_legislators()
            )));
        }
        Ok(Self {
            votes,
            types,
            covariates,
        })
    }

    /// Rejects legislators with no observed vote in one of the two domains.
    pub fn check_domain_coverage(&self) -> Result<()> {
        for i in 0..self.votes.n_legislators() {
            let mut seen = [false; 2];
            for (j, v) in self.votes.row(i).iter().enumerate() {
                if *v != Vote::Missing {
                    seen[self.types.get(j).index()] = true;
                }
            }
            if let Some(d) = seen.iter().position(|s| !s) {
                let name = if d == 0 { "procedural" } else { "final-passage" };
                return Err(Error::InvalidData(format!(
                    "legislator {} has no observed {name} votes",
                    self.votes.legislator_ids()[i]
                )));
            }
        }
        Ok(())
    }

    pub fn n_legislators(&self) -> usize {
        self.votes.n_legislators()
    }

    pub fn n_bills(&self) -> usize {
        self.votes.n_bills()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.n_cols()
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for id in ids {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::InvalidData(format!("duplicate {what} {id}")));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(path, line, e.to_string())
}

fn header_of(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

/// Loads a roll-call matrix and its domain labels.
pub fn load_votes(votes_path: &Path, types_path: &Path) -> Result<(VoteMatrix, VoteTypeVector)> {
    let votes = read_vote_matrix(votes_path)?;
    let types = read_vote_types(types_path, votes.bill_ids())?;
    Ok((votes, types))
}

fn read_vote_matrix(path: &Path) -> Result<VoteMatrix> {
    let mut rdr = csv_reader(path)?;
    let header = header_of(path, &mut rdr)?;
    if header.first().map(String::as_str) != Some("legislator_id") {
        return Err(Error::parse(path, 1, "first column must be legislator_id"));
    }
    if header.len() == 3 && header[1] == "bill_id" && header[2] == "vote" {
        return read_long_votes(path, rdr);
    }
    let bill_ids: Vec<String> = header[1..].to_vec();
    let mut legislator_ids = Vec::new();
    let mut votes = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::parse(path, line, format!("expected {} cells, found {}", header.len(), rec.len())));
        }
        legislator_ids.push(rec[0].to_string());
        for cell in rec.iter().skip(1) {
            let v = Vote::parse(cell).ok_or_else(|| Error::parse(path, line, format!("unknown vote code {cell:?}")))?;
            votes.push(v);
        }
    }
    VoteMatrix::new(legislator_ids, bill_ids, votes)
}

fn read_long_votes(path: &Path, mut rdr: csv::Reader<File>) -> Result<VoteMatrix> {
    let mut leg_index: HashMap<String, usize> = HashMap::new();
    let mut bill_index: HashMap<String, usize> = HashMap::new();
    let (mut legs, mut bills) = (Vec::new(), Vec::new());
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let i = *leg_index.entry(rec[0].to_string()).or_insert_with(|| {
            legs.push(rec[0].to_string());
            legs.len() - 1
        });
        let j = *bill_index.entry(rec[1].to_string()).or_insert_with(|| {
            bills.push(rec[1].to_string());
            bills.len() - 1
        });
        let v = Vote::parse(&rec[2]).ok_or_else(|| Error::parse(path, line, format!("unknown vote code {:?}", &rec[2])))?;
        entries.push((i, j, v, line));
    }
    let nj = bills.len();
    let mut votes = vec![Vote::Missing; legs.len() * nj];
    for (i, j, v, line) in entries {
        if votes[i * nj + j] != Vote::Missing && v != Vote::Missing {
            return Err(Error::parse(path, line, format!("duplicate vote for {} on {}", legs[i], bills[j])));
        }
        votes[i * nj + j] = v;
    }
    VoteMatrix::new(legs, bills, votes)
}

fn read_vote_types(path: &Path, bill_ids: &[String]) -> Result<VoteTypeVector> {
    let mut rdr = csv_reader(path)?;
    let header = header_of(path, &mut rdr)?;
    if header != ["bill_id", "gamma"] {
        return Err(Error::parse(path, 1, "header must be bill_id,gamma"));
    }
    let mut by_bill = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let code: u8 = rec[1]
            .parse()
            .ok()
            .filter(|c| *c <= 1)
            .ok_or_else(|| Error::parse(path, line, format!("gamma must be 0 or 1, got {:?}", &rec[1])))?;
        if by_bill.insert(rec[0].to_string(), code).is_some() {
            return Err(Error::parse(path, line, format!("duplicate bill {}", &rec[0])));
        }
    }
    if by_bill.len() != bill_ids.len() {
        return Err(Error::InvalidData(format!(
            "{}: {} vote types for {} bills",
            path.display(),
            by_bill.len(),
            bill_ids.len()
        )));
    }
    let codes = bill_ids
        .iter()
        .map(|b| {
            by_bill
                .get(b)
                .copied()
                .ok_or_else(|| Error::InvalidData(format!("{}: no vote type for bill {b}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    VoteTypeVector::from_codes(&codes)
}

/// Loads and centers covariates, reordering rows to match `ids`.
pub fn load_covariates(path: &Path, ids: &[String]) -> Result<DesignMatrix> {
    let mut rdr = csv_reader(path)?;
    let header = header_of(path, &mut rdr)?;
    if header.first().map(String::as_str) != Some("legislator_id") {
        return Err(Error::parse(path, 1, "first column must be legislator_id"));
    }
    let names: Vec<String> = header[1..].to_vec();
    let p = names.len();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::parse(path, line, format!("expected {} cells, found {}", header.len(), rec.len())));
        }
        let mut vals = Vec::with_capacity(p);
        for (k, cell) in rec.iter().skip(1).enumerate() {
            if Vote::parse(cell) == Some(Vote::Missing) && cell.parse::<f64>().is_err() {
                return Err(Error::parse(path, line, format!("missing value for {}", names[k])));
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("non-numeric value {cell:?} for {}", names[k])))?;
            vals.push(v);
        }
        if rows.insert(rec[0].to_string(), vals).is_some() {
            return Err(Error::parse(path, line, format!("duplicate legislator {}", &rec[0])));
        }
    }
    let mut x = DMatrix::zeros(ids.len(), p);
    for (i, id) in ids.iter().enumerate() {
        let row = rows
            .get(id)
            .ok_or_else(|| Error::InvalidData(format!("{}: no covariate row for legislator {id}", path.display())))?;
        for k in 0..p {
            x[(i, k)] = row[k];
        }
    }
    DesignMatrix::from_raw(x, names)
}

#[derive(Debug, Deserialize, Serialize)]
struct AnchorFile {
    anchor_low: serde_json::Value,
    anchor_high: serde_json::Value,
    #[serde(default = "default_anchor_values")]
    anchor_values: [f64; 2],
    sign_legislator: serde_json::Value,
}

fn default_anchor_values() -> [f64; 2] {
    [AnchorSpec::DEFAULT_VALUES.0, AnchorSpec::DEFAULT_VALUES.1]
}

fn id_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Loads an anchor file, resolving legislator ids against the vote matrix.
pub fn load_anchors(path: &Path, votes: &VoteMatrix) -> Result<AnchorSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: AnchorFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let resolve = |role: &str, v: &serde_json::Value| -> Result<usize> {
        let id = id_string(v).ok_or_else(|| Error::parse(path, 1, format!("{role} must be a legislator id")))?;
        votes
            .legislator_index(&id)
            .ok_or_else(|| Error::InvalidData(format!("{}: {role} {id} is not in the vote matrix", path.display())))
    };
    let spec = AnchorSpec {
        anchor_low: resolve("anchor_low", &file.anchor_low)?,
        anchor_high: resolve("anchor_high", &file.anchor_high)?,
        anchor_values: (file.anchor_values[0], file.anchor_values[1]),
        sign_legislator: resolve("sign_legislator", &file.sign_legislator)?,
    };
    validate_anchors(spec, votes)
}

pub fn write_anchors(spec: &AnchorSpec, ids: &[String], path: &Path) -> Result<()> {
    let file = AnchorFile {
        anchor_low: ids[spec.anchor_low].clone().into(),
        anchor_high: ids[spec.anchor_high].clone().into(),
        anchor_values: [spec.anchor_values.0, spec.anchor_values.1],
        sign_legislator: ids[spec.sign_legislator].clone().into(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads a `legislator_id,group` partition aligned with `ids`.
pub fn load_groups(path: &Path, ids: &[String]) -> Result<Vec<String>> {
    let mut rdr = csv_reader(path)?;
    let header = header_of(path, &mut rdr)?;
    if header.len() != 2 || header[0] != "legislator_id" {
        return Err(Error::parse(path, 1, "header must be legislator_id,<group>"));
    }
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        map.insert(rec[0].to_string(), rec[1].to_string());
    }
    ids.iter()
        .map(|id| {
            map.get(id)
                .cloned()
                .ok_or_else(|| Error::InvalidData(format!("{}: no group for legislator {id}", path.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn parses_wide_votes_with_missing() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(&dir, "v.csv", "legislator_id,b1,b2\na,1,0\nb,NA,1\nc,0,0\n");
        let t = write(&dir, "t.csv", "bill_id,gamma\nb1,0\nb2,1\n");
        let (m, g) = load_votes(&v, &t).unwrap();
        assert_eq!(m.n_legislators(), 3);
        assert_eq!(m.n_missing(), 1);
        assert_eq!(m.get(1, 0), Vote::Missing);
        assert_eq!(g.codes(), vec![0, 1]);
    }

    #[test]
    fn long_layout_matches_wide() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(
            &dir,
            "v.csv",
            "legislator_id,bill_id,vote\na,b1,1\na,b2,0\nb,b2,1\nc,b1,0\nc,b2,0\n",
        );
        let t = write(&dir, "t.csv", "bill_id,gamma\nb1,0\nb2,1\n");
        let (m, _) = load_votes(&v, &t).unwrap();
        assert_eq!(m.get(1, 0), Vote::Missing);
        assert_eq!(m.get(0, 0), Vote::Yea);
    }

    #[test]
    fn rejects_bad_votes() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(&dir, "t.csv", "bill_id,gamma\nb1,0\nb2,1\n");
        let bad_code = write(&dir, "v1.csv", "legislator_id,b1,b2\na,1,0\nb,2,1\nc,0,0\n");
        assert!(matches!(load_votes(&bad_code, &t), Err(Error::Parse { line: 3, .. })));
        let empty_row = write(&dir, "v2.csv", "legislator_id,b1,b2\na,1,0\nb,NA,NA\nc,0,0\n");
        assert!(load_votes(&empty_row, &t).is_err());
        let empty_col = write(&dir, "v3.csv", "legislator_id,b1,b2\na,NA,0\nb,NA,1\nc,NA,0\n");
        assert!(load_votes(&empty_col, &t).is_err());
        let ok = write(&dir, "v4.csv", "legislator_id,b1,b2,b3\na,1,0,1\nb,0,1,1\nc,0,0,1\n");
        assert!(load_votes(&ok, &t).is_err(), "three bills but two types");
    }

    #[test]
    fn rejects_single_domain_types() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(&dir, "v.csv", "legislator_id,b1,b2\na,1,0\nb,0,1\nc,0,0\n");
        let t = write(&dir, "t.csv", "bill_id,gamma\nb1,0\nb2,0\n");
        let err = load_votes(&v, &t).unwrap_err();
        assert!(err.to_string().contains("final-passage"));
    }

    #[test]
    fn covariates_are_centered_and_reordered() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x.csv", "legislator_id,age\nc,3\na,1\nb,2\n");
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let x = load_covariates(&p, &ids).unwrap();
        let col: Vec<f64> = x.matrix().column(0).iter().copied().collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        assert_eq!(x.offsets(), &[2.0]);
    }

    #[test]
    fn covariate_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let constant = write(&dir, "x1.csv", "legislator_id,k\na,5\nb,5\nc,5\n");
        assert!(load_covariates(&constant, &ids).unwrap_err().to_string().contains("constant"));
        let missing = write(&dir, "x2.csv", "legislator_id,k,m\na,1,2\nb,NA,3\nc,0,1\n");
        assert!(load_covariates(&missing, &ids).unwrap_err().to_string().contains("missing value"));
        let text = write(&dir, "x3.csv", "legislator_id,k\na,1\nb,x\nc,0\n");
        assert!(load_covariates(&text, &ids).unwrap_err().to_string().contains("non-numeric"));
        let short = write(&dir, "x4.csv", "legislator_id,k\na,1\nb,2\n");
        assert!(load_covariates(&short, &ids).is_err());
    }

    #[test]
    fn centering_is_idempotent() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 2.5, -1.0, 7.0, 2.0, -3.0, 4.4]);
        let mut d = DesignMatrix::from_raw(x, vec!["a".into(), "b".into()]).unwrap();
        let before = d.matrix().clone();
        d.center();
        assert!((d.matrix() - before).amax() <= 1e-12);
    }

    #[test]
    fn anchor_validation() {
        let votes = VoteMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["b1".into(), "b2".into()],
            vec![Vote::Yea, Vote::Nay, Vote::Nay, Vote::Yea, Vote::Yea, Vote::Yea],
        )
        .unwrap();
        let ok = AnchorSpec {
            anchor_low: 0,
            anchor_high: 1,
            anchor_values: (-1.0, 1.0),
            sign_legislator: 1,
        };
        assert_eq!(validate_anchors(ok, &votes).unwrap(), ok);
        let same = AnchorSpec {
            anchor_low: 2,
            anchor_high: 2,
            sign_legislator: 0,
            ..ok
        };
        assert!(validate_anchors(same, &votes).is_err());
        let same_vals = AnchorSpec {
            anchor_values: (0.5, 0.5),
            sign_legislator: 0,
            ..ok
        };
        assert!(validate_anchors(same_vals, &votes).is_err());
        let oob = AnchorSpec { anchor_high: 3, ..ok };
        assert!(validate_anchors(oob, &votes).is_err());
    }

    #[test]
    fn anchors_resolve_numeric_and_string_ids() {
        let dir = tempfile::tempdir().unwrap();
        let votes = VoteMatrix::new(
            vec!["10".into(), "11".into(), "R1".into()],
            vec!["b1".into(), "b2".into()],
            vec![Vote::Yea, Vote::Nay, Vote::Nay, Vote::Yea, Vote::Yea, Vote::Yea],
        )
        .unwrap();
        let p = write(
            &dir,
            "a.json",
            r#"{"anchor_low": 10, "anchor_high": "R1", "anchor_values": [-1, 1], "sign_legislator": "R1"}"#,
        );
        let a = load_anchors(&p, &votes).unwrap();
        assert_eq!((a.anchor_low, a.anchor_high, a.sign_legislator), (0, 2, 2));
    }
}
