//! CSV and JSON serializers plus all-or-nothing output directories.
//!
//! Scores are written with 17 significant digits; every other float uses the
//! shortest representation that parses back to the same value.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::perturbation::{ExpansionReport, ExpansionRow};
use crate::rank::{DivergenceReport, Ranking, SweepPoint, TauMatrix};
use crate::spectral::CentralityVector;
use crate::walk::WalkComparison;

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Inconsistent(format!("csv: {other:?}")),
    }
}

fn table<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn score(x: f64) -> String {
    format!("{x:.16e}")
}

/// `node_label, score, rank` with competition ranks; `labels[k]` names entry `k`.
pub fn centrality_csv(labels: &[&str], v: &CentralityVector) -> Result<Vec<u8>> {
    if labels.len() != v.len() {
        return Err(Error::DomainMismatch { left: labels.len(), right: v.len() });
    }
    let rank = Ranking::from_scores(&v.scores).competition_ranks();
    table(
        &["node_label", "score", "rank"],
        (0..v.len()).map(|k| [labels[k].to_owned(), score(v.scores[k]), rank[k].to_string()]),
    )
}

/// One row per node, one competition-rank column per measure.
pub fn rank_table_csv(labels: &[&str], vectors: &[&CentralityVector]) -> Result<Vec<u8>> {
    if let Some(v) = vectors.iter().find(|v| v.len() != labels.len()) {
        return Err(Error::DomainMismatch { left: labels.len(), right: v.len() });
    }
    let ranks: Vec<Vec<usize>> =
        vectors.iter().map(|v| Ranking::from_scores(&v.scores).competition_ranks()).collect();
    let mut header = vec!["node_label"];
    header.extend(vectors.iter().map(|v| v.measure.name()));
    table(
        &header,
        (0..labels.len()).map(|k| {
            std::iter::once(labels[k].to_owned()).chain(ranks.iter().map(|r| r[k].to_string())).collect::<Vec<_>>()
        }),
    )
}

/// `node_label, part` for every node.
pub fn partition_csv(labels: &[String], d: &Decomposition) -> Result<Vec<u8>> {
    table(&["node_label", "part"], labels.iter().zip(&d.part).map(|(l, p)| [l.clone(), p.as_str().to_owned()]))
}

pub fn tau_matrix_csv(m: &TauMatrix) -> Result<Vec<u8>> {
    let mut header = vec!["measure"];
    header.extend(m.measures.iter().map(String::as_str));
    table(
        &header,
        m.measures.iter().zip(&m.values).map(|(name, row)| {
            std::iter::once(name.clone()).chain(row.iter().map(|&v| num(v))).collect::<Vec<_>>()
        }),
    )
}

pub fn sweep_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    table(&["c", "tau"], points.iter().map(|p| [num(p.c), num(p.tau)]))
}

pub fn divergence_csv(labels: &[&str], report: &DivergenceReport) -> Result<Vec<u8>> {
    table(
        &["node_label", "rank_pr", "rank_qs", "delta"],
        report.rows.iter().map(|r| {
            [labels[r.node].to_owned(), r.rank_pr.to_string(), r.rank_qs.to_string(), r.delta.to_string()]
        }),
    )
}

pub fn expansion_csv(report: &ExpansionReport) -> Result<Vec<u8>> {
    let mut header = vec!["eps"];
    header.extend(ExpansionRow::NAMES);
    table(
        &header,
        report.rows.iter().map(|r| {
            std::iter::once(num(r.eps)).chain(r.values().iter().map(|&v| num(v))).collect::<Vec<_>>()
        }),
    )
}

/// `i, j, N, analytic, estimate, std_error, z_score`, with node labels for `i` and `j`.
pub fn walk_csv(labels: &[&str], rows: &[WalkComparison]) -> Result<Vec<u8>> {
    table(
        &["i", "j", "N", "analytic", "estimate", "std_error", "z_score"],
        rows.iter().map(|r| {
            [
                labels[r.i].to_owned(),
                labels[r.j].to_owned(),
                r.horizon.to_string(),
                num(r.analytic),
                num(r.estimate),
                num(r.std_error),
                num(r.z_score),
            ]
        }),
    )
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Files destined for one directory, written together or not at all.
#[derive(Debug, Default)]
pub struct OutputBatch {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: Vec<u8>) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file to a temporary sibling and renames it into place.
    /// On failure the files already renamed are removed again.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(contents)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut done: Vec<PathBuf> = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            if let Err(e) = tmp.persist(&target) {
                for p in &done {
                    if let Err(err) = fs::remove_file(p) {
                        warn!("could not remove {}: {err}", p.display());
                    }
                }
                return Err(Error::Io(e.error));
            }
            done.push(target);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Measure;

    #[test]
    fn centrality_rows() {
        let v = CentralityVector::normalized(Measure::PiHat, vec![3.0, 4.0]).unwrap();
        let text = String::from_utf8(centrality_csv(&["a", "b,c"], &v).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node_label,score,rank");
        assert_eq!(lines[1], "a,4.2857142857142855e-1,2");
        assert_eq!(lines[2], "\"b,c\",5.7142857142857140e-1,1");
        let back: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 3.0 / 7.0);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 0.85, 1e-5, 1.7763568394002505e-15, 3.0 / 7.0, -2.5e20, 12345.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-5), "1e-5");
        assert_eq!(num(0.85), "0.85");
    }

    #[test]
    fn batch_commits_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = OutputBatch::new();
        b.add("x.csv", b"1\n".to_vec());
        b.add("y.json", b"{}\n".to_vec());
        let written = b.commit(dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read(dir.path().join("x.csv")).unwrap(), b"1\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn failed_batch_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("blocked")).unwrap();
        let mut b = OutputBatch::new();
        b.add("ok.csv", b"1\n".to_vec());
        b.add("blocked", b"2\n".to_vec());
        assert!(b.commit(dir.path()).is_err());
        let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(left, vec![std::ffi::OsString::from("blocked")]);
    }
}
