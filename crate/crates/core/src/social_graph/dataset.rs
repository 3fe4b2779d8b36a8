//! CSV ingestion and serialization of graph + upload datasets.
//!
//! Edge file: `node_a,node_b` per row. Upload file: `node_id,m1,...,mN` per
//! row. A header row is optional in both: a first row whose leading field is
//! not an integer is skipped. Original identifiers are mapped to dense ids in
//! sorted order (numeric when every identifier is an integer), so a dataset
//! written by [`write_dataset`] loads back unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use super::{NodeId, SocialGraph, UploadBehaviour};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Reject edges whose endpoints have no row in the upload file instead of
    /// giving them all-zero behaviour.
    pub strict_nodes: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub nodes: usize,
    pub edges: usize,
    pub duplicate_edges: usize,
    /// Original ids that appear only in the edge file and were given zero counts.
    pub missing_uploads: Vec<String>,
    pub months: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: SocialGraph,
    /// Indexed by dense node id.
    pub behaviours: Vec<UploadBehaviour>,
    /// Original identifier of each dense node id.
    pub original_ids: Vec<String>,
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(source: impl Read) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(Row {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    if rows
        .first()
        .is_some_and(|r| r.fields[0].parse::<i64>().is_err())
    {
        rows.remove(0);
    }
    Ok(rows)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_id(line: usize, id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(parse_err(line, "empty node id"));
    }
    if id.parse::<i64>().is_err() {
        return Err(parse_err(line, format!("node id `{id}` is not an integer")));
    }
    Ok(())
}

/// Loads a graph and its upload behaviours from the two CSV streams.
pub fn load_dataset(
    edges_source: impl Read,
    uploads_source: impl Read,
    options: &LoadOptions,
) -> Result<(Dataset, LoadReport)> {
    let mut counts: BTreeMap<String, (usize, Vec<u32>)> = BTreeMap::new();
    let mut months = None;
    for row in read_rows(uploads_source)? {
        check_id(row.line, &row.fields[0])?;
        let n = row.fields.len() - 1;
        if n == 0 {
            return Err(parse_err(row.line, "upload row has no monthly counts"));
        }
        match months {
            None => months = Some(n),
            Some(m) if m != n => {
                return Err(parse_err(row.line, format!("expected {m} monthly counts, found {n}")))
            }
            _ => {}
        }
        let values = row.fields[1..]
            .iter()
            .map(|f| {
                f.parse::<u32>()
                    .map_err(|_| parse_err(row.line, format!("invalid upload count `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if counts.insert(row.fields[0].clone(), (row.line, values)).is_some() {
            return Err(parse_err(row.line, format!("duplicate upload row for node {}", row.fields[0])));
        }
    }
    let months = months.unwrap_or(0);

    let mut raw_edges = Vec::new();
    for row in read_rows(edges_source)? {
        if row.fields.len() != 2 {
            return Err(parse_err(row.line, format!("expected 2 fields, found {}", row.fields.len())));
        }
        let (a, b) = (&row.fields[0], &row.fields[1]);
        check_id(row.line, a)?;
        check_id(row.line, b)?;
        if a == b {
            return Err(parse_err(row.line, format!("self-loop on node {a}")));
        }
        if options.strict_nodes {
            for x in [a, b] {
                if !counts.contains_key(x) {
                    return Err(Error::DanglingEdge {
                        line: row.line,
                        node: x.clone(),
                    });
                }
            }
        }
        raw_edges.push((a.clone(), b.clone()));
    }

    let mut ids: BTreeSet<&String> = counts.keys().collect();
    for (a, b) in &raw_edges {
        ids.insert(a);
        ids.insert(b);
    }
    let mut ids: Vec<String> = ids.into_iter().cloned().collect();
    ids.sort_by_key(|s| s.parse::<i64>().unwrap_or(i64::MAX));
    let dense: BTreeMap<&str, NodeId> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), NodeId(i as u32)))
        .collect();

    let mut seen = BTreeSet::new();
    let mut duplicate_edges = 0;
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (a, b) in &raw_edges {
        let (x, y) = (dense[a.as_str()], dense[b.as_str()]);
        let key = (x.min(y), x.max(y));
        if !seen.insert(key) {
            duplicate_edges += 1;
            continue;
        }
        edges.push(key);
    }
    let graph = SocialGraph::from_edges(ids.len(), edges)?;

    let mut missing = Vec::new();
    let behaviours = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let counts = match counts.get(id) {
                Some((_, c)) => c.clone(),
                None => {
                    missing.push(id.clone());
                    vec![0; months]
                }
            };
            UploadBehaviour::new(NodeId(i as u32), counts)
        })
        .collect();

    let report = LoadReport {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        duplicate_edges,
        missing_uploads: missing,
        months,
    };
    Ok((
        Dataset {
            graph,
            behaviours,
            original_ids: ids,
        },
        report,
    ))
}

/// Writes the dataset as an edge CSV and an upload CSV with dense ids and
/// sorted rows. No header rows are emitted.
pub fn write_dataset(
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    mut edges_sink: impl Write,
    mut uploads_sink: impl Write,
) -> Result<()> {
    for (a, b) in graph.edges() {
        writeln!(edges_sink, "{a},{b}")?;
    }
    let mut sorted: Vec<&UploadBehaviour> = behaviours.iter().collect();
    sorted.sort_by_key(|b| b.node);
    for b in sorted {
        write!(uploads_sink, "{}", b.node)?;
        for c in &b.monthly_counts {
            write!(uploads_sink, ",{c}")?;
        }
        writeln!(uploads_sink)?;
    }
    edges_sink.flush()?;
    uploads_sink.flush()?;
    Ok(())
}
