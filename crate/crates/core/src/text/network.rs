use std::fmt::Write;

use crate::error::{Error, Result};
use crate::function::fmt_num;
use crate::model::SocialNetwork;

fn rows(src: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    src.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        if l.trim().is_empty() || l.starts_with('#') || l.starts_with('%') {
            None
        } else {
            Some((i + 1, l.split('\t').collect()))
        }
    })
}

fn weight(line: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Network(format!("line {line}: bad number `{s}`")))
}

/// Reads `V vertex [pred value]` and `E src dst pred weight` rows. When any
/// V row is present the vertex set is closed and edges must stay inside it.
pub fn parse_network(src: &str) -> Result<SocialNetwork> {
    let mut sn = SocialNetwork::new();
    let mut edges = Vec::new();
    let mut closed = false;
    for (line, cols) in rows(src) {
        match cols.as_slice() {
            ["V", v] => {
                closed = true;
                sn.add_vertex(v);
            }
            ["V", v, pred, value] => {
                closed = true;
                let w = weight(line, value)?;
                sn.add_label(v, pred, w).map_err(|e| Error::Network(format!("line {line}: {e}")))?;
            }
            ["E", s, d, pred, w] => edges.push((line, *s, *d, *pred, weight(line, w)?)),
            _ => return Err(Error::Network(format!("line {line}: expected a V or E row"))),
        }
    }
    for (line, s, d, pred, w) in edges {
        if !closed {
            sn.add_vertex(s);
            sn.add_vertex(d);
        }
        sn.add_edge(s, d, pred, w).map_err(|e| Error::Network(format!("line {line}: {e}")))?;
    }
    Ok(sn)
}

/// Writes every vertex (bare when unlabelled), then labels, then edges.
pub fn write_network(sn: &SocialNetwork) -> String {
    let mut out = String::new();
    let labelled: std::collections::HashSet<&str> = sn.labels.iter().map(|l| l.vertex.as_str()).collect();
    for v in sn.vertices() {
        if !labelled.contains(v.as_str()) {
            writeln!(out, "V\t{v}").unwrap();
        }
    }
    for l in &sn.labels {
        writeln!(out, "V\t{}\t{}\t{}", l.vertex, l.pred, fmt_num(l.value)).unwrap();
    }
    for e in &sn.edges {
        writeln!(out, "E\t{}\t{}\t{}\t{}", e.src, e.dst, e.pred, fmt_num(e.weight)).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Like {
    pub user: String,
    pub page: String,
    pub category: String,
}

pub fn parse_likes(src: &str) -> Result<Vec<Like>> {
    rows(src)
        .map(|(line, cols)| match cols.as_slice() {
            [u, p, c] => Ok(Like { user: u.to_string(), page: p.to_string(), category: c.trim().to_string() }),
            _ => Err(Error::Network(format!("line {line}: expected user, page and category"))),
        })
        .collect()
}

pub fn write_likes(likes: &[Like]) -> String {
    likes.iter().map(|l| format!("{}\t{}\t{}\n", l.user, l.page, l.category)).collect()
}
