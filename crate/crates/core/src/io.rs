//! Text formats: one transaction per line, or one `u: v1 v2 ...` incidence
//! line per vertex. `#` lines and blank lines are skipped.

use std::collections::HashSet;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::graphs::IncidenceStream;
use crate::sets::{BSet, Item};

/// Streaming reader of transactions.
pub struct TransactionReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    b_max: Option<usize>,
}

/// Reads transactions lazily; lines with more than `b_max` distinct items are
/// errors.
pub fn read_transactions<R: BufRead>(reader: R, b_max: Option<usize>) -> TransactionReader<R> {
    TransactionReader {
        lines: reader.lines(),
        line: 0,
        b_max,
    }
}

impl<R: BufRead> Iterator for TransactionReader<R> {
    type Item = Result<BSet>;

    fn next(&mut self) -> Option<Result<BSet>> {
        loop {
            let raw = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if skip(&raw) {
                continue;
            }
            return Some(parse_set(&raw, 0, self.line, self.b_max));
        }
    }
}

fn skip(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with('#')
}

fn parse_items(s: &str, col0: usize, line: usize) -> Result<Vec<Item>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for tok in s.split_whitespace() {
        let at = pos + s[pos..].find(tok).expect("token comes from the line");
        pos = at + tok.len();
        let v = tok.parse::<Item>().map_err(|_| Error::Parse {
            line,
            column: col0 + s[..at].chars().count() + 1,
            token: tok.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn parse_set(s: &str, col0: usize, line: usize, b_max: Option<usize>) -> Result<BSet> {
    let set = BSet::from_unsorted(parse_items(s, col0, line)?)?;
    match b_max {
        Some(max) if set.len() > max => Err(Error::Oversize {
            line,
            size: set.len(),
            max,
        }),
        _ => Ok(set),
    }
}

/// Reads a whole incidence file. Lists longer than `max_degree` are errors.
pub fn read_incidence<R: BufRead>(reader: R, max_degree: Option<usize>) -> Result<IncidenceStream> {
    let mut seen = HashSet::new();
    let mut lists = Vec::new();
    for (i, raw) in reader.lines().enumerate() {
        let raw = raw?;
        let line = i + 1;
        if skip(&raw) {
            continue;
        }
        let Some((head, rest)) = raw.split_once(':') else {
            return Err(Error::Parse {
                line,
                column: raw.len() + 1,
                token: "missing ':'".into(),
            });
        };
        let u = match parse_items(head, 0, line)?.as_slice() {
            [u] => *u,
            _ => {
                return Err(Error::Parse {
                    line,
                    column: 1,
                    token: head.trim().to_string(),
                })
            }
        };
        if !seen.insert(u) {
            return Err(Error::DuplicateVertex { line, vertex: u });
        }
        let nbrs = parse_set(rest, head.chars().count() + 1, line, max_degree)?;
        if nbrs.contains(u) {
            return Err(Error::SelfLoop { line, vertex: u });
        }
        lists.push((u, nbrs.elements().to_vec()));
    }
    IncidenceStream::new(lists, max_degree)
}
