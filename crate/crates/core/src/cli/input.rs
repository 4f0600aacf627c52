//! Row parsing and block assembly for `analyze`.

use std::collections::VecDeque;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Block, BlockDesign, Group};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// JSON lines if the first non-blank byte is `{`, CSV otherwise.
    #[default]
    Auto,
    Csv,
    Jsonl,
}

/// One observation in arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Row {
    pub line: u64,
    pub group: Group,
    pub y: u8,
}

fn parse_group(raw: &str, line: u64) -> Result<Group> {
    match raw.trim() {
        "a" | "A" => Ok(Group::A),
        "b" | "B" => Ok(Group::B),
        other => Err(Error::Input {
            line,
            message: format!("unknown group '{other}'"),
        }),
    }
}

fn parse_outcome(raw: &str, line: u64) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Input {
            line,
            message: format!("outcome must be 0 or 1, got '{other}'"),
        }),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    g: String,
    y: serde_json::Value,
}

/// Streams rows from `reader`. Errors carry the 1-based input line.
pub fn read_rows<'a, R: BufRead + 'a>(
    mut reader: R,
    format: InputFormat,
) -> Result<Box<dyn Iterator<Item = Result<Row>> + 'a>> {
    let format = match format {
        InputFormat::Auto => {
            let head = reader.fill_buf().map_err(|e| Error::io("<input>", e))?;
            match head.iter().find(|b| !b.is_ascii_whitespace()) {
                Some(b'{') => InputFormat::Jsonl,
                _ => InputFormat::Csv,
            }
        }
        f => f,
    };
    Ok(match format {
        InputFormat::Jsonl => Box::new(jsonl_rows(reader)),
        _ => Box::new(csv_rows(reader)),
    })
}

fn csv_rows<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Row>> {
    let rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut first = true;
    rdr.into_records().filter_map(move |rec| {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Some(Err(Error::Input {
                    line,
                    message: format!("malformed CSV: {e}"),
                }));
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let is_first = std::mem::replace(&mut first, false);
        if is_first && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("group")) {
            return None;
        }
        if rec.len() != 2 {
            return Some(Err(Error::Input {
                line,
                message: format!("expected 2 fields 'group,outcome', got {}", rec.len()),
            }));
        }
        Some(parse_group(&rec[0], line).and_then(|group| {
            Ok(Row {
                line,
                group,
                y: parse_outcome(&rec[1], line)?,
            })
        }))
    })
}

fn jsonl_rows<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Row>> {
    reader.lines().zip(1u64..).filter_map(|(text, line)| {
        let text = match text {
            Ok(t) => t,
            Err(e) => return Some(Err(Error::Input { line, message: e.to_string() })),
        };
        if text.trim().is_empty() {
            return None;
        }
        let parsed: JsonRow = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                return Some(Err(Error::Input {
                    line,
                    message: format!("malformed JSON row: {e}"),
                }))
            }
        };
        Some(parse_group(&parsed.g, line).and_then(|group| {
            Ok(Row {
                line,
                group,
                y: parse_outcome(&parsed.y.to_string(), line)?,
            })
        }))
    })
}

/// Groups interleaved rows into blocks: block `j` takes the `j`-th run of
/// `n_a` group-a rows and the `j`-th run of `n_b` group-b rows.
#[derive(Debug, Clone)]
pub struct BlockAssembler {
    design: BlockDesign,
    lookahead: usize,
    pending_a: VecDeque<u8>,
    pending_b: VecDeque<u8>,
}

impl BlockAssembler {
    /// `lookahead` bounds how many rows may wait for a block to complete.
    pub fn new(design: BlockDesign, lookahead: usize) -> Result<Self> {
        if lookahead < design.n() as usize {
            return Err(Error::Config(format!(
                "lookahead {lookahead} is smaller than the block size {}",
                design.n()
            )));
        }
        Ok(Self {
            design,
            lookahead,
            pending_a: VecDeque::new(),
            pending_b: VecDeque::new(),
        })
    }

    pub fn push(&mut self, row: Row) -> Result<Option<Block>> {
        match row.group {
            Group::A => self.pending_a.push_back(row.y),
            Group::B => self.pending_b.push_back(row.y),
        }
        let (n_a, n_b) = (self.design.n_a() as usize, self.design.n_b() as usize);
        if self.pending_a.len() >= n_a && self.pending_b.len() >= n_b {
            let ys_a = self.pending_a.drain(..n_a).collect();
            let ys_b = self.pending_b.drain(..n_b).collect();
            return Block::new(ys_a, ys_b).map(Some);
        }
        if self.pending_a.len() + self.pending_b.len() > self.lookahead {
            return Err(Error::Input {
                line: row.line,
                message: format!(
                    "no block completes within the lookahead of {} rows ({} group-a, {} group-b pending)",
                    self.lookahead,
                    self.pending_a.len(),
                    self.pending_b.len()
                ),
            });
        }
        Ok(None)
    }

    /// Rows waiting for an incomplete block, as `(group a, group b)`.
    pub fn pending(&self) -> (usize, usize) {
        (self.pending_a.len(), self.pending_b.len())
    }
}
