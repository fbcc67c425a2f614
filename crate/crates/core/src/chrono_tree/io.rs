//! JSONL serialization: a `# schema=1 ...` header line, then one
//! `{"label": [...], "alpha": .., "omega": ..}` record per vertex in
//! lexicographic label order. `omega` may be the string `"inf"`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ChronologicalTree, TreeError, UlamLabel};
use crate::levy_kernel::Level;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub label: UlamLabel,
    pub alpha: f64,
    pub omega: Level,
}

/// Writes the tree, optionally preceded by a comment header.
pub fn write_jsonl<W: Write>(tree: &ChronologicalTree, header: Option<&str>, out: &mut W) -> io::Result<()> {
    if let Some(h) = header {
        writeln!(out, "# schema=1 {h}")?;
    }
    for (label, alpha, omega) in tree.vertices() {
        let rec = VertexRecord {
            label,
            alpha,
            omega: Level(omega),
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one tree; blank lines and `#` comments are skipped. Every invariant
/// is checked and the first violation reported.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<ChronologicalTree, TreeError> {
    let mut vertices = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| TreeError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: VertexRecord = serde_json::from_str(trimmed).map_err(|e| TreeError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        vertices.push((rec.label, rec.alpha, rec.omega.0));
    }
    ChronologicalTree::from_vertices(vertices)
}
