//! Plain-text mesh format.
//!
//! ```text
//! emitpic-mesh 1
//! units m                  # or nm
//! nodes <N>
//! <x> <y> <z>              # N lines
//! cells <M>
//! <n0> <n1> <n2> <n3> [region]   # region 0 = vacuum (default), 1 = metal
//! faces <K>
//! <n0> <n1> <n2> <tag>     # tag 1..5
//! ```
//!
//! Blank lines and `#` comments are ignored. Node indices are zero-based.

use std::io::{BufRead, Write};

use super::{BoundaryTag, Mesh, Region};
use crate::{Error, Result, Vec3};

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty line with comments stripped.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for raw in self.inner.by_ref() {
            self.line += 1;
            let raw = raw?;
            let content = raw.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                return Ok(Some((self.line, content.to_owned())));
            }
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_content()?.ok_or(Error::Parse {
            line: self.line,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (line, content) = self.expect(keyword)?;
        let mut parts = content.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(Error::Parse { line, message: format!("expected `{keyword} <count>`") });
        }
        parse(parts.next(), line, "count")
    }
}

fn parse<T: std::str::FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::Parse { line, message: format!("missing {what}") })?;
    token.parse().map_err(|_| Error::Parse { line, message: format!("invalid {what} `{token}`") })
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut lines = Lines { inner: reader.lines(), line: 0 };

    let (line, magic) = lines.expect("header")?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["emitpic-mesh", "1"] {
        return Err(Error::Parse { line, message: "expected `emitpic-mesh 1` header".into() });
    }
    let (line, units) = lines.expect("units")?;
    let scale = match units.split_whitespace().collect::<Vec<_>>()[..] {
        ["units", "m"] => 1.0,
        ["units", "nm"] => 1e-9,
        _ => return Err(Error::Parse { line, message: "expected `units m` or `units nm`".into() }),
    };

    let n_nodes = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, content) = lines.expect("node")?;
        let mut t = content.split_whitespace();
        let x: f64 = parse(t.next(), line, "x")?;
        let y: f64 = parse(t.next(), line, "y")?;
        let z: f64 = parse(t.next(), line, "z")?;
        if t.next().is_some() {
            return Err(Error::Parse { line, message: "trailing tokens after node".into() });
        }
        nodes.push(Vec3::new(x, y, z) * scale);
    }

    let n_cells = lines.header("cells")?;
    let mut cells = Vec::with_capacity(n_cells);
    let mut regions = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (line, content) = lines.expect("cell")?;
        let mut t = content.split_whitespace();
        let mut cell = [0usize; 4];
        for v in cell.iter_mut() {
            *v = parse(t.next(), line, "node index")?;
            if *v >= n_nodes {
                return Err(Error::Parse { line, message: format!("node index {v} out of range") });
            }
        }
        let region = match t.next() {
            None => Region::Vacuum,
            Some(tok) => {
                let id: u8 = parse(Some(tok), line, "region")?;
                Region::from_id(id).ok_or_else(|| Error::Parse { line, message: format!("unknown region {id}") })?
            }
        };
        cells.push(cell);
        regions.push(region);
    }

    let n_faces = lines.header("faces")?;
    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (line, content) = lines.expect("face")?;
        let mut t = content.split_whitespace();
        let mut face = [0usize; 3];
        for v in face.iter_mut() {
            *v = parse(t.next(), line, "node index")?;
        }
        let id: u8 = parse(t.next(), line, "tag")?;
        let tag = BoundaryTag::from_id(id).ok_or_else(|| Error::Parse { line, message: format!("unknown tag {id}") })?;
        faces.push((face, tag));
    }
    if let Some((line, _)) = lines.next_content()? {
        return Err(Error::Parse { line, message: "unexpected content after faces".into() });
    }

    Mesh::new(nodes, cells, regions, &faces)
}

/// Writes `mesh` in SI units with 17 significant digits, which round-trips
/// every coordinate exactly.
pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "emitpic-mesh 1")?;
    writeln!(w, "units m")?;
    writeln!(w, "nodes {}", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    writeln!(w, "cells {}", mesh.num_cells())?;
    for (c, cell) in mesh.cells().iter().enumerate() {
        writeln!(w, "{} {} {} {} {}", cell[0], cell[1], cell[2], cell[3], mesh.region(c).id())?;
    }
    writeln!(w, "faces {}", mesh.faces().len())?;
    for f in mesh.faces() {
        writeln!(w, "{} {} {} {}", f.nodes[0], f.nodes[1], f.nodes[2], f.tag.id())?;
    }
    Ok(())
}
