use std::fmt::Write as _;

use super::{Mesh, Point};
use crate::error::{MeshError, ParseError};

/// Reads the plain-text mesh format:
///
/// ```text
/// vertices N
/// x y            (N lines)
/// cells M
/// i j k          (M lines, 0-based, counterclockwise)
/// ```
pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let nv = header(&mut lines, "vertices")?;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines.next().ok_or(ParseError::UnexpectedEof { expected: "vertex" })?;
        let v: Vec<f64> = fields(line, text, 2)?;
        vertices.push([v[0], v[1]]);
    }
    let nc = header(&mut lines, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, text) = lines.next().ok_or(ParseError::UnexpectedEof { expected: "cell" })?;
        let c: Vec<usize> = fields(line, text, 3)?;
        cells.push([c[0], c[1], c[2]]);
    }
    if let Some((line, _)) = lines.next() {
        return Err(ParseError::TrailingData { line }.into());
    }
    Mesh::new(vertices, cells)
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, keyword: &'static str) -> Result<usize, ParseError> {
    let (line, text) = lines.next().ok_or(ParseError::UnexpectedEof { expected: keyword })?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(keyword) {
        return Err(ParseError::Syntax { line, message: format!("expected `{keyword} <count>`") });
    }
    let count = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ParseError::Syntax { line, message: format!("malformed {keyword} count") })?;
    if parts.next().is_some() {
        return Err(ParseError::Syntax { line, message: "unexpected token after count".into() });
    }
    Ok(count)
}

fn fields<T: std::str::FromStr>(line: usize, text: &str, n: usize) -> Result<Vec<T>, ParseError> {
    let parsed: Result<Vec<T>, _> = text.split_whitespace().map(str::parse).collect();
    match parsed {
        Ok(v) if v.len() == n => Ok(v),
        Ok(v) => Err(ParseError::Syntax { line, message: format!("expected {n} values, found {}", v.len()) }),
        Err(_) => Err(ParseError::Syntax { line, message: "unparsable number".into() }),
    }
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    writeln!(out, "vertices {}", mesh.num_vertices()).unwrap();
    for x in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e}", x[0], x[1]).unwrap();
    }
    writeln!(out, "cells {}", mesh.num_cells()).unwrap();
    for c in mesh.cells() {
        writeln!(out, "{} {} {}", c[0], c[1], c[2]).unwrap();
    }
    out
}
