use std::fmt::Write as _;
use std::sync::Arc;

use super::BrokenField;
use crate::error::{FieldError, ParseError};
use crate::mesh::Mesh;

/// `field p arity ncells` followed by one row of coefficients per cell.
pub fn write_field(field: &BrokenField) -> String {
    let mut out = String::new();
    let ncells = field.mesh().num_cells();
    writeln!(out, "field {} {} {}", field.degree(), field.components(), ncells).unwrap();
    for k in 0..ncells {
        let row: Vec<String> = field.cell_block(k).iter().map(|c| format!("{c:.16e}")).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

pub fn read_field(mesh: &Arc<Mesh>, text: &str) -> Result<BrokenField, FieldError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(ParseError::UnexpectedEof { expected: "field header" })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let bad = |message: &str| ParseError::Syntax { line, message: message.to_string() };
    if parts.len() != 4 || parts[0] != "field" {
        return Err(bad("expected `field p arity ncells`").into());
    }
    let nums: Result<Vec<usize>, _> = parts[1..].iter().map(|s| s.parse()).collect();
    let nums = nums.map_err(|_| bad("malformed header counts"))?;
    let (degree, components, ncells) = (nums[0], nums[1], nums[2]);
    if !(components == 1 || components == 2) || degree > super::basis::MAX_DEGREE {
        return Err(bad("unsupported degree or arity").into());
    }
    if ncells != mesh.num_cells() {
        return Err(FieldError::CellCountMismatch { expected: mesh.num_cells(), found: ncells });
    }
    let width = components * super::basis::dim(degree);
    let mut coeffs = Vec::with_capacity(width * ncells);
    for _ in 0..ncells {
        let (line, row) = lines.next().ok_or(ParseError::UnexpectedEof { expected: "coefficient row" })?;
        let vals: Result<Vec<f64>, _> = row.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == width => coeffs.extend(v),
            _ => return Err(ParseError::Syntax { line, message: format!("expected {width} coefficients") }.into()),
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(ParseError::TrailingData { line }.into());
    }
    Ok(BrokenField::from_coefficients(mesh, degree, components, coeffs))
}
