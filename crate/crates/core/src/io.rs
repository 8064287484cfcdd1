//! Plain-text and binary exchange formats.
//!
//! Every CSV starts with `# ` comment lines (parameters, units, run metadata)
//! followed by a single column-name row. Binary snapshots are little-endian:
//!
//! ```text
//! u64 n_points | f64 x_max | f64 t | n_points × (f64 re, f64 im)
//! ```

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact::{FieldSample, PhaseConvention, VortexNode};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::params::{classify_region, FloquetParams};

pub const FIELD_MAP_COLUMNS: &str = "x,t,re_psi,im_psi,density,phase,phase_gradient,flow_density";
pub const SNAPSHOT_COLUMNS: &str = "x,re_psi,im_psi";
pub const NODE_COLUMNS: &str = "x,t,charge,n,l,branch";

/// Header lines describing a parameter set and the unit conventions.
pub fn params_header(params: &FloquetParams) -> Vec<String> {
    vec![
        "units: hbar = m = 1, omega = k^2/2, lengths in the same units as 1/k".to_string(),
        format!(
            "g1d = {}, V0 = {}, V1 = {}, EF = {}, k = {}, omega = {}, alpha = {}",
            params.g1d(),
            params.v0(),
            params.v1(),
            params.ef(),
            params.k(),
            params.omega(),
            i64::from(params.alpha())
        ),
        format!(
            "atoms_per_well = {}, critical_depth = {}, region = {}",
            params.atoms_per_well(),
            params.critical_depth(),
            classify_region(params)
        ),
    ]
}

fn write_header<W: Write>(w: &mut W, header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Writes a field map. Undefined phases and divergent gradients are written
/// as the literal tags `undefined` and `divergent`.
pub fn write_field_map<W: Write>(
    mut w: W,
    rows: &[FieldSample],
    convention: PhaseConvention,
    header: &[String],
) -> std::io::Result<()> {
    write_header(&mut w, header)?;
    let conv = match convention {
        PhaseConvention::Full => "full (includes -EF t)",
        PhaseConvention::FloquetFactorRemoved => "exp(-i EF t) factor removed",
    };
    writeln!(w, "# phase convention: {conv}")?;
    writeln!(w, "{FIELD_MAP_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.x, r.t, r.psi.re, r.psi.im, r.density, r.phase, r.phase_gradient, r.flow_density
        )?;
    }
    Ok(())
}

pub fn write_nodes<W: Write>(mut w: W, nodes: &[VortexNode], header: &[String]) -> std::io::Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "{NODE_COLUMNS}")?;
    for node in nodes {
        match node.index {
            Some(ix) => writeln!(
                w,
                "{},{},{},{},{},{}",
                node.x,
                node.t,
                node.charge,
                ix.n,
                ix.l,
                i64::from(ix.branch)
            )?,
            None => writeln!(w, "{},{},{},,,", node.x, node.t, node.charge)?,
        }
    }
    Ok(())
}

/// Writes a snapshot as CSV. The grid and time are recorded in `key = value`
/// header lines so that [`read_snapshot_csv`] can restore them.
pub fn write_snapshot_csv<W: Write>(mut w: W, field: &WaveField, header: &[String]) -> std::io::Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "# n_points = {}", field.grid.n_points())?;
    writeln!(w, "# x_max = {}", field.grid.x_max())?;
    writeln!(w, "# t = {}", field.t)?;
    writeln!(w, "{SNAPSHOT_COLUMNS}")?;
    for (i, z) in field.values.iter().enumerate() {
        writeln!(w, "{},{},{}", field.grid.x(i), z.re, z.im)?;
    }
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from {s:?}")))
}

pub fn read_snapshot_csv<R: BufRead>(r: R) -> Result<WaveField> {
    let mut x_max = None;
    let mut t = None;
    let mut n_points = None;
    let mut seen_columns = false;
    let mut values = Vec::new();
    for line in r.lines() {
        let line = line?;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "x_max" => x_max = Some(parse_f64(value, "x_max")?),
                    "t" => t = Some(parse_f64(value, "t")?),
                    "n_points" => n_points = Some(parse_f64(value, "n_points")? as usize),
                    _ => {}
                }
            }
            continue;
        }
        if !seen_columns {
            if line.trim() != SNAPSHOT_COLUMNS {
                return Err(Error::Format(format!("expected column row {SNAPSHOT_COLUMNS:?}, got {line:?}")));
            }
            seen_columns = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("expected 3 columns, got {line:?}")));
        }
        values.push(Complex64::new(parse_f64(cols[1], "re_psi")?, parse_f64(cols[2], "im_psi")?));
    }
    let (Some(x_max), Some(t)) = (x_max, t) else {
        return Err(Error::Format("snapshot header lacks x_max or t".into()));
    };
    if let Some(n) = n_points {
        if n != values.len() {
            return Err(Error::Format(format!("header says {n} points, found {}", values.len())));
        }
    }
    let grid = Grid::new(values.len(), x_max)?;
    WaveField::new(grid, t, values)
}

pub fn write_snapshot_binary<W: Write>(mut w: W, field: &WaveField) -> std::io::Result<()> {
    w.write_all(&(field.grid.n_points() as u64).to_le_bytes())?;
    w.write_all(&field.grid.x_max().to_le_bytes())?;
    w.write_all(&field.t.to_le_bytes())?;
    for z in &field.values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot_binary<R: Read>(mut r: R) -> Result<WaveField> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)
            .map_err(|e| Error::Format(format!("truncated binary snapshot: {e}")))?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let x_max = f64::from_le_bytes(next(&mut r)?);
    let t = f64::from_le_bytes(next(&mut r)?);
    let grid = Grid::new(n, x_max)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let re = f64::from_le_bytes(next(&mut r)?);
        let im = f64::from_le_bytes(next(&mut r)?);
        values.push(Complex64::new(re, im));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after payload", rest.len())));
    }
    WaveField::new(grid, t, values)
}
