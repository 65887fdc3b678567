//! Plain-text exports: layout and user tables, complex matrices as CSV and
//! per-beam debug dumps. Floats are written in shortest round-trip form.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::channel::{BeamLayout, UserSet};
use crate::error::{Error, Result};
use crate::linalg::EigDecomposition;
use crate::robust::BeamDiagnostics;
use crate::scalar::{CMat, Cx, Real};

/// `beam,color,lat_deg,lon_deg` per beam centre.
pub fn write_layout_table<W: Write>(mut out: W, layout: &BeamLayout) -> Result<()> {
    writeln!(out, "beam,color,lat_deg,lon_deg")?;
    for (k, c) in layout.beam_centers.iter().enumerate() {
        writeln!(out, "{k},{},{},{}", layout.color_of_beam[k], c.lat_deg, c.lon_deg)?;
    }
    Ok(())
}

/// `beam,user,lat_deg,lon_deg` per user.
pub fn write_user_table<W: Write>(mut out: W, users: &UserSet) -> Result<()> {
    writeln!(out, "beam,user,lat_deg,lon_deg")?;
    for (k, q, p) in users.iter() {
        writeln!(out, "{k},{q},{},{}", p.lat_deg, p.lon_deg)?;
    }
    Ok(())
}

/// One line per matrix row: `re,im` pairs for each column.
pub fn write_complex_csv<T: Real, W: Write>(mut out: W, m: &CMat<T>) -> Result<()> {
    writeln!(out, "# rows={} cols={}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_complex_csv`]; `#` lines are skipped.
pub fn read_complex_csv<T: Real, R: BufRead>(input: R) -> Result<CMat<T>> {
    let mut rows: Vec<Vec<Cx<T>>> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let values = parsed.map_err(|e| Error::Parse { line: idx + 1, reason: e.to_string() })?;
        if values.len() % 2 != 0 {
            return Err(Error::Parse { line: idx + 1, reason: "odd number of fields".into() });
        }
        rows.push(values.chunks(2).map(|p| Cx::new(T::lit(p[0]), T::lit(p[1]))).collect());
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse { line: 0, reason: "ragged rows".into() });
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `beam,index,eigenvalue` for each per-beam spectrum.
pub fn write_spectra<T: Real, W: Write>(mut out: W, spectra: &[EigDecomposition<T>]) -> Result<()> {
    writeln!(out, "beam,index,eigenvalue")?;
    for (k, e) in spectra.iter().enumerate() {
        for (i, v) in e.values.iter().enumerate() {
            writeln!(out, "{k},{i},{v}")?;
        }
    }
    Ok(())
}

pub const DIAGNOSTICS_CSV_HEADER: &str =
    "beam,epsilon,nu,inter_zeroed_pairs,intra_zeroed_pairs,intra_fallback,inter_rotation_max,intra_correction_max";

pub fn write_robust_diagnostics<T: Real, W: Write>(mut out: W, diags: &[BeamDiagnostics<T>]) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_CSV_HEADER}")?;
    for d in diags {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.beam,
            d.epsilon,
            d.nu,
            d.inter_zeroed_pairs,
            d.intra_zeroed_pairs,
            d.intra_fallback,
            d.inter_rotation_max,
            d.intra_correction_max
        )?;
    }
    Ok(())
}

/// `beam,g,f,value` for the nonzero entries of each per-beam coupler.
pub fn write_couplers<T: Real, W: Write>(mut out: W, couplers: &[(usize, DMatrix<T>)]) -> Result<()> {
    writeln!(out, "beam,g,f,value")?;
    for (beam, d) in couplers {
        for g in 0..d.nrows() {
            for f in 0..d.ncols() {
                if d[(g, f)] != T::zero() {
                    writeln!(out, "{beam},{g},{f},{}", d[(g, f)])?;
                }
            }
        }
    }
    Ok(())
}
