//! CSV side files.
//!
//! * raster: `z_re, z_im, component_id` (members only)
//! * orbit: `k, z_re, z_im, diagnostic`
//! * curve: `z_re, z_im, w_re, w_im, residual`

use std::io::Write;

use super::{CurveApprox, OrbitRecord, Raster, Residual};
use crate::error::{Error, Result};

fn io(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

pub fn write_raster_csv<W: Write>(out: W, r: &Raster) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z_re", "z_im", "component_id"]).map_err(io)?;
    for i in 0..r.n_rho {
        for j in 0..r.n_theta {
            let l = r.labels[i * r.n_theta + j];
            if l < 0 {
                continue;
            }
            let z = r.point(i, j);
            w.write_record([format!("{:e}", z.re), format!("{:e}", z.im), l.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_orbit_csv<W: Write>(out: W, o: &OrbitRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "z_re", "z_im", "diagnostic"]).map_err(io)?;
    for (k, (z, d)) in o.points.iter().zip(&o.diagnostic).enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:e}", z.re),
            format!("{:e}", z.im),
            format!("{:.12}", d.re),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `res` must come from the same curve (one entry per node), or be empty.
pub fn write_curve_csv<W: Write>(out: W, c: &CurveApprox, res: &[Residual]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z_re", "z_im", "w_re", "w_im", "residual"])
        .map_err(io)?;
    for i in 0..c.grid.len() {
        let z = c.grid.nodes[i].z;
        let v = c.value(i);
        let e = res.get(i).map(|r| format!("{:e}", r.interpolated)).unwrap_or_default();
        w.write_record([
            format!("{:e}", z.re),
            format!("{:e}", z.im),
            format!("{:e}", v.re),
            format!("{:e}", v.im),
            e,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
