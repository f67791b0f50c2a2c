//! Flat CSV projections of every result kind. Rows follow the order of the
//! result object; numbers use the shortest round-trip decimal form.
//!
//! | file | columns |
//! |------|---------|
//! | shell | `zeta1,zeta2,zeta3,abs_zeta,t,re,im,err` |
//! | convergence | `zeta1,zeta2,zeta3,t,re,im,quadrature_error,distance_to_final,iterations_v,iterations_v_prime` |
//! | completion | `abs_zeta,re,im` |
//! | scan | `re_z,im_z,rho_perp_1,rho_perp_2,indicator,flagged` |
//! | decay | `re_z,im_z,rho_perp_1,rho_perp_2,norm_estimate` |
//! | smatrix | `row,col,l_row,m_row,l_col,m_col,re,im` |
//! | cgo | `index,re_z,im_z,nu1,nu2,nu3,rho_perp_1,rho_perp_2,rho_perp_3,t,residual,krylov_residual,iterations,weighted_norm` |
//! | uniqueness | `zeta1,zeta2,zeta3,abs_zeta,re,im,direct_re,direct_im` |
//! | verify | `criterion,name,pass,detail` |
//!
//! Missing values (failed points) are written as empty fields.

use std::path::Path;

use cgo_core::cgo::ExceptionalScan;
use cgo_core::faddeev::NormSample;
use cgo_core::grid::Frame;
use cgo_core::recon::{Completion, FourierRecovery, ShellRecovery, UniquenessReport};
use cgo_core::scattering::ScatteringMatrixData;
use cgo_core::sphere::harmonic_degree;
use serde::Serialize;

use crate::CliError;

pub const SHELL_HEADER: [&str; 8] = ["zeta1", "zeta2", "zeta3", "abs_zeta", "t", "re", "im", "err"];
pub const DECAY_HEADER: [&str; 5] = ["re_z", "im_z", "rho_perp_1", "rho_perp_2", "norm_estimate"];
pub const SCAN_HEADER: [&str; 6] = ["re_z", "im_z", "rho_perp_1", "rho_perp_2", "indicator", "flagged"];

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_bytes(path, &self.to_bytes())
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn shell_table(shell: &ShellRecovery) -> Table {
    let mut t = Table::new(&SHELL_HEADER);
    for p in &shell.points {
        t.push(vec![
            num(p.zeta[0]),
            num(p.zeta[1]),
            num(p.zeta[2]),
            num(p.abs_zeta),
            num(p.t),
            opt(p.estimate.map(|e| e.re)),
            opt(p.estimate.map(|e| e.im)),
            opt(p.quadrature_error),
        ]);
    }
    t
}

pub fn convergence_table(recoveries: &[FourierRecovery]) -> Table {
    let mut t = Table::new(&[
        "zeta1",
        "zeta2",
        "zeta3",
        "t",
        "re",
        "im",
        "quadrature_error",
        "distance_to_final",
        "iterations_v",
        "iterations_v_prime",
    ]);
    for r in recoveries {
        for row in &r.table {
            t.push(vec![
                num(r.zeta[0]),
                num(r.zeta[1]),
                num(r.zeta[2]),
                num(row.t),
                num(row.value.re),
                num(row.value.im),
                num(row.quadrature_error),
                num(row.distance_to_final),
                row.iterations[0].to_string(),
                row.iterations[1].to_string(),
            ]);
        }
    }
    t
}

pub fn completion_table(c: &Completion) -> Table {
    let mut t = Table::new(&["abs_zeta", "re", "im"]);
    for (r, v) in &c.samples {
        t.push(vec![num(*r), num(v.re), num(v.im)]);
    }
    t
}

/// `rho_perp` as components along the second and third axes of `frame`.
fn perp_coords(frame: &Frame, rp: [f64; 3]) -> [f64; 2] {
    let l = frame.to_local(rp);
    [l[1], l[2]]
}

pub fn scan_table(scan: &ExceptionalScan, frame: &Frame) -> Table {
    let mut t = Table::new(&SCAN_HEADER);
    for p in &scan.points {
        let c = perp_coords(frame, p.rho_perp);
        t.push(vec![
            num(p.z.re),
            num(p.z.im),
            num(c[0]),
            num(c[1]),
            num(p.indicator),
            p.flagged.to_string(),
        ]);
    }
    t
}

pub fn decay_table(samples: &[NormSample], frame: &Frame) -> Table {
    let mut t = Table::new(&DECAY_HEADER);
    for s in samples {
        let c = perp_coords(frame, s.rho_perp);
        t.push(vec![num(s.z.re), num(s.z.im), num(c[0]), num(c[1]), num(s.norm_estimate)]);
    }
    t
}

pub fn smatrix_table(s: &ScatteringMatrixData) -> Table {
    let mut t = Table::new(&["row", "col", "l_row", "m_row", "l_col", "m_col", "re", "im"]);
    let n = s.side();
    let lm = harmonic_degree;
    for i in 0..n {
        for j in 0..n {
            let (li, mi) = lm(i);
            let (lj, mj) = lm(j);
            let e = s.entry(i, j);
            t.push(vec![
                i.to_string(),
                j.to_string(),
                li.to_string(),
                mi.to_string(),
                lj.to_string(),
                mj.to_string(),
                num(e.re),
                num(e.im),
            ]);
        }
    }
    t
}

pub fn uniqueness_table(rep: &UniquenessReport) -> Table {
    let mut t = Table::new(&["zeta1", "zeta2", "zeta3", "abs_zeta", "re", "im", "direct_re", "direct_im"]);
    for c in &rep.comparison {
        t.push(vec![
            num(c.zeta[0]),
            num(c.zeta[1]),
            num(c.zeta[2]),
            num(cgo_core::grid::norm(c.zeta)),
            opt(c.estimate.map(|e| e.re)),
            opt(c.estimate.map(|e| e.im)),
            num(c.direct.re),
            num(c.direct.im),
        ]);
    }
    t
}
