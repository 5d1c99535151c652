//! CSV emission. Floats use 17 significant digits in scientific notation, so
//! parsing a field and printing it again reproduces it byte for byte.

use std::fmt::Write;

use fklattice::engine::{ConvergenceStudy, ValueSurface};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn surface_csv(s: &ValueSurface) -> String {
    let mut out = String::from("t,x,re_v,im_v\n");
    for layer in &s.layers {
        let t = num(layer.t);
        for (x, v) in layer.nodes.iter().zip(&layer.values) {
            let _ = writeln!(out, "{t},{},{},{}", num(*x), num(v.re), num(v.im));
        }
    }
    out
}

pub fn convergence_csv(s: &ConvergenceStudy) -> String {
    let mut out = String::from("n,q_re,q_im,diff_abs\n");
    for r in &s.rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, num(r.q.re), num(r.q.im), num(r.diff));
    }
    out
}
