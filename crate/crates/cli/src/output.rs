//! CSV and gnuplot emission.

use std::fmt::Write;
use std::path::Path;

use crate::commands::{Row, Table};
use crate::config::Experiment;

pub const HEADER: [&str; 10] = [
    "snr_db",
    "protocol",
    "metric",
    "analytic",
    "analytic_err",
    "mc_mean",
    "mc_stderr",
    "samples",
    "norm_residual",
    "flag",
];

/// 17 significant digits; round-trips every f64.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn row(r: &Row, has_n: bool) -> String {
    let mut fields = Vec::with_capacity(11);
    if has_n {
        fields.push(r.hop1_n.map(float).unwrap_or_default());
    }
    fields.extend([
        float(r.snr_db),
        r.protocol.name().to_string(),
        r.metric.clone(),
        opt(r.analytic),
        opt(r.analytic_err),
        opt(r.mc_mean),
        opt(r.mc_stderr),
        r.samples.map(|s| s.to_string()).unwrap_or_default(),
        opt(r.norm_residual),
        r.flag.to_string(),
    ]);
    fields.join(",")
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.has_n {
            out.push_str("hop1_n,");
        }
        out.push_str(&HEADER.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&row(r, self.has_n));
            out.push('\n');
        }
        out
    }
}

/// Script plotting analytic curves and simulated points per protocol.
pub fn gnuplot(table: &Table, csv: &Path, exp: &Experiment) -> String {
    let shift = usize::from(table.has_n);
    let col = |name: &str| {
        HEADER
            .iter()
            .position(|h| *h == name)
            .expect("known column")
            + 1
            + shift
    };
    // x is the shadowing figure when only n varies
    let single_point = exp.sweep.as_ref().is_some_and(|s| s.points.len() == 1);
    let n_axis = table.has_n && single_point;
    let x = if n_axis { 1 } else { col("snr_db") };
    let file = csv
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set key outside right").unwrap();
    writeln!(s, "set grid").unwrap();
    if n_axis {
        writeln!(s, "set xlabel 'first-hop shadowing figure n'").unwrap();
        writeln!(s, "set logscale x").unwrap();
    } else {
        writeln!(s, "set xlabel 'average SNR (dB)'").unwrap();
    }
    writeln!(s, "set ylabel '{}'", exp.metric.name()).unwrap();
    if exp.metric.is_bep() {
        writeln!(s, "set logscale y").unwrap();
        writeln!(s, "set format y '10^{{%L}}'").unwrap();
    }
    let (p, a, m, e) = (
        col("protocol"),
        col("analytic"),
        col("mc_mean"),
        col("mc_stderr"),
    );
    let mut plots = Vec::new();
    for proto in &exp.protocols {
        let name = proto.name();
        if proto.has_analytic() {
            plots.push(format!(
                "'{file}' every ::1 using {x}:(strcol({p}) eq '{name}' ? ${a} : NaN) with lines title '{name}'"
            ));
        }
        if exp.mc_enabled {
            plots.push(format!(
                "'{file}' every ::1 using {x}:(strcol({p}) eq '{name}' ? ${m} : NaN):{e} with yerrorbars title '{name} (sim)'"
            ));
        }
    }
    writeln!(s, "plot \\\n    {}", plots.join(", \\\n    ")).unwrap();
    s
}
