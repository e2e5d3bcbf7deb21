use rayon::prelude::*;
use serde::Serialize;
use ssi_relay_core::selection::FirstHopEnsemble;
use ssi_relay_core::{
    amount_of_fading, aup, aup_gk_fastpath, end_mgf, moments, selection_probabilities,
    simulate_multi, Modulation, PerfKind, PerfResult, PerfSpec, Protocol, QuadTolerance, RelayLink,
    Scenario,
};

use crate::config::{Experiment, MetricSpec};
use crate::CliError;

const CHECK_POINTS: [f64; 5] = [0.0, 10.0, 20.0, 30.0, 40.0];
const GK_REL_TOL: f64 = 1e-6;
const MU_TOL: f64 = 1e-6;

fn analytic(
    links: &[RelayLink],
    protocol: Protocol,
    snr_db: f64,
    metric: MetricSpec,
    exp: &Experiment,
) -> ssi_relay_core::Result<PerfResult> {
    let scn = Scenario::new(links.to_vec(), protocol, snr_db)?;
    let cfg = &exp.engine;
    match metric {
        MetricSpec::Perf(s) => match s.kind() {
            PerfKind::Mgf => end_mgf(&scn, s.a(), cfg),
            PerfKind::Moment => moments(&scn, s.moment_k(), cfg),
            _ => aup(&scn, &s, cfg),
        },
        MetricSpec::AmountOfFading(k) => amount_of_fading(&scn, k, cfg),
    }
}

fn require_snr(exp: &Experiment) -> Result<f64, CliError> {
    exp.snr_db.ok_or_else(|| CliError::Config {
        path: "snr_db".into(),
        message: "this command needs an operating point".into(),
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct AnalyticRecord<'a> {
    protocol: &'a str,
    snr_db: f64,
    metric: String,
    #[serde(flatten)]
    result: PerfResult,
}

pub fn compute(exp: &Experiment) -> Result<String, CliError> {
    let snr = require_snr(exp)?;
    if let Some(p) = exp.protocols.iter().find(|p| !p.has_analytic()) {
        return Err(CliError::Unsupported(format!(
            "{p} has no analytic path; use simulate, or sweep with simulation enabled"
        )));
    }
    let records = exp
        .protocols
        .iter()
        .map(|p| {
            Ok(AnalyticRecord {
                protocol: p.name(),
                snr_db: snr,
                metric: exp.metric.name(),
                result: analytic(&exp.links, *p, snr, exp.metric, exp)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(to_json(&records))
}

#[derive(Serialize)]
struct McRecord<'a> {
    protocol: &'a str,
    snr_db: f64,
    metric: String,
    mean: f64,
    std_error: f64,
    samples: u64,
    seed: u64,
}

fn perf_spec(metric: MetricSpec) -> Option<PerfSpec> {
    match metric {
        MetricSpec::Perf(s) => Some(s),
        MetricSpec::AmountOfFading(_) => None,
    }
}

pub fn simulate(exp: &Experiment) -> Result<String, CliError> {
    let snr = require_snr(exp)?;
    let spec = perf_spec(exp.metric).ok_or_else(|| {
        CliError::Unsupported("amount of fading is not simulated; simulate moments instead".into())
    })?;
    let records = exp
        .protocols
        .iter()
        .map(|p| {
            let scn = Scenario::new(exp.links.clone(), *p, snr)?;
            let e = simulate_multi(&scn, &[spec], &[0.0], &exp.mc)?[0][0];
            Ok(McRecord {
                protocol: p.name(),
                snr_db: snr,
                metric: exp.metric.name(),
                mean: e.mean,
                std_error: e.std_error,
                samples: e.samples_used,
                seed: exp.mc.seed,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(to_json(&records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub hop1_n: Option<f64>,
    pub snr_db: f64,
    pub protocol: Protocol,
    pub metric: String,
    pub analytic: Option<f64>,
    pub analytic_err: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub samples: Option<u64>,
    pub norm_residual: Option<f64>,
    pub flag: &'static str,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub rows: Vec<Row>,
    pub has_n: bool,
}

pub fn sweep(exp: &Experiment) -> Result<Table, CliError> {
    let sw = exp.sweep.as_ref().ok_or_else(|| CliError::Config {
        path: "sweep".into(),
        message: "the sweep command needs a sweep section".into(),
    })?;
    if !exp.mc_enabled {
        if let Some(p) = exp.protocols.iter().find(|p| !p.has_analytic()) {
            return Err(CliError::Unsupported(format!(
                "{p} rows are simulation-only; enable the mc section or pass --samples"
            )));
        }
    }
    let mc_spec = if exp.mc_enabled {
        perf_spec(exp.metric)
    } else {
        None
    };
    let figures: Vec<Option<f64>> = match &sw.hop1_n {
        Some(v) => v.iter().map(|n| Some(*n)).collect(),
        None => vec![None],
    };
    let metric = exp.metric.name();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.mc.workers)
        .build()
        .map_err(|e| CliError::Unsupported(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for n in figures {
        let links = match n {
            Some(n) => exp.links_with_hop1_n(n)?,
            None => exp.links.clone(),
        };
        // [protocol][point]
        let simulated = exp
            .protocols
            .iter()
            .map(|p| match mc_spec {
                Some(spec) => {
                    let scn = Scenario::new(links.clone(), *p, 0.0)?;
                    let est = simulate_multi(&scn, &[spec], &sw.points, &exp.mc)?;
                    Ok(est.into_iter().map(|e| Some(e[0])).collect())
                }
                None => Ok(vec![None; sw.points.len()]),
            })
            .collect::<Result<Vec<Vec<_>>, CliError>>()?;
        let tasks: Vec<(usize, usize)> = (0..sw.points.len())
            .flat_map(|i| (0..exp.protocols.len()).map(move |j| (i, j)))
            .collect();
        let computed: Vec<Row> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, j)| {
                    let (snr, p) = (sw.points[i], exp.protocols[j]);
                    let mut row = Row {
                        hop1_n: n,
                        snr_db: snr,
                        protocol: p,
                        metric: metric.clone(),
                        analytic: None,
                        analytic_err: None,
                        mc_mean: None,
                        mc_stderr: None,
                        samples: None,
                        norm_residual: None,
                        flag: "",
                    };
                    if let Some(e) = simulated[j][i] {
                        row.mc_mean = Some(e.mean);
                        row.mc_stderr = Some(e.std_error);
                        row.samples = Some(e.samples_used);
                    }
                    if p.has_analytic() {
                        match analytic(&links, p, snr, exp.metric, exp) {
                            Ok(r) => {
                                row.analytic = Some(r.analytic_value);
                                row.analytic_err = Some(r.error_estimate);
                                row.norm_residual = Some(r.normalization_residual);
                                if !(r.normalization_residual < exp.norm_threshold) {
                                    row.flag = "norm_residual";
                                }
                            }
                            Err(_) => row.flag = "engine_error",
                        }
                    }
                    row
                })
                .collect()
        });
        rows.extend(computed);
    }
    for r in rows.iter().filter(|r| !r.flag.is_empty()) {
        eprintln!(
            "warning: {} at {} dB flagged: {}",
            r.protocol, r.snr_db, r.flag
        );
    }
    Ok(Table {
        rows,
        has_n: sw.hop1_n.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<(Status, String)>,
}

impl Report {
    fn push(&mut self, ok: bool, text: String) {
        self.lines
            .push((if ok { Status::Pass } else { Status::Fail }, text));
    }

    pub fn failed(&self) -> usize {
        self.lines.iter().filter(|l| l.0 == Status::Fail).count()
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.lines {
            let tag = match s {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            out.push_str(&format!("{tag} {t}\n"));
        }
        let count = |s| self.lines.iter().filter(|l| l.0 == s).count();
        out.push_str(&format!(
            "summary: {} passed, {} failed, {} skipped\n",
            count(Status::Pass),
            count(Status::Fail),
            count(Status::Skip)
        ));
        out
    }
}

pub fn check(exp: &Experiment) -> Result<Report, CliError> {
    let points = exp.points().unwrap_or_else(|| CHECK_POINTS.to_vec());
    let mut report = Report::default();
    // aup rejects moments; normalization does not depend on the kernel
    let spec = match exp.metric {
        MetricSpec::Perf(s) if s.kind() != PerfKind::Moment => s,
        _ => Modulation::Bpsk.spec(),
    };
    for p in exp.protocols.iter().filter(|p| p.has_analytic()) {
        for snr in &points {
            let scn = Scenario::new(exp.links.clone(), *p, *snr)?;
            match aup(&scn, &spec, &exp.engine) {
                Ok(r) => report.push(
                    r.normalization_residual < exp.norm_threshold,
                    format!(
                        "normalization protocol={p} snr_db={snr} residual={:e} threshold={:e}",
                        r.normalization_residual, exp.norm_threshold
                    ),
                ),
                Err(e) => report.push(
                    false,
                    format!("normalization protocol={p} snr_db={snr}: {e}"),
                ),
            }
        }
    }
    let ens = FirstHopEnsemble::new(exp.links.iter().map(|l| l.hop1).collect());
    match ens.and_then(|e| selection_probabilities(&e, &QuadTolerance::new(1e-12, 1e-16, 400)?)) {
        Ok(mu) => {
            report.push(
                (mu.raw_sum - 1.0).abs() < MU_TOL,
                format!("selection sum(mu)-1={:e} mu={:?}", mu.raw_sum - 1.0, mu.mu),
            );
        }
        Err(e) => report.push(false, format!("selection: {e}")),
    }
    let gk = exp.links.iter().all(|l| l.hop1.is_gk() && l.hop2.is_gk());
    if gk {
        let snr = points[0];
        for p in exp.protocols.iter().filter(|p| p.has_analytic()) {
            let scn = Scenario::new(exp.links.clone(), *p, snr)?;
            let general = aup(&scn, &spec, &exp.engine);
            let fast = aup_gk_fastpath(&scn, &spec, &exp.engine);
            match (general, fast) {
                (Ok(a), Ok(b)) => {
                    let rel = (a.analytic_value - b.analytic_value).abs()
                        / b.analytic_value.abs().max(f64::MIN_POSITIVE);
                    report.push(
                        rel <= GK_REL_TOL,
                        format!("gk_fast_path protocol={p} snr_db={snr} rel={rel:e}"),
                    );
                }
                (a, b) => report.push(
                    false,
                    format!(
                        "gk_fast_path protocol={p} snr_db={snr}: {:?} / {:?}",
                        a.err(),
                        b.err()
                    ),
                ),
            }
        }
    } else {
        report.lines.push((
            Status::Skip,
            "gk_fast_path: some hop is not generalized-K".into(),
        ));
    }
    Ok(report)
}
