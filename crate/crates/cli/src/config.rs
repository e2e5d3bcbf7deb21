//! Experiment configuration file.

use serde::Deserialize;
use ssi_relay_core::{
    EgkParams, EngineConfig, McConfig, Modulation, PerfSpec, Protocol, QuadTolerance, RelayLink,
};

use crate::CliError;

pub const TABLE1: &str = include_str!("../configs/table1.json");
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub relays: Vec<RelayEntry>,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<String>,
    pub metric: Metric,
    pub snr_db: Option<f64>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub engine: EngineSection,
    pub mc: Option<McSection>,
}

fn default_protocols() -> Vec<String> {
    vec!["ssi".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayEntry {
    pub hop1: HopEntry,
    pub hop2: HopEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopEntry {
    pub m: f64,
    #[serde(default = "one")]
    pub xi: f64,
    #[serde(default)]
    pub n: Figure,
    #[serde(default = "one")]
    pub zeta: f64,
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

/// Shadowing figure: a number, or "inf" for no shadowing.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Figure {
    Value(f64),
    Name(String),
}

impl Default for Figure {
    fn default() -> Self {
        Self::Name("inf".into())
    }
}

impl Figure {
    fn value(&self) -> Result<f64, String> {
        match self {
            Self::Value(v) => Ok(*v),
            Self::Name(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Self::Name(s) => Err(format!("expected a number or \"inf\", got \"{s}\"")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Bep {
        modulation: Option<String>,
        a: Option<f64>,
        b: Option<f64>,
    },
    Capacity {
        #[serde(default = "one")]
        bandwidth: f64,
    },
    Mgf {
        p: f64,
    },
    Moment {
        k: u32,
    },
    AmountOfFading {
        k: u32,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
    /// Common first-hop shadowing figures to sweep over, if any.
    pub hop1_n: Option<Vec<Figure>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(rename = "gcq_N")]
    pub gcq_n: Option<usize>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
    pub norm_threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub batch_size: Option<u64>,
}

fn yes() -> bool {
    true
}

/// Command-line overrides of the `mc` section.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub workers: Option<usize>,
}

/// Fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub links: Vec<RelayLink>,
    pub protocols: Vec<Protocol>,
    pub metric: MetricSpec,
    pub snr_db: Option<f64>,
    pub sweep: Option<Sweep>,
    pub engine: EngineConfig,
    pub norm_threshold: f64,
    pub mc: McConfig,
    /// Whether sweeps attach simulated columns.
    pub mc_enabled: bool,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub points: Vec<f64>,
    pub hop1_n: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub enum MetricSpec {
    Perf(PerfSpec),
    AmountOfFading(u32),
}

impl MetricSpec {
    /// Column label without commas.
    pub fn name(&self) -> String {
        match self {
            Self::Perf(s) => {
                use ssi_relay_core::PerfKind::*;
                match s.kind() {
                    BepCoherent | BepNoncoherent | BepWojnar => {
                        match Modulation::ALL.iter().find(|m| m.spec() == *s) {
                            Some(m) => format!("bep_{}", m.name()),
                            None => format!("bep_a{}_b{}", s.a(), s.b()),
                        }
                    }
                    Capacity => format!("capacity_w{}", s.bandwidth()),
                    Mgf => format!("mgf_p{}", s.a()),
                    Moment => format!("moment_k{}", s.moment_k()),
                }
            }
            Self::AmountOfFading(k) => format!("af_k{k}"),
        }
    }

    pub fn is_bep(&self) -> bool {
        matches!(self, Self::Perf(s) if s.kind().is_bep())
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Reads a configuration from a path or from `builtin:table1`.
pub fn load(path: &str, ov: Overrides) -> Result<Experiment, CliError> {
    let text = match path.strip_prefix(BUILTIN_PREFIX) {
        Some("table1") => TABLE1.to_string(),
        Some(other) => return Err(err("--config", format!("unknown builtin '{other}'"))),
        None => std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.into(),
            message: e.to_string(),
        })?,
    };
    parse(&text, ov)
}

pub fn parse(text: &str, ov: Overrides) -> Result<Experiment, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        err(
            if path == "." { String::new() } else { path },
            e.inner().to_string(),
        )
    })?;
    cfg.validate(ov)
}

fn hop(h: &HopEntry, path: &str) -> Result<EgkParams, CliError> {
    let n = h.n.value().map_err(|m| err(format!("{path}.n"), m))?;
    EgkParams::new(h.m, h.xi, n, h.zeta, h.omega).map_err(|e| err(path, e.to_string()))
}

impl Config {
    fn validate(self, ov: Overrides) -> Result<Experiment, CliError> {
        if self.relays.is_empty() {
            return Err(err("relays", "at least one relay is required"));
        }
        let links = self
            .relays
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(RelayLink::new(
                    hop(&r.hop1, &format!("relays[{i}].hop1"))?,
                    hop(&r.hop2, &format!("relays[{i}].hop2"))?,
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        if self.protocols.is_empty() {
            return Err(err("protocols", "at least one protocol is required"));
        }
        let protocols = self
            .protocols
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.parse().map_err(|e: ssi_relay_core::Error| {
                    err(format!("protocols[{i}]"), e.to_string())
                })
            })
            .collect::<Result<Vec<Protocol>, CliError>>()?;
        let metric = metric(&self.metric)?;
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(err("snr_db", "must be finite"));
            }
        }
        let sweep = self.sweep.as_ref().map(sweep).transpose()?;

        let mut engine = EngineConfig::default();
        let e = &self.engine;
        if let Some(n) = e.gcq_n {
            engine.gcq_n = n;
        }
        engine.u_tol = QuadTolerance::new(
            e.rel_tol.unwrap_or(engine.u_tol.rel_tol),
            e.abs_tol.unwrap_or(engine.u_tol.abs_tol),
            e.max_subdivisions.unwrap_or(engine.u_tol.max_subdivisions),
        )
        .map_err(|x| err("engine", x.to_string()))?;
        engine
            .validate()
            .map_err(|x| err("engine", x.to_string()))?;
        let norm_threshold = e.norm_threshold.unwrap_or(1e-4);
        if !(norm_threshold > 0.0) {
            return Err(err("engine.norm_threshold", "must be positive"));
        }

        let section = self.mc.as_ref();
        let enabled = section.is_some_and(|m| m.enabled) || ov.samples.is_some();
        let mut mc = McConfig::default();
        if let Some(m) = section {
            mc.samples = m.samples.unwrap_or(mc.samples);
            mc.seed = m.seed.unwrap_or(mc.seed);
            mc.workers = m.workers.unwrap_or(mc.workers);
            mc.batch_size = m.batch_size.unwrap_or(mc.batch_size);
        }
        mc.samples = ov.samples.unwrap_or(mc.samples);
        mc.seed = ov.seed.unwrap_or(mc.seed);
        mc.workers = ov.workers.unwrap_or(mc.workers);
        mc.validate().map_err(|x| err("mc", x.to_string()))?;
        Ok(Experiment {
            links,
            protocols,
            metric,
            snr_db: self.snr_db,
            sweep,
            engine,
            norm_threshold,
            mc,
            mc_enabled: enabled,
        })
    }
}

fn metric(m: &Metric) -> Result<MetricSpec, CliError> {
    let bad = |field: &str, x: ssi_relay_core::Error| err(format!("metric.{field}"), x.to_string());
    Ok(match m {
        Metric::Bep { modulation, a, b } => match (modulation, a, b) {
            (Some(name), None, None) => MetricSpec::Perf(
                name.parse::<Modulation>()
                    .map_err(|x| bad("modulation", x))?
                    .spec(),
            ),
            (None, Some(a), Some(b)) => {
                MetricSpec::Perf(PerfSpec::bep_wojnar(*a, *b).map_err(|x| bad("a", x))?)
            }
            _ => {
                return Err(err(
                    "metric",
                    "bep needs either \"modulation\" or both \"a\" and \"b\"",
                ))
            }
        },
        Metric::Capacity { bandwidth } => {
            MetricSpec::Perf(PerfSpec::capacity(*bandwidth).map_err(|x| bad("bandwidth", x))?)
        }
        Metric::Mgf { p } => MetricSpec::Perf(PerfSpec::mgf(*p).map_err(|x| bad("p", x))?),
        Metric::Moment { k } => MetricSpec::Perf(PerfSpec::moment(*k)),
        Metric::AmountOfFading { k } => {
            if *k == 0 {
                return Err(err("metric.k", "amount of fading needs k >= 1"));
            }
            MetricSpec::AmountOfFading(*k)
        }
    })
}

fn sweep(s: &SweepSection) -> Result<Sweep, CliError> {
    if !(s.start_db.is_finite() && s.stop_db.is_finite()) {
        return Err(err("sweep", "start_db and stop_db must be finite"));
    }
    if !(s.step_db > 0.0) || !s.step_db.is_finite() {
        return Err(err("sweep.step_db", "must be positive"));
    }
    if s.start_db > s.stop_db {
        return Err(err("sweep", "start_db must not exceed stop_db"));
    }
    let count = ((s.stop_db - s.start_db) / s.step_db + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(err("sweep", format!("{count} points is too many")));
    }
    let points = (0..count)
        .map(|i| s.start_db + i as f64 * s.step_db)
        .collect();
    let hop1_n = s
        .hop1_n
        .as_ref()
        .map(|v| {
            if v.is_empty() {
                return Err(err("sweep.hop1_n", "must not be empty"));
            }
            v.iter()
                .enumerate()
                .map(|(i, f)| f.value().map_err(|m| err(format!("sweep.hop1_n[{i}]"), m)))
                .collect()
        })
        .transpose()?;
    Ok(Sweep { points, hop1_n })
}

impl Experiment {
    /// SNR points for commands that take one or more operating points.
    pub fn points(&self) -> Option<Vec<f64>> {
        if let Some(s) = &self.sweep {
            Some(s.points.clone())
        } else {
            self.snr_db.map(|s| vec![s])
        }
    }

    /// Links with every first hop's shadowing figure replaced by `n`.
    pub fn links_with_hop1_n(&self, n: f64) -> Result<Vec<RelayLink>, CliError> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let h = l.hop1;
                let hop1 = EgkParams::new(h.m(), h.xi(), n, h.zeta(), h.omega())
                    .map_err(|e| err(format!("relays[{i}].hop1"), e.to_string()))?;
                Ok(RelayLink::new(hop1, l.hop2))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(text: &str) -> Experiment {
        parse(text, Overrides::default()).unwrap()
    }

    fn path_of(text: &str) -> String {
        match parse(text, Overrides::default()).unwrap_err() {
            CliError::Config { path, .. } => path,
            other => panic!("{other:?}"),
        }
    }

    const HOP: &str = r#"{"m": 1.0, "xi": 1.0, "n": 2.0, "zeta": 1.0, "omega": 1.0}"#;

    fn with(relays: &str, rest: &str) -> String {
        format!(
            r#"{{"relays": {relays}, "metric": {{"kind": "bep", "modulation": "bpsk"}}{rest}}}"#
        )
    }

    #[test]
    fn bundled_table1_parses() {
        let e = ok(TABLE1);
        assert_eq!(e.links.len(), 4);
        assert_eq!(e.links, ssi_relay_core::table1_links());
        assert_eq!(e.sweep.unwrap().points.len(), 21);
    }

    #[test]
    fn defaults() {
        let e = ok(&with(
            &format!(r#"[{{"hop1": {HOP}, "hop2": {{"m": 2, "omega": 0.5}}}}]"#),
            "",
        ));
        assert!(e.links[0].hop2.n().is_infinite());
        assert_eq!(e.links[0].hop2.xi(), 1.0);
        assert_eq!(e.protocols, vec![Protocol::Ssi]);
        assert!(!e.mc_enabled);
        assert_eq!(e.metric.name(), "bep_bpsk");
    }

    #[test]
    fn field_paths_in_errors() {
        let relays = format!(r#"[{{"hop1": {HOP}, "hop2": {HOP}}}]"#);
        let bad_m = r#"[{"hop1": {"m": 0.1, "omega": 1}, "hop2": {"m": 1, "omega": 1}}]"#;
        assert_eq!(path_of(&with(bad_m, "")), "relays[0].hop1");
        let bad_type = r#"[{"hop1": {"m": "x", "omega": 1}, "hop2": {"m": 1, "omega": 1}}]"#;
        assert_eq!(path_of(&with(bad_type, "")), "relays[0].hop1.m");
        let bad_n = r#"[{"hop1": {"m": 1, "n": "big", "omega": 1}, "hop2": {"m": 1, "omega": 1}}]"#;
        assert_eq!(path_of(&with(bad_n, "")), "relays[0].hop1.n");
        assert_eq!(
            path_of(&with(&relays, r#", "protocols": ["ssi", "best"]"#)),
            "protocols[1]"
        );
        assert_eq!(
            path_of(&with(
                &relays,
                r#", "sweep": {"start_db": 0, "stop_db": 10, "step_db": 0}"#
            )),
            "sweep.step_db"
        );
        assert_eq!(path_of(&with("[]", "")), "relays");
        assert_eq!(path_of(&with(&relays, r#", "extra": 1"#)), "extra");
    }

    #[test]
    fn sweep_points_include_stop() {
        let relays = format!(r#"[{{"hop1": {HOP}, "hop2": {HOP}}}]"#);
        let e = ok(&with(
            &relays,
            r#", "sweep": {"start_db": 0, "stop_db": 1, "step_db": 0.1}"#,
        ));
        let p = e.sweep.unwrap().points;
        assert_eq!(p.len(), 11);
        assert!((p[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_enable_simulation() {
        let relays = format!(r#"[{{"hop1": {HOP}, "hop2": {HOP}}}]"#);
        let ov = Overrides {
            samples: Some(5000),
            seed: Some(9),
            workers: Some(2),
        };
        let e = parse(&with(&relays, ""), ov).unwrap();
        let mc = e.mc;
        assert!(e.mc_enabled);
        assert_eq!((mc.samples, mc.seed, mc.workers), (5000, 9, 2));
        let ov = Overrides {
            samples: Some(10),
            ..Overrides::default()
        };
        assert_eq!(
            match parse(&with(&relays, ""), ov).unwrap_err() {
                CliError::Config { path, .. } => path,
                other => panic!("{other:?}"),
            },
            "mc"
        );
    }

    #[test]
    fn metric_names() {
        let names: Vec<String> = [
            r#"{"kind": "bep", "a": 0.5, "b": 1}"#,
            r#"{"kind": "bep", "a": 1, "b": 1}"#,
            r#"{"kind": "capacity", "bandwidth": 2}"#,
            r#"{"kind": "mgf", "p": 0.5}"#,
            r#"{"kind": "moment", "k": 2}"#,
            r#"{"kind": "amount_of_fading", "k": 2}"#,
        ]
        .iter()
        .map(|m| {
            let text =
                format!(r#"{{"relays": [{{"hop1": {HOP}, "hop2": {HOP}}}], "metric": {m}}}"#);
            ok(&text).metric.name()
        })
        .collect();
        assert_eq!(
            names,
            [
                "bep_ncfsk",
                "bep_bdpsk",
                "capacity_w2",
                "mgf_p0.5",
                "moment_k2",
                "af_k2"
            ]
        );
        let text = format!(
            r#"{{"relays": [{{"hop1": {HOP}, "hop2": {HOP}}}], "metric": {{"kind": "bep"}}}}"#
        );
        assert_eq!(path_of(&text), "metric");
    }
}
