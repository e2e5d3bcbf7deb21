use super::*;
use crate::perfkernel::Modulation;
use crate::quad::integrate;

const ANALYTIC: [Protocol; 3] = [Protocol::Ssi, Protocol::Rr, Protocol::Ap];

fn table1(l: usize, protocol: Protocol, db: f64) -> Scenario {
    Scenario::new(table1_links()[..l].to_vec(), protocol, db).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gk_links() -> Vec<RelayLink> {
    [(1.5, 0.8, 1.0), (2.0, 2.5, 0.7), (1.2, 4.0, 0.6)]
        .iter()
        .map(|&(m, n, omega)| {
            RelayLink::new(
                EgkParams::new(m, 1.0, n, 1.0, omega).unwrap(),
                EgkParams::new(m + 0.5, 1.0, f64::INFINITY, 1.0, 0.9).unwrap(),
            )
        })
        .collect()
}

#[test]
fn normalization_residual_is_small() {
    let cfg = EngineConfig::default();
    let bpsk = Modulation::Bpsk.spec();
    for p in ANALYTIC {
        for db in [0.0, 10.0, 20.0, 30.0, 40.0] {
            let r = aup(&table1(4, p, db), &bpsk, &cfg).unwrap();
            assert!(r.normalization_residual < 1e-8, "{p} {db}: {r:?}");
            assert!(r.error_estimate >= 0.0);
        }
    }
}

#[test]
fn low_snr_limits() {
    let cfg = EngineConfig::default();
    for p in ANALYTIC {
        let scn = table1(4, p, -80.0);
        for m in [Modulation::Bpsk, Modulation::Ncfsk] {
            let v = aup(&scn, &m.spec(), &cfg).unwrap().analytic_value;
            assert!((v - 0.5).abs() < 1e-3, "{p} {m}: {v}");
        }
        let c = aup(&scn, &PerfSpec::capacity(1.0).unwrap(), &cfg)
            .unwrap()
            .analytic_value;
        assert!((0.0..1e-6).contains(&c), "{p}: {c}");
    }
}

#[test]
fn monotone_in_snr() {
    let cfg = EngineConfig::default();
    let cap = PerfSpec::capacity(1.0).unwrap();
    for p in ANALYTIC {
        let (mut bep, mut c) = (1.0, 0.0);
        for db in [0.0, 8.0, 16.0, 24.0, 32.0] {
            let scn = table1(4, p, db);
            let b = aup(&scn, &Modulation::Bdpsk.spec(), &cfg)
                .unwrap()
                .analytic_value;
            let e = aup(&scn, &cap, &cfg).unwrap().analytic_value;
            assert!(b < bep && e > c, "{p} {db}");
            bep = b;
            c = e;
        }
    }
}

#[test]
fn ssi_beats_rr_and_ap() {
    let cfg = EngineConfig::default();
    for m in [Modulation::Bpsk, Modulation::Ncfsk] {
        for db in [0.0, 10.0, 20.0, 30.0, 40.0] {
            let v: Vec<f64> = ANALYTIC
                .iter()
                .map(|p| {
                    aup(&table1(4, *p, db), &m.spec(), &cfg)
                        .unwrap()
                        .analytic_value
                })
                .collect();
            assert!(v[0] <= v[1] && v[0] <= v[2], "{m} {db}: {v:?}");
        }
    }
}

#[test]
fn single_relay_protocols_coincide() {
    let cfg = EngineConfig::default();
    let spec = Modulation::Bpsk.spec();
    let v: Vec<f64> = ANALYTIC
        .iter()
        .map(|p| {
            aup(&table1(1, *p, 12.0), &spec, &cfg)
                .unwrap()
                .analytic_value
        })
        .collect();
    assert!(rel(v[0], v[1]) < 1e-9 && rel(v[1], v[2]) < 1e-12, "{v:?}");
}

#[test]
fn csi_is_simulation_only() {
    let cfg = EngineConfig::default();
    let scn = table1(4, Protocol::CsiSimOnly, 10.0);
    assert!(matches!(
        aup(&scn, &Modulation::Bpsk.spec(), &cfg),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(moments(&scn, 1, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn ap_tie_break_is_lowest_index() {
    let a = EgkParams::new(1.0, 1.0, 2.0, 1.0, 0.5).unwrap();
    let b = EgkParams::new(1.0, 1.0, 2.0, 1.0, 0.9).unwrap();
    assert_eq!(ap_choice(&[a, b, b, a]), 1);
    assert_eq!(ap_choice(&[a, a]), 0);
}

#[test]
fn gk_fast_path_matches_general_path() {
    let general = EngineConfig {
        bessel_shortcut: false,
        ..EngineConfig::default()
    };
    let fast = EngineConfig::default();
    for p in ANALYTIC {
        let scn = Scenario::new(gk_links(), p, 15.0).unwrap();
        for spec in [
            Modulation::Bpsk.spec(),
            Modulation::Ncfsk.spec(),
            PerfSpec::capacity(1.0).unwrap(),
        ] {
            let a = aup(&scn, &spec, &general).unwrap().analytic_value;
            let b = aup_gk_fastpath(&scn, &spec, &fast).unwrap().analytic_value;
            assert!(rel(a, b) < 1e-6, "{p} {}: {a} vs {b}", spec.label());
        }
    }
    let non_gk = table1(4, Protocol::Ssi, 0.0);
    assert!(aup_gk_fastpath(&non_gk, &Modulation::Bpsk.spec(), &fast).is_err());
}

#[test]
fn table_and_direct_evaluation_agree() {
    let direct = EngineConfig {
        mgf_table: false,
        ..EngineConfig::default()
    };
    let cfg = EngineConfig::default();
    for p in ANALYTIC {
        let scn = table1(4, p, 20.0);
        let spec = Modulation::Bdpsk.spec();
        let a = aup(&scn, &spec, &direct).unwrap().analytic_value;
        let b = aup(&scn, &spec, &cfg).unwrap().analytic_value;
        assert!(rel(a, b) < 1e-8, "{p}: {a} vs {b}");
    }
}

#[test]
fn end_mgf_matches_mgf_kernel() {
    let cfg = EngineConfig::default();
    for p in ANALYTIC {
        let scn = table1(4, p, 10.0);
        let mut prev = 1.0;
        for q in [0.01, 0.05, 0.1, 0.3, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0] {
            let osc = end_mgf(&scn, q, &cfg).unwrap();
            let dec = aup(&scn, &PerfSpec::mgf(q).unwrap(), &cfg).unwrap();
            assert!(
                rel(osc.analytic_value, dec.analytic_value) < 1e-8,
                "{p} p={q}: {} vs {}",
                osc.analytic_value,
                dec.analytic_value
            );
            assert!(osc.analytic_value < prev && osc.analytic_value > 0.0);
            prev = osc.analytic_value;
        }
        let tiny = end_mgf(&scn, 1e-9, &cfg).unwrap().analytic_value;
        assert!((tiny - 1.0).abs() < 1e-6);
    }
}

#[test]
fn moments_and_amount_of_fading() {
    let cfg = EngineConfig::default();
    for p in ANALYTIC {
        for db in [0.0, 20.0] {
            let scn = table1(4, p, db);
            let m0 = moments(&scn, 0, &cfg).unwrap();
            assert!((m0.analytic_value - 1.0).abs() < 1e-6);
            let m1 = moments(&scn, 1, &cfg).unwrap().analytic_value;
            let m2 = moments(&scn, 2, &cfg).unwrap().analytic_value;
            assert!(m2 >= m1 * m1);
            let af = amount_of_fading(&scn, 2, &cfg).unwrap();
            assert!(af.analytic_value >= 0.0);
            assert!(rel(af.analytic_value + 1.0, m2 / (m1 * m1)) < 1e-9);
            assert_eq!(amount_of_fading(&scn, 1, &cfg).unwrap().analytic_value, 0.0);
            // SNR scaling multiplies the k-th moment by the factor to the k
            let up = moments(&scn.with_snr_db(db + 10.0).unwrap(), 2, &cfg)
                .unwrap()
                .analytic_value;
            assert!(rel(up, 100.0 * m2) < 1e-7);
        }
    }
}

/// Harmonic-mean dual-hop statistics over two exponential hops by nested
/// quadrature over (γ₁, γ₂), independent of the reciprocal-MGF machinery.
fn rayleigh_dual_hop(o1: f64, o2: f64, f: impl Fn(f64) -> f64) -> f64 {
    let tol = QuadTolerance::new(1e-11, 1e-16, 400).unwrap();
    let inner = |g1: f64| {
        integrate(
            |t| {
                let g2 = t / (1.0 - t);
                let jac = 1.0 / ((1.0 - t) * (1.0 - t));
                (-g2 / o2).exp() / o2 * f(g1 * g2 / (g1 + g2)) * jac
            },
            0.0,
            1.0,
            &tol,
        )
        .value
    };
    integrate(
        |t| {
            let g1 = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            (-g1 / o1).exp() / o1 * inner(g1) * jac
        },
        0.0,
        1.0,
        &tol,
    )
    .value
}

#[test]
fn rayleigh_dual_hop_against_direct_quadrature() {
    let link = RelayLink::new(
        EgkParams::rayleigh(1.0).unwrap(),
        EgkParams::rayleigh(2.0).unwrap(),
    );
    let scn = Scenario::new(vec![link], Protocol::Rr, 0.0).unwrap();
    let cfg = EngineConfig::default();
    let mean = moments(&scn, 1, &cfg).unwrap().analytic_value;
    let exact = rayleigh_dual_hop(1.0, 2.0, |g| g);
    assert!(rel(mean, exact) < 1e-7, "{mean} vs {exact}");
    let nc = aup(&scn, &Modulation::Bdpsk.spec(), &cfg)
        .unwrap()
        .analytic_value;
    let exact = rayleigh_dual_hop(1.0, 2.0, |g| 0.5 * (-g).exp());
    assert!(rel(nc, exact) < 1e-7, "{nc} vs {exact}");
    let c = aup(&scn, &PerfSpec::capacity(1.0).unwrap(), &cfg)
        .unwrap()
        .analytic_value;
    let exact = rayleigh_dual_hop(1.0, 2.0, |g| g.ln_1p() / std::f64::consts::LN_2);
    assert!(rel(c, exact) < 1e-7, "{c} vs {exact}");
    let fast = aup_gk_fastpath(&scn, &Modulation::Bdpsk.spec(), &cfg)
        .unwrap()
        .analytic_value;
    assert!(rel(fast, nc) < 1e-9);
}

#[test]
fn integrand_near_origin() {
    let cfg = EngineConfig::default();
    // relay 1's multipath has mξ < 1, so the mixture integrand grows like
    // u^{mξ−1} at the origin but stays integrable
    let scn = table1(4, Protocol::Ssi, 0.0);
    let mut prev = 0.0;
    for k in (4..14).rev() {
        let u = 10f64.powi(-k);
        let h = integrand_ssi(&scn, &cfg, u).unwrap();
        assert!(h.is_finite() && h > 0.0);
        assert!(u * h < 10f64.powi(-k / 2));
        assert!(h < prev || prev == 0.0 || k == 13);
        prev = h;
    }
    // relays 2-4 alone have mξ > 1: finite positive limit
    let tail = Scenario::new(table1_links()[1..].to_vec(), Protocol::Ssi, 0.0).unwrap();
    let h: Vec<f64> = [8, 10, 12, 14, 16]
        .iter()
        .map(|k| integrand_ssi(&tail, &cfg, 10f64.powi(-k)).unwrap())
        .collect();
    assert!(h.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(
        h.windows(3)
            .all(|w| (w[2] - w[1]).abs() < (w[1] - w[0]).abs()),
        "{h:?}"
    );
    assert!(integrand_ssi(&scn, &cfg, 0.0).is_err());
}

#[test]
fn shadowing_limits() {
    let cfg = EngineConfig::default();
    let spec = Modulation::Bdpsk.spec();
    // identical shadowing, nearly none: SSI tends to RR
    let same: Vec<RelayLink> = table1_links()
        .iter()
        .map(|l| {
            let h = l.hop1;
            RelayLink::new(
                EgkParams::new(h.m(), h.xi(), 1e4, 1.0, 0.7).unwrap(),
                l.hop2,
            )
        })
        .collect();
    let ssi = aup(
        &Scenario::new(same.clone(), Protocol::Ssi, 30.0).unwrap(),
        &spec,
        &cfg,
    )
    .unwrap();
    let rr = aup(
        &Scenario::new(same, Protocol::Rr, 30.0).unwrap(),
        &spec,
        &cfg,
    )
    .unwrap();
    assert!(rel(ssi.analytic_value, rr.analytic_value) < 0.02);
    // well separated Ω, mild shadowing: SSI tends to AP
    let apart: Vec<RelayLink> = table1_links()
        .iter()
        .zip([0.8, 0.4, 0.2, 0.1])
        .map(|(l, o)| {
            let h = l.hop1;
            RelayLink::new(EgkParams::new(h.m(), h.xi(), 1e3, 1.0, o).unwrap(), l.hop2)
        })
        .collect();
    let ssi = aup(
        &Scenario::new(apart.clone(), Protocol::Ssi, 30.0).unwrap(),
        &spec,
        &cfg,
    )
    .unwrap();
    let ap = aup(
        &Scenario::new(apart, Protocol::Ap, 30.0).unwrap(),
        &spec,
        &cfg,
    )
    .unwrap();
    assert!(rel(ssi.analytic_value, ap.analytic_value) < 0.02);
}

#[test]
fn oscillatory_strategy_for_bessel_kernels() {
    let cfg = EngineConfig {
        u_strategy: UStrategy::Oscillatory,
        ..EngineConfig::default()
    };
    let dec = EngineConfig::default();
    let scn = table1(4, Protocol::Ssi, 5.0);
    let spec = PerfSpec::mgf(0.7).unwrap();
    let a = aup(&scn, &spec, &cfg).unwrap();
    let b = aup(&scn, &spec, &dec).unwrap();
    assert!(a.diagnostics["intervals"] > 1.0);
    assert!(rel(a.analytic_value, b.analytic_value) < 1e-8);
    // non-oscillating kernels fall back to the decaying strategy
    let c = aup(&scn, &Modulation::Bpsk.spec(), &cfg).unwrap();
    assert_eq!(c.diagnostics["intervals"], 1.0);
}

#[test]
fn config_validation() {
    let cfg = EngineConfig {
        gcq_n: 4,
        ..EngineConfig::default()
    };
    assert!(aup(
        &table1(2, Protocol::Ssi, 0.0),
        &Modulation::Bpsk.spec(),
        &cfg
    )
    .is_err());
    assert!(Scenario::new(vec![], Protocol::Ssi, 0.0).is_err());
    assert!(Scenario::new(table1_links(), Protocol::Ssi, f64::NAN).is_err());
    assert!(aup(
        &table1(2, Protocol::Rr, 0.0),
        &PerfSpec::moment(1),
        &EngineConfig::default()
    )
    .is_err());
}
