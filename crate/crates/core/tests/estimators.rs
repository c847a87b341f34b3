use qdsps::analysis::{build_correlation, efficiency_budget, g2_from_histogram, SidePeakWindow};
use qdsps::optics::{hbt, DetectorSpec, Timing};
use qdsps::rng::SeedTree;
use qdsps::stream::{PhotonKind, PhotonRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn budget_reproduces_the_reference_operating_points() {
    let points =
        [(6.50, 0.076, 8.14, 0.0536), (7.36, 0.069, 9.25, 0.0609), (0.58, 0.026, 0.75, 0.0049), (1.12, 0.014, 1.45, 0.0095)];
    for (cr_raw, g2, cr_end, eta_end) in points {
        let b = efficiency_budget(cr_raw, 0.768, g2, 152.0).unwrap();
        assert!((b.cr_end_mhz / cr_end - 1.0).abs() < 0.01, "{b:?}");
        assert!((b.eta_end / eta_end - 1.0).abs() < 0.01, "{b:?}");
    }
}

fn photon(k: u64, t: f64) -> PhotonRecord {
    PhotonRecord {
        trigger_index: k,
        emission_time_ps: t,
        center_frequency_offset_ghz: 0.0,
        kind: PhotonKind::Signal,
        passes_polarizer: true,
        linewidth_ghz: 0.32,
        filtered: false,
    }
}

/// E[N_a·N_b] over E[N_a]·E[N_b] for a source emitting n photons with
/// probabilities `pn`, each sent to either detector with probability ½ and
/// detected with probability `eta`; enumerates every routing outcome.
fn enumerated_g2(pn: &[f64], eta: f64) -> f64 {
    let (mut ab, mut a, mut b) = (0.0, 0.0, 0.0);
    for (n, &p) in pn.iter().enumerate() {
        // Each photon: 0 = lost, 1 = detector a, 2 = detector b.
        let outcomes = 3usize.pow(n as u32);
        for code in 0..outcomes {
            let (mut c, mut na, mut nb, mut prob) = (code, 0.0, 0.0, p);
            for _ in 0..n {
                match c % 3 {
                    0 => prob *= 1.0 - eta,
                    1 => {
                        prob *= 0.5 * eta;
                        na += 1.0;
                    }
                    _ => {
                        prob *= 0.5 * eta;
                        nb += 1.0;
                    }
                }
                c /= 3;
            }
            ab += prob * na * nb;
            a += prob * na;
            b += prob * nb;
        }
    }
    ab / (a * b)
}

#[test]
fn g2_estimator_is_unbiased_on_a_known_two_photon_source() {
    let pn = [0.43, 0.55, 0.02];
    let eta = 0.7;
    let truth = enumerated_g2(&pn, eta);
    let n = 200_000u64;
    let timing = Timing::from_rate(152.0, n);
    let det = DetectorSpec { efficiency: eta, ..DetectorSpec::ideal() };
    let window = SidePeakWindow::default();
    let span = ((window.max_order + 1) as f64 * timing.period_ps) as i64;
    let mut estimates = Vec::new();
    let mut errors = Vec::new();
    for run in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
        let mut photons = Vec::new();
        for k in 0..n {
            let u: f64 = rng.random();
            let count = if u < pn[0] {
                0
            } else if u < pn[0] + pn[1] {
                1
            } else {
                2
            };
            for _ in 0..count {
                photons.push(photon(k, rng.random::<f64>() * 1000.0));
            }
        }
        let r = hbt(&photons, &[det; 2], &timing, &SeedTree::new(run)).unwrap();
        let h = build_correlation(&r.channel(0), &r.channel(1), 50, span, (0, 1), r.duration_ps).unwrap();
        let g = g2_from_histogram(&h, timing.period_ps, None, &window).unwrap();
        estimates.push(g.g2_zero);
        errors.push(g.g2_err);
    }
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let sd = (estimates.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let quoted = errors.iter().sum::<f64>() / m;
    assert!((mean - truth).abs() < quoted, "mean {mean} vs {truth}, quoted σ {quoted}");
    assert!((mean - truth).abs() < 3.0 * sd / m.sqrt(), "mean {mean} vs {truth}, sem {}", sd / m.sqrt());
    // The quoted error describes the run-to-run scatter.
    assert!((quoted / sd - 1.0).abs() < 0.3, "quoted {quoted} vs scatter {sd}");
}
