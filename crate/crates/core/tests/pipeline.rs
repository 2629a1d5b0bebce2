use fastviz::harness::{Comparison, FilterKind, Level, RunConfig};
use fastviz::synth::{generate, SynthSpec};
use fastviz::window::WindowGraph;
use fastviz::{BufferedGraph, FilterParams, PairInteraction};

fn params(nb: usize, cf: f64, tf: i64) -> FilterParams {
    FilterParams {
        buffer_capacity: nb,
        visual_capacity: 10,
        forgetting_factor: cf,
        forgetting_period: tf,
        time_contraction: 600.0,
        ..FilterParams::default()
    }
}

#[test]
fn small_vocabulary_buffers_match_exponential_window() {
    let mut spec = SynthSpec::steady(1_200, 2.0, 40, 21);
    spec.clique_size = (2, 3);
    spec.weight = (0.5, 2.0);
    let cfg = RunConfig {
        params: params(60, 0.8, 30),
        ..RunConfig::default()
    };
    let mut cmp = Comparison::new(cfg).unwrap();
    let mut samples = Vec::new();
    for e in generate(&spec).unwrap() {
        samples.extend(cmp.push(&e).unwrap());
    }
    samples.extend(cmp.finish().unwrap());
    assert!(samples.len() > 50);
    for s in &samples {
        assert_eq!(s.jaccard(FilterKind::Exponential, Level::Buffered), Some(1.0), "t={}", s.time);
        let nodes = |f| s.metric(f, Level::Buffered).unwrap().node_count;
        assert!(nodes(FilterKind::Fastviz) <= 40);
        assert_eq!(nodes(FilterKind::Fastviz), nodes(FilterKind::Exponential));
    }
}

#[test]
fn constant_activity_tracks_rectangular_window() {
    for (cf, periods) in [(0.5, 2.0), (2.0 / 3.0, 3.0), (0.75, 4.0)] {
        let tf = 40i64;
        let p = params(100, cf, tf);
        assert!((p.equivalent_window_width() - periods * tf as f64).abs() < 1e-9);
        let mut buffer = BufferedGraph::new(p.clone()).unwrap().with_origin(0);
        let mut window = WindowGraph::rectangular(p.equivalent_window_width(), p.prune_epsilon).unwrap();
        // pair i fires with weight w_i once per period at phase 3i
        let pairs: Vec<(String, String, f64, i64)> = (0..12)
            .map(|i| (format!("s{i}"), format!("t{i}"), 0.5 + i as f64 * 0.25, 3 * i as i64))
            .collect();
        let mut checked = 0;
        for t in 0..(120 * tf) {
            let firing: Vec<_> = pairs.iter().filter(|(_, _, _, ph)| t % tf == *ph).collect();
            buffer.advance_time(t).unwrap();
            for (a, b, w, _) in &firing {
                let p = PairInteraction::new(t, a.clone(), b.clone(), *w);
                buffer.ingest_pair(&p);
                window.ingest(&p).unwrap();
            }
            if t < 80 * tf || t % 7 != 0 {
                continue;
            }
            let rect = window.snapshot(t as f64).unwrap();
            for (a, _, w, _) in &pairs {
                let r = rect.strength(a).unwrap();
                assert!((r - periods * w).abs() < 1e-9, "rectangular {r} for {a}");
                let ratio = buffer.strength(a).unwrap() / r;
                assert!(
                    ratio >= cf - 1e-9 && ratio <= 1.0 + 1e-9,
                    "cf={cf} t={t} {a}: ratio {ratio}"
                );
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }
}
