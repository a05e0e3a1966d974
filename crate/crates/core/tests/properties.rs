use mscale::graph::{modularity, relabel, SimilarityGraph};
use mscale::metrics::{f_beta, nmi};
use mscale::model::{validate_corpus, BoundingBox, Record, TimeWindow};
use mscale::noise::ripley_l;
use mscale::text::TextIndex;
use mscale::wavelet::{haar_dwt, CenteredCoefficients};
use proptest::prelude::*;

fn records() -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec((0i64..200, -2.0f64..12.0, -2.0f64..12.0), 0..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (t, lat, lon))| Record::new(format!("r{i}"), "u", t, lat, lon, "x"))
            .collect()
    })
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40)
}

proptest! {
    #[test]
    fn validate_corpus_is_idempotent(recs in records()) {
        let bbox = BoundingBox::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let window = TimeWindow::new(50, 150).unwrap();
        let once = validate_corpus(recs.clone(), &bbox, &window).unwrap();
        prop_assert!(once.len() <= recs.len());
        prop_assert!(once.iter().all(|r| bbox.contains(r.lat, r.lon) && window.contains(r.timestamp)));
        let twice = validate_corpus(once.clone(), &bbox, &window).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(docs in prop::collection::vec(prop::collection::vec(0usize..6, 1..6), 2..10)) {
        let words = ["amber", "basil", "cedar", "dune", "ember", "fjord"];
        let recs: Vec<Record> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut r = Record::new(format!("r{i}"), "u", 0, 0.0, 0.0, "");
                r.tokens = d.iter().map(|&w| words[w].to_string()).collect();
                r
            })
            .collect();
        let index = TextIndex::build(&recs);
        for i in 0..recs.len() {
            for j in 0..recs.len() {
                let c = index.cosine(i, j);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert_eq!(c, index.cosine(j, i));
            }
        }
    }

    #[test]
    fn haar_preserves_energy(x in prop::collection::vec(0u32..50, 1..130)) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let d = haar_dwt(&x).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let last = d.approximations.last().map(|a| a.iter().map(|v| v * v).sum::<f64>()).unwrap_or(energy);
        let details: f64 = d.details.iter().flatten().map(|v| v * v).sum();
        prop_assert!((last + details - energy).abs() <= 1e-9 * energy.max(1.0));
    }

    #[test]
    fn correlation_ignores_positive_scaling(
        x in prop::collection::vec(0.0f64..10.0, 4..16),
        y in prop::collection::vec(0.0f64..10.0, 4..16),
        a in 0.1f64..10.0,
    ) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let scaled: Vec<f64> = x.iter().map(|v| v * a).collect();
        let s1 = CenteredCoefficients::new(x).similarity(&CenteredCoefficients::new(y)).unwrap();
        let s2 = CenteredCoefficients::new(&scaled).similarity(&CenteredCoefficients::new(y)).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&s1));
    }

    #[test]
    fn ripley_k_grows_with_s(pts in points(), s in 0.01f64..0.5, ds in 0.0f64..0.5) {
        let (k1, _) = ripley_l(&pts, 1.0, s).unwrap();
        let (k2, _) = ripley_l(&pts, 1.0, s + ds).unwrap();
        prop_assert!(k2 >= k1);
    }

    #[test]
    fn ripley_l_ignores_translation(pts in points(), s in 0.01f64..0.5, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        let (_, l1) = ripley_l(&pts, 1.0, s).unwrap();
        let (_, l2) = ripley_l(&moved, 1.0, s).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_label_names(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 2..60),
        offset in 1usize..100,
    ) {
        let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let a2: Vec<usize> = a.iter().map(|&l| (4 - l) * 7 + offset).collect();
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&a2, &b).unwrap()).abs() < 1e-12);
        prop_assert!((f_beta(&a, &b, 2.0).unwrap() - f_beta(&a2, &b, 2.0).unwrap()).abs() < 1e-12);
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn modularity_ignores_label_names(labels in prop::collection::vec(0usize..4, 6)) {
        let g = SimilarityGraph::from_edges(6, &[(0, 1, 1.0), (1, 2, 0.5), (3, 4, 2.0), (4, 5, 1.0), (2, 3, 0.1)]).unwrap();
        let q1 = modularity(&g, &labels).unwrap();
        let q2 = modularity(&g, &relabel(&labels)).unwrap();
        prop_assert!((q1 - q2).abs() < 1e-12);
        prop_assert!((-0.5..=1.0).contains(&q1));
    }
}
