use deepsmote_core::smote::*;
use proptest::prelude::*;

/// Brute-force reference: repeated minimum scans over all pairs.
fn brute_knn(rows: &[Vec<f32>], labels: &[usize], class: usize, k: usize) -> Vec<Vec<usize>> {
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    let k = k.min(members.len() - 1);
    members
        .iter()
        .map(|&a| {
            let dist = |b: usize| -> f64 {
                rows[a]
                    .iter()
                    .zip(&rows[b])
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum()
            };
            let mut taken = vec![a];
            for _ in 0..k {
                let mut best: Option<usize> = None;
                for &b in &members {
                    if taken.contains(&b) {
                        continue;
                    }
                    best = match best {
                        Some(c) if dist(c) <= dist(b) => Some(c),
                        _ => Some(b),
                    };
                }
                taken.push(best.unwrap());
            }
            taken[1..].to_vec()
        })
        .collect()
}

fn dataset() -> impl Strategy<Value = (usize, Vec<Vec<f32>>, Vec<usize>)> {
    (1usize..=16, 2usize..=200, 1usize..4).prop_flat_map(|(d, n, classes)| {
        // Small integer grids make exact distance ties common.
        let rows = prop::collection::vec(prop::collection::vec((-3i8..=3).prop_map(f32::from), d), n);
        let labels = prop::collection::vec(0..classes, n);
        (Just(d), rows, labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn knn_matches_brute_force((d, rows, labels) in dataset(), k in 1usize..8) {
        let lv = LabeledVectors::new(d, rows.concat(), labels.clone()).unwrap();
        let classes = labels.iter().max().unwrap() + 1;
        for class in 0..classes {
            let size = labels.iter().filter(|&&l| l == class).count();
            match knn_within_class(&lv, class, k) {
                Ok(nn) => prop_assert_eq!(nn.neighbors, brute_knn(&rows, &labels, class, k)),
                Err(e) => {
                    prop_assert!(size < 2);
                    prop_assert_eq!(e, SmoteError::ClassTooSmall { class, size });
                }
            }
        }
    }

    #[test]
    fn synthetics_are_convex_and_pure((d, rows, labels) in dataset(), extra in 1usize..40, seed in any::<u64>()) {
        let lv = LabeledVectors::new(d, rows.concat(), labels.clone()).unwrap();
        let counts = lv.class_counts();
        let targets: Vec<usize> = counts.iter().map(|&c| if c > 0 { c + extra } else { 0 }).collect();
        let out = oversample(&lv, &SmoteConfig { k: 5, targets: targets.clone(), seed }).unwrap();
        let mut hist = counts.clone();
        for &l in out.synthetic.labels() {
            hist[l] += 1;
        }
        prop_assert_eq!(&hist, &targets);
        for (i, o) in out.origins.iter().enumerate() {
            let label = out.synthetic.labels()[i];
            prop_assert_eq!(labels[o.base], label);
            prop_assert_eq!(labels[o.neighbor], label);
            prop_assert!((0.0..1.0).contains(&o.weight));
            let (a, b, s) = (&rows[o.base], &rows[o.neighbor], out.synthetic.row(i));
            for j in 0..d {
                let (lo, hi) = (a[j].min(b[j]), a[j].max(b[j]));
                prop_assert!(s[j] >= lo - 1e-6 && s[j] <= hi + 1e-6);
                let along = a[j] + o.weight * (b[j] - a[j]);
                prop_assert!((s[j] - along).abs() <= 1e-6);
            }
        }
        let again = oversample(&lv, &SmoteConfig { k: 5, targets, seed }).unwrap();
        prop_assert_eq!(again, out);
    }
}

#[test]
fn collinear_class_stays_on_segment() {
    let pts = [[0.0f32, 0.0], [1.0, 2.0], [3.0, 6.0]];
    let lv = LabeledVectors::new(2, pts.concat(), vec![0, 0, 0]).unwrap();
    let out = oversample(
        &lv,
        &SmoteConfig {
            k: 5,
            targets: vec![30],
            seed: 11,
        },
    )
    .unwrap();
    assert_eq!(out.synthetic.len(), 27);
    for i in 0..27 {
        let p = out.synthetic.row(i);
        // On the segment from (0,0) to (3,6): y = 2x and 0 <= x <= 3.
        assert!((p[1] - 2.0 * p[0]).abs() < 1e-5, "{p:?} off the line");
        assert!((0.0..=3.0).contains(&p[0]), "{p:?} outside the hull");
    }
}

#[test]
fn worked_neighbor_example() {
    let lv = LabeledVectors::new(2, vec![0.0, 0.0, 1.0, 0.0, 10.0, 0.0], vec![0, 0, 0]).unwrap();
    let nn = knn_within_class(&lv, 0, 1).unwrap();
    assert_eq!(nn.neighbors, vec![vec![1], vec![0], vec![1]]);
    assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 4.0], 0.25).unwrap(), vec![0.5, 1.0]);
}
