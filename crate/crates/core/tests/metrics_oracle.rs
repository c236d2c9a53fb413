use deepsmote_core::eval::{confusion, metrics, ConfusionMatrix, Protocol};
use deepsmote_core::rng;
use rand::Rng;

struct Oracle {
    acsa: f64,
    gm: f64,
    f1: f64,
}

/// Straight from the definitions, via explicit TP/FN/FP counts.
fn oracle(rows: &[Vec<u64>]) -> Oracle {
    let k = rows.len();
    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    for c in 0..k {
        let tp = rows[c][c] as f64;
        let fn_: f64 = (0..k).filter(|&p| p != c).map(|p| rows[c][p] as f64).sum();
        let fp: f64 = (0..k).filter(|&t| t != c).map(|t| rows[t][c] as f64).sum();
        let recall = tp / (tp + fn_);
        recalls.push(recall);
        f1s.push(if tp > 0.0 {
            2.0 * tp / (2.0 * tp + fp + fn_)
        } else {
            0.0
        });
    }
    let log_sum: f64 = recalls.iter().map(|r| r.ln()).sum();
    Oracle {
        acsa: recalls.iter().sum::<f64>() / k as f64,
        gm: if recalls.contains(&0.0) {
            0.0
        } else {
            (log_sum / k as f64).exp()
        },
        f1: f1s.iter().sum::<f64>() / k as f64,
    }
}

fn random_rows(r: &mut impl Rng) -> Vec<Vec<u64>> {
    let k = r.random_range(2..=10);
    (0..k)
        .map(|t| {
            let mut row: Vec<u64> = (0..k)
                .map(|_| if r.random_bool(0.3) { 0 } else { r.random_range(0..50) })
                .collect();
            if row.iter().sum::<u64>() == 0 {
                row[t] = 1;
            }
            row
        })
        .collect()
}

#[test]
fn metrics_match_definition_oracle() {
    let mut r = rng::stream(5, "cm");
    for _ in 0..1000 {
        let rows = random_rows(&mut r);
        let m = metrics(&ConfusionMatrix::from_rows(&rows).unwrap(), Protocol::Balanced).unwrap();
        let o = oracle(&rows);
        assert!((m.acsa - o.acsa).abs() <= 1e-9, "{rows:?}");
        assert!((m.gm - o.gm).abs() <= 1e-9, "{rows:?}");
        assert!((m.macro_f1 - o.f1).abs() <= 1e-9, "{rows:?}");
        assert!((0.0..=1.0).contains(&m.acsa) && (0.0..=1.0).contains(&m.gm) && (0.0..=1.0).contains(&m.macro_f1));
        assert!(m.gm <= m.acsa + 1e-12);
    }
}

#[test]
fn relabeling_leaves_metrics_unchanged() {
    let mut r = rng::stream(6, "perm");
    for _ in 0..200 {
        let rows = random_rows(&mut r);
        let k = rows.len();
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let mut permuted = vec![vec![0; k]; k];
        for t in 0..k {
            for p in 0..k {
                permuted[perm[t]][perm[p]] = rows[t][p];
            }
        }
        let a = metrics(&ConfusionMatrix::from_rows(&rows).unwrap(), Protocol::Balanced).unwrap();
        let b = metrics(&ConfusionMatrix::from_rows(&permuted).unwrap(), Protocol::Balanced).unwrap();
        assert!((a.acsa - b.acsa).abs() < 1e-12);
        assert!((a.gm - b.gm).abs() < 1e-12);
        assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
    }
}

#[test]
fn tally_matches_brute_force() {
    let mut r = rng::stream(7, "tally");
    let k = 4;
    let preds: Vec<usize> = (0..100).map(|_| r.random_range(0..k)).collect();
    let labels: Vec<usize> = (0..100).map(|_| r.random_range(0..k)).collect();
    let cm = confusion(&preds, &labels, k).unwrap();
    for t in 0..k {
        for p in 0..k {
            let n = preds.iter().zip(&labels).filter(|&(&a, &b)| a == p && b == t).count() as u64;
            assert_eq!(cm.get(t, p), n);
        }
    }
    assert_eq!(cm.total(), 100);
}

#[test]
fn worked_two_class_example() {
    let m = metrics(
        &ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap(),
        Protocol::Balanced,
    )
    .unwrap();
    assert!((m.recall[0] - 0.75).abs() < 1e-9 && (m.recall[1] - 0.666_666_666_7).abs() < 1e-9);
    assert!((m.acsa - 0.708_333_333_3).abs() < 1e-9);
    // sqrt(0.75 * 2/3) = sqrt(1/2)
    assert!((m.gm - 0.5f64.sqrt()).abs() < 1e-9);
    assert!((m.f1[0] - 0.666_666_666_7).abs() < 1e-9 && (m.f1[1] - 0.727_272_727_3).abs() < 1e-9);
    assert!((m.macro_f1 - 0.696_969_697_0).abs() < 1e-9);
}
