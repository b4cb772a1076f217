//! External clustering metrics: purity and the V-measure.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSummary {
    pub lambda2: f64,
    pub beta_used: f64,
    pub sigma_used: f64,
    pub subset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// None when no ground truth was supplied.
    pub purity: Option<f64>,
    pub v_measure: Option<f64>,
    pub homogeneity: Option<f64>,
    pub completeness: Option<f64>,
    pub per_split: Vec<SplitSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

/// Joint counts of (cluster, class) pairs, with both sides re-indexed densely.
struct Contingency {
    cells: BTreeMap<(usize, usize), usize>,
    clusters: Vec<usize>,
    classes: Vec<usize>,
    n: usize,
}

fn dense<T: Eq + Hash + Clone>(xs: &[T]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = xs
        .iter()
        .map(|x| {
            let next = ids.len();
            *ids.entry(x.clone()).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

impl Contingency {
    fn new<A: Eq + Hash + Clone, B: Eq + Hash + Clone>(labels: &[A], truth: &[B]) -> Result<Self> {
        if labels.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "{} labels but {} ground-truth classes",
                labels.len(),
                truth.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyData);
        }
        let (lab, nk) = dense(labels);
        let (cls, nc) = dense(truth);
        let mut cells = BTreeMap::new();
        let mut clusters = vec![0; nk];
        let mut classes = vec![0; nc];
        for (&k, &c) in lab.iter().zip(&cls) {
            *cells.entry((k, c)).or_insert(0) += 1;
            clusters[k] += 1;
            classes[c] += 1;
        }
        Ok(Self {
            cells,
            clusters,
            classes,
            n: labels.len(),
        })
    }
}

/// (1/N) Σ_clusters max_class |cluster ∩ class|.
pub fn purity<A: Eq + Hash + Clone, B: Eq + Hash + Clone>(labels: &[A], truth: &[B]) -> Result<f64> {
    let t = Contingency::new(labels, truth)?;
    let mut best = vec![0usize; t.clusters.len()];
    for (&(k, _), &c) in &t.cells {
        best[k] = best[k].max(c);
    }
    Ok(best.iter().sum::<usize>() as f64 / t.n as f64)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity, completeness and their harmonic mean. A zero-entropy
/// denominator counts as a perfect score.
pub fn v_measure<A: Eq + Hash + Clone, B: Eq + Hash + Clone>(labels: &[A], truth: &[B]) -> Result<VMeasure> {
    let t = Contingency::new(labels, truth)?;
    let n = t.n as f64;
    let h_class = entropy(&t.classes, n);
    let h_cluster = entropy(&t.clusters, n);
    let (mut h_class_given, mut h_cluster_given) = (0.0, 0.0);
    for (&(k, c), &v) in &t.cells {
        let joint = v as f64 / n;
        h_class_given -= joint * (v as f64 / t.clusters[k] as f64).ln();
        h_cluster_given -= joint * (v as f64 / t.classes[c] as f64).ln();
    }
    let homogeneity = if h_class == 0.0 { 1.0 } else { 1.0 - h_class_given / h_class };
    let completeness = if h_cluster == 0.0 {
        1.0
    } else {
        1.0 - h_cluster_given / h_cluster
    };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok(VMeasure {
        homogeneity,
        completeness,
        v_measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> (Vec<usize>, Vec<char>) {
        let labels = [vec![0; 8], vec![1; 4]].concat();
        let truth = [vec!['A'; 5], vec!['B'; 7]].concat();
        (labels, truth)
    }

    #[test]
    fn purity_examples() {
        let (l, t) = example();
        assert!((purity(&l, &t).unwrap() - 0.75).abs() < 1e-15);
        let single = vec![0; 10];
        let classes = [vec!['A'; 7], vec!['B'; 3]].concat();
        assert!((purity(&single, &classes).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(purity(&[3, 3, 9], &["x", "x", "y"]).unwrap(), 1.0);
        assert!(matches!(purity(&[0, 1], &[0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn v_measure_examples() {
        let (l, t) = example();
        let v = v_measure(&l, &t).unwrap();
        // independent entropy computation
        assert!((v.homogeneity - 0.3506382043877758).abs() < 1e-12);
        assert!((v.completeness - 0.3741489492017618).abs() < 1e-12);
        assert!((v.v_measure - 0.3620122544169018).abs() < 1e-12);

        let perfect = v_measure(&[1, 1, 0], &["b", "b", "a"]).unwrap();
        assert_eq!((perfect.homogeneity, perfect.completeness, perfect.v_measure), (1.0, 1.0, 1.0));

        let one = v_measure(&[0; 6], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert_eq!(one.homogeneity, 0.0);
        assert_eq!(one.v_measure, 0.0);
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(
            pairs in prop::collection::vec((0usize..4, 0usize..3), 1..80),
            shift in 1usize..4,
        ) {
            let labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let relabel: Vec<usize> = labels.iter().map(|l| (l + shift) % 4).collect();
            let p = purity(&labels, &truth).unwrap();
            prop_assert_eq!(p, purity(&relabel, &truth).unwrap());
            // every cluster holds at least a 1/C share of its largest class
            let c = truth.iter().collect::<std::collections::HashSet<_>>().len();
            prop_assert!(p <= 1.0 && p >= 1.0 / c as f64 - 1e-15);
            let a = v_measure(&labels, &truth).unwrap();
            let b = v_measure(&relabel, &truth).unwrap();
            prop_assert!((a.v_measure - b.v_measure).abs() < 1e-12);
            for x in [a.homogeneity, a.completeness, a.v_measure] {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
            }
        }
    }
}
