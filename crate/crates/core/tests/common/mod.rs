#![allow(dead_code)]

use mtdiff_core::{BernoulliParams, ClusteredNetwork, RandomWeight, SignalModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph on `2..=max_nodes` nodes with a random partition.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize, max_dim: usize) -> ClusteredNetwork {
    let n = rng.random_range(2..=max_nodes);
    let l = rng.random_range(1..=max_dim);
    let q = rng.random_range(1..=n);
    let mut label: Vec<usize> = (0..n).map(|k| if k < q { k } else { rng.random_range(0..q) }).collect();
    // shuffle labels so clusters are not contiguous
    for k in (1..n).rev() {
        let j = rng.random_range(0..=k);
        label.swap(k, j);
    }
    let clusters: Vec<Vec<usize>> = (0..q).map(|c| (0..n).filter(|&k| label[k] == c).collect()).collect();
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((rng.random_range(0..k), k));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < 0.3 {
                edges.push((a, b));
            }
        }
    }
    ClusteredNetwork::new(n, l, &edges, &clusters).unwrap()
}

/// Random symmetric positive-definite `L × L` matrix.
pub fn random_spd<R: Rng>(rng: &mut R, l: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
    let m = &b * b.transpose() / l as f64 + DMatrix::identity(l, l) * 0.3;
    (&m + m.transpose()) * 0.5
}

pub fn random_model<R: Rng>(rng: &mut R, net: &ClusteredNetwork) -> SignalModel {
    let n = net.nodes();
    let covs = (0..n).map(|_| random_spd(rng, net.dim())).collect();
    let noise = (0..n).map(|_| rng.random_range(0.001..0.05)).collect();
    let params: Vec<DVector<f64>> = (0..net.cluster_count())
        .map(|_| DVector::from_fn(net.dim(), |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    SignalModel::new(net, covs, noise, &params).unwrap()
}

/// Random feasible Bernoulli parameters whose mean step-size equals
/// `mean_step` at every node.
pub fn random_params<R: Rng>(rng: &mut R, net: &ClusteredNetwork, mean_step: f64) -> BernoulliParams {
    let n = net.nodes();
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.4..=1.0)).collect();
    let steps = q.iter().map(|qk| mean_step / qk).collect();
    let mut combine = Vec::new();
    let mut regularize = Vec::new();
    for k in 0..n {
        let view = net.neighborhood(k).unwrap();
        combine.push(random_weights(rng, &view.intra_strict));
        regularize.push(random_weights(rng, &view.inter));
    }
    BernoulliParams::new(net, steps, q, combine, regularize).unwrap()
}

fn random_weights<R: Rng>(rng: &mut R, neighbors: &[usize]) -> Vec<RandomWeight> {
    let raw: Vec<f64> = neighbors.iter().map(|_| rng.random_range(0.2..1.0)).collect();
    let total = raw.iter().sum::<f64>() + rng.random_range(0.0..1.0);
    neighbors
        .iter()
        .zip(raw)
        .map(|(&l, w)| RandomWeight {
            neighbor: l,
            weight: w / total.max(1.0),
            prob: rng.random_range(0.3..=1.0),
        })
        .collect()
}
