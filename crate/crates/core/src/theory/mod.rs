//! Closed-form mean and mean-square behavior of the asynchronous recursion.

mod mean;
mod mean_square;
mod stability;
mod transient;

pub use mean::{block_diagonal, lift, mean_artifacts, MeanArtifacts};
pub use mean_square::{ms_artifacts, ms_artifacts_with_guard, MsArtifacts, DEFAULT_GUARD};
pub use stability::{
    kronecker_sum_eigenvalues, mean_stability, ms_stability, MeanStabilityReport, MsStabilityReport,
};
pub use transient::{moment_propagation_oracle, steady_state_msd, transient_msd};

use nalgebra::{DMatrix, DVector};

use crate::blockops::bvec;
use crate::network::ClusteredNetwork;

/// `bvec((1/N) I_{NL})`, the network MSD weight.
pub fn network_weight(nodes: usize, dim: usize) -> DVector<f64> {
    let nl = nodes * dim;
    bvec(&DMatrix::from_diagonal_element(nl, nl, 1.0 / nodes as f64), dim, dim)
}

/// Weight averaging the squared error over the nodes of cluster `q`:
/// `1/|C_q|` on the cluster's diagonal blocks, zero elsewhere.
pub fn cluster_weight(net: &ClusteredNetwork, q: usize) -> DVector<f64> {
    let (n, l) = (net.nodes(), net.dim());
    let members = &net.clusters()[q];
    let mut sigma = DMatrix::zeros(n * l, n * l);
    for &k in members {
        for j in 0..l {
            sigma[(k * l + j, k * l + j)] = 1.0 / members.len() as f64;
        }
    }
    bvec(&sigma, l, l)
}
