mod common;

use mtdiff_core::activation::{ActivationModel, BernoulliParams, FixedActivation};
use mtdiff_core::rng::{stream, StreamKind};
use mtdiff_core::{run_monte_carlo, ClusteredNetwork, MonteCarloConfig, NetworkState, SignalModel, Simulation, StreamingData};
use nalgebra::{DMatrix, DVector};

fn illustrative_like() -> (ClusteredNetwork, SignalModel) {
    let net = ClusteredNetwork::new(
        6,
        2,
        &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)],
        &[vec![0, 1, 2], vec![3, 4, 5]],
    )
    .unwrap();
    let model = SignalModel::isotropic(
        &net,
        &[1.0, 0.9, 1.1, 1.0, 1.2, 0.8],
        &[0.02; 6],
        &[DVector::from_column_slice(&[0.5, -0.4]), DVector::from_column_slice(&[0.45, -0.35])],
    )
    .unwrap();
    (net, model)
}

#[test]
fn noise_free_lms_converges_to_machine_precision() {
    let net = ClusteredNetwork::new(3, 2, &[(0, 1), (1, 2)], &[vec![0, 1, 2]]).unwrap();
    let model = SignalModel::isotropic(&net, &[1.0; 3], &[0.0; 3], &[DVector::from_column_slice(&[1.0, -2.0])]).unwrap();
    let params = BernoulliParams::uniform(&net, 0.05, 1.0, 1.0, 1.0).unwrap();
    let cfg = MonteCarloConfig {
        horizon: 10_000,
        runs: 1,
        seed: 4,
        eta: 0.0,
        initial: None,
    };
    let curve = run_monte_carlo(&net, &model, &params, &cfg).unwrap();
    assert!(*curve.network.last().unwrap() < 1e-20);
    assert!(curve.network[1000] < curve.network[100] && curve.network[100] < curve.network[0]);
}

#[test]
fn all_on_async_equals_sync_bit_for_bit() {
    let (net, model) = illustrative_like();
    let params = BernoulliParams::uniform(&net, 0.03, 1.0, 1.0, 1.0).unwrap();
    let sync = FixedActivation(params.mean_draw());
    let init = NetworkState::zeros(net.nodes(), net.dim());
    let mut a = Simulation::new(&model, &params, 1.0, init.clone(), 21, 3).unwrap();
    let mut b = Simulation::new(&model, &sync, 1.0, init, 21, 3).unwrap();
    for _ in 0..2000 {
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.state().w, b.state().w);
    }
}

/// Plain dense diffusion LMS with `η = 0` on the same data stream.
#[test]
fn matches_reference_diffusion_lms() {
    let (net, model) = illustrative_like();
    let params = BernoulliParams::uniform(&net, 0.03, 1.0, 1.0, 1.0).unwrap();
    let a = params.mean_draw().a_matrix();
    let (n, l) = (net.nodes(), net.dim());
    let mut sim = Simulation::new(&model, &params, 0.0, NetworkState::zeros(n, l), 8, 0).unwrap();
    let mut data_rng = stream(8, 0, StreamKind::Data);
    let mut frame = model.new_frame();
    let mut w = DMatrix::<f64>::zeros(l, n);
    for _ in 0..500 {
        model.fill_frame(&mut data_rng, &mut frame);
        let mut psi = w.clone();
        for k in 0..n {
            let x = DVector::from_column_slice(&frame.regressors[k * l..(k + 1) * l]);
            let e = frame.responses[k] - x.dot(&w.column(k));
            psi.column_mut(k).axpy(0.03 * e, &x, 1.0);
        }
        w = &psi * &a;
        sim.step().unwrap();
        let got = DMatrix::from_column_slice(l, n, &sim.state().w);
        assert!((&got - &w).amax() < 1e-12);
    }
}

#[test]
fn draws_respect_stochasticity_and_sparsity() {
    let mut rng = common::rng(6);
    for _ in 0..20 {
        let net = common::random_network(&mut rng, 6, 1);
        let params = common::random_params(&mut rng, &net, 0.05);
        let mut act = stream(3, 0, StreamKind::Activation);
        for _ in 0..200 {
            let d = params.sample(&mut act);
            let (a, p) = (d.a_matrix(), d.p_matrix());
            for k in 0..net.nodes() {
                assert!((a.column(k).sum() - 1.0).abs() < 1e-14);
                assert!((p.row(k).sum() - 1.0).abs() < 1e-14);
                let view = net.neighborhood(k).unwrap();
                for l in 0..net.nodes() {
                    assert!(a[(l, k)] >= -1e-15 && p[(k, l)] >= -1e-15);
                    if a[(l, k)] != 0.0 {
                        assert!(view.intra.contains(&l));
                    }
                    if p[(k, l)] != 0.0 {
                        assert!(view.inter_with_self.contains(&l));
                    }
                }
                assert!(d.steps[k] == 0.0 || d.steps[k] == params.steps()[k]);
            }
        }
    }
}

#[test]
fn empirical_means_and_mean_graph() {
    let (net, _) = illustrative_like();
    let params = BernoulliParams::uniform(&net, 0.03, 0.7, 0.7, 0.7).unwrap();
    let ms = params.moments();
    let mut act = stream(12, 0, StreamKind::Activation);
    let draws = 100_000;
    let n = net.nodes();
    let mut mean_m = vec![0.0; n];
    let mut mean_a = DMatrix::zeros(n, n);
    let mut seen = DMatrix::<f64>::zeros(n, n);
    for _ in 0..draws {
        let d = params.sample(&mut act);
        for k in 0..n {
            mean_m[k] += d.steps[k];
        }
        let a = d.a_matrix();
        seen += a.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
        mean_a += a;
    }
    for k in 0..n {
        let est = mean_m[k] / draws as f64;
        // binomial band: μ sqrt(q(1 − q)/n)
        let band = 3.0 * 0.03 * (0.7f64 * 0.3 / draws as f64).sqrt();
        assert!((est - 0.021).abs() < band, "node {k}: {est}");
    }
    let mean_a = mean_a / draws as f64;
    assert!((&mean_a - &ms.mean_a).amax() < 5e-3);
    // union of realized neighborhoods equals the mean graph
    for l in 0..n {
        for k in 0..n {
            assert_eq!(seen[(l, k)] > 0.0, ms.mean_a[(l, k)] > 0.0);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (net, model) = illustrative_like();
    let params = BernoulliParams::uniform(&net, 0.03, 0.5, 0.5, 0.5).unwrap();
    let cfg = MonteCarloConfig {
        horizon: 300,
        runs: 12,
        seed: 77,
        eta: 1.0,
        initial: None,
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = single.install(|| run_monte_carlo(&net, &model, &params, &cfg).unwrap());
    let b = run_monte_carlo(&net, &model, &params, &cfg).unwrap();
    assert_eq!(a, b);
}
