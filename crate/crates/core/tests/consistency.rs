use ffst::chain::{build_coupling_matrix, make_uniform_spec, sample_disorder, DisorderKind, DisorderModel, Distribution};
use ffst::fermion::{end_to_end_amplitude, plan_transfer, propagator};
use ffst::oracle::protocols::{encoded_transfer, single_transfer_channel, Ensemble};
use ffst::oracle::{Evolver, SpinHamiltonian};

fn disordered(n: usize, g: f64, seed: u64) -> ffst::chain::ChainSpec {
    let model = DisorderModel { kind: DisorderKind::Both, distribution: Distribution::GaussianRelative, strength: 0.25, seed };
    sample_disorder(&make_uniform_spec(n, 1.0, g, 0.0).unwrap(), &model, 3).unwrap()
}

#[test]
fn single_excitation_matches_propagator() {
    for (n, seed) in [(3, 1), (6, 2), (9, 3)] {
        let spec = disordered(n, 0.2, seed);
        let k = build_coupling_matrix(&spec).unwrap();
        let ham = SpinHamiltonian::from_couplings(&k, 16).unwrap();
        let t = 7.3;
        let psi = Evolver::new(&ham).evolve_basis(1, t).unwrap();
        let u = propagator(&k, t).unwrap();
        for j in 0..n + 2 {
            assert!((psi[1 << j] - u[(j, 0)]).norm() < 1e-11, "N={n} site {j}");
        }
    }
}

#[test]
fn krylov_and_dense_sectors_agree() {
    let spec = disordered(9, 0.3, 8);
    let ham = SpinHamiltonian::from_couplings(&build_coupling_matrix(&spec).unwrap(), 16).unwrap();
    let dense = Evolver::new(&ham);
    let krylov = Evolver::with_dense_limit(&ham, 0);
    for state in [1u32, 0b10_1010_0101, 0b00_1100_0110] {
        let a = dense.evolve_basis(state, 12.5).unwrap();
        let b = krylov.evolve_basis(state, 12.5).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{state:b}: {err:e}");
    }
}

#[test]
fn sampled_ensemble_brackets_exhaustive() {
    let spec = make_uniform_spec(5, 1.0, 0.05, 0.0).unwrap();
    let (_, plan) = plan_transfer(&spec).unwrap();
    let exact = single_transfer_channel(&spec, 0.6 * plan.tau, Ensemble::Exhaustive).unwrap();
    let est = single_transfer_channel(&spec, 0.6 * plan.tau, Ensemble::Sampled { count: 400, seed: 12 }).unwrap();
    let se = est.standard_error.unwrap();
    assert!(se > 0.0);
    assert!((est.average_fidelity - exact.average_fidelity).abs() < 4.0 * se + 1e-12);
}

#[test]
fn planned_time_only_fits_its_own_coupling() {
    let spec = make_uniform_spec(5, 1.0, 0.005, 0.0).unwrap();
    let (_, plan) = plan_transfer(&spec).unwrap();
    let amp = end_to_end_amplitude(&propagator(&build_coupling_matrix(&spec).unwrap(), plan.tau).unwrap());
    assert!(amp.norm() > 0.999);
    let enc = encoded_transfer(&spec.with_ends(0.02, 0.02), plan.tau, Ensemble::Sampled { count: 8, seed: 1 }).unwrap();
    // τ planned for g = 0.005 is wrong for g = 0.02
    assert!(enc.average_fidelity < 0.9);
}
