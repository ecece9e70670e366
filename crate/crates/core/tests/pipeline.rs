use clab_core::corrector::{covariance_sigma, solve_corrector, SolverOptions};
use clab_core::env::{self, sample_iid_nn, sample_lrp, LrpParams, Marginal};
use clab_core::Geometry;
use proptest::prelude::*;

fn sorted_edges(e: &clab_core::Environment) -> Vec<(usize, usize, u64)> {
    let mut v: Vec<_> = e.edges().map(|(x, y, c)| (x, y, c.to_bits())).collect();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // storage is lossless, conductances included bit for bit
    #[test]
    fn save_load_round_trip(seed in 0u64..1000, s in 2.5f64..6.0) {
        let g = Geometry::new(2, 12).unwrap();
        let e = sample_lrp(&LrpParams { s, beta: 1.0 }, &g, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (header, _) = env::save(&e, dir.path(), "env").unwrap();
        let back = env::load(&header).unwrap();
        prop_assert_eq!(sorted_edges(&e), sorted_edges(&back));
        prop_assert_eq!(e.pi(), back.pi());
    }

    #[test]
    fn same_seed_same_environment(seed in 0u64..1000) {
        let g = Geometry::new(3, 6).unwrap();
        let law = Marginal::Uniform { lo: 0.5, hi: 3.0 };
        let a = sample_iid_nn(&law, &g, seed).unwrap();
        let b = sample_iid_nn(&law, &g, seed).unwrap();
        prop_assert_eq!(sorted_edges(&a), sorted_edges(&b));
    }
}

#[test]
fn corrector_from_reloaded_env() {
    let g = Geometry::new(2, 16).unwrap();
    let e = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (header, _) = env::save(&e, dir.path(), "env").unwrap();
    let back = env::load(&header).unwrap();

    let opts = SolverOptions::default();
    let chi = solve_corrector(&back, &opts).unwrap();
    assert_eq!(chi.at(g.origin()), &[0.0, 0.0]);
    assert!(chi.residual <= opts.tol * chi.scale);

    let sigma = covariance_sigma(&back, &chi).unwrap();
    assert!(sigma.max_asymmetry() < 1e-12);
    assert!(sigma.min_eigenvalue() > 0.0);
    // the same solve on the original environment gives the same field
    let direct = solve_corrector(&e, &opts).unwrap();
    assert_eq!(direct.chi, chi.chi);
}
