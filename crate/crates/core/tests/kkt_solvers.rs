mod common;

use bendflow::kkt::{kernel_basis, orthonormal_complement, solve_reduced, NullspaceMap, SolverOptions, Strategy};
use bendflow::Exec;
use common::{dense_kkt_oracle, max_abs, max_abs_diff, random_instance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight(strategy: Strategy) -> SolverOptions {
    SolverOptions { tol: 1e-14, ..SolverOptions::with_strategy(strategy) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn all_strategies_match_dense_oracle(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let oracle = dense_kkt_oracle(&inst);
        let map = NullspaceMap::build(inst.set.clone(), &inst.fixed, Exec::Serial).unwrap();
        for s in Strategy::ALL {
            let out = solve_reduced(&inst.a, &map, &inst.f, tight(s)).unwrap();
            let err = max_abs_diff(&out.x, &oracle) / max_abs(&oracle).max(1.0);
            prop_assert!(err < 1e-9, "{}: {err:e}", s.name());
        }
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_annihilated(
        seed in any::<u64>(), l in 2usize..7, m_frac in 0.0f64..1.0
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + ((l - 1) as f64 * m_frac) as usize % (l - 1);
        let b: Vec<f64> = (0..m * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = kernel_basis(&b, m, l).unwrap();
        let k = l - m;
        for i in 0..k {
            for j in 0..k {
                let d: f64 = (0..l).map(|r| c[i * l + r] * c[j * l + r]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - target).abs() < 1e-13);
            }
            for row in 0..m {
                let d: f64 = (0..l).map(|r| b[row * l + r] * c[i * l + r]).sum();
                prop_assert!(d.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn complement_of_single_row(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        prop_assume!(x * x + y * y + z * z > 1e-6);
        let b = [x, y, z];
        let cols = orthonormal_complement(&b).unwrap();
        prop_assert_eq!(cols.len(), 2);
        for c in &cols {
            let dot: f64 = c.iter().zip(&b).map(|(p, q)| p * q).sum();
            let nrm: f64 = c.iter().map(|p| p * p).sum();
            prop_assert!(dot.abs() < 1e-13 && (nrm - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn parallel_map_matches_serial() {
    let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(5));
    let a = NullspaceMap::build(inst.set.clone(), &inst.fixed, Exec::Serial).unwrap();
    let b = NullspaceMap::build(inst.set.clone(), &inst.fixed, Exec::Parallel).unwrap();
    assert_eq!(a.to_csr().to_dense(), b.to_csr().to_dense());
}

#[test]
fn rank_deficient_block_rejected() {
    let mut set = bendflow::kkt::NodalConstraintSet::new(3);
    set.push(vec![0, 1, 2], 2, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0]).unwrap();
    let err = NullspaceMap::build(set, &[false; 3], Exec::Serial).unwrap_err();
    assert!(matches!(err, bendflow::Error::RankDeficient { block: 0 }));
}
