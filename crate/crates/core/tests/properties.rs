use crackfem::config::RunConfig;
use crackfem::io::{read_vector_csv, write_vector_csv};
use crackfem::layouts::Layout;
use crackfem::partition::{build_strategy, PartitionPlan, Strategy};
use crackfem::pipeline::build_problem;
use crackfem::solver::asm::dense_asm_matrix;
use crackfem::solver::ordering::{rcm, reorder, Ordering};
use crackfem::solver::{AsmPreconditioner, FactorMethod, Preconditioner, SubsolverSpec};
use crackfem::sparse::{read_matrix_market, CsrMatrix};
use proptest::prelude::*;

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

fn random_spd(n: usize, edges: &[(usize, usize, f64)]) -> CsrMatrix {
    let mut t = Vec::new();
    let mut diag = vec![1.0; n];
    for &(a, b, w) in edges {
        let (a, b) = (a % n, b % n);
        if a == b {
            continue;
        }
        t.push((a, b, -w));
        t.push((b, a, -w));
        diag[a] += w;
        diag[b] += w;
    }
    for (i, d) in diag.into_iter().enumerate() {
        t.push((i, i, d));
    }
    CsrMatrix::from_triplets(n, &t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vector_csv_round_trips(v in prop::collection::vec(-1e300f64..1e300, 0..64)) {
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, &v).unwrap();
        prop_assert_eq!(read_vector_csv(&buf[..]).unwrap(), v);
    }

    #[test]
    fn matrix_market_round_trips(n in 1usize..30, edges in prop::collection::vec((0usize..30, 0usize..30, 0.01f64..5.0), 0..60)) {
        let k = random_spd(n, &edges);
        let mut buf = Vec::new();
        k.write_matrix_market(&mut buf).unwrap();
        let back = read_matrix_market(&buf[..]).unwrap();
        prop_assert_eq!(back.n, k.n);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(back.get(i, j), k.get(i, j));
            }
        }
    }

    #[test]
    fn orderings_are_permutations(n in 1usize..40, edges in prop::collection::vec((0usize..40, 0usize..40, 0.1f64..1.0), 0..80)) {
        let k = random_spd(n, &edges);
        prop_assert!(is_permutation(&rcm(&k), n));
        for o in [Ordering::Natural, Ordering::Rcm, Ordering::NestedDissection] {
            prop_assert!(is_permutation(&reorder(&k, o), n));
        }
    }

    #[test]
    fn config_round_trips(nx in 3usize..500, workers in 1usize..64, dreg in 0usize..8, dtip in 0usize..12, enr in 1usize..5, layout in 0usize..4) {
        let layouts = [Layout::Edge, Layout::Branch3, Layout::Grid16, Layout::AppendixA];
        let mut c = RunConfig::for_layout(layouts[layout], nx);
        c.solver.workers = workers;
        c.solver.delta_reg = dreg;
        c.solver.delta_tip = dtip;
        c.enrichment.enr = enr;
        let s = c.to_toml_string();
        let back = RunConfig::from_toml_str(&s).unwrap();
        prop_assert_eq!(back.to_toml_string(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every DOF is in some core, and S2 keeps branch DOFs out of regular
    /// subdomains.
    #[test]
    fn partitions_cover_all_dofs(nx in 12usize..30, workers in 1usize..10, dreg in 0usize..4, dtip in 0usize..5, s in 0usize..3) {
        let strategy = [Strategy::S0, Strategy::S1, Strategy::S2][s];
        let c = RunConfig::for_layout(Layout::Edge, nx);
        let p = build_problem(&c).unwrap();
        let plan = PartitionPlan { strategy, workers, delta_reg: dreg, delta_tip: dtip };
        let subs = build_strategy(&p.mesh, &p.map, &p.dofmap, &p.system.k, &plan).unwrap();
        let mut covered = vec![false; p.dofmap.n];
        for sd in &subs {
            for &d in &sd.core {
                covered[d] = true;
            }
            prop_assert!(sd.core.iter().all(|d| sd.dofs.binary_search(d).is_ok()));
        }
        prop_assert!(covered.iter().all(|&c| c));
    }

    /// The ASM operator is symmetric and matches the dense sum of local inverses.
    #[test]
    fn asm_apply_matches_dense_oracle(nx in 8usize..14, workers in 1usize..6, x in prop::collection::vec(-1.0f64..1.0, 2000)) {
        let c = RunConfig::for_layout(Layout::Edge, nx);
        let p = build_problem(&c).unwrap();
        let plan = PartitionPlan { strategy: Strategy::S2, workers, delta_reg: 1, delta_tip: 2 };
        let subs = build_strategy(&p.mesh, &p.map, &p.dofmap, &p.system.k, &plan).unwrap();
        let k = &p.system.k;
        let n = k.n;
        let dense = dense_asm_matrix(k, &subs).unwrap();
        let spec = SubsolverSpec { regular: FactorMethod::Cholesky, tip: FactorMethod::Cholesky, ordering: Ordering::Rcm };
        let m = AsmPreconditioner::build(k, subs, &spec).unwrap();
        let xs: Vec<f64> = x.iter().cycle().take(n).copied().collect();
        let mut y = vec![0.0; n];
        m.apply(&xs, &mut y);
        let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            let want: f64 = (0..n).map(|j| dense[i][j] * xs[j]).sum();
            prop_assert!((y[i] - want).abs() <= 1e-8 * scale, "row {}: {} vs {}", i, y[i], want);
            for j in 0..i {
                prop_assert!((dense[i][j] - dense[j][i]).abs() <= 1e-8 * (1.0 + dense[i][i].abs()));
            }
        }
    }
}

/// Corpus seeds of the fuzz targets must parse.
#[test]
fn fuzz_corpus_seeds_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for entry in std::fs::read_dir(root.join("matrix_market")).unwrap() {
        let data = std::fs::read(entry.unwrap().path()).unwrap();
        read_matrix_market(&data[..]).unwrap();
    }
    for entry in std::fs::read_dir(root.join("vector_csv")).unwrap() {
        let data = std::fs::read(entry.unwrap().path()).unwrap();
        read_vector_csv(&data[..]).unwrap();
    }
    for entry in std::fs::read_dir(root.join("config")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let ok = RunConfig::from_toml_str(&text).is_ok();
        assert_eq!(ok, !path.to_string_lossy().contains("bad_"), "{}", path.display());
    }
}
