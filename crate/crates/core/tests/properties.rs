use proptest::prelude::*;

use itemrank::derivability::mine_andi;
use itemrank::rank::rank_normalized;
use itemrank::{canonical_family, parse_dense, parse_fimi, Dataset, FamilyKind, Itemset, ItemsetFamily, ModelKind, SolverConfig};

fn dataset() -> impl Strategy<Value = Dataset> {
    (2usize..=5, 1usize..=40).prop_flat_map(|(k, m)| {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), k), m)
            .prop_map(|rows| Dataset::from_bool_rows(&rows))
    })
}

fn flip_all(d: &Dataset) -> Dataset {
    let rows: Vec<Vec<bool>> = (0..d.n_rows()).map(|r| d.row(r).iter().map(|b| !b).collect()).collect();
    Dataset::from_bool_rows(&rows)
}

fn reverse_columns(d: &Dataset) -> Dataset {
    let rows: Vec<Vec<bool>> = (0..d.n_rows())
        .map(|r| d.row(r).into_iter().rev().collect())
        .collect();
    Dataset::from_bool_rows(&rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_ranks_are_probabilities(d in dataset()) {
        let cfg = SolverConfig::default();
        let g = Itemset::range(d.n_attrs());
        for model in ModelKind::ALL {
            let r = rank_normalized(&g, model, &d, &cfg).unwrap();
            prop_assert!(r.raw >= 0.0);
            prop_assert!((0.0..=1.0).contains(&r.normalized));
            prop_assert!(r.dof >= 1);
        }
    }

    #[test]
    fn raw_rank_ignores_bit_flips(d in dataset()) {
        // Flipping every value maps each model's constraints onto an
        // equivalent set, so the divergence is unchanged.
        let cfg = SolverConfig::default();
        let flipped = flip_all(&d);
        let g = Itemset::range(d.n_attrs());
        for model in [ModelKind::Ind, ModelKind::Cov, ModelKind::All, ModelKind::Tree] {
            let a = rank_normalized(&g, model, &d, &cfg).unwrap().raw;
            let b = rank_normalized(&g, model, &flipped, &cfg).unwrap().raw;
            prop_assert!((a - b).abs() <= 1e-7, "{model}: {a} vs {b}");
        }
    }

    #[test]
    fn raw_rank_ignores_attribute_order(d in dataset()) {
        let cfg = SolverConfig::default();
        let rev = reverse_columns(&d);
        let g = Itemset::range(d.n_attrs());
        for kind in [FamilyKind::Independence, FamilyKind::Covariance, FamilyKind::AllSubsets] {
            let a = itemrank::rank::rank_raw(&g, &canonical_family(kind, &g, &d), &d, &cfg).unwrap();
            let b = itemrank::rank::rank_raw(&g, &canonical_family(kind, &g, &rev), &rev, &cfg).unwrap();
            prop_assert!((a - b).abs() <= 1e-7, "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn mined_families_are_downward_closed(d in dataset(), n in 0u64..4) {
        let f = mine_andi(&d, n, 4);
        prop_assert!(f.is_downward_closed());
        let back = ItemsetFamily::parse(&f.to_text(&d), &d).unwrap();
        prop_assert_eq!(back.len(), f.len());
        for x in f.iter() {
            prop_assert_eq!(back.frequency(x), f.frequency(x));
        }
    }

    #[test]
    fn text_formats_round_trip(d in dataset()) {
        prop_assert_eq!(parse_dense(&d.to_dense()).unwrap().to_dense(), d.to_dense());
        let sparse = parse_fimi(&d.to_fimi()).unwrap();
        for x in (1u64..1 << d.n_attrs()).map(Itemset::from_mask) {
            if x.max_attr().unwrap() < sparse.n_attrs() as u32 {
                prop_assert_eq!(sparse.count(&x), d.count(&x));
            }
        }
    }
}

#[test]
fn greedy_family_never_ranks_above_independence() {
    let cfg = SolverConfig::default();
    let d = itemrank::synth::gen_copy(&itemrank::synth::GenConfig::new(6, 400, 5));
    for mask in 1u64..64 {
        let g = Itemset::from_mask(mask);
        let i = rank_normalized(&g, ModelKind::Ind, &d, &cfg).unwrap();
        let f = rank_normalized(&g, ModelKind::Greedy, &d, &cfg).unwrap();
        assert!(f.normalized <= i.normalized, "{g:?}");
        assert!(f.family.len() >= g.len().min(i.family.len()));
    }
}
