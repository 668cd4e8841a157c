mod common;

use std::sync::Arc;

use indexmap::IndexMap;
use proptest::prelude::*;
use rand::Rng;

use common::rng;
use tradeoff_core::dataset::{load_dataset, ColumnKind, ColumnRole, ColumnSchema, DataFormat, DatasetTable, Schema};
use tradeoff_core::expr::Expr;
use tradeoff_core::fixture::esci_dataset;
use tradeoff_core::metrics::{rank_all, EvalScope};
use tradeoff_core::ranker::{
    attribute, compare_rankings, rank, score_items, ModelSpec, ObjectiveSpec, Objectives, Ranking,
};

/// Three objectives over columns a, b, c, all multiples of 1/8 so that
/// weighted sums with quarter-step weights are exact.
fn dyadic_dataset(seed: u64, queries: usize, items: usize) -> DatasetTable {
    let mut r = rng(seed);
    let mut csv = String::from("query_id,item_id,a,b,c\n");
    for q in 0..queries {
        for i in 0..items {
            let v = |r: &mut rand_chacha::ChaCha8Rng| r.random_range(-16..=16) as f64 / 8.0;
            let (a, b, c) = (v(&mut r), v(&mut r), v(&mut r));
            csv.push_str(&format!("q{q},i{i},{a},{b},{c}\n"));
        }
    }
    let schema = Schema::new(vec![
        ColumnSchema::new("query_id", ColumnKind::Categorical, ColumnRole::QueryKey),
        ColumnSchema::new("item_id", ColumnKind::Categorical, ColumnRole::ItemKey),
        ColumnSchema::new("a", ColumnKind::Numeric, ColumnRole::ItemFeature),
        ColumnSchema::new("b", ColumnKind::Numeric, ColumnRole::ItemFeature),
        ColumnSchema::new("c", ColumnKind::Numeric, ColumnRole::ItemFeature),
    ])
    .unwrap();
    load_dataset(csv.as_bytes(), DataFormat::Csv, schema).unwrap()
}

fn abc_objectives() -> Objectives {
    ["a", "b", "c"].iter().map(|c| (c.to_string(), ObjectiveSpec::new(c, Expr::column(*c)))).collect()
}

fn esci_objectives() -> Objectives {
    let mut o = Objectives::new();
    for (name, src) in [
        ("click", "click_probability"),
        ("purchase", "purchase_probability"),
        ("exact_purchase", "(esci_label == 'E') * purchase_probability"),
        ("rating", "review_rating / 5"),
    ] {
        o.insert(name.into(), ObjectiveSpec::new(name, src.parse().unwrap()));
    }
    o
}

fn order(r: &Ranking) -> Vec<Arc<str>> {
    r.items.iter().map(|i| i.item_id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contributions_sum_to_combined(seed in any::<u64>(), w in prop::collection::vec(-5.0f64..5.0, 4)) {
        let data = esci_dataset(3, 16, seed);
        let objectives = esci_objectives();
        let model = ModelSpec::from_pairs("m", objectives.keys().map(String::as_str).zip(w)).unwrap();
        for g in data.groups() {
            for item in score_items(&model, &objectives, data.schema(), g).unwrap() {
                let sum: f64 = item.components.iter().map(|c| c.contribution).sum();
                prop_assert!((sum - item.combined).abs() <= 1e-9);
                let a = attribute(&item);
                let shares: f64 = a.shares.iter().map(|s| s.share).sum();
                if a.all_zero {
                    prop_assert_eq!(shares, 0.0);
                } else {
                    prop_assert!((shares - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn positive_scaling_keeps_rankings(seed in any::<u64>(), c in 0.01f64..100.0) {
        let data = esci_dataset(8, 16, seed);
        let objectives = esci_objectives();
        let mut r = rng(seed);
        let weights: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..3.0)).collect();
        let model = ModelSpec::from_pairs("m", objectives.keys().map(String::as_str).zip(weights)).unwrap();
        let scope = EvalScope { dataset: &data, objectives: &objectives };
        let (base, _) = rank_all(&model, scope).unwrap();
        let (scaled, _) = rank_all(&model.scaled(c), scope).unwrap();
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert_eq!(order(x), order(y));
        }
    }

    #[test]
    fn raising_a_weight_never_demotes_past_weaker_items(
        seed in any::<u64>(),
        weights in prop::collection::vec(-8i32..8, 3),
        k in 0usize..3,
        bump in 1i32..8,
    ) {
        let data = dyadic_dataset(seed, 4, 10);
        let objectives = abc_objectives();
        let w: Vec<f64> = weights.iter().map(|w| *w as f64 / 4.0).collect();
        let before = ModelSpec::from_pairs("m", ["a", "b", "c"].into_iter().zip(w.iter().copied())).unwrap();
        let mut raised = w.clone();
        raised[k] += bump as f64 / 4.0;
        let after = ModelSpec::from_pairs("m", ["a", "b", "c"].into_iter().zip(raised)).unwrap();
        let obj = ["a", "b", "c"][k];
        for g in data.groups() {
            let sb = score_items(&before, &objectives, data.schema(), g).unwrap();
            let sa = score_items(&after, &objectives, data.schema(), g).unwrap();
            let (rb, ra) = (rank(g.query_id.clone(), &sb), rank(g.query_id.clone(), &sa));
            let raw = |pos: usize| sb[pos].components.iter().find(|c| c.objective == obj).unwrap().raw;
            for (i, x) in rb.items.iter().enumerate() {
                for y in &rb.items[i + 1..] {
                    if raw(x.position) >= raw(y.position) {
                        prop_assert!(ra.rank_of(&x.item_id) < ra.rank_of(&y.item_id));
                    }
                }
            }
        }
    }

    #[test]
    fn diff_is_antisymmetric(seed in any::<u64>(), w in prop::collection::vec(-3.0f64..3.0, 8)) {
        let data = esci_dataset(4, 16, seed);
        let objectives = esci_objectives();
        let names: Vec<&str> = objectives.keys().map(String::as_str).collect();
        let a = ModelSpec::from_pairs("a", names.iter().copied().zip(w[..4].iter().copied())).unwrap();
        let b = ModelSpec::from_pairs("b", names.iter().copied().zip(w[4..].iter().copied())).unwrap();
        let scope = EvalScope { dataset: &data, objectives: &objectives };
        let (ra, _) = rank_all(&a, scope).unwrap();
        let (rb, _) = rank_all(&b, scope).unwrap();
        for (x, y) in ra.iter().zip(&rb) {
            let ab = compare_rankings(x, y).unwrap();
            let ba = compare_rankings(y, x).unwrap();
            let total: i64 = ab.items.iter().map(|m| m.movement).sum();
            prop_assert_eq!(total, 0);
            for m in &ab.items {
                prop_assert_eq!(ba.movement_of(&m.item_id), Some(-m.movement));
            }
            let same = compare_rankings(x, x).unwrap();
            prop_assert!(same.items.iter().all(|m| m.movement == 0));
            prop_assert!(same.promoted.is_empty() && same.demoted.is_empty());
        }
    }

    #[test]
    fn rankings_are_permutations(seed in any::<u64>()) {
        let data = esci_dataset(4, 16, seed);
        let objectives = esci_objectives();
        let model = ModelSpec::from_pairs("m", [("click", 3.0), ("purchase", 2.0)]).unwrap();
        let (rankings, _) = rank_all(&model, EvalScope { dataset: &data, objectives: &objectives }).unwrap();
        for (g, r) in data.groups().iter().zip(&rankings) {
            let mut p: Vec<usize> = r.positions().collect();
            p.sort_unstable();
            prop_assert_eq!(p, (0..g.len()).collect::<Vec<_>>());
            prop_assert!(r.items.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }
}

#[test]
fn weights_map_keeps_term_order() {
    let m = ModelSpec::from_pairs("m", [("b", 1.0), ("a", 2.0)]).unwrap();
    let w: IndexMap<String, f64> = m.weights();
    assert_eq!(w.keys().collect::<Vec<_>>(), ["b", "a"]);
}
