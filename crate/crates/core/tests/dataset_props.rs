mod common;

use proptest::prelude::*;

use common::fixtures_dir;
use tradeoff_core::dataset::{load_dataset, DataFormat, DatasetError};
use tradeoff_core::fixture::{esci_csv, esci_dataset, esci_schema, FIXTURE_ITEMS, FIXTURE_QUERIES, FIXTURE_SEED};

#[test]
fn shipped_csv_matches_generator() {
    let shipped = std::fs::read_to_string(fixtures_dir().join("esci_sample.csv")).unwrap();
    assert_eq!(shipped, esci_csv(FIXTURE_QUERIES, FIXTURE_ITEMS, FIXTURE_SEED));
}

#[test]
fn shipped_config_loads() {
    let ws = common::fixture_workspace();
    assert!(ws.dataset().groups().len() >= 50);
    assert!(ws.dataset().groups().iter().all(|g| g.len() == 16));
    assert_eq!(ws.baseline(), "baseline");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip(seed in any::<u64>(), queries in 1usize..6, items in 4usize..9) {
        let table = esci_dataset(queries, items, seed);
        let again = load_dataset(table.to_csv().as_bytes(), DataFormat::Csv, esci_schema()).unwrap();
        prop_assert_eq!(&again, &table);
        prop_assert_eq!(again.content_hash(), table.content_hash());
        prop_assert_eq!(table.row_count(), queries * items);
    }

    #[test]
    fn loading_is_deterministic(seed in any::<u64>()) {
        let text = esci_csv(3, 5, seed);
        let a = load_dataset(text.as_bytes(), DataFormat::Csv, esci_schema()).unwrap();
        let b = load_dataset(text.as_bytes(), DataFormat::Csv, esci_schema()).unwrap();
        prop_assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn jsonl_matches_csv(seed in any::<u64>()) {
        let table = esci_dataset(2, 4, seed);
        let text = table.to_csv();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers().unwrap().clone();
        let numeric = ["click_probability", "purchase_probability", "review_rating", "review_count", "units_sold"];
        let mut jsonl = String::new();
        for rec in reader.records() {
            let rec = rec.unwrap();
            let mut obj = serde_json::Map::new();
            for (h, v) in headers.iter().zip(rec.iter()) {
                let value = if numeric.contains(&h) {
                    serde_json::json!(v.parse::<f64>().unwrap())
                } else {
                    serde_json::json!(v)
                };
                obj.insert(h.to_string(), value);
            }
            jsonl.push_str(&serde_json::Value::Object(obj).to_string());
            jsonl.push('\n');
        }
        let from_json = load_dataset(jsonl.as_bytes(), DataFormat::Jsonl, esci_schema()).unwrap();
        prop_assert_eq!(from_json.content_hash(), table.content_hash());
    }
}

#[test]
fn duplicate_pair_is_rejected() {
    let mut text = esci_csv(1, 4, 7);
    let first_row = text.lines().nth(1).unwrap().to_string();
    text.push_str(&first_row);
    text.push('\n');
    match load_dataset(text.as_bytes(), DataFormat::Csv, esci_schema()) {
        Err(DatasetError::DuplicatePair { line, .. }) => assert_eq!(line, 6),
        other => panic!("{other:?}"),
    }
}
