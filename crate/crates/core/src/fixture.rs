//! Deterministic synthetic ESCI-style ranking data.
//!
//! Every query gets the same item count. The first two queries are the
//! anecdote queries `30 quart coolers` and `uconn hoodie`; the coolers
//! query is planted so that its two top items under the reference weights
//! are non-exact matches that an exact-match boost pushes down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{load_dataset, ColumnKind, ColumnRole, ColumnSchema, DataFormat, DatasetTable, Schema};

pub const COOLERS_QUERY: &str = "q000";
pub const HOODIE_QUERY: &str = "q001";
pub const FIXTURE_SEED: u64 = 20_240_517;
pub const FIXTURE_QUERIES: usize = 60;
pub const FIXTURE_ITEMS: usize = 16;

pub fn esci_columns() -> Vec<ColumnSchema> {
    use ColumnKind::*;
    use ColumnRole::*;
    vec![
        ColumnSchema::new("query_id", Categorical, QueryKey),
        ColumnSchema::new("item_id", Categorical, ItemKey),
        ColumnSchema::new("query_text", Text, QueryFeature),
        ColumnSchema::new("esci_label", Categorical, ItemFeature),
        ColumnSchema::new("click_probability", Numeric, ItemFeature),
        ColumnSchema::new("purchase_probability", Numeric, ItemFeature),
        ColumnSchema::new("review_rating", Numeric, ItemFeature),
        ColumnSchema::new("review_count", Numeric, ItemFeature),
        ColumnSchema::new("units_sold", Numeric, ItemFeature),
    ]
}

pub fn esci_schema() -> Schema {
    Schema::new(esci_columns()).expect("static schema is valid")
}

const QUANTITY_QUERIES: &[&str] = &[
    "12 pack sparkling water",
    "64 oz water bottle",
    "100 count vitamin d",
    "6 pack paper towels",
    "32 oz protein powder",
    "48 count coffee pods",
    "20 quart stock pot",
    "24 pack aa batteries",
    "16 oz cold brew",
    "3 pack phone chargers",
];

const PLAIN_QUERIES: &[&str] = &[
    "wireless earbuds",
    "yoga mat",
    "standing desk",
    "running shoes women",
    "cast iron skillet",
    "bluetooth speaker",
    "air fryer",
    "mechanical keyboard",
    "hiking backpack",
    "led desk lamp",
    "dog bed large",
    "office chair",
    "noise cancelling headphones",
    "electric toothbrush",
    "rain jacket men",
];

#[derive(Clone, Copy)]
struct Item {
    label: char,
    click: f64,
    purchase: f64,
    rating: f64,
    reviews: f64,
    units: f64,
}

fn round(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

// Reference weights: click 3, purchase 2, exact_purchase 0.2 (1.5 in the
// candidate), popular_purchase 0.3 with popularity = units_sold >= 1000.
fn coolers(items: usize, rng: &mut ChaCha8Rng) -> Vec<(String, Item)> {
    let planted = [
        // baseline 1.66 -> candidate 1.66
        ("coolers_54qt_rolling", Item { label: 'S', click: 0.40, purchase: 0.20, rating: 4.6, reviews: 2100.0, units: 5400.0 }),
        // baseline 1.52 -> candidate 1.52
        ("coolers_45qt_marine", Item { label: 'S', click: 0.38, purchase: 0.19, rating: 4.4, reviews: 880.0, units: 900.0 }),
        // baseline 1.47 -> candidate 1.704
        ("coolers_30qt_hardside", Item { label: 'E', click: 0.34, purchase: 0.18, rating: 4.5, reviews: 640.0, units: 1500.0 }),
        // baseline 1.364 -> candidate 1.585
        ("coolers_30qt_wheeled", Item { label: 'E', click: 0.33, purchase: 0.17, rating: 4.2, reviews: 310.0, units: 700.0 }),
    ];
    let mut out: Vec<(String, Item)> = planted.iter().map(|(id, it)| (id.to_string(), *it)).collect();
    for i in planted.len()..items {
        let exact = i % 3 == 0;
        let purchase = round(rng.random_range(0.02..0.12), 3);
        out.push((
            format!("coolers_{i:02}"),
            Item {
                label: if exact { 'E' } else { ['S', 'C', 'I'][i % 3] },
                click: round(purchase * rng.random_range(1.4..2.0), 3),
                purchase,
                rating: round(rng.random_range(3.0..5.0), 1),
                reviews: rng.random_range(0..1500) as f64,
                units: rng.random_range(0..3000) as f64,
            },
        ));
    }
    out
}

fn generic(prefix: &str, items: usize, hoodie: bool, rng: &mut ChaCha8Rng) -> Vec<(String, Item)> {
    (0..items)
        .map(|i| {
            let u: f64 = rng.random();
            let label = match u {
                u if u < 0.45 => 'E',
                u if u < 0.75 => 'S',
                u if u < 0.90 => 'C',
                _ => 'I',
            };
            // Substitutes skew toward higher purchase rates, so favoring exact
            // matches trades away purchase-based NDCG.
            let lift = match label {
                'S' => 1.35,
                'C' => 0.9,
                'I' => 0.5,
                _ => 0.85,
            };
            let purchase = round((rng.random_range(0.02f64..0.25) * lift).min(0.95), 3);
            let click = round((purchase * rng.random_range(1.5f64..2.2) + rng.random_range(0.0f64..0.03)).min(0.99), 3);
            let units = (purchase * rng.random_range(2000.0..12000.0)).round();
            let mut rating = round(rng.random_range(2.5..5.0), 1);
            if hoodie && i < 5 {
                // anecdote: poorly rated items near the top
                rating = round(rng.random_range(1.5..3.0), 1);
            }
            (
                format!("{prefix}_i{i:02}"),
                Item {
                    label,
                    click,
                    purchase,
                    rating,
                    reviews: (units * rng.random_range(0.05..0.4)).round(),
                    units,
                },
            )
        })
        .collect()
}

/// CSV text with header `query_id,item_id,query_text,esci_label,...`.
pub fn esci_csv(queries: usize, items_per_query: usize, seed: u64) -> String {
    assert!(items_per_query >= 4, "the planted query needs at least four items");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = esci_columns().into_iter().map(|c| c.name).collect();
    w.write_record(&header).expect("in-memory write");
    let (mut quantity, mut plain) = (0usize, 0usize);
    let next_text = |pool: &[&str], counter: &mut usize| {
        let (i, n) = (*counter % pool.len(), *counter / pool.len());
        *counter += 1;
        if n == 0 {
            pool[i].to_string()
        } else {
            format!("{} v{}", pool[i], n + 1)
        }
    };
    for q in 0..queries {
        let qid = format!("q{q:03}");
        let (text, items) = match q {
            0 => ("30 quart coolers".to_string(), coolers(items_per_query, &mut rng)),
            1 => ("uconn hoodie".to_string(), generic(&qid, items_per_query, true, &mut rng)),
            _ => {
                let text = if q % 3 == 0 {
                    next_text(QUANTITY_QUERIES, &mut quantity)
                } else {
                    next_text(PLAIN_QUERIES, &mut plain)
                };
                (text, generic(&qid, items_per_query, false, &mut rng))
            }
        };
        for (id, it) in items {
            w.write_record([
                qid.clone(),
                id,
                text.clone(),
                it.label.to_string(),
                format!("{}", it.click),
                format!("{}", it.purchase),
                format!("{}", it.rating),
                format!("{}", it.reviews),
                format!("{}", it.units),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn esci_dataset(queries: usize, items_per_query: usize, seed: u64) -> DatasetTable {
    load_dataset(esci_csv(queries, items_per_query, seed).as_bytes(), DataFormat::Csv, esci_schema())
        .expect("generated data is valid")
}

/// The shipped 60 × 16 fixture.
pub fn shipped_dataset() -> DatasetTable {
    esci_dataset(FIXTURE_QUERIES, FIXTURE_ITEMS, FIXTURE_SEED)
}
