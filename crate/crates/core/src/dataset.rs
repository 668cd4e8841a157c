//! Ranking dataset: typed columns, rows grouped by query.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expr::{self, Bindings, Expr, StaticType, TypeIssue, Value, ValueRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    QueryKey,
    ItemKey,
    QueryFeature,
    ItemFeature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn new(name: &str, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSchema { name: name.to_string(), kind, role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    QueryKey,
    ItemKey,
    Query(usize),
    Item(usize),
}

/// Validated column list with name lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    columns: Vec<ColumnSchema>,
    slots: HashMap<String, Slot>,
    query_columns: Vec<usize>,
    item_columns: Vec<usize>,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_alphabetic())
        && chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
        && !matches!(name, "and" | "or" | "not")
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Schema, DatasetError> {
        let mut slots = HashMap::new();
        let mut query_columns = Vec::new();
        let mut item_columns = Vec::new();
        let (mut qk, mut ik) = (0, 0);
        for (i, c) in columns.iter().enumerate() {
            if !valid_identifier(&c.name) {
                return Err(DatasetError::InvalidSchema(format!("invalid column name `{}`", c.name)));
            }
            let slot = match c.role {
                ColumnRole::QueryKey => {
                    qk += 1;
                    Slot::QueryKey
                }
                ColumnRole::ItemKey => {
                    ik += 1;
                    Slot::ItemKey
                }
                ColumnRole::QueryFeature => {
                    query_columns.push(i);
                    Slot::Query(query_columns.len() - 1)
                }
                ColumnRole::ItemFeature => {
                    item_columns.push(i);
                    Slot::Item(item_columns.len() - 1)
                }
            };
            if slots.insert(c.name.clone(), slot).is_some() {
                return Err(DatasetError::InvalidSchema(format!("duplicate column `{}`", c.name)));
            }
        }
        if qk != 1 || ik != 1 {
            return Err(DatasetError::InvalidSchema(format!(
                "exactly one query_key and one item_key column required (found {qk} and {ik})"
            )));
        }
        Ok(Schema { columns, slots, query_columns, item_columns })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        let slot = self.slots.get(name)?;
        let idx = match *slot {
            Slot::Query(i) => self.query_columns[i],
            Slot::Item(i) => self.item_columns[i],
            Slot::QueryKey => self.columns.iter().position(|c| c.role == ColumnRole::QueryKey)?,
            Slot::ItemKey => self.columns.iter().position(|c| c.role == ColumnRole::ItemKey)?,
        };
        self.columns.get(idx)
    }

    fn key_column(&self, role: ColumnRole) -> &ColumnSchema {
        self.columns.iter().find(|c| c.role == role).expect("schema has both keys")
    }

    pub fn query_key(&self) -> &str {
        &self.key_column(ColumnRole::QueryKey).name
    }

    pub fn item_key(&self) -> &str {
        &self.key_column(ColumnRole::ItemKey).name
    }

    /// Static expression type of a column; keys are text.
    pub fn static_type(&self, name: &str) -> Option<StaticType> {
        let c = self.column(name)?;
        Some(match (c.role, c.kind) {
            (ColumnRole::QueryKey | ColumnRole::ItemKey, _) => StaticType::Text,
            (_, ColumnKind::Numeric) => StaticType::Number,
            (_, ColumnKind::Boolean) => StaticType::Boolean,
            (_, ColumnKind::Categorical | ColumnKind::Text) => StaticType::Text,
        })
    }

    pub fn is_query_level(&self, name: &str) -> bool {
        matches!(self.slots.get(name), Some(Slot::QueryKey | Slot::Query(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRow {
    pub item_id: Arc<str>,
    values: Vec<Value>,
}

impl ItemRow {
    pub fn values(&self) -> &[Value] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: Arc<str>,
    query_values: Vec<Value>,
    pub items: Vec<ItemRow>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn query_values(&self) -> &[Value] {
        &self.query_values
    }
}

/// One item merged with its query's features.
#[derive(Clone, Copy)]
pub struct RowView<'a> {
    pub schema: &'a Schema,
    pub group: &'a QueryGroup,
    pub item: &'a ItemRow,
}

impl Bindings for RowView<'_> {
    fn lookup(&self, name: &str) -> Option<ValueRef<'_>> {
        Some(match *self.schema.slots.get(name)? {
            Slot::QueryKey => ValueRef::Text(&self.group.query_id),
            Slot::ItemKey => ValueRef::Text(&self.item.item_id),
            Slot::Query(i) => self.group.query_values[i].as_ref(),
            Slot::Item(i) => self.item.values[i].as_ref(),
        })
    }
}

/// Query-level columns only; item columns are unbound.
#[derive(Clone, Copy)]
pub struct QueryView<'a> {
    pub schema: &'a Schema,
    pub group: &'a QueryGroup,
}

impl Bindings for QueryView<'_> {
    fn lookup(&self, name: &str) -> Option<ValueRef<'_>> {
        match *self.schema.slots.get(name)? {
            Slot::QueryKey => Some(ValueRef::Text(&self.group.query_id)),
            Slot::Query(i) => Some(self.group.query_values[i].as_ref()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" | "ndjson" => Ok(DataFormat::Jsonl),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("line {line}: missing value for column `{column}`")]
    MissingColumn { line: u64, column: String },
    #[error("line {line}: duplicate (query, item) pair ({query_id}, {item_id})")]
    DuplicatePair { line: u64, query_id: String, item_id: String },
    #[error("line {line}: value `{value}` in column `{column}` is not a valid {kind:?}")]
    TypeMismatch { line: u64, column: String, value: String, kind: ColumnKind },
    #[error("line {line}: query `{query_id}` has conflicting values for query feature `{column}`")]
    InconsistentQueryFeature { line: u64, query_id: String, column: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("line {line}: {message}")]
    Decode { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable table of rows grouped by query, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    schema: Arc<Schema>,
    groups: Vec<QueryGroup>,
    row_count: usize,
    by_query: HashMap<Arc<str>, usize>,
}

impl DatasetTable {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn group(&self, query_id: &str) -> Option<&QueryGroup> {
        self.by_query.get(query_id).map(|&i| &self.groups[i])
    }

    pub fn group_index(&self, query_id: &str) -> Option<usize> {
        self.by_query.get(query_id).copied()
    }

    pub fn row<'a>(&'a self, group: &'a QueryGroup, item: &'a ItemRow) -> RowView<'a> {
        RowView { schema: &self.schema, group, item }
    }

    pub fn query_view<'a>(&'a self, group: &'a QueryGroup) -> QueryView<'a> {
        QueryView { schema: &self.schema, group }
    }

    /// CSV rendering in schema column order; reloading it yields an equal table.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let names: Vec<&str> = self.schema.columns.iter().map(|c| c.name.as_str()).collect();
        w.write_record(&names).expect("in-memory write");
        for g in &self.groups {
            for item in &g.items {
                let view = self.row(g, item);
                let record: Vec<String> = self
                    .schema
                    .columns
                    .iter()
                    .map(|c| match view.lookup(&c.name).expect("declared column") {
                        ValueRef::Text(t) => t.to_string(),
                        ValueRef::Num(n) if c.kind == ColumnKind::Boolean => {
                            (if n != 0.0 { "true" } else { "false" }).to_string()
                        }
                        ValueRef::Num(n) => format!("{n}"),
                    })
                    .collect();
                w.write_record(&record).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 input stays utf-8")
    }

    /// SHA-256 of the canonical CSV rendering, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}

struct Builder {
    schema: Arc<Schema>,
    groups: Vec<QueryGroup>,
    by_query: HashMap<Arc<str>, usize>,
    seen: HashSet<(Arc<str>, Arc<str>)>,
    interned: HashMap<String, Arc<str>>,
    rows: usize,
}

impl Builder {
    fn new(schema: Schema) -> Self {
        Builder {
            schema: Arc::new(schema),
            groups: Vec::new(),
            by_query: HashMap::new(),
            seen: HashSet::new(),
            interned: HashMap::new(),
            rows: 0,
        }
    }

    fn intern(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.interned.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.interned.insert(s.to_string(), a.clone());
        a
    }

    fn convert(&mut self, line: u64, col: &ColumnSchema, raw: &str) -> Result<Value, DatasetError> {
        let mismatch = || DatasetError::TypeMismatch {
            line,
            column: col.name.clone(),
            value: raw.to_string(),
            kind: col.kind,
        };
        match col.kind {
            ColumnKind::Numeric => match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Value::Num(v)),
                _ => Err(mismatch()),
            },
            ColumnKind::Boolean => match raw.trim().to_ascii_lowercase().as_str() {
                "true" | "1" => Ok(Value::Num(1.0)),
                "false" | "0" => Ok(Value::Num(0.0)),
                _ => Err(mismatch()),
            },
            ColumnKind::Categorical | ColumnKind::Text => Ok(Value::Text(self.intern(raw))),
        }
    }

    /// `field` returns the raw text of a column for this row, or None when absent.
    fn push_row(&mut self, line: u64, field: impl Fn(&str) -> Option<String>) -> Result<(), DatasetError> {
        let schema = self.schema.clone();
        let mut query_id = None;
        let mut item_id = None;
        let mut query_values = Vec::with_capacity(schema.query_columns.len());
        let mut item_values = Vec::with_capacity(schema.item_columns.len());
        for col in &schema.columns {
            let raw = field(&col.name)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| DatasetError::MissingColumn { line, column: col.name.clone() })?;
            match col.role {
                ColumnRole::QueryKey => query_id = Some(self.intern(&raw)),
                ColumnRole::ItemKey => item_id = Some(self.intern(&raw)),
                ColumnRole::QueryFeature => query_values.push(self.convert(line, col, &raw)?),
                ColumnRole::ItemFeature => item_values.push(self.convert(line, col, &raw)?),
            }
        }
        let (query_id, item_id) = (query_id.expect("query key"), item_id.expect("item key"));
        if !self.seen.insert((query_id.clone(), item_id.clone())) {
            return Err(DatasetError::DuplicatePair {
                line,
                query_id: query_id.to_string(),
                item_id: item_id.to_string(),
            });
        }
        let gi = match self.by_query.get(&query_id) {
            Some(&gi) => {
                let g = &self.groups[gi];
                if let Some(pos) = g.query_values.iter().zip(&query_values).position(|(a, b)| a != b) {
                    return Err(DatasetError::InconsistentQueryFeature {
                        line,
                        query_id: query_id.to_string(),
                        column: schema.columns[schema.query_columns[pos]].name.clone(),
                    });
                }
                gi
            }
            None => {
                self.groups.push(QueryGroup {
                    query_id: query_id.clone(),
                    query_values,
                    items: Vec::new(),
                });
                self.by_query.insert(query_id, self.groups.len() - 1);
                self.groups.len() - 1
            }
        };
        self.groups[gi].items.push(ItemRow { item_id, values: item_values });
        self.rows += 1;
        Ok(())
    }

    fn finish(self) -> Result<DatasetTable, DatasetError> {
        if self.rows == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        Ok(DatasetTable {
            schema: self.schema,
            groups: self.groups,
            row_count: self.rows,
            by_query: self.by_query,
        })
    }
}

/// Reads a whole dataset. Rows of one query are gathered into one group
/// (first-appearance order of queries, file order within a group).
pub fn load_dataset(
    mut source: impl Read,
    format: DataFormat,
    schema: Schema,
) -> Result<DatasetTable, DatasetError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| DatasetError::Decode {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut builder = Builder::new(schema);
    match format {
        DataFormat::Csv => load_csv(&text, &mut builder)?,
        DataFormat::Jsonl => load_jsonl(&text, &mut builder)?,
    }
    builder.finish()
}

fn load_csv(text: &str, builder: &mut Builder) -> Result<(), DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Decode { line: 1, message: e.to_string() })?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    for c in &builder.schema.clone().columns {
        if !index.contains_key(c.name.as_str()) {
            return Err(DatasetError::MissingColumn { line: 1, column: c.name.clone() });
        }
    }
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Decode {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        builder.push_row(line, |name| record.get(index[name]).map(str::to_string))?;
    }
    Ok(())
}

fn load_jsonl(text: &str, builder: &mut Builder) -> Result<(), DatasetError> {
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(raw).map_err(|e| DatasetError::Decode { line, message: e.to_string() })?;
        builder.push_row(line, |name| match obj.get(name)? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Bool(b) => Some(b.to_string()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            other => Some(other.to_string()),
        })?;
    }
    Ok(())
}

/// Which columns an expression may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Item and query columns (objectives, metric expressions).
    Item,
    /// Query-level columns only (slice predicates).
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExprIssues {
    pub index: usize,
    pub expr: String,
    pub issues: Vec<String>,
}

/// Per-expression unknown-column and type-misuse findings. Empty iff every
/// reference resolves and every expression is well typed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ExprIssues>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().flat_map(|e| e.issues.iter().map(String::as_str))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "`{}`: {}", e.expr, e.issues.join(", "))?;
        }
        Ok(())
    }
}

pub fn validate_references(dataset: &DatasetTable, exprs: &[Expr]) -> ValidationReport {
    validate_in_scope(dataset.schema(), exprs, Scope::Item)
}

pub fn validate_in_scope(schema: &Schema, exprs: &[Expr], scope: Scope) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (index, e) in exprs.iter().enumerate() {
        let mut issues: Vec<String> = expr::check(e, &|name| schema.static_type(name))
            .iter()
            .map(TypeIssue::to_string)
            .collect();
        if scope == Scope::Query {
            for c in e.columns() {
                if schema.column(c).is_some() && !schema.is_query_level(c) {
                    issues.push(format!("item-level column `{c}` in a query-level expression"));
                }
            }
        }
        if !issues.is_empty() {
            report.entries.push(ExprIssues { index, expr: e.to_string(), issues });
        }
    }
    report
}
