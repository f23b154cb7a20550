//! Canonical data model for retail planning instances.
//!
//! Instances arrive as JSON records (see [`ScenarioInstance::from_value`]) and are
//! validated once into an immutable, index-aligned representation: every
//! per-product vector follows `products` order and every per-location vector
//! follows `locations` order. Periods are 1-indexed in the model and 0-indexed in
//! the stored arrays.

use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

/// Tolerance on `Σ demand_share = 1`.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("schema error at `{field}`: {reason}")]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SchemaError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("period {period} outside 1..={periods}")]
    Period { period: usize, periods: usize },
    #[error("unknown product `{0}`")]
    Product(String),
    #[error("unknown location `{0}`")]
    Location(String),
}

/// A limit that is either switched off or carries a value.
///
/// `Active(0.0)` is a real constraint (e.g. zero waste allowed), distinct from
/// `Inactive`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Limit {
    #[default]
    Inactive,
    Active(f64),
}

impl Limit {
    pub fn value(self) -> Option<f64> {
        match self {
            Limit::Inactive => None,
            Limit::Active(v) => Some(v),
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Limit::Active(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costs {
    pub purchasing: Vec<f64>,
    pub inventory: Vec<f64>,
    pub waste: Vec<f64>,
    pub lost_sales: Vec<f64>,
    pub fixed_order: f64,
    pub transshipment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingRules {
    pub moq: f64,
    pub pack_size: u32,
    pub budget_per_period: Limit,
    pub waste_limit_pct: Limit,
}

impl Default for OrderingRules {
    fn default() -> Self {
        OrderingRules {
            moq: 0.0,
            pack_size: 1,
            budget_per_period: Limit::Inactive,
            waste_limit_pct: Limit::Inactive,
        }
    }
}

/// Directed edges, stored as indices into `products` / `locations`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub sub_edges: Vec<(usize, usize)>,
    pub trans_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioInstance {
    pub name: String,
    pub description: String,
    pub periods: usize,
    pub products: Vec<String>,
    pub locations: Vec<String>,
    pub shelf_life: Vec<u32>,
    pub lead_time: Vec<u32>,
    /// `[product][period - 1]`
    pub demand_curve: Vec<Vec<f64>>,
    pub demand_share: Vec<f64>,
    /// `[product][period - 1]`
    pub production_cap: Vec<Vec<f64>>,
    pub cold_capacity: Vec<f64>,
    pub cold_usage: Vec<f64>,
    /// `[location][period - 1]`
    pub labor_cap: Vec<Vec<f64>>,
    pub labor_usage: Vec<f64>,
    pub return_rate: Vec<f64>,
    pub costs: Costs,
    pub constraints: OrderingRules,
    pub network: Network,
}

/// Substitution neighborhoods of one product.
///
/// `outgoing` holds products whose inventory may serve this product's demand;
/// `incoming` holds products whose demand this product's inventory may serve.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Neighbors {
    pub outgoing: Vec<usize>,
    pub incoming: Vec<usize>,
}

impl ScenarioInstance {
    /// Parse and validate a JSON instance document.
    pub fn from_json_str(text: &str) -> Result<Self, SchemaError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| SchemaError::new("<document>", format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    /// Validate a generic record into an instance.
    ///
    /// Missing `constraints` or `network` objects (or any of their members) fall
    /// back to the inactive defaults; every other field is required.
    pub fn from_value(raw: &Value) -> Result<Self, SchemaError> {
        let root = raw
            .as_object()
            .ok_or_else(|| SchemaError::new("<document>", "expected a JSON object"))?;

        let name = req_str(root, "name")?;
        let description = match root.get("description") {
            None | Some(Value::Null) => String::new(),
            Some(v) => v
                .as_str()
                .ok_or_else(|| SchemaError::new("description", "expected a string"))?
                .to_string(),
        };
        let periods = req_uint(root, "periods")?;
        if periods == 0 {
            return Err(SchemaError::new("periods", "must be positive"));
        }
        let products = id_list(root, "products")?;
        let locations = id_list(root, "locations")?;

        let shelf_life = keyed(root, "shelf_life", &products, |f, v| {
            let n = as_uint(f, v)?;
            if n < 1 {
                return Err(SchemaError::new(f, "shelf life must be at least 1"));
            }
            u32::try_from(n).map_err(|_| SchemaError::new(f, "too large"))
        })?;
        let lead_time = keyed(root, "lead_time", &products, |f, v| {
            u32::try_from(as_uint(f, v)?).map_err(|_| SchemaError::new(f, "too large"))
        })?;
        let demand_curve = keyed(root, "demand_curve", &products, |f, v| {
            series(f, v, periods)
        })?;
        let demand_share = keyed(root, "demand_share", &locations, |f, v| {
            let s = as_nonneg(f, v)?;
            if s > 1.0 {
                return Err(SchemaError::new(f, "share must lie in [0, 1]"));
            }
            Ok(s)
        })?;
        let share_sum: f64 = demand_share.iter().sum();
        if (share_sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
            return Err(SchemaError::new(
                "demand_share",
                format!("shares sum to {share_sum}, expected 1"),
            ));
        }
        let production_cap = keyed(root, "production_cap", &products, |f, v| {
            series(f, v, periods)
        })?;
        let cold_capacity = keyed(root, "cold_capacity", &locations, as_nonneg)?;
        let cold_usage = keyed(root, "cold_usage", &products, as_nonneg)?;
        let labor_cap = keyed(root, "labor_cap", &locations, |f, v| series(f, v, periods))?;
        let labor_usage = keyed(root, "labor_usage", &products, as_nonneg)?;
        let return_rate = keyed(root, "return_rate", &products, |f, v| {
            let r = as_nonneg(f, v)?;
            if r >= 1.0 {
                return Err(SchemaError::new(f, "return rate must lie in [0, 1)"));
            }
            Ok(r)
        })?;

        let costs_obj = root
            .get("costs")
            .ok_or_else(|| SchemaError::new("costs", "missing"))?
            .as_object()
            .ok_or_else(|| SchemaError::new("costs", "expected an object"))?;
        let costs = Costs {
            purchasing: keyed_in(costs_obj, "costs.purchasing", "purchasing", &products, as_nonneg)?,
            inventory: keyed_in(costs_obj, "costs.inventory", "inventory", &products, as_nonneg)?,
            waste: keyed_in(costs_obj, "costs.waste", "waste", &products, as_nonneg)?,
            lost_sales: keyed_in(costs_obj, "costs.lost_sales", "lost_sales", &products, as_nonneg)?,
            fixed_order: scalar_or(costs_obj, "costs.fixed_order", "fixed_order", 0.0)?,
            transshipment: scalar_or(costs_obj, "costs.transshipment", "transshipment", 0.0)?,
        };

        let constraints = match root.get("constraints") {
            None | Some(Value::Null) => OrderingRules::default(),
            Some(Value::Object(c)) => {
                let pack = match c.get("pack_size") {
                    None | Some(Value::Null) => 1,
                    Some(v) => as_uint("constraints.pack_size", v)?,
                };
                if pack < 1 {
                    return Err(SchemaError::new("constraints.pack_size", "must be at least 1"));
                }
                OrderingRules {
                    moq: scalar_or(c, "constraints.moq", "moq", 0.0)?,
                    pack_size: u32::try_from(pack)
                        .map_err(|_| SchemaError::new("constraints.pack_size", "too large"))?,
                    budget_per_period: limit(c, "constraints.budget_per_period", "budget_per_period")?,
                    waste_limit_pct: limit(c, "constraints.waste_limit_pct", "waste_limit_pct")?,
                }
            }
            Some(_) => return Err(SchemaError::new("constraints", "expected an object")),
        };

        let network = match root.get("network") {
            None | Some(Value::Null) => Network::default(),
            Some(Value::Object(n)) => Network {
                sub_edges: edges(n, "network.sub_edges", "sub_edges", &products)?,
                trans_edges: edges(n, "network.trans_edges", "trans_edges", &locations)?,
            },
            Some(_) => return Err(SchemaError::new("network", "expected an object")),
        };

        Ok(ScenarioInstance {
            name,
            description,
            periods,
            products,
            locations,
            shelf_life,
            lead_time,
            demand_curve,
            demand_share,
            production_cap,
            cold_capacity,
            cold_usage,
            labor_cap,
            labor_usage,
            return_rate,
            costs,
            constraints,
            network,
        })
    }

    /// Re-run validation on an instance built or modified in code.
    pub fn validated(self) -> Result<Self, SchemaError> {
        Self::from_value(&self.to_value())
    }

    /// Emit the instance as a JSON record in canonical field order.
    ///
    /// Integral reals are written as JSON integers.
    pub fn to_value(&self) -> Value {
        let per_product = |xs: &[f64]| -> Value {
            Value::Object(
                self.products
                    .iter()
                    .zip(xs)
                    .map(|(p, &x)| (p.clone(), num(x)))
                    .collect(),
            )
        };
        let per_location = |xs: &[f64]| -> Value {
            Value::Object(
                self.locations
                    .iter()
                    .zip(xs)
                    .map(|(l, &x)| (l.clone(), num(x)))
                    .collect(),
            )
        };
        let series_map = |keys: &[String], rows: &[Vec<f64>]| -> Value {
            Value::Object(
                keys.iter()
                    .zip(rows)
                    .map(|(k, row)| (k.clone(), Value::Array(row.iter().map(|&x| num(x)).collect())))
                    .collect(),
            )
        };
        let ints = |xs: &[u32]| -> Value {
            Value::Object(
                self.products
                    .iter()
                    .zip(xs)
                    .map(|(p, &x)| (p.clone(), Value::from(x)))
                    .collect(),
            )
        };
        let edge_list = |edges: &[(usize, usize)], names: &[String]| -> Value {
            Value::Array(
                edges
                    .iter()
                    .map(|&(a, b)| Value::Array(vec![names[a].clone().into(), names[b].clone().into()]))
                    .collect(),
            )
        };
        let limit_value = |l: Limit| match l {
            Limit::Inactive => Value::Null,
            Limit::Active(v) => num(v),
        };

        let mut costs = Map::new();
        costs.insert("lost_sales".into(), per_product(&self.costs.lost_sales));
        costs.insert("inventory".into(), per_product(&self.costs.inventory));
        costs.insert("waste".into(), per_product(&self.costs.waste));
        costs.insert("fixed_order".into(), num(self.costs.fixed_order));
        costs.insert("transshipment".into(), num(self.costs.transshipment));
        costs.insert("purchasing".into(), per_product(&self.costs.purchasing));

        let mut constraints = Map::new();
        constraints.insert("moq".into(), num(self.constraints.moq));
        constraints.insert("pack_size".into(), Value::from(self.constraints.pack_size));
        constraints.insert(
            "budget_per_period".into(),
            limit_value(self.constraints.budget_per_period),
        );
        constraints.insert(
            "waste_limit_pct".into(),
            limit_value(self.constraints.waste_limit_pct),
        );

        let mut network = Map::new();
        network.insert(
            "sub_edges".into(),
            edge_list(&self.network.sub_edges, &self.products),
        );
        network.insert(
            "trans_edges".into(),
            edge_list(&self.network.trans_edges, &self.locations),
        );

        let mut root = Map::new();
        root.insert("name".into(), self.name.clone().into());
        root.insert("description".into(), self.description.clone().into());
        root.insert("periods".into(), Value::from(self.periods));
        root.insert(
            "products".into(),
            Value::Array(self.products.iter().cloned().map(Value::from).collect()),
        );
        root.insert(
            "locations".into(),
            Value::Array(self.locations.iter().cloned().map(Value::from).collect()),
        );
        root.insert("shelf_life".into(), ints(&self.shelf_life));
        root.insert("lead_time".into(), ints(&self.lead_time));
        root.insert("cold_capacity".into(), per_location(&self.cold_capacity));
        root.insert("cold_usage".into(), per_product(&self.cold_usage));
        root.insert(
            "production_cap".into(),
            series_map(&self.products, &self.production_cap),
        );
        root.insert("labor_cap".into(), series_map(&self.locations, &self.labor_cap));
        root.insert("labor_usage".into(), per_product(&self.labor_usage));
        root.insert("return_rate".into(), per_product(&self.return_rate));
        root.insert(
            "demand_curve".into(),
            series_map(&self.products, &self.demand_curve),
        );
        root.insert("demand_share".into(), per_location(&self.demand_share));
        root.insert("costs".into(), Value::Object(costs));
        root.insert("constraints".into(), Value::Object(constraints));
        root.insert("network".into(), Value::Object(network));
        Value::Object(root)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn product_index(&self, product: &str) -> Result<usize, IndexError> {
        self.products
            .iter()
            .position(|p| p == product)
            .ok_or_else(|| IndexError::Product(product.to_string()))
    }

    pub fn location_index(&self, location: &str) -> Result<usize, IndexError> {
        self.locations
            .iter()
            .position(|l| l == location)
            .ok_or_else(|| IndexError::Location(location.to_string()))
    }

    /// Demand of product `p` at location `l` in 1-indexed period `t`.
    pub fn demand(&self, p: usize, l: usize, t: usize) -> Result<f64, IndexError> {
        if t == 0 || t > self.periods {
            return Err(IndexError::Period {
                period: t,
                periods: self.periods,
            });
        }
        Ok(self.demand_curve[p][t - 1] * self.demand_share[l])
    }

    /// Name-based variant of [`ScenarioInstance::demand`].
    pub fn demand_at(&self, product: &str, location: &str, t: usize) -> Result<f64, IndexError> {
        let p = self.product_index(product)?;
        let l = self.location_index(location)?;
        self.demand(p, l, t)
    }

    pub fn substitution_neighbors(&self, p: usize) -> Neighbors {
        let mut n = Neighbors::default();
        for &(from, to) in &self.network.sub_edges {
            if from == p && !n.outgoing.contains(&to) {
                n.outgoing.push(to);
            }
            if to == p && !n.incoming.contains(&from) {
                n.incoming.push(from);
            }
        }
        n
    }

    /// Total demand over all products, locations and periods.
    pub fn total_demand(&self) -> f64 {
        let share: f64 = self.demand_share.iter().sum();
        self.demand_curve.iter().flatten().sum::<f64>() * share
    }
}

impl fmt::Display for ScenarioInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (T={}, {} products, {} locations)",
            self.name,
            self.periods,
            self.products.len(),
            self.locations.len()
        )
    }
}

/// JSON number for a real, using an integer literal when the value is integral.
pub(crate) fn num(x: f64) -> Value {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::from(x as i64)
    } else {
        serde_json::Number::from_f64(x)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

fn req_str(root: &Map<String, Value>, key: &str) -> Result<String, SchemaError> {
    root.get(key)
        .ok_or_else(|| SchemaError::new(key, "missing"))?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| SchemaError::new(key, "expected a string"))
}

fn req_uint(root: &Map<String, Value>, key: &str) -> Result<usize, SchemaError> {
    let v = root.get(key).ok_or_else(|| SchemaError::new(key, "missing"))?;
    as_uint(key, v).map(|n| n as usize)
}

fn as_uint(field: &str, v: &Value) -> Result<u64, SchemaError> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    match v.as_f64() {
        Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(x as u64),
        _ => Err(SchemaError::new(field, "expected a non-negative integer")),
    }
}

fn as_nonneg(field: &str, v: &Value) -> Result<f64, SchemaError> {
    match v.as_f64() {
        Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Some(_) => Err(SchemaError::new(field, "expected a non-negative number")),
        None => Err(SchemaError::new(field, "expected a number")),
    }
}

fn series(field: &str, v: &Value, periods: usize) -> Result<Vec<f64>, SchemaError> {
    let arr = v
        .as_array()
        .ok_or_else(|| SchemaError::new(field, "expected an array"))?;
    if arr.len() != periods {
        return Err(SchemaError::new(
            field,
            format!("expected {periods} entries, found {}", arr.len()),
        ));
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_nonneg(&format!("{field}[{i}]"), x))
        .collect()
}

fn id_list(root: &Map<String, Value>, key: &str) -> Result<Vec<String>, SchemaError> {
    let arr = root
        .get(key)
        .ok_or_else(|| SchemaError::new(key, "missing"))?
        .as_array()
        .ok_or_else(|| SchemaError::new(key, "expected an array of strings"))?;
    if arr.is_empty() {
        return Err(SchemaError::new(key, "must not be empty"));
    }
    let mut out: Vec<String> = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        let s = v
            .as_str()
            .ok_or_else(|| SchemaError::new(format!("{key}[{i}]"), "expected a string"))?;
        if out.iter().any(|o| o == s) {
            return Err(SchemaError::new(key, format!("duplicate identifier `{s}`")));
        }
        out.push(s.to_string());
    }
    Ok(out)
}

fn keyed<T>(
    root: &Map<String, Value>,
    key: &str,
    ids: &[String],
    parse: impl Fn(&str, &Value) -> Result<T, SchemaError>,
) -> Result<Vec<T>, SchemaError> {
    keyed_in(root, key, key, ids, parse)
}

fn keyed_in<T>(
    obj: &Map<String, Value>,
    field: &str,
    key: &str,
    ids: &[String],
    parse: impl Fn(&str, &Value) -> Result<T, SchemaError>,
) -> Result<Vec<T>, SchemaError> {
    let map = obj
        .get(key)
        .ok_or_else(|| SchemaError::new(field, "missing"))?
        .as_object()
        .ok_or_else(|| SchemaError::new(field, "expected an object keyed by identifier"))?;
    for k in map.keys() {
        if !ids.iter().any(|id| id == k) {
            return Err(SchemaError::new(field, format!("unknown identifier `{k}`")));
        }
    }
    ids.iter()
        .map(|id| {
            let f = format!("{field}.{id}");
            let v = map
                .get(id)
                .ok_or_else(|| SchemaError::new(&f, "missing"))?;
            parse(&f, v)
        })
        .collect()
}

fn scalar_or(
    obj: &Map<String, Value>,
    field: &str,
    key: &str,
    default: f64,
) -> Result<f64, SchemaError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => as_nonneg(field, v),
    }
}

fn limit(obj: &Map<String, Value>, field: &str, key: &str) -> Result<Limit, SchemaError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Limit::Inactive),
        Some(v) => as_nonneg(field, v).map(Limit::Active),
    }
}

fn edges(
    obj: &Map<String, Value>,
    field: &str,
    key: &str,
    ids: &[String],
) -> Result<Vec<(usize, usize)>, SchemaError> {
    let arr = match obj.get(key) {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(a)) => a,
        Some(_) => return Err(SchemaError::new(field, "expected an array of pairs")),
    };
    let lookup = |f: &str, v: &Value| -> Result<usize, SchemaError> {
        let s = v.as_str().ok_or_else(|| SchemaError::new(f, "expected a string"))?;
        ids.iter()
            .position(|id| id == s)
            .ok_or_else(|| SchemaError::new(f, format!("unknown identifier `{s}`")))
    };
    arr.iter()
        .enumerate()
        .map(|(i, e)| {
            let f = format!("{field}[{i}]");
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| SchemaError::new(&f, "expected a [from, to] pair"))?;
            let a = lookup(&f, &pair[0])?;
            let b = lookup(&f, &pair[1])?;
            if a == b {
                return Err(SchemaError::new(&f, "self-loop"));
            }
            Ok((a, b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::base_scenario;
    use proptest::prelude::*;

    #[test]
    fn base_record_validates() {
        let base = base_scenario();
        let parsed = ScenarioInstance::from_value(&base.to_value()).unwrap();
        assert_eq!(parsed.periods, 20);
        assert_eq!(parsed.products.len(), 3);
        assert_eq!(parsed.locations.len(), 5);
        assert_eq!(parsed, base);
    }

    #[test]
    fn share_sum_off_is_rejected() {
        let mut v = base_scenario().to_value();
        v["demand_share"]["DC1"] = serde_json::json!(0.15);
        let err = ScenarioInstance::from_value(&v).unwrap_err();
        assert_eq!(err.field, "demand_share");
    }

    #[test]
    fn missing_network_defaults_to_empty() {
        let mut v = base_scenario().to_value();
        v.as_object_mut().unwrap().remove("network");
        let inst = ScenarioInstance::from_value(&v).unwrap();
        assert!(inst.network.sub_edges.is_empty());
        assert!(inst.network.trans_edges.is_empty());
    }

    #[test]
    fn missing_constraints_default_to_inactive() {
        let mut v = base_scenario().to_value();
        v.as_object_mut().unwrap().remove("constraints");
        let inst = ScenarioInstance::from_value(&v).unwrap();
        assert_eq!(inst.constraints, OrderingRules::default());
        assert!(!inst.constraints.waste_limit_pct.is_active());
    }

    #[test]
    fn zero_waste_limit_is_active() {
        let mut v = base_scenario().to_value();
        v["constraints"]["waste_limit_pct"] = serde_json::json!(0);
        let inst = ScenarioInstance::from_value(&v).unwrap();
        assert_eq!(inst.constraints.waste_limit_pct, Limit::Active(0.0));
    }

    #[test]
    fn wrong_arity_names_the_array() {
        let mut v = base_scenario().to_value();
        v["demand_curve"]["SKU_Premium"].as_array_mut().unwrap().pop();
        let err = ScenarioInstance::from_value(&v).unwrap_err();
        assert_eq!(err.field, "demand_curve.SKU_Premium");
        assert!(err.reason.contains("20"));
    }

    #[test]
    fn unknown_edge_endpoint_and_self_loop_rejected() {
        let mut v = base_scenario().to_value();
        v["network"]["sub_edges"] = serde_json::json!([["SKU_Basic", "SKU_Nope"]]);
        assert!(ScenarioInstance::from_value(&v).is_err());
        v["network"]["sub_edges"] = serde_json::json!([["SKU_Basic", "SKU_Basic"]]);
        let err = ScenarioInstance::from_value(&v).unwrap_err();
        assert!(err.reason.contains("self-loop"));
    }

    #[test]
    fn shelf_life_zero_rejected() {
        let mut v = base_scenario().to_value();
        v["shelf_life"]["SKU_Basic"] = serde_json::json!(0);
        assert_eq!(
            ScenarioInstance::from_value(&v).unwrap_err().field,
            "shelf_life.SKU_Basic"
        );
    }

    #[test]
    fn demand_indexing_is_one_based() {
        let base = base_scenario();
        assert_eq!(base.demand_at("SKU_Basic", "DC1", 1).unwrap(), 75.75);
        assert_eq!(base.demand_at("SKU_Basic", "DC1", 11).unwrap(), 325.0);
        assert!(matches!(
            base.demand_at("SKU_Basic", "DC1", 0),
            Err(IndexError::Period { .. })
        ));
        assert!(base.demand_at("SKU_Basic", "DC1", 21).is_err());
    }

    #[test]
    fn zero_share_location_has_zero_demand() {
        let mut inst = base_scenario();
        inst.demand_share = vec![0.25, 0.2, 0.2, 0.35, 0.0];
        let inst = inst.validated().unwrap();
        for t in 1..=inst.periods {
            assert_eq!(inst.demand(0, 4, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn upward_substitution_neighbors() {
        let base = base_scenario();
        let basic = base.product_index("SKU_Basic").unwrap();
        let premium = base.product_index("SKU_Premium").unwrap();
        let n = base.substitution_neighbors(basic);
        assert_eq!(n.outgoing, vec![premium]);
        assert!(n.incoming.is_empty());
        let n = base.substitution_neighbors(premium);
        assert!(n.outgoing.is_empty());
        assert_eq!(n.incoming, vec![basic]);

        let mut no_sub = base.clone();
        no_sub.network.sub_edges.clear();
        for p in 0..no_sub.products.len() {
            assert_eq!(no_sub.substitution_neighbors(p), Neighbors::default());
        }
    }

    fn arb_instance() -> impl Strategy<Value = ScenarioInstance> {
        (
            prop::collection::vec(0u32..2000, 20 * 3),
            prop::collection::vec(0.0f64..1.0, 5),
            prop::collection::vec((0usize..3, 0usize..3), 0..4),
        )
            .prop_map(|(demand, raw_share, edges)| {
                let mut inst = base_scenario();
                for (p, row) in inst.demand_curve.iter_mut().enumerate() {
                    for (t, d) in row.iter_mut().enumerate() {
                        *d = demand[p * 20 + t] as f64;
                    }
                }
                let total: f64 = raw_share.iter().sum::<f64>() + 1e-3;
                let mut share: Vec<f64> = raw_share.iter().map(|s| s / total).collect();
                let rest = 1.0 - share[..4].iter().sum::<f64>();
                share[4] = rest.max(0.0);
                inst.demand_share = share;
                inst.network.sub_edges = edges.into_iter().filter(|(a, b)| a != b).collect();
                inst
            })
    }

    proptest! {
        #[test]
        fn revalidation_is_idempotent(inst in arb_instance()) {
            if let Ok(once) = ScenarioInstance::from_value(&inst.to_value()) {
                let twice = ScenarioInstance::from_value(&once.to_value()).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn shares_partition_demand(inst in arb_instance()) {
            if let Ok(inst) = inst.validated() {
                for p in 0..inst.products.len() {
                    for t in 1..=inst.periods {
                        let total: f64 = (0..inst.locations.len())
                            .map(|l| inst.demand(p, l, t).unwrap())
                            .sum();
                        let d = inst.demand_curve[p][t - 1];
                        prop_assert!((total - d).abs() <= 1e-9 * d.max(1.0));
                    }
                }
            }
        }

        #[test]
        fn neighbor_sets_are_mirrored(inst in arb_instance()) {
            for p in 0..inst.products.len() {
                for &q in &inst.substitution_neighbors(p).outgoing {
                    prop_assert!(inst.substitution_neighbors(q).incoming.contains(&p));
                }
                for &q in &inst.substitution_neighbors(p).incoming {
                    prop_assert!(inst.substitution_neighbors(q).outgoing.contains(&p));
                }
            }
        }
    }
}
