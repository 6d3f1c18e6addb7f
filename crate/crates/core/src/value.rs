//! Typed process variables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Content-addressed reference to an ingested document, e.g. `sha256:ab12…`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocRef(pub String);

impl DocRef {
    pub const PREFIX: &'static str = "sha256:";

    pub fn from_digest_hex(hex: &str) -> Self {
        DocRef(format!("{}{hex}", Self::PREFIX))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn digest_hex(&self) -> &str {
        self.0.strip_prefix(Self::PREFIX).unwrap_or(&self.0)
    }

    pub fn looks_valid(s: &str) -> bool {
        s.strip_prefix(Self::PREFIX)
            .is_some_and(|h| h.len() == 64 && h.bytes().all(|b| b.is_ascii_hexdigit()))
    }
}

impl fmt::Display for DocRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Boolean(bool),
    Integer(i64),
    Decimal(f64),
    Text(String),
    Document(DocRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Boolean,
    Integer,
    Decimal,
    Text,
    Document,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Boolean => "boolean",
            ValueType::Integer => "integer",
            ValueType::Decimal => "decimal",
            ValueType::Text => "text",
            ValueType::Document => "document",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean" | "bool" => Ok(ValueType::Boolean),
            "integer" | "int" | "long" => Ok(ValueType::Integer),
            "decimal" | "double" | "number" => Ok(ValueType::Decimal),
            "text" | "string" => Ok(ValueType::Text),
            "document" | "file" => Ok(ValueType::Document),
            other => Err(format!("unknown value type '{other}'")),
        }
    }
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Boolean(_) => ValueType::Boolean,
            Value::Integer(_) => ValueType::Integer,
            Value::Decimal(_) => ValueType::Decimal,
            Value::Text(_) => ValueType::Text,
            Value::Document(_) => ValueType::Document,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Converts to `target` where the conversion loses nothing: integers widen
    /// to decimals, and text holding a document reference becomes a document.
    pub fn coerce(self, target: ValueType) -> Result<Value, Value> {
        match (self, target) {
            (v, t) if v.value_type() == t => Ok(v),
            (Value::Integer(i), ValueType::Decimal) => Ok(Value::Decimal(i as f64)),
            (Value::Decimal(d), ValueType::Integer) if d.fract() == 0.0 && d.abs() < 9.0e15 => {
                Ok(Value::Integer(d as i64))
            }
            (Value::Text(s), ValueType::Document) if DocRef::looks_valid(&s) => {
                Ok(Value::Document(DocRef(s)))
            }
            (v, _) => Err(v),
        }
    }

    /// Parses a textual rendering under a declared type.
    pub fn parse_as(text: &str, ty: ValueType) -> Result<Value, String> {
        let t = text.trim();
        match ty {
            ValueType::Boolean => match t {
                "true" => Ok(Value::Boolean(true)),
                "false" => Ok(Value::Boolean(false)),
                _ => Err(format!("'{t}' is not a boolean")),
            },
            ValueType::Integer => t
                .parse()
                .map(Value::Integer)
                .map_err(|_| format!("'{t}' is not an integer")),
            ValueType::Decimal => t
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .map(Value::Decimal)
                .ok_or_else(|| format!("'{t}' is not a decimal")),
            ValueType::Text => Ok(Value::Text(text.to_string())),
            ValueType::Document => {
                if DocRef::looks_valid(t) {
                    Ok(Value::Document(DocRef(t.to_string())))
                } else {
                    Err(format!("'{t}' is not a document reference"))
                }
            }
        }
    }

    /// Guesses the type of an untyped literal: booleans, integers, decimals, then text.
    pub fn infer(text: &str) -> Value {
        let t = text.trim();
        match t {
            "true" => return Value::Boolean(true),
            "false" => return Value::Boolean(false),
            _ => {}
        }
        if let Ok(i) = t.parse::<i64>() {
            return Value::Integer(i);
        }
        if let Some(d) = t.parse::<f64>().ok().filter(|d| d.is_finite()) {
            return Value::Decimal(d);
        }
        if DocRef::looks_valid(t) {
            return Value::Document(DocRef(t.to_string()));
        }
        Value::Text(text.to_string())
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Boolean(b) => serde_json::Value::Bool(*b),
            Value::Integer(i) => serde_json::Value::from(*i),
            Value::Decimal(d) => serde_json::Number::from_f64(*d)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Document(d) => serde_json::Value::String(d.0.clone()),
        }
    }

    /// Plain JSON scalars map onto the closest variable type.
    pub fn from_json(json: &serde_json::Value) -> Option<Value> {
        match json {
            serde_json::Value::Bool(b) => Some(Value::Boolean(*b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Integer)
                .or_else(|| n.as_f64().map(Value::Decimal)),
            serde_json::Value::String(s) => Some(Value::Text(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d:?}"),
            Value::Text(s) => f.write_str(s),
            Value::Document(d) => write!(f, "{d}"),
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Boolean(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Integer(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Decimal(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<DocRef> for Value {
    fn from(v: DocRef) -> Self {
        Value::Document(v)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("variable names must be non-empty")]
pub struct EmptyName;

/// Name → value bindings, one per name, kept in name order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct VariableMap(BTreeMap<String, Value>);

impl<'de> Deserialize<'de> for VariableMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, Value>::deserialize(deserializer)?;
        VariableMap::try_from(map).map_err(serde::de::Error::custom)
    }
}

impl VariableMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Value>) -> Result<Option<Value>, EmptyName> {
        let name = name.into();
        if name.is_empty() {
            return Err(EmptyName);
        }
        Ok(self.0.insert(name, value.into()))
    }

    /// Builder-style insert for literals; panics on an empty name.
    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.insert(name, value).expect("non-empty variable name");
        self
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.0.remove(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: &VariableMap) {
        for (k, v) in other.iter() {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.0.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
    }
}

impl<'a> IntoIterator for &'a VariableMap {
    type Item = (&'a String, &'a Value);
    type IntoIter = std::collections::btree_map::Iter<'a, String, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for VariableMap {
    type Item = (String, Value);
    type IntoIter = std::collections::btree_map::IntoIter<String, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl TryFrom<BTreeMap<String, Value>> for VariableMap {
    type Error = EmptyName;

    fn try_from(map: BTreeMap<String, Value>) -> Result<Self, Self::Error> {
        if map.contains_key("") {
            return Err(EmptyName);
        }
        Ok(VariableMap(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serializes_with_explicit_types() {
        let vars = VariableMap::new().with("t_max", 36.2).with("rain", 6.0).with("days", 5i64);
        let json = serde_json::to_string(&vars).unwrap();
        assert_eq!(
            json,
            r#"{"days":{"type":"integer","value":5},"rain":{"type":"decimal","value":6.0},"t_max":{"type":"decimal","value":36.2}}"#
        );
        let back: VariableMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vars);
    }

    #[test]
    fn rejects_empty_names() {
        assert_eq!(VariableMap::new().insert("", true), Err(EmptyName));
        let bad = serde_json::from_str::<VariableMap>(r#"{"":{"type":"boolean","value":true}}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn coercion_widens_only() {
        assert_eq!(Value::Integer(6).coerce(ValueType::Decimal), Ok(Value::Decimal(6.0)));
        assert!(Value::Decimal(6.5).coerce(ValueType::Integer).is_err());
        assert!(Value::Text("x".into()).coerce(ValueType::Boolean).is_err());
        let digest = "a".repeat(64);
        assert_eq!(
            Value::Text(format!("sha256:{digest}")).coerce(ValueType::Document),
            Ok(Value::Document(DocRef::from_digest_hex(&digest)))
        );
    }

    #[test]
    fn infers_literal_types() {
        assert_eq!(Value::infer("true"), Value::Boolean(true));
        assert_eq!(Value::infer("35"), Value::Integer(35));
        assert_eq!(Value::infer("36.2"), Value::Decimal(36.2));
        assert_eq!(Value::infer("irrigation"), Value::Text("irrigation".into()));
    }
}
