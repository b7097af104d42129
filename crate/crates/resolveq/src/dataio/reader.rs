//! Path-tracking access to parsed JSON.

use std::cell::RefCell;
use std::collections::BTreeSet;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A JSON object together with its location in the document.
pub(crate) struct Obj<'a> {
    source: &'a str,
    path: String,
    map: &'a Map<String, Value>,
    used: RefCell<BTreeSet<&'a str>>,
}

/// A quantity that may be given in one of several units. Each alternative is a
/// field name and the factor that converts it to SI.
pub(crate) type Units<'u> = &'u [(&'u str, f64)];

impl<'a> Obj<'a> {
    pub fn root(source: &'a str, value: &'a Value) -> Result<Self> {
        Self::new(source, String::new(), value)
    }

    fn new(source: &'a str, path: String, value: &'a Value) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Self {
                source,
                path,
                map,
                used: RefCell::new(BTreeSet::new()),
            }),
            other => Err(Error::schema(
                source,
                display_path(&path),
                format!("expected an object, found {}", type_name(other)),
            )),
        }
    }

    pub fn path(&self) -> String {
        display_path(&self.path)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::schema(self.source, self.child_path(key), message)
    }

    fn child_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&self, key: &'a str) -> Option<&'a Value> {
        let v = self.map.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key);
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn str(&self, key: &'a str) -> Result<&'a str> {
        match self.get(key) {
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(self.error(key, format!("expected a string, found {}", type_name(other)))),
            None => Err(self.error(key, "missing field")),
        }
    }

    pub fn opt_f64(&self, key: &'a str) -> Result<Option<f64>> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n
                .as_f64()
                .map(Some)
                .ok_or_else(|| self.error(key, "number out of range")),
            Some(other) => Err(self.error(key, format!("expected a number, found {}", type_name(other)))),
        }
    }

    pub fn f64(&self, key: &'a str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| self.error(key, "missing field"))
    }

    /// The quantity in SI, if any of its unit-tagged fields is present.
    pub fn opt_quantity(&self, name: &str, units: Units<'a>) -> Result<Option<f64>> {
        let present: Vec<&(&str, f64)> = units.iter().filter(|(k, _)| self.has(k)).collect();
        match present.as_slice() {
            [] => Ok(None),
            [(key, factor)] => Ok(self.opt_f64(key)?.map(|v| v * factor)),
            many => Err(Error::schema(
                self.source,
                self.child_path(name),
                format!(
                    "give exactly one of {}",
                    many.iter().map(|(k, _)| format!("`{k}`")).collect::<Vec<_>>().join(", ")
                ),
            )),
        }
    }

    pub fn quantity(&self, name: &str, units: Units<'a>) -> Result<f64> {
        self.opt_quantity(name, units)?.ok_or_else(|| {
            Error::schema(
                self.source,
                self.child_path(name),
                format!(
                    "missing unit-tagged field, expected one of {}",
                    units.iter().map(|(k, _)| format!("`{k}`")).collect::<Vec<_>>().join(", ")
                ),
            )
        })
    }

    pub fn opt_obj(&self, key: &'a str) -> Result<Option<Obj<'a>>> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => Obj::new(self.source, self.child_path(key), v).map(Some),
        }
    }

    pub fn obj(&self, key: &'a str) -> Result<Obj<'a>> {
        self.opt_obj(key)?.ok_or_else(|| self.error(key, "missing field"))
    }

    pub fn array(&self, key: &'a str) -> Result<&'a [Value]> {
        match self.get(key) {
            Some(Value::Array(a)) => Ok(a),
            Some(other) => Err(self.error(key, format!("expected an array, found {}", type_name(other)))),
            None => Err(self.error(key, "missing field")),
        }
    }

    pub fn objects(&self, key: &'a str) -> Result<Vec<Obj<'a>>> {
        self.array(key)?
            .iter()
            .enumerate()
            .map(|(i, v)| Obj::new(self.source, format!("{}[{i}]", self.child_path(key)), v))
            .collect()
    }

    pub fn strings(&self, key: &'a str) -> Result<Vec<String>> {
        self.array(key)?
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(Error::schema(
                    self.source,
                    format!("{}[{i}]", self.child_path(key)),
                    format!("expected a string, found {}", type_name(other)),
                )),
            })
            .collect()
    }

    /// Rejects fields that were never read.
    pub fn finish(self) -> Result<()> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(k.as_str())) {
            Some(k) => Err(self.error(k, "unknown field")),
            None => Ok(()),
        }
    }
}

fn display_path(path: &str) -> String {
    if path.is_empty() {
        "$".to_string()
    } else {
        path.to_string()
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Parses JSON text, reporting syntax errors with line and column.
pub(crate) fn parse(source: &str, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        Error::schema(source, format!("line {} column {}", e.line(), e.column()), e.to_string())
    })
}
