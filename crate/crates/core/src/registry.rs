// SPDX-License-Identifier: Apache-2.0

//! Name-keyed factories for trait-object strategies.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{CoreError, Result};

type Factory<T> = Box<dyn Fn(&Value) -> Result<Box<T>> + Send + Sync>;

/// Maps strategy names to constructors taking JSON parameters.
///
/// Names are kept sorted so listings are deterministic.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&Value) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(params),
            None => Err(CoreError::UnknownStrategy {
                kind: self.kind,
                name: name.to_owned(),
                available: self.names().join(", "),
            }),
        }
    }
}

/// Reads an optional non-negative integer field from a parameter object.
pub(crate) fn param_u64(params: &Value, key: &str, default: u64) -> Result<u64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v.as_u64().ok_or_else(|| {
            CoreError::InvalidArgument(format!("`{key}` must be a non-negative integer"))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    trait Shape {
        fn area(&self) -> f64;
    }

    struct Square(f64);

    impl Shape for Square {
        fn area(&self) -> f64 {
            self.0 * self.0
        }
    }

    #[test]
    fn builds_registered_strategy() {
        let mut reg: Registry<dyn Shape> = Registry::new("shape");
        reg.register("square", |p| {
            Ok(Box::new(Square(param_u64(p, "side", 1)? as f64)))
        });
        let s = reg.build("square", &json!({"side": 3})).unwrap();
        assert_eq!(s.area(), 9.0);
        assert!(reg.contains("square"));
        assert!(reg.build("square", &json!({"side": -1})).is_err());
    }

    #[test]
    fn unknown_name_lists_available() {
        let mut reg: Registry<dyn Shape> = Registry::new("shape");
        reg.register("square", |_| Ok(Box::new(Square(1.0))));
        match reg.build("circle", &Value::Null) {
            Err(CoreError::UnknownStrategy { available, .. }) => assert_eq!(available, "square"),
            _ => panic!("expected UnknownStrategy"),
        }
    }
}
