use serde_json::{json, Value};

use crate::diffnet::MlpNet;
use crate::error::{Error, Result};
use crate::taskcore::{argmax_lowest, featurize, tanh_scale, Elem, Space};

/// Provenance of a finite map: a raw table or a registered closed form (the
/// table is materialized either way, so evaluation and equality are uniform).
#[derive(Debug, Clone, PartialEq)]
pub enum MapForm {
    Tabular,
    Named { name: String, params: Value },
}

/// A total function between finite index spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMap {
    pub domain_size: usize,
    pub codomain_size: usize,
    pub table: Vec<usize>,
    pub form: MapForm,
}

impl FiniteMap {
    pub fn from_table(table: Vec<usize>, codomain_size: usize) -> Result<Self> {
        if let Some(&bad) = table.iter().find(|&&v| v >= codomain_size) {
            return Err(Error::Config(format!(
                "map entry {bad} out of codomain size {codomain_size}"
            )));
        }
        Ok(FiniteMap { domain_size: table.len(), codomain_size, table, form: MapForm::Tabular })
    }

    pub fn named(table: Vec<usize>, codomain_size: usize, name: &str, params: Value) -> Result<Self> {
        let mut m = Self::from_table(table, codomain_size)?;
        m.form = MapForm::Named { name: name.to_string(), params };
        Ok(m)
    }

    pub fn identity(size: usize) -> Self {
        FiniteMap {
            domain_size: size,
            codomain_size: size,
            table: (0..size).collect(),
            form: MapForm::Named { name: "identity".into(), params: json!({ "size": size }) },
        }
    }

    pub fn apply(&self, index: usize) -> Result<usize> {
        self.table
            .get(index)
            .copied()
            .ok_or_else(|| Error::Config(format!("index {index} outside map domain {}", self.domain_size)))
    }

    pub fn is_identity(&self) -> bool {
        self.domain_size == self.codomain_size && self.table.iter().enumerate().all(|(i, &v)| v == i)
    }

    /// Extensional equality on finite domains: same table.
    pub fn extensionally_equal(&self, other: &FiniteMap) -> bool {
        self.domain_size == other.domain_size
            && self.codomain_size == other.codomain_size
            && self.table == other.table
    }

    /// `self` after `inner`: (self ∘ inner)(x) = self(inner(x)).
    pub fn compose_after(&self, inner: &FiniteMap) -> Result<FiniteMap> {
        if inner.codomain_size != self.domain_size {
            return Err(Error::Config(format!(
                "cannot compose: inner codomain {} vs outer domain {}",
                inner.codomain_size, self.domain_size
            )));
        }
        let table: Vec<usize> = inner.table.iter().map(|&v| self.table[v]).collect();
        FiniteMap::from_table(table, self.codomain_size)
    }

    /// Tabular maps serialize as `{domain_size, codomain_size, table}`,
    /// closed-form maps as `{name, params}`.
    pub fn to_json(&self) -> Value {
        match &self.form {
            MapForm::Tabular => json!({
                "domain_size": self.domain_size,
                "codomain_size": self.codomain_size,
                "table": self.table,
            }),
            MapForm::Named { name, params } => json!({ "name": name, "params": params }),
        }
    }

    /// Parse the JSON forms above. Closed-form documents are rebuilt through
    /// `resolve`, the registry hook mapping (name, params) to a map.
    pub fn from_json(
        value: &Value,
        resolve: &dyn Fn(&str, &Value) -> Result<FiniteMap>,
    ) -> Result<FiniteMap> {
        if let Some(name) = value.get("name").and_then(Value::as_str) {
            let params = value.get("params").cloned().unwrap_or(Value::Null);
            return resolve(name, &params);
        }
        let domain_size = value
            .get("domain_size")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Serde("map json missing domain_size".into()))? as usize;
        let codomain_size = value
            .get("codomain_size")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Serde("map json missing codomain_size".into()))? as usize;
        let table: Vec<usize> = value
            .get("table")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Serde("map json missing table".into()))?
            .iter()
            .map(|v| v.as_u64().map(|u| u as usize).ok_or_else(|| Error::Serde("bad table entry".into())))
            .collect::<Result<_>>()?;
        if table.len() != domain_size {
            return Err(Error::Serde("table length does not match domain_size".into()));
        }
        FiniteMap::from_table(table, codomain_size)
    }
}

/// A map between spaces: a finite table or a neural function.
#[derive(Debug, Clone)]
pub enum MapFn {
    Finite(FiniteMap),
    Neural { net: MlpNet, domain: Space, codomain: Space },
}

impl MapFn {
    pub fn domain(&self) -> Space {
        match self {
            MapFn::Finite(m) => Space::Finite { size: m.domain_size },
            MapFn::Neural { domain, .. } => domain.clone(),
        }
    }

    pub fn codomain(&self) -> Space {
        match self {
            MapFn::Finite(m) => Space::Finite { size: m.codomain_size },
            MapFn::Neural { codomain, .. } => codomain.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MapFn::Finite(_))
    }

    pub fn apply(&self, x: &Elem) -> Result<Elem> {
        match self {
            MapFn::Finite(m) => Ok(Elem::Discrete(m.apply(x.index()?)?)),
            MapFn::Neural { net, domain, codomain } => {
                let features = featurize(domain, x)?;
                let out = net.forward(&features)?;
                match codomain {
                    Space::Finite { .. } => Ok(Elem::Discrete(argmax_lowest(&out))),
                    Space::Box { lower, upper, .. } => {
                        Ok(Elem::Vector(tanh_scale(&out, lower, upper)))
                    }
                }
            }
        }
    }
}

/// Encoder h: O1 -> O2, wrapping a task-2 policy's input.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub map: MapFn,
}

/// Decoder g: A2 -> A1, unwrapping a task-2 policy's output.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub map: MapFn,
}

impl Encoder {
    pub fn finite(map: FiniteMap) -> Self {
        Encoder { map: MapFn::Finite(map) }
    }

    pub fn identity(size: usize) -> Self {
        Encoder::finite(FiniteMap::identity(size))
    }

    pub fn apply(&self, obs: &Elem) -> Result<Elem> {
        self.map.apply(obs)
    }
}

impl Decoder {
    pub fn finite(map: FiniteMap) -> Self {
        Decoder { map: MapFn::Finite(map) }
    }

    pub fn identity(size: usize) -> Self {
        Decoder::finite(FiniteMap::identity(size))
    }

    pub fn apply(&self, action: &Elem) -> Result<Elem> {
        self.map.apply(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_table() {
        let f = FiniteMap::from_table(vec![1, 2, 0], 3).unwrap(); // B -> C
        let g = FiniteMap::from_table(vec![2, 0], 3).unwrap(); // A -> B
        let fg = f.compose_after(&g).unwrap();
        assert_eq!(fg.table, vec![0, 1]);
    }

    #[test]
    fn identity_detection() {
        assert!(FiniteMap::identity(4).is_identity());
        assert!(!FiniteMap::from_table(vec![1, 0], 2).unwrap().is_identity());
    }

    #[test]
    fn tabular_json_round_trip() {
        let m = FiniteMap::from_table(vec![2, 0, 1], 3).unwrap();
        let j = m.to_json();
        let no_registry = |name: &str, _: &Value| -> Result<FiniteMap> {
            Err(Error::Serde(format!("unknown closed form {name}")))
        };
        let back = FiniteMap::from_json(&j, &no_registry).unwrap();
        assert!(m.extensionally_equal(&back));
    }

    #[test]
    fn named_json_goes_through_registry() {
        let m = FiniteMap::identity(3);
        let j = m.to_json();
        assert_eq!(j.get("name").and_then(Value::as_str), Some("identity"));
        let resolve = |name: &str, params: &Value| -> Result<FiniteMap> {
            assert_eq!(name, "identity");
            let size = params.get("size").and_then(Value::as_u64).unwrap() as usize;
            Ok(FiniteMap::identity(size))
        };
        let back = FiniteMap::from_json(&j, &resolve).unwrap();
        assert!(m.extensionally_equal(&back));
    }
}
