//! Closed-form map registry: rebuilds serialized `{name, params}` encoder and
//! decoder documents.

use serde_json::Value;

use crate::envs::gridworld::{rotation_decoder, GridWorldFamily};
use crate::error::{Error, Result};
use crate::reduction::{FiniteMap, MapFn};

fn param_u64(params: &Value, key: &str) -> Result<u64> {
    params
        .get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Serde(format!("closed-form params missing '{key}'")))
}

/// Resolve a registered closed-form map name. Known names:
/// `identity` (params: size), `rot_action_mod4` (params: k), and
/// `rot90_obs` (params: n, m, k, layout_seed — rebuilds the gridworld
/// observation universe to materialize the table).
pub fn resolve_map(name: &str, params: &Value) -> Result<FiniteMap> {
    match name {
        "identity" => {
            let size = param_u64(params, "size")? as usize;
            Ok(FiniteMap::identity(size))
        }
        "rot_action_mod4" => {
            let k = param_u64(params, "k")? as usize;
            match rotation_decoder(k).map {
                MapFn::Finite(m) => Ok(m),
                MapFn::Neural { .. } => unreachable!("rotation decoders are tabular"),
            }
        }
        "rot90_obs" => {
            let n = param_u64(params, "n")? as i32;
            let m = param_u64(params, "m")? as usize;
            let k = param_u64(params, "k")? as usize;
            let layout_seed = param_u64(params, "layout_seed")?;
            let family = GridWorldFamily::build(n, m, layout_seed, 64)?;
            match family.rotation_encoder(k)?.map {
                MapFn::Finite(map) => Ok(map),
                MapFn::Neural { .. } => unreachable!("rotation encoders are tabular"),
            }
        }
        other => Err(Error::Serde(format!("unknown closed-form map '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_round_trip_through_registry() {
        let family = GridWorldFamily::build(2, 0, 0, 64).unwrap();
        let enc = family.rotation_encoder(1).unwrap();
        let original = match &enc.map {
            MapFn::Finite(m) => m.clone(),
            _ => panic!(),
        };
        let json = original.to_json();
        assert_eq!(json.get("name").and_then(Value::as_str), Some("rot90_obs"));
        let rebuilt = FiniteMap::from_json(&json, &resolve_map).unwrap();
        assert!(original.extensionally_equal(&rebuilt));

        let dec = rotation_decoder(3);
        let original = match &dec.map {
            MapFn::Finite(m) => m.clone(),
            _ => panic!(),
        };
        let rebuilt = FiniteMap::from_json(&original.to_json(), &resolve_map).unwrap();
        assert!(original.extensionally_equal(&rebuilt));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(resolve_map("mystery", &Value::Null).is_err());
    }
}
