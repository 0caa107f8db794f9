use crate::error::{Error, Result};
use crate::reduction::maps::{Decoder, Encoder, FiniteMap, MapFn};

/// Architecture descriptor for parametric (neural) function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapArch {
    /// The fixed identity function (not trainable).
    Identity,
    /// An MLP with the given number of hidden layers; 0 means linear.
    Mlp { hidden_layers: usize },
    /// An MLP initialized near the identity (square spaces only).
    MlpNearIdentity { hidden_layers: usize },
}

impl MapArch {
    pub fn label(&self) -> String {
        match self {
            MapArch::Identity => "identity".to_string(),
            MapArch::Mlp { hidden_layers } => format!("mlp{hidden_layers}"),
            MapArch::MlpNearIdentity { hidden_layers } => format!("mlp{hidden_layers}-id-init"),
        }
    }
}

/// A space of encoders or decoders: an explicit finite list (exact verdicts)
/// or a parametric family (adversarial estimation).
#[derive(Debug, Clone)]
pub enum Members<M> {
    Explicit(Vec<M>),
    Parametric(MapArch),
}

#[derive(Debug, Clone)]
pub struct FunctionSpace<M> {
    pub members: Members<M>,
    pub contains_identity: bool,
    pub closure_claim: bool,
}

pub type EncoderSpace = FunctionSpace<Encoder>;
pub type DecoderSpace = FunctionSpace<Decoder>;

pub trait HasMap {
    fn map_fn(&self) -> &MapFn;
}

impl HasMap for Encoder {
    fn map_fn(&self) -> &MapFn {
        &self.map
    }
}

impl HasMap for Decoder {
    fn map_fn(&self) -> &MapFn {
        &self.map
    }
}

impl<M: HasMap> FunctionSpace<M> {
    /// Build an explicit space; rejects duplicates under extensional equality
    /// on finite domains, and records whether the identity is present.
    pub fn explicit(members: Vec<M>) -> Result<Self> {
        let tables: Vec<Option<&FiniteMap>> = members
            .iter()
            .map(|m| match m.map_fn() {
                MapFn::Finite(f) => Some(f),
                MapFn::Neural { .. } => None,
            })
            .collect();
        for i in 0..tables.len() {
            for j in i + 1..tables.len() {
                if let (Some(a), Some(b)) = (tables[i], tables[j]) {
                    if a.extensionally_equal(b) {
                        return Err(Error::Config(format!(
                            "function space members {i} and {j} are extensionally equal"
                        )));
                    }
                }
            }
        }
        let contains_identity =
            tables.iter().any(|t| t.map(|f| f.is_identity()).unwrap_or(false));
        Ok(FunctionSpace {
            members: Members::Explicit(members),
            contains_identity,
            closure_claim: false,
        })
    }

    pub fn parametric(arch: MapArch) -> Self {
        FunctionSpace {
            members: Members::Parametric(arch),
            contains_identity: matches!(arch, MapArch::Identity),
            closure_claim: false,
        }
    }

    /// Explicit members, or an error for parametric families (exact verdicts
    /// only quantify over explicit lists).
    pub fn explicit_members(&self) -> Result<&[M]> {
        match &self.members {
            Members::Explicit(m) => Ok(m),
            Members::Parametric(_) => Err(Error::Config(
                "exact verdicts need an explicit finite function space".into(),
            )),
        }
    }

    /// Finite tables of all members; neural members are excluded from exact
    /// verdicts and produce an error here.
    pub fn finite_members(&self) -> Result<Vec<&FiniteMap>> {
        self.explicit_members()?
            .iter()
            .enumerate()
            .map(|(i, m)| match m.map_fn() {
                MapFn::Finite(f) => Ok(f),
                MapFn::Neural { .. } => Err(Error::Config(format!(
                    "function space member {i} is neural; exact verdicts need finite maps"
                ))),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        match &self.members {
            Members::Explicit(m) => m.len(),
            Members::Parametric(_) => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EncoderSpace {
    pub fn from_tables(maps: Vec<FiniteMap>) -> Result<Self> {
        Self::explicit(maps.into_iter().map(Encoder::finite).collect())
    }
}

impl DecoderSpace {
    pub fn from_tables(maps: Vec<FiniteMap>) -> Result<Self> {
        Self::explicit(maps.into_iter().map(Decoder::finite).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_members_rejected() {
        let a = FiniteMap::from_table(vec![0, 1], 2).unwrap();
        let b = FiniteMap::from_table(vec![0, 1], 2).unwrap();
        assert!(EncoderSpace::from_tables(vec![a, b]).is_err());
    }

    #[test]
    fn identity_membership_detected() {
        let s = EncoderSpace::from_tables(vec![
            FiniteMap::identity(2),
            FiniteMap::from_table(vec![1, 0], 2).unwrap(),
        ])
        .unwrap();
        assert!(s.contains_identity);
        let s = DecoderSpace::from_tables(vec![FiniteMap::from_table(vec![1, 0], 2).unwrap()]).unwrap();
        assert!(!s.contains_identity);
    }
}
