use crate::error::{Error, Result};
use crate::reduction::maps::{Decoder, Encoder};
use crate::taskcore::{Actor, Elem, Space, TaskSpec};

/// The policy transform g ∘ π ∘ h: observations of task 1 are encoded for
/// the inner policy and its actions decoded back.
#[derive(Debug, Clone)]
pub struct ComposedPolicy<P> {
    pub encoder: Encoder,
    pub inner: P,
    pub decoder: Decoder,
}

/// Space introspection used to check composition chains. `None` means the
/// actor cannot state the space (and the check is skipped).
pub trait SpaceInfo {
    fn obs_space_info(&self) -> Option<Space>;
    fn action_space_info(&self) -> Option<Space>;
}

impl SpaceInfo for crate::taskcore::Policy {
    fn obs_space_info(&self) -> Option<Space> {
        match self {
            crate::taskcore::Policy::Tabular { table, .. } => {
                Some(Space::Finite { size: table.len() })
            }
            crate::taskcore::Policy::Neural { obs_space, .. } => Some(obs_space.clone()),
        }
    }

    fn action_space_info(&self) -> Option<Space> {
        match self {
            crate::taskcore::Policy::Tabular { n_actions, .. } => {
                Some(Space::Finite { size: *n_actions })
            }
            crate::taskcore::Policy::Neural { action_space, .. } => Some(action_space.clone()),
        }
    }
}

impl<P> SpaceInfo for ComposedPolicy<P> {
    fn obs_space_info(&self) -> Option<Space> {
        Some(self.encoder.map.domain())
    }

    fn action_space_info(&self) -> Option<Space> {
        Some(self.decoder.map.codomain())
    }
}

/// Build g ∘ inner ∘ h, checking that the encoder's codomain matches the
/// inner policy's observation space and the inner action space matches the
/// decoder's domain.
pub fn compose<P: SpaceInfo>(decoder: Decoder, inner: P, encoder: Encoder) -> Result<ComposedPolicy<P>> {
    if let Some(obs) = inner.obs_space_info() {
        if encoder.map.codomain() != obs {
            return Err(Error::Config(format!(
                "encoder codomain {:?} does not match inner observation space {obs:?}",
                encoder.map.codomain()
            )));
        }
    }
    if let Some(act) = inner.action_space_info() {
        if decoder.map.domain() != act {
            return Err(Error::Config(format!(
                "decoder domain {:?} does not match inner action space {act:?}",
                decoder.map.domain()
            )));
        }
    }
    Ok(ComposedPolicy { encoder, inner, decoder })
}

impl<P: Actor> Actor for ComposedPolicy<P> {
    fn act(&self, obs: &Elem) -> Result<Elem> {
        let encoded = self.encoder.apply(obs)?;
        let inner_action = self.inner.act(&encoded)?;
        self.decoder.apply(&inner_action)
    }

    fn validate_for(&self, task: &TaskSpec) -> Result<()> {
        if self.encoder.map.domain() != task.observations {
            return Err(Error::Config(
                "composed policy's encoder domain does not match task observations".into(),
            ));
        }
        if self.decoder.map.codomain() != task.actions {
            return Err(Error::Config(
                "composed policy's decoder codomain does not match task actions".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::maps::FiniteMap;
    use crate::taskcore::Policy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_composition_equals_inner() {
        let inner = Policy::tabular(vec![1, 0, 1], 2).unwrap();
        let comp =
            compose(Decoder::identity(2), inner.clone(), Encoder::identity(3)).unwrap();
        for o in 0..3 {
            let obs = Elem::Discrete(o);
            assert_eq!(comp.act(&obs).unwrap(), inner.act(&obs).unwrap());
        }
    }

    #[test]
    fn space_mismatch_is_a_configuration_error() {
        let inner = Policy::tabular(vec![0, 1], 2).unwrap();
        // Encoder codomain 3 vs policy over 2 observations.
        let enc = Encoder::finite(FiniteMap::from_table(vec![0, 1, 2], 3).unwrap());
        assert!(compose(Decoder::identity(2), inner.clone(), enc).is_err());
        // Decoder domain 3 vs policy with 2 actions.
        let dec = Decoder::finite(FiniteMap::from_table(vec![0, 1, 1], 2).unwrap());
        assert!(compose(dec, inner, Encoder::identity(2)).is_err());
    }

    #[test]
    fn nested_composition_matches_composed_maps() {
        // g1 ∘ (g2 ∘ π ∘ h2) ∘ h1 vs single composition with g1∘g2 and h2∘h1,
        // checked extensionally on sampled observations.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 6;
        let rand_map = |rng: &mut ChaCha12Rng, dom: usize, cod: usize| {
            FiniteMap::from_table((0..dom).map(|_| rng.gen_range(0..cod)).collect(), cod).unwrap()
        };
        let h1 = rand_map(&mut rng, n, n); // O1 -> O2
        let h2 = rand_map(&mut rng, n, n); // O2 -> O3
        let g2 = rand_map(&mut rng, 4, 4); // A3 -> A2
        let g1 = rand_map(&mut rng, 4, 4); // A2 -> A1
        let table: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let inner = Policy::tabular(table, 4).unwrap();

        let nested = compose(
            Decoder::finite(g1.clone()),
            compose(Decoder::finite(g2.clone()), inner.clone(), Encoder::finite(h2.clone())).unwrap(),
            Encoder::finite(h1.clone()),
        )
        .unwrap();
        let flat = compose(
            Decoder::finite(g1.compose_after(&g2).unwrap()),
            inner,
            Encoder::finite(h2.compose_after(&h1).unwrap()),
        )
        .unwrap();

        for _ in 0..20 {
            let obs = Elem::Discrete(rng.gen_range(0..n));
            assert_eq!(nested.act(&obs).unwrap(), flat.act(&obs).unwrap());
        }
    }
}
