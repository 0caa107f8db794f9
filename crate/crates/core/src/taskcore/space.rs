use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A state, action, or observation space: either a finite index set or a
/// bounded real box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Space {
    Finite { size: usize },
    Box { dims: usize, lower: Vec<f64>, upper: Vec<f64> },
}

impl Space {
    pub fn finite(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("finite space must have size >= 1".into()));
        }
        Ok(Space::Finite { size })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config("box space needs matching nonempty bounds".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if lo > hi {
                return Err(Error::Config(format!("box bound {lo} > {hi}")));
            }
        }
        Ok(Space::Box { dims: lower.len(), lower, upper })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Space::Finite { .. })
    }

    /// Cardinality of a finite space.
    pub fn size(&self) -> Option<usize> {
        match self {
            Space::Finite { size } => Some(*size),
            Space::Box { .. } => None,
        }
    }

    /// Dimension of the feature vector `featurize` produces for members of
    /// this space: one-hot width for finite spaces, raw dims for boxes.
    pub fn feature_dim(&self) -> usize {
        match self {
            Space::Finite { size } => *size,
            Space::Box { dims, .. } => *dims,
        }
    }

    pub fn contains(&self, elem: &Elem) -> bool {
        match (self, elem) {
            (Space::Finite { size }, Elem::Discrete(i)) => i < size,
            (Space::Box { dims, .. }, Elem::Vector(v)) => v.len() == *dims,
            _ => false,
        }
    }
}

/// A member of a [`Space`]: an index into a finite set or a real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Elem {
    Discrete(usize),
    Vector(Vec<f64>),
}

impl Elem {
    pub fn index(&self) -> Result<usize> {
        match self {
            Elem::Discrete(i) => Ok(*i),
            Elem::Vector(_) => Err(Error::Config("expected a finite-space element".into())),
        }
    }

    pub fn vector(&self) -> Result<&[f64]> {
        match self {
            Elem::Vector(v) => Ok(v),
            Elem::Discrete(_) => Err(Error::Config("expected a box-space element".into())),
        }
    }
}

/// Encode a space element as a flat feature vector: one-hot for finite
/// spaces, the raw coordinates for boxes.
pub fn featurize(space: &Space, elem: &Elem) -> Result<Vec<f64>> {
    match (space, elem) {
        (Space::Finite { size }, Elem::Discrete(i)) => {
            if i >= size {
                return Err(Error::Config(format!("index {i} out of space size {size}")));
            }
            let mut v = vec![0.0; *size];
            v[*i] = 1.0;
            Ok(v)
        }
        (Space::Box { dims, .. }, Elem::Vector(v)) => {
            if v.len() != *dims {
                return Err(Error::Config(format!(
                    "vector dim {} does not match box dims {dims}",
                    v.len()
                )));
            }
            Ok(v.clone())
        }
        _ => Err(Error::Config("element kind does not match space kind".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_rejects_zero() {
        assert!(Space::finite(0).is_err());
        assert!(Space::finite(3).is_ok());
    }

    #[test]
    fn box_rejects_crossed_bounds() {
        assert!(Space::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(Space::boxed(vec![-1.0, 0.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn featurize_one_hot_and_passthrough() {
        let s = Space::finite(3).unwrap();
        assert_eq!(featurize(&s, &Elem::Discrete(1)).unwrap(), vec![0.0, 1.0, 0.0]);
        let b = Space::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(featurize(&b, &Elem::Vector(vec![0.5, -0.25])).unwrap(), vec![0.5, -0.25]);
        assert!(featurize(&s, &Elem::Vector(vec![0.0])).is_err());
    }
}
