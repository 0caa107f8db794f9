use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// A multilayer perceptron with the given activation on hidden layers and a
/// linear output. Parameters are a flat vector: per layer, row-major weights
/// `[out][in]` followed by biases `[out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Activations recorded during a forward pass, sufficient to produce
/// d(loss)/d(params) and d(loss)/d(input).
#[derive(Debug, Clone)]
pub struct GradTape {
    /// Post-activation values per layer, index 0 = the input.
    post: Vec<Vec<f64>>,
    /// Pre-activation values per affine layer.
    pre: Vec<Vec<f64>>,
}

fn expected_param_count(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl MlpNet {
    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        Ok(MlpNet {
            layer_dims: layer_dims.to_vec(),
            activation,
            params: vec![0.0; expected_param_count(layer_dims)],
        })
    }

    /// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(expected_param_count(layer_dims));
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            for _ in 0..fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(MlpNet { layer_dims: layer_dims.to_vec(), activation, params })
    }

    fn validate_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 {
            return Err(Error::Config("net needs at least input and output dims".into()));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("net layer dims must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::validate_dims(&self.layer_dims)?;
        let want = expected_param_count(&self.layer_dims);
        if self.params.len() != want {
            return Err(Error::Config(format!(
                "net has {} params, dims require {want}",
                self.params.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn apply_activation(&self, z: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
            Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    /// Pure forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(input)?.0)
    }

    /// Forward pass recording the tape needed for [`MlpNet::backward`].
    pub fn forward_tape(&self, input: &[f64]) -> Result<(Vec<f64>, GradTape)> {
        if input.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input dim {} does not match net input {}",
                input.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.layer_dims.len() - 1;
        let mut post = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        post.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let x = &post[l];
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let mut z = vec![0.0; n_out];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &weights[r * n_in..(r + 1) * n_in];
                let mut acc = biases[r];
                for (wv, xv) in row.iter().zip(x) {
                    acc += wv * xv;
                }
                *zr = acc;
            }
            let a = if l + 1 == n_layers { z.clone() } else { self.apply_activation(&z) };
            pre.push(z);
            post.push(a);
            offset += (n_in + 1) * n_out;
        }
        let out = post.last().expect("nonempty").clone();
        Ok((out, GradTape { post, pre }))
    }

    /// Reverse pass: given dL/d(output), returns (dL/d(params), dL/d(input)).
    pub fn backward(&self, tape: &GradTape, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "upstream dim {} does not match net output {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        if tape.post.len() != self.layer_dims.len() {
            return Err(Error::Config("tape does not match this net".into()));
        }
        let n_layers = self.layer_dims.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut da = upstream.to_vec();
        let mut offset = self.params.len();
        for l in (0..n_layers).rev() {
            let n_in = self.layer_dims[l];
            let n_out = self.layer_dims[l + 1];
            offset -= (n_in + 1) * n_out;
            // Linear output layer; activation derivative on hidden layers.
            let dz: Vec<f64> = if l + 1 == n_layers {
                da.clone()
            } else {
                match self.activation {
                    Activation::Tanh => {
                        let a = &tape.post[l + 1];
                        da.iter().zip(a).map(|(d, av)| d * (1.0 - av * av)).collect()
                    }
                    Activation::Relu => {
                        let z = &tape.pre[l];
                        da.iter().zip(z).map(|(d, zv)| if *zv > 0.0 { *d } else { 0.0 }).collect()
                    }
                }
            };
            let x = &tape.post[l];
            let (wslot, bslot) = grad[offset..offset + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            for (r, dzr) in dz.iter().enumerate() {
                let row = &mut wslot[r * n_in..(r + 1) * n_in];
                for (slot, xv) in row.iter_mut().zip(x) {
                    *slot += dzr * xv;
                }
                bslot[r] += dzr;
            }
            let weights = &self.params[offset..offset + n_in * n_out];
            let mut dx = vec![0.0; n_in];
            for (r, dzr) in dz.iter().enumerate() {
                let row = &weights[r * n_in..(r + 1) * n_in];
                for (slot, wv) in dx.iter_mut().zip(row) {
                    *slot += dzr * wv;
                }
            }
            da = dx;
        }
        Ok((grad, da))
    }

    /// Checkpoint serialization: `{layer_dims, activation, params}` JSON with
    /// a bit-exact round trip.
    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_checkpoint_json(json: &str) -> Result<Self> {
        let net: MlpNet = serde_json::from_str(json)?;
        net.validate()?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_formula() {
        let net = MlpNet::zeros(&[4, 64, 64, 3], Activation::Tanh).unwrap();
        let want: usize = [(4 + 1) * 64, (64 + 1) * 64, (64 + 1) * 3].iter().sum();
        assert_eq!(net.param_count(), want);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = MlpNet::zeros(&[3, 5, 2], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_by_hand() {
        // [2 -> 1], weights [1, 1], bias 0, input (2, 3) -> 5.
        let mut net = MlpNet::zeros(&[2, 1], Activation::Tanh).unwrap();
        net.params[0] = 1.0;
        net.params[1] = 1.0;
        assert_eq!(net.forward(&[2.0, 3.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn forward_is_pure() {
        let net = MlpNet::init(&[3, 8, 2], Activation::Tanh, 9).unwrap();
        let x = [0.3, -1.2, 0.7];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn linear_layer_weight_grad_is_input() {
        // loss = output => upstream 1; dL/dw = x, dL/db = 1, dL/dx = w.
        let mut net = MlpNet::zeros(&[2, 1], Activation::Tanh).unwrap();
        net.params = vec![0.25, -0.5, 0.1];
        let x = [2.0, 3.0];
        let (_, tape) = net.forward_tape(&x).unwrap();
        let (grad, dx) = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(grad, vec![2.0, 3.0, 1.0]);
        assert_eq!(dx, vec![0.25, -0.5]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = MlpNet::init(&[4, 7, 3], Activation::Relu, 123).unwrap();
        let json = net.to_checkpoint_json().unwrap();
        let back = MlpNet::from_checkpoint_json(&json).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = MlpNet::init(&[3, 16, 2], Activation::Tanh, 7).unwrap();
        let b = MlpNet::init(&[3, 16, 2], Activation::Tanh, 7).unwrap();
        assert_eq!(a, b);
        let c = MlpNet::init(&[3, 16, 2], Activation::Tanh, 8).unwrap();
        assert_ne!(a, c);
    }
}
