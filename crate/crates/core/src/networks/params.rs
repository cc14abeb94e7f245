use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{Activation, BoundMlp, Mlp, MlpSpec};
use super::NetworkError;
use crate::autodiff::{Gradients, Matrix, Tape, Var};
use crate::config::TrainConfig;

/// Gradients keyed by parameter name.
pub type GradMap = BTreeMap<String, Matrix>;

/// Which alternating update a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Encoders, adapters, shared trunk, projection heads and decoders.
    Main,
    Discriminator,
}

impl ParamGroup {
    pub fn of(name: &str) -> Self {
        if name.starts_with("disc.") {
            ParamGroup::Discriminator
        } else {
            ParamGroup::Main
        }
    }
}

/// Anything exposing named, mutable parameter matrices.
pub trait NamedParams {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Matrix)>;
}

impl NamedParams for BTreeMap<String, Matrix> {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        self.iter_mut().map(|(k, v)| (k.clone(), v)).collect()
    }
}

/// Every learnable network of the model.
///
/// Views share the trunk; each view has its own input adapter in front of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub view_dims: Vec<usize>,
    pub dz: usize,
    pub dc: usize,
    pub specific_encoders: Vec<Mlp>,
    pub shared_adapters: Vec<Mlp>,
    pub shared_trunk: Mlp,
    pub specific_heads: Vec<Mlp>,
    pub common_heads: Vec<Mlp>,
    pub decoders: Vec<Mlp>,
    pub discriminators: Vec<Mlp>,
}

/// Layer specs for every network, in initialization order.
pub struct Blueprint {
    pub specific_encoders: Vec<MlpSpec>,
    pub shared_adapters: Vec<MlpSpec>,
    pub shared_trunk: MlpSpec,
    pub specific_heads: Vec<MlpSpec>,
    pub common_heads: Vec<MlpSpec>,
    pub decoders: Vec<MlpSpec>,
    pub discriminators: Vec<MlpSpec>,
}

impl Blueprint {
    pub fn new(config: &TrainConfig, view_dims: &[usize]) -> Result<Self, NetworkError> {
        if view_dims.is_empty() {
            return Err(NetworkError::Config("no views".into()));
        }
        if let Some(v) = view_dims.iter().position(|d| *d == 0) {
            return Err(NetworkError::Config(format!("view {v} has zero width")));
        }
        let arch = &config.architecture;
        let act = arch.activation;
        let with_input = |d: usize, rest: &[usize]| {
            let mut w = vec![d];
            w.extend_from_slice(rest);
            w
        };
        let h_width = *arch
            .encoder_hidden
            .last()
            .ok_or_else(|| NetworkError::Config("encoder needs hidden layers".into()))?;
        let hbar_width = arch
            .trunk_hidden
            .last()
            .copied()
            .unwrap_or(arch.adapter_width);
        let mut decoder_widths = vec![config.dz + config.dc];
        decoder_widths.extend_from_slice(&arch.decoder_hidden);

        let bp = Self {
            specific_encoders: view_dims
                .iter()
                .map(|&d| MlpSpec::new(with_input(d, &arch.encoder_hidden), act, Some(act)))
                .collect(),
            shared_adapters: view_dims
                .iter()
                .map(|&d| MlpSpec::new(vec![d, arch.adapter_width], act, Some(act)))
                .collect(),
            shared_trunk: MlpSpec::new(
                with_input(arch.adapter_width, &arch.trunk_hidden),
                act,
                Some(act),
            ),
            specific_heads: view_dims
                .iter()
                .map(|_| MlpSpec::new(vec![h_width, config.dz], act, None))
                .collect(),
            common_heads: view_dims
                .iter()
                .map(|_| MlpSpec::new(vec![hbar_width, config.dc], act, None))
                .collect(),
            decoders: view_dims
                .iter()
                .map(|&d| {
                    let mut w = decoder_widths.clone();
                    w.push(d);
                    MlpSpec::new(w, act, None)
                })
                .collect(),
            discriminators: view_dims
                .iter()
                .map(|_| {
                    let mut w = vec![config.dz];
                    w.extend_from_slice(&arch.discriminator_hidden);
                    w.push(1);
                    MlpSpec::new(w, act, Some(Activation::Sigmoid))
                })
                .collect(),
        };
        // a trunk with no hidden layers is the identity on the adapter output
        if bp.shared_trunk.layer_widths.len() < 2 {
            return Err(NetworkError::Config(
                "shared trunk needs at least one layer".into(),
            ));
        }
        Ok(bp)
    }
}

impl ModelParams {
    /// Initializes every network from one seeded stream, in a fixed order.
    pub fn init(
        config: &TrainConfig,
        view_dims: &[usize],
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let bp = Blueprint::new(config, view_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let many = |specs: &[MlpSpec], rng: &mut ChaCha8Rng| -> Result<Vec<Mlp>, NetworkError> {
            specs.iter().map(|s| Mlp::init(s, rng)).collect()
        };
        let specific_encoders = many(&bp.specific_encoders, &mut rng)?;
        let shared_adapters = many(&bp.shared_adapters, &mut rng)?;
        let shared_trunk = Mlp::init(&bp.shared_trunk, &mut rng)?;
        let specific_heads = many(&bp.specific_heads, &mut rng)?;
        let common_heads = many(&bp.common_heads, &mut rng)?;
        let decoders = many(&bp.decoders, &mut rng)?;
        let discriminators = many(&bp.discriminators, &mut rng)?;
        Ok(Self {
            view_dims: view_dims.to_vec(),
            dz: config.dz,
            dc: config.dc,
            specific_encoders,
            shared_adapters,
            shared_trunk,
            specific_heads,
            common_heads,
            decoders,
            discriminators,
        })
    }

    pub fn num_views(&self) -> usize {
        self.view_dims.len()
    }

    /// All parameters in canonical order.
    pub fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (v, m) in self.specific_encoders.iter().enumerate() {
            m.push_named(&format!("enc.{v}"), &mut out);
        }
        for (v, m) in self.shared_adapters.iter().enumerate() {
            m.push_named(&format!("adapter.{v}"), &mut out);
        }
        self.shared_trunk.push_named("trunk", &mut out);
        for (v, m) in self.specific_heads.iter().enumerate() {
            m.push_named(&format!("head_z.{v}"), &mut out);
        }
        for (v, m) in self.common_heads.iter().enumerate() {
            m.push_named(&format!("head_c.{v}"), &mut out);
        }
        for (v, m) in self.decoders.iter().enumerate() {
            m.push_named(&format!("dec.{v}"), &mut out);
        }
        for (v, m) in self.discriminators.iter().enumerate() {
            m.push_named(&format!("disc.{v}"), &mut out);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, m)| m.len()).sum()
    }

    /// Registers every parameter on `tape`; groups for which `trainable`
    /// returns false become constants.
    pub fn bind(&self, tape: &mut Tape, trainable: impl Fn(ParamGroup) -> bool) -> BoundParams {
        let mut leaves = Vec::new();
        let main = trainable(ParamGroup::Main);
        let disc = trainable(ParamGroup::Discriminator);
        let many = |ms: &[Mlp],
                    prefix: &str,
                    train: bool,
                    tape: &mut Tape,
                    leaves: &mut Vec<(String, Var)>| {
            ms.iter()
                .enumerate()
                .map(|(v, m)| m.bind(tape, &format!("{prefix}.{v}"), train, leaves))
                .collect::<Vec<_>>()
        };
        let specific_encoders = many(&self.specific_encoders, "enc", main, tape, &mut leaves);
        let shared_adapters = many(&self.shared_adapters, "adapter", main, tape, &mut leaves);
        let shared_trunk = self.shared_trunk.bind(tape, "trunk", main, &mut leaves);
        let specific_heads = many(&self.specific_heads, "head_z", main, tape, &mut leaves);
        let common_heads = many(&self.common_heads, "head_c", main, tape, &mut leaves);
        let decoders = many(&self.decoders, "dec", main, tape, &mut leaves);
        let discriminators = many(&self.discriminators, "disc", disc, tape, &mut leaves);
        BoundParams {
            view_dims: self.view_dims.clone(),
            dz: self.dz,
            dc: self.dc,
            specific_encoders,
            shared_adapters,
            shared_trunk,
            specific_heads,
            common_heads,
            decoders,
            discriminators,
            leaves,
        }
    }

    fn with_constants<T>(
        &self,
        f: impl FnOnce(&mut Tape, &BoundParams) -> Result<T, NetworkError>,
    ) -> Result<T, NetworkError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, |_| false);
        f(&mut tape, &bound)
    }

    /// `(H, Hbar)` for view `v`.
    pub fn encode_view(&self, v: usize, x: &Matrix) -> Result<(Matrix, Matrix), NetworkError> {
        self.with_constants(|tape, b| {
            let xv = tape.constant(x.clone());
            let (h, hbar) = b.encode_view(tape, v, xv)?;
            Ok((tape.value(h).clone(), tape.value(hbar).clone()))
        })
    }

    /// `(Z, C)` for view `v`.
    pub fn project(
        &self,
        v: usize,
        h: &Matrix,
        hbar: &Matrix,
    ) -> Result<(Matrix, Matrix), NetworkError> {
        self.with_constants(|tape, b| {
            let hv = tape.constant(h.clone());
            let hbv = tape.constant(hbar.clone());
            let (z, c) = b.project(tape, v, hv, hbv)?;
            Ok((tape.value(z).clone(), tape.value(c).clone()))
        })
    }

    pub fn decode_view(&self, v: usize, z: &Matrix, c: &Matrix) -> Result<Matrix, NetworkError> {
        self.with_constants(|tape, b| {
            let zv = tape.constant(z.clone());
            let cv = tape.constant(c.clone());
            let x = b.decode_view(tape, v, zv, cv)?;
            Ok(tape.value(x).clone())
        })
    }

    pub fn discriminate(&self, v: usize, z: &Matrix) -> Result<Matrix, NetworkError> {
        self.with_constants(|tape, b| {
            let zv = tape.constant(z.clone());
            let s = b.discriminate(tape, v, zv)?;
            Ok(tape.value(s).clone())
        })
    }
}

impl NamedParams for ModelParams {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (v, m) in self.specific_encoders.iter_mut().enumerate() {
            m.push_named_mut(&format!("enc.{v}"), &mut out);
        }
        for (v, m) in self.shared_adapters.iter_mut().enumerate() {
            m.push_named_mut(&format!("adapter.{v}"), &mut out);
        }
        self.shared_trunk.push_named_mut("trunk", &mut out);
        for (v, m) in self.specific_heads.iter_mut().enumerate() {
            m.push_named_mut(&format!("head_z.{v}"), &mut out);
        }
        for (v, m) in self.common_heads.iter_mut().enumerate() {
            m.push_named_mut(&format!("head_c.{v}"), &mut out);
        }
        for (v, m) in self.decoders.iter_mut().enumerate() {
            m.push_named_mut(&format!("dec.{v}"), &mut out);
        }
        for (v, m) in self.discriminators.iter_mut().enumerate() {
            m.push_named_mut(&format!("disc.{v}"), &mut out);
        }
        out
    }
}

/// [`ModelParams`] recorded on a tape.
pub struct BoundParams {
    view_dims: Vec<usize>,
    dz: usize,
    dc: usize,
    specific_encoders: Vec<BoundMlp>,
    shared_adapters: Vec<BoundMlp>,
    shared_trunk: BoundMlp,
    specific_heads: Vec<BoundMlp>,
    common_heads: Vec<BoundMlp>,
    decoders: Vec<BoundMlp>,
    discriminators: Vec<BoundMlp>,
    leaves: Vec<(String, Var)>,
}

impl BoundParams {
    fn check_view(&self, v: usize) -> Result<(), NetworkError> {
        if v >= self.view_dims.len() {
            return Err(NetworkError::ViewIndex {
                index: v,
                views: self.view_dims.len(),
            });
        }
        Ok(())
    }

    fn check_cols(
        &self,
        tape: &Tape,
        what: &'static str,
        v: usize,
        x: Var,
        expected: usize,
    ) -> Result<(), NetworkError> {
        let got = tape.value(x).cols();
        if got != expected {
            return Err(NetworkError::Width {
                what,
                view: v,
                expected,
                got,
            });
        }
        Ok(())
    }

    pub fn encode_view(
        &self,
        tape: &mut Tape,
        v: usize,
        x: Var,
    ) -> Result<(Var, Var), NetworkError> {
        self.check_view(v)?;
        self.check_cols(tape, "view input", v, x, self.view_dims[v])?;
        let h = self.specific_encoders[v].forward(tape, x)?;
        let adapted = self.shared_adapters[v].forward(tape, x)?;
        let hbar = self.shared_trunk.forward(tape, adapted)?;
        Ok((h, hbar))
    }

    pub fn project(
        &self,
        tape: &mut Tape,
        v: usize,
        h: Var,
        hbar: Var,
    ) -> Result<(Var, Var), NetworkError> {
        self.check_view(v)?;
        let z = self.specific_heads[v].forward(tape, h)?;
        let c = self.common_heads[v].forward(tape, hbar)?;
        Ok((z, c))
    }

    /// Decodes `[Z | C]`.
    pub fn decode_view(
        &self,
        tape: &mut Tape,
        v: usize,
        z: Var,
        c: Var,
    ) -> Result<Var, NetworkError> {
        self.check_view(v)?;
        self.check_cols(tape, "specific representation", v, z, self.dz)?;
        self.check_cols(tape, "common representation", v, c, self.dc)?;
        let e = tape.concat_cols(&[z, c])?;
        Ok(self.decoders[v].forward(tape, e)?)
    }

    pub fn discriminate(&self, tape: &mut Tape, v: usize, z: Var) -> Result<Var, NetworkError> {
        self.check_view(v)?;
        self.check_cols(tape, "discriminator input", v, z, self.dz)?;
        Ok(self.discriminators[v].forward(tape, z)?)
    }

    pub fn leaves(&self) -> &[(String, Var)] {
        &self.leaves
    }

    /// Gradients of the leaf parameters, by name.
    pub fn collect_grads(&self, grads: &Gradients) -> GradMap {
        self.leaves
            .iter()
            .map(|(name, var)| {
                (
                    name.clone(),
                    grads.get(*var).expect("leaf gradient").clone(),
                )
            })
            .collect()
    }
}
