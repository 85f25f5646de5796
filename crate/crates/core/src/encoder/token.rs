use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::registry::{fnv1a, KeySpec, Registry};
use crate::tape::{Graph, Var};

/// Contextual token encoder producing one `dim()`-sized row per input token.
pub trait TokenEncoder: Send + Sync + fmt::Debug {
    fn key(&self) -> &str;

    fn dim(&self) -> usize;

    /// Registers the encoder's own weights in `store`.
    fn init_params(&self, store: &mut ParamStore) -> Result<()>;

    /// Encodes `tokens` into a `tokens.len() x dim()` matrix. When `trainable`
    /// is false the encoder weights are treated as constants.
    fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        tokens: &[String],
        trainable: bool,
    ) -> Result<Var>;
}

pub type EncoderRegistry = Registry<dyn TokenEncoder>;

/// Registry with the built-in `random-small` encoder.
pub fn builtin_encoders() -> EncoderRegistry {
    let mut r = EncoderRegistry::default();
    r.register("random-small", |spec: &KeySpec| {
        Ok(Arc::new(RandomSmallEncoder::from_spec(spec)?) as Arc<dyn TokenEncoder>)
    });
    r
}

/// Hashed-bucket embedding table with seeded Gaussian initialization.
/// Untrained and small; meant for tests and desk-scale experiments.
#[derive(Clone, Debug)]
pub struct RandomSmallEncoder {
    key: String,
    dim: usize,
    buckets: usize,
    seed: u64,
}

const TABLE: &str = "encoder.random_small.table";

impl RandomSmallEncoder {
    pub fn new(dim: usize, buckets: usize, seed: u64) -> Result<Self> {
        if dim == 0 || buckets == 0 {
            return Err(Error::config(
                "random-small encoder needs dim > 0 and buckets > 0",
            ));
        }
        Ok(Self {
            key: format!("random-small:dim={dim}:seed={seed}:buckets={buckets}"),
            dim,
            buckets,
            seed,
        })
    }

    pub fn from_spec(spec: &KeySpec) -> Result<Self> {
        let mut enc = Self::new(
            spec.usize_arg("dim", 32)?,
            spec.usize_arg("buckets", 2048)?,
            spec.u64_arg("seed", 0)?,
        )?;
        enc.key = spec.raw().to_string();
        Ok(enc)
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.buckets as u64) as usize
    }
}

impl TokenEncoder for RandomSmallEncoder {
    fn key(&self) -> &str {
        &self.key
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn init_params(&self, store: &mut ParamStore) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let table =
            Array2::from_shape_simple_fn((self.buckets, self.dim), || normal.sample(&mut rng));
        store.add(TABLE, table)?;
        Ok(())
    }

    fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        tokens: &[String],
        trainable: bool,
    ) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::shape("cannot encode an empty token sequence"));
        }
        let id = store
            .id(TABLE)
            .ok_or_else(|| Error::config("random-small encoder parameters not initialized"))?;
        let table = if trainable {
            g.param(store, id)
        } else {
            g.frozen(store, id)
        };
        let rows: Vec<usize> = tokens.iter().map(|t| self.bucket(t)).collect();
        Ok(g.gather_rows(table, &rows))
    }
}
