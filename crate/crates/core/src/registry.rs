//! String-keyed factories for token encoders and frozen embedders.
//!
//! Keys look like `name:arg=value:arg=value`, e.g. `random-small:dim=32:seed=7`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySpec {
    pub name: String,
    pub args: BTreeMap<String, String>,
    raw: String,
}

impl KeySpec {
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn usize_arg(&self, key: &str, default: usize) -> Result<usize> {
        self.parsed(key, default)
    }

    pub fn u64_arg(&self, key: &str, default: u64) -> Result<u64> {
        self.parsed(key, default)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.args.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(format!("key `{}`: bad value `{v}` for `{key}`", self.raw))
            }),
        }
    }
}

impl FromStr for KeySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default().trim();
        if name.is_empty() {
            return Err(Error::config(format!("empty registry key `{s}`")));
        }
        let mut args = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| {
                Error::config(format!("key `{s}`: expected arg=value, got `{p}`"))
            })?;
            args.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self {
            name: name.to_string(),
            args,
            raw: s.to_string(),
        })
    }
}

impl fmt::Display for KeySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

type Factory<T> = Box<dyn Fn(&KeySpec) -> Result<Arc<T>> + Send + Sync>;

/// Maps key names to constructors. Unregistered names fail with
/// [`Error::UnknownKey`]; pretrained components are added by the embedding
/// application through [`Registry::register`].
pub struct Registry<T: ?Sized> {
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Default for Registry<T> {
    fn default() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(&KeySpec) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn resolve(&self, key: &str) -> Result<Arc<T>> {
        let spec: KeySpec = key.parse()?;
        let factory = self
            .factories
            .get(&spec.name)
            .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        factory(&spec)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

/// 64-bit FNV-1a, used wherever a hash must be stable across builds and platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
