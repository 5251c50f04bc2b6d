//! Name-keyed registries of interchangeable strategies.
//!
//! Kernels, weight functions and bandwidth rules are each selected at runtime
//! from a configuration string. A [`Registry`] maps those names to factories
//! producing boxed trait objects; the built-in families are wired up in
//! [`crate::kernels`] and [`crate::bandwidth`].

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub type Factory<T, P> = Box<dyn Fn(&P) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<T: ?Sized, P> {
    family: &'static str,
    entries: BTreeMap<String, Factory<T, P>>,
}

impl<T: ?Sized, P> Registry<T, P> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F) -> &mut Self
    where
        F: Fn(&P) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.into(), Box::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &P) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(factory) => factory(params),
            None => Err(Error::UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

impl<T: ?Sized, P> fmt::Debug for Registry<T, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("family", &self.family)
            .field("entries", &self.names().collect::<Vec<_>>())
            .finish()
    }
}
