//! Canonical identity groups.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Canonical name of an identity group, e.g. `LGBTQ+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdentityGroup(String);

impl IdentityGroup {
    pub fn new(name: impl Into<String>) -> Self {
        IdentityGroup(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IdentityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for IdentityGroup {
    fn from(s: &str) -> Self {
        IdentityGroup(s.to_string())
    }
}

pub const DEFAULT_GROUPS: [&str; 7] = ["Women", "LGBTQ+", "PoC", "Muslim", "Asian", "Jewish", "Latinx"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("group registry is empty")]
    Empty,
    #[error("duplicate group name `{0}` in registry")]
    Duplicate(String),
    #[error("group `{0}` is not in the registry")]
    UnknownGroup(String),
}

/// The set of groups a run reports on. Order is the registry's declaration
/// order and drives the row order of every per-group table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupRegistry {
    groups: Vec<IdentityGroup>,
}

impl GroupRegistry {
    pub fn new<I, S>(names: I) -> Result<Self, RegistryError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut groups: Vec<IdentityGroup> = Vec::new();
        for name in names {
            let g = IdentityGroup::new(name);
            if groups.contains(&g) {
                return Err(RegistryError::Duplicate(g.0));
            }
            groups.push(g);
        }
        if groups.is_empty() {
            return Err(RegistryError::Empty);
        }
        Ok(GroupRegistry { groups })
    }

    pub fn contains(&self, group: &IdentityGroup) -> bool {
        self.groups.contains(group)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityGroup> {
        self.groups.iter().find(|g| g.as_str() == name)
    }

    pub fn resolve(&self, name: &str) -> Result<IdentityGroup, RegistryError> {
        self.get(name)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownGroup(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &IdentityGroup> {
        self.groups.iter()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

impl Default for GroupRegistry {
    fn default() -> Self {
        GroupRegistry::new(DEFAULT_GROUPS).expect("default registry is valid")
    }
}
