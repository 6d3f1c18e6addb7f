//! Service configuration: users with their bearer tokens, and the curated
//! catalog of external data sources.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use agriflow_core::engine::Contact;
use agriflow_core::role::Role;
use serde::{Deserialize, Serialize};

pub const VINEYARD_CONFIG: &str = include_str!("../config/vineyard.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserConfig {
    pub id: String,
    pub name: String,
    pub token: String,
    pub roles: BTreeSet<Role>,
    /// Hierarchy tags. Carried for display; they grant nothing.
    #[serde(default)]
    pub groups: BTreeSet<String>,
    /// Initial contact list, merged into the journaled one at startup.
    #[serde(default)]
    pub contacts: Vec<Contact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connector: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub users: Vec<UserConfig>,
    #[serde(default)]
    pub catalog: Vec<CatalogEntry>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<ServiceConfig, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ServiceConfig::parse(&text)
    }

    /// The bundled vineyard staff and catalog.
    pub fn vineyard() -> ServiceConfig {
        ServiceConfig::parse(VINEYARD_CONFIG).expect("bundled configuration is valid")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let mut ids = BTreeSet::new();
        let mut tokens = BTreeSet::new();
        for u in &self.users {
            if !ids.insert(&u.id) {
                return Err(ConfigError::Invalid(format!("duplicate user id '{}'", u.id)));
            }
            if u.token.is_empty() || !tokens.insert(&u.token) {
                return Err(ConfigError::Invalid(format!("user '{}' needs a unique token", u.id)));
            }
            if u.roles.is_empty() {
                return Err(ConfigError::Invalid(format!("user '{}' has no role", u.id)));
            }
            let mut addrs = BTreeSet::new();
            for c in &u.contacts {
                if !addrs.insert(&c.address) {
                    return Err(ConfigError::Invalid(format!(
                        "user '{}' lists contact {} twice",
                        u.id, c.address
                    )));
                }
            }
        }
        let mut sources = BTreeSet::new();
        for e in &self.catalog {
            if !sources.insert(&e.id) {
                return Err(ConfigError::Invalid(format!("duplicate catalog source '{}'", e.id)));
            }
            if e.embed_url.is_some() == e.connector.is_some() {
                return Err(ConfigError::Invalid(format!(
                    "catalog source '{}' needs exactly one of embed_url and connector",
                    e.id
                )));
            }
        }
        Ok(())
    }

    pub fn user(&self, id: &str) -> Option<&UserConfig> {
        self.users.iter().find(|u| u.id == id)
    }

    pub fn user_by_token(&self, token: &str) -> Option<&UserConfig> {
        self.users.iter().find(|u| u.token == token)
    }

    pub fn source(&self, id: &str) -> Option<&CatalogEntry> {
        self.catalog.iter().find(|e| e.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_covers_every_role() {
        let cfg = ServiceConfig::vineyard();
        for role in Role::ALL {
            assert!(cfg.users.iter().any(|u| u.roles.contains(&role)), "{role}");
        }
    }

    #[test]
    fn rejects_roleless_users_and_duplicate_contacts() {
        let roleless = "[[users]]\nid = \"a\"\nname = \"A\"\ntoken = \"t\"\nroles = []\n";
        assert!(matches!(ServiceConfig::parse(roleless), Err(ConfigError::Invalid(_))));
        let dup = r#"
[[users]]
id = "a"
name = "A"
token = "t"
roles = ["farm_manager"]
contacts = [{ name = "x", address = "mailto:x@y" }, { name = "y", address = "mailto:x@y" }]
"#;
        assert!(matches!(ServiceConfig::parse(dup), Err(ConfigError::Invalid(_))));
        let bad_role = "[[users]]\nid = \"a\"\nname = \"A\"\ntoken = \"t\"\nroles = [\"king\"]\n";
        assert!(matches!(ServiceConfig::parse(bad_role), Err(ConfigError::Parse(_))));
    }
}
