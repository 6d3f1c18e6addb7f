use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Stakeholder roles. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FarmManager,
    /// Agronomist; the vineyard's viticulturist holds this role.
    Viticulturist,
    FieldWorker,
    DroneOperator,
    QcDeviceUser,
    ExternalProvider,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::FarmManager,
        Role::Viticulturist,
        Role::FieldWorker,
        Role::DroneOperator,
        Role::QcDeviceUser,
        Role::ExternalProvider,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::FarmManager => "farm_manager",
            Role::Viticulturist => "viticulturist",
            Role::FieldWorker => "field_worker",
            Role::DroneOperator => "drone_operator",
            Role::QcDeviceUser => "qc_device_user",
            Role::ExternalProvider => "external_provider",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role '{0}'")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    /// Accepts the snake_case name, plus a few spellings seen in lane names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "farmmanager" | "manager" => Ok(Role::FarmManager),
            "viticulturist" | "agronomist" => Ok(Role::Viticulturist),
            "fieldworker" | "fieldworkers" => Ok(Role::FieldWorker),
            "droneoperator" => Ok(Role::DroneOperator),
            "qcdeviceuser" | "qcuser" => Ok(Role::QcDeviceUser),
            "externalprovider" | "externaldataprovider" => Ok(Role::ExternalProvider),
            _ => Err(UnknownRole(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_and_lane_spellings() {
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
        }
        assert_eq!("Field Workers".parse::<Role>().unwrap(), Role::FieldWorker);
        assert_eq!("Agronomist".parse::<Role>().unwrap(), Role::Viticulturist);
        assert!("tractor".parse::<Role>().is_err());
    }
}
