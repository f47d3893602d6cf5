use serde::{Deserialize, Serialize};

pub const MAX_TOKENS: u32 = 32768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Analyst,
    Orchestrator,
    Coder,
}

/// Sampling parameters attached to every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role: Role,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl RoleProfile {
    pub fn for_role(role: Role) -> Self {
        let (temperature, top_p) = match role {
            Role::Analyst | Role::Orchestrator => (0.6, 0.95),
            Role::Coder => (0.0, 1.0),
        };
        RoleProfile {
            role,
            temperature,
            top_p,
            max_tokens: MAX_TOKENS,
        }
    }
}

impl From<Role> for RoleProfile {
    fn from(role: Role) -> Self {
        RoleProfile::for_role(role)
    }
}
