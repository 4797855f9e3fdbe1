//! Exact computations with halo products of groups.
//!
//! A halo over a group `H` assigns to every subset `S ⊆ H` a group `L(S)`,
//! monotone in `S`, with `L(R) ∩ L(S) = L(R ∩ S)`. The halo product is the
//! semidirect product `L(H) ⋊ H` where `H` translates supports. This crate
//! implements five concrete lamp backends (lamplighter, lampshuffler/juggler,
//! lampdesigner, lampcloner over a finite field, 2-nilpotent wreath product),
//! the word geometry of the resulting groups (leaves, leaf graphs, ladders,
//! the cubical model), and the exact arithmetic invariants that separate them
//! (lamp growth sequences, divisibility interlacing, p-adic valuations).
//!
//! Everything is exact: integer arithmetic is arbitrary precision, distances
//! are breadth-first searches with explicit caps, and every randomised check
//! is seeded and replayable.

pub mod axioms;
pub mod basegroup;
pub mod cubemodel;
pub mod growth;
pub mod halocore;
pub mod lampkit;
pub mod leafgeo;
pub mod report;
pub mod suite;

pub use basegroup::{BaseSubset, MarkedGroup, Point};
pub use lampkit::{Backend, Halo, Lamp};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("element unreachable within cap {cap}")]
    Unreachable { cap: u32 },
    #[error("lamp has empty support")]
    EmptySupport,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("angle below threshold: {0}")]
    AngleTooSmall(String),
    #[error("backend is not large-scale commutative here: {0}")]
    NotCommutative(String),
    #[error("vertices are not adjacent")]
    NotAdjacent,
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Global resource caps. Desk scale is a policy, not a constant: every
/// exhaustive loop in the crate is bounded by one of these.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Largest radius accepted by base-group ball enumeration.
    pub ball_radius: u32,
    /// Largest `|L(S)|` accepted by lamp enumeration.
    pub enumeration: u64,
    /// Largest number of states a halo-group BFS may visit.
    pub bfs_states: u64,
    /// Largest radius a halo-group BFS may reach.
    pub bfs_radius: u32,
    /// Largest subset size for exhaustive boundary-growth search.
    pub boundary_n: u32,
    /// Per-instance work bound (element pairs) for exhaustive product scans.
    pub pair_work: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            ball_radius: 64,
            enumeration: 1_000_000,
            bfs_states: 8_000_000,
            bfs_radius: 24,
            boundary_n: 9,
            pair_work: 4_000_000,
        }
    }
}

impl Caps {
    /// Apply a partial JSON override, e.g. from the `HALOLAB_CAPS` env var.
    pub fn with_overrides(mut self, json: &str) -> Result<Self> {
        let patch: serde_json::Value =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("bad caps JSON: {e}")))?;
        let obj = patch
            .as_object()
            .ok_or_else(|| Error::Config("caps override must be a JSON object".into()))?;
        let mut base = serde_json::to_value(&self).unwrap();
        for (k, v) in obj {
            if base.get(k).is_none() {
                return Err(Error::Config(format!("unknown cap `{k}`")));
            }
            base[k.as_str()] = v.clone();
        }
        self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        Ok(self)
    }
}
