use serde::{Deserialize, Serialize};

/// Environment variable overriding the default grid densities.
pub const GRID_ENV: &str = "IDDE_SEED_GRID";

/// Sampling densities used for validation, extrema and sup-over-t searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    /// Points per period for positivity and monotonicity validation.
    pub validation_points: usize,
    /// Points per period for maxima of coefficients and periodic solutions.
    pub extrema_points: usize,
    /// Points per period for the outer sup over `t` in the alpha integrals.
    pub sup_points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            validation_points: 4096,
            extrema_points: 4096,
            sup_points: 1024,
        }
    }
}

impl GridSettings {
    /// Defaults, or `N` validation/extrema points and `N / 4` sup points when
    /// `IDDE_SEED_GRID=N` is set.
    pub fn from_env() -> Self {
        match std::env::var(GRID_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(n) if n >= 16 => Self::with_density(n),
            _ => Self::default(),
        }
    }

    pub fn with_density(n: usize) -> Self {
        Self {
            validation_points: n,
            extrema_points: n,
            sup_points: (n / 4).max(4),
        }
    }
}
