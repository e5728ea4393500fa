use crate::error::{Error, Result};

/// Numeric policy threaded through every operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceProfile {
    /// Singular values below `rank_rel_tol * sigma_max` count as zero.
    pub rank_rel_tol: f64,
    pub residual_tol: f64,
    pub fd_step: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self { rank_rel_tol: 1e-9, residual_tol: 1e-8, fd_step: 1e-5 }
    }
}

impl ToleranceProfile {
    pub fn new(rank_rel_tol: f64, residual_tol: f64, fd_step: f64) -> Result<Self> {
        let t = Self { rank_rel_tol, residual_tol, fd_step };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rel_tol", self.rank_rel_tol),
            ("residual_tol", self.residual_tol),
            ("fd_step", self.fd_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTolerance(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rank_rel_tol >= 1.0 {
            return Err(Error::InvalidTolerance("rank_rel_tol must be < 1".into()));
        }
        Ok(())
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Result<Self> {
        self.residual_tol = residual_tol;
        self.validate()?;
        Ok(self)
    }

    /// Absolute cutoff for a given largest singular value.
    pub fn cutoff(&self, sigma_max: f64) -> f64 {
        self.rank_rel_tol * sigma_max
    }
}
