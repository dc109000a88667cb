use crate::error::{invalid_argument, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Smoothing kernel used by the local-constant estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    /// Unscaled kernel `K(u)`.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    /// `K_h(u) = K(u / h) / h` without argument checks, for inner loops.
    #[inline]
    pub(crate) fn scaled_unchecked(self, h: f64, u: f64) -> f64 {
        self.eval(u / h) / h
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
        }
    }
}

/// `K_h(u) = K(u / h) / h`.
pub fn kernel_h(kernel: Kernel, h: f64, u: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid_argument(format!("bandwidth must be positive, got {h}")));
    }
    Ok(kernel.scaled_unchecked(h, u))
}
