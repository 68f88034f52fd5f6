use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical kernels.
///
/// Variants carry enough context (mode, order, argument) for a batch driver
/// to report which operation failed and where.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bessel function argument outside the supported domain.
    BesselDomain { order: i64, x: f64 },
    /// Requested Bessel order exceeds the configured maximum.
    BesselOrder { order: usize, max: usize },
    /// Bessel value is not representable as a finite `f64`.
    BesselOverflow { order: usize, x: f64 },
    /// Invalid grid or band construction parameters.
    InvalidGrid(&'static str),
    /// Profile length or mode count does not match the grid.
    ShapeMismatch { expected: usize, found: usize },
    /// Too few angular samples to resolve the requested modes.
    Aliasing { n_phi: usize, required: usize },
    /// Extrapolated tail integral does not converge.
    DivergentTail {
        mode: Option<i64>,
        power: i32,
        exponent: f64,
    },
    /// Tridiagonal or block solve hit a (numerically) singular pivot.
    SingularSystem { mode: Option<i64>, row: usize },
    /// Boundary control schedule does not cover the requested step.
    MissingControl { step: usize },
    /// Step configuration is unusable (e.g. non-positive time step).
    InvalidConfig(&'static str),
    /// Conformal map fails the admissibility gate.
    InadmissibleMap { min_modulus: f64 },
    /// Point lies inside the disc where the map series is not defined.
    OutsideDomain { modulus: f64, r0: f64 },
    /// Map series terms do not decay at the evaluation point.
    SlowSeries { ratio: f64 },
    /// Mass operator coupling is wider than allowed.
    BandwidthOverflow { bandwidth: usize, cap: usize },
    /// A state value became NaN or infinite.
    NonFinite { mode: Option<i64> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BesselDomain { order, x } => {
                write!(f, "Bessel function of order {order} undefined at x = {x:e}")
            }
            Error::BesselOrder { order, max } => {
                write!(f, "Bessel order {order} exceeds configured maximum {max}")
            }
            Error::BesselOverflow { order, x } => {
                write!(f, "Bessel function of order {order} overflows at x = {x:e}")
            }
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::Aliasing { n_phi, required } => {
                write!(
                    f,
                    "{n_phi} angular samples cannot resolve the modes (need at least {required})"
                )
            }
            Error::DivergentTail { mode, power, exponent } => {
                write!(
                    f,
                    "tail integral with weight s^{power} diverges (fitted decay exponent {exponent:.3})"
                )?;
                if let Some(k) = mode {
                    write!(f, " in mode {k}")?;
                }
                Ok(())
            }
            Error::SingularSystem { mode, row } => {
                write!(f, "singular pivot at row {row}")?;
                if let Some(k) = mode {
                    write!(f, " in mode {k}")?;
                }
                Ok(())
            }
            Error::MissingControl { step } => {
                write!(f, "boundary control schedule has no sample for step {step}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid stepper configuration: {msg}"),
            Error::InadmissibleMap { min_modulus } => write!(
                f,
                "conformal map derivative modulus {min_modulus:e} on the boundary ring is below 1e-6"
            ),
            Error::OutsideDomain { modulus, r0 } => {
                write!(f, "|z| = {modulus} lies inside the disc of radius {r0}")
            }
            Error::SlowSeries { ratio } => {
                write!(f, "map series terms do not decay (term ratio {ratio:.3})")
            }
            Error::BandwidthOverflow { bandwidth, cap } => {
                write!(f, "mass operator bandwidth {bandwidth} exceeds coupling cap {cap}")
            }
            Error::NonFinite { mode } => {
                write!(f, "non-finite value encountered")?;
                if let Some(k) = mode {
                    write!(f, " in mode {k}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}
