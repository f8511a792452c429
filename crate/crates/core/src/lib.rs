//! Balancing vectors inside a zonotope.
//!
//! Given `Z = {Aᵀu : ‖u‖∞ <= 1}` and vectors `v_1..v_n ∈ Z` with `n <= d`,
//! [`coloring::balance`] finds signs with `‖Σ x_i v_i‖_Z` of order
//! `√(n log(2d/n))`.

pub mod coloring;
pub mod io;
pub mod kernel;
pub mod lewis;
pub mod verify;
pub mod zonotope;

use thiserror::Error;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or out-of-contract input.
    Input,
    /// A solver failed on valid input.
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] io::ParseError),
    #[error(transparent)]
    Generate(#[from] io::GenerateError),
    #[error(transparent)]
    Zonotope(#[from] zonotope::ZonotopeError),
    #[error(transparent)]
    Coloring(#[from] coloring::ColoringError),
    #[error(transparent)]
    Lewis(#[from] lewis::LewisError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    Kernel(#[from] kernel::KernelError),
}

fn kernel_kind(e: &kernel::KernelError) -> ErrorKind {
    match e {
        kernel::KernelError::Dimension(_) => ErrorKind::Input,
        _ => ErrorKind::Numerical,
    }
}

fn zonotope_kind(e: &zonotope::ZonotopeError) -> ErrorKind {
    match e {
        zonotope::ZonotopeError::Kernel(k) => kernel_kind(k),
        _ => ErrorKind::Input,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use coloring::ColoringError as C;
        use lewis::LewisError as L;
        use verify::VerifyError as V;
        match self {
            Error::Parse(_) | Error::Generate(_) => ErrorKind::Input,
            Error::Zonotope(e) => zonotope_kind(e),
            Error::Coloring(e) => match e {
                C::Exhausted { .. } => ErrorKind::Numerical,
                C::Kernel(k) => kernel_kind(k),
                C::Zonotope(z) => zonotope_kind(z),
                _ => ErrorKind::Input,
            },
            Error::Lewis(e) => match e {
                L::BadGenerators | L::Singular => ErrorKind::Input,
                L::NonConvergence { .. } => ErrorKind::Numerical,
                L::Kernel(k) => kernel_kind(k),
            },
            Error::Verify(e) => match e {
                V::Lp(_) => ErrorKind::Numerical,
                V::Kernel(k) => kernel_kind(k),
                V::Zonotope(z) => zonotope_kind(z),
                _ => ErrorKind::Input,
            },
            Error::Kernel(k) => kernel_kind(k),
        }
    }
}
