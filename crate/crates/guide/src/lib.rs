//! Compiles the code listings in `book/src` as doctests. Nothing here is
//! meant to be used as a library.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/dispersion.md")]
pub mod dispersion {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/hankel.md")]
pub mod hankel {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/fredholm.md")]
pub mod fredholm {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/quintic.md")]
pub mod quintic {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/splitstep.md")]
pub mod splitstep {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
