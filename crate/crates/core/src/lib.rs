//! Random compositions of holomorphic germs fixing the origin of `C^m`, and
//! the random matrix products formed by their linear parts.
//!
//! - [`jets`]: truncated power series, composition and evaluation.
//! - [`cocycle`]: renormalized products, Lyapunov spectra, invariant forms.
//! - [`classify`]: attracting, repelling, neutral and semi-neutral verdicts.
//! - [`germ_dynamics`]: orbits, bounded fractions, trapping radii, limit maps.
//! - [`gallery`]: built-in example systems and Brjuno sums.
//!
//! All randomized routines are reproducible from a master seed; see [`seed`].

pub mod classify;
pub mod cocycle;
pub mod gallery;
pub mod germ_dynamics;
pub mod jets;
pub mod linalg;
pub mod record;
pub mod seed;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/cocycles.md")]
    mod cocycles {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/germ-dynamics.md")]
    mod germ_dynamics {}
    #[doc = include_str!("../../../book/src/gallery.md")]
    mod gallery {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
