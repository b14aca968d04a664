//! Metrics on compact sets of `R^N` from weighted distance functions.
//!
//! A set `A` is embedded as `φ∘u_A` in `L^p`, where `u_A` is its distance
//! function and φ a decreasing profile. See the book under `book/` for a tour.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod dists;
pub mod domain;
pub mod error;
pub mod geo;
pub mod io;
pub mod metrics;
pub mod morph;
pub mod profiles;
mod quad;
pub mod rigid;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    pub mod introduction {
        #![doc = include_str!("../../../book/src/introduction.md")]
    }
    pub mod shapes {
        #![doc = include_str!("../../../book/src/shapes.md")]
    }
    pub mod profiles {
        #![doc = include_str!("../../../book/src/profiles.md")]
    }
    pub mod distances {
        #![doc = include_str!("../../../book/src/distances.md")]
    }
    pub mod quotient {
        #![doc = include_str!("../../../book/src/quotient.md")]
    }
    pub mod morphology {
        #![doc = include_str!("../../../book/src/morphology.md")]
    }
    pub mod geodesics {
        #![doc = include_str!("../../../book/src/geodesics.md")]
    }
    pub mod convex {
        #![doc = include_str!("../../../book/src/convex.md")]
    }
    pub mod cli {
        #![doc = include_str!("../../../book/src/cli.md")]
    }
}
