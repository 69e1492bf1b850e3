//! Sugeno-integral classifiers with k-maxitive capacities.
//!
//! A capacity `mu` on the feature set assigns a weight in `[0, 1]` to every
//! coalition of features; the Sugeno integral aggregates a vector of
//! utilities against it, and an instance is classified positive when the
//! integral reaches a threshold `beta`. Restricting `mu` to be k-maxitive
//! (determined by its values on sets of at most `k` features) keeps the
//! number of parameters polynomial in `m` and makes the classifier readable
//! as a short list of rules.
//!
//! ```
//! use sugeno::capacity::Capacity;
//! use sugeno::integral::sugeno_sorted;
//!
//! let mu = Capacity::cardinality(3).unwrap();
//! assert_eq!(sugeno_sorted(&mu, &[0.3, 0.3, 0.3]).unwrap(), 0.3);
//! ```

pub mod capacity;
pub mod error;
pub mod eval;
pub mod features;
pub mod integral;
pub mod lp;
pub mod model;
pub mod random;
pub mod rules;
pub mod theory;
pub mod trainer;

pub use capacity::{Capacity, SubsetMask};
pub use error::{Error, Result};
pub use model::SugenoModel;
