//! Identifier newtypes shared across modules.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty), $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Content provider.
    CpId(u32),
    "cp"
);
id_type!(
    /// Globally unique content identifier (a MovieLens `movieId` for real traces).
    ContentId(u32),
    "content"
);
id_type!(ContractId(u64), "contract");
id_type!(
    /// Dataset-level user identifier. Never written to the ledger.
    UserId(u32),
    "user"
);
