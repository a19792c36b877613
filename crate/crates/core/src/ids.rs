//! Opaque identifiers. Each kind has its own monotone allocator so ids are
//! never reused within a run and compare in allocation order.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! define_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub const fn get(self) -> u64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

define_id!(
    /// A trader account.
    TraderId,
    "t"
);
define_id!(
    /// A row of the coin table.
    CoinId,
    "c"
);
define_id!(
    /// A row of the cooperation table.
    RingId,
    "r"
);
define_id!(
    /// A fractal ring.
    FractalId,
    "f"
);
define_id!(
    /// An entry of the service catalog.
    ServiceId,
    "s"
);

/// Hands out fresh identifiers of every kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    next_trader: u64,
    next_coin: u64,
    next_ring: u64,
    next_fractal: u64,
}

impl IdAllocator {
    pub fn trader(&mut self) -> TraderId {
        let id = TraderId(self.next_trader);
        self.next_trader += 1;
        id
    }

    pub fn coin(&mut self) -> CoinId {
        let id = CoinId(self.next_coin);
        self.next_coin += 1;
        id
    }

    pub fn ring(&mut self) -> RingId {
        let id = RingId(self.next_ring);
        self.next_ring += 1;
        id
    }

    pub fn fractal(&mut self) -> FractalId {
        let id = FractalId(self.next_fractal);
        self.next_fractal += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocators_are_monotone_and_independent() {
        let mut ids = IdAllocator::default();
        let a = ids.coin();
        let b = ids.coin();
        let r = ids.ring();
        assert!(a < b);
        assert_eq!(r, RingId(0));
        assert_eq!(ids.trader(), TraderId(0));
        assert_eq!(b.to_string(), "c1");
    }
}
