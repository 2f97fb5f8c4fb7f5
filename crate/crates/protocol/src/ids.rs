//! Injected sources of time and message ids, so the same code runs against a
//! virtual clock and seeded randomness under simulation.

use std::time::{SystemTime, UNIX_EPOCH};

use compshare_core::model::Timestamp;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::MsgId;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Timestamp(secs as i64)
    }
}

/// A clock stuck at one instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub Timestamp);

impl Clock for FixedClock {
    fn now(&self) -> Timestamp {
        self.0
    }
}

pub trait IdSource: Send {
    fn next_id(&mut self) -> MsgId;
}

/// Random 16-byte message ids.
#[derive(Debug, Clone)]
pub struct MsgIds(ChaCha20Rng);

impl MsgIds {
    pub fn seeded(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn from_entropy() -> Self {
        Self(ChaCha20Rng::from_os_rng())
    }
}

impl IdSource for MsgIds {
    fn next_id(&mut self) -> MsgId {
        let mut b = [0u8; 16];
        self.0.fill_bytes(&mut b);
        MsgId(b)
    }
}
