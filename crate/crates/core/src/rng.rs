//! Named random substreams derived from one master seed.
//!
//! The seed of substream `name` is `SHA-256("ris-mcrb/" || master_le || name)`,
//! used as the 32-byte key of a ChaCha20 generator. Streams with different
//! names are independent for all practical purposes, and a stream's content
//! never depends on how many other streams were drawn.
//!
//! Names in use: `"loads"` for RIS load sequences and
//! `"noise/<point>/<trial>"` for Monte-Carlo observation noise, where `<point>`
//! labels the operating point (the transmit power in dBm in sweeps).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub const LOADS_STREAM: &str = "loads";

pub fn substream(master: u64, name: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"ris-mcrb/");
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(seed)
}

pub fn noise_stream_name(point: &str, trial: usize) -> String {
    format!("noise/{point}/{trial}")
}
