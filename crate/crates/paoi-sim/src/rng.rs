//! Counter-based random draws.
//!
//! Each draw hashes `(seed, stream, c1, c2, c3)` through the splitmix64
//! finalizer and maps the result to `[0, 1)`. There is no mutable generator
//! state: any piece of the simulator can ask for "the arrival coin of link
//! `i` in slot `n`" and always receive the same value, which keeps runs
//! bit-identical no matter which draws other code paths consume, and lets
//! modes share arrival, medium-access, and delivery randomness exactly.

/// Independent draw families. The discriminants keep the families apart in
/// the hash even when the counters collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Per-link, per-slot arrival coins.
    Arrival = 0x41,
    /// Per-link, per-slot medium-access coins.
    Mac = 0x4d,
    /// Per-link, per-slot delivery coins (conditional success given the
    /// active set).
    Delivery = 0x53,
    /// Network generation: point counts, positions, link orientations.
    Net = 0x4e,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, w: u64) -> u64 {
    mix(h.wrapping_add(w).wrapping_add(GOLDEN))
}

/// Uniform draw in `[0, 1)` determined entirely by the arguments.
#[inline]
pub fn draw(seed: u64, stream: Stream, c1: u64, c2: u64, c3: u64) -> f64 {
    let mut h = mix(seed ^ GOLDEN);
    h = absorb(h, stream as u64);
    h = absorb(h, c1);
    h = absorb(h, c2);
    h = absorb(h, c3);
    // Top 53 bits -> [0, 1) on the full ulp grid.
    ((h >> 11) as f64) * (1.0 / (1u64 << 53) as f64)
}
