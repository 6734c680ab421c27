//! Discrete triangular sampling over a run of values.

use rand::Rng;

/// Draws an integer in `[lo, hi]` from a discrete triangular distribution
/// peaked at `mode`.
///
/// Value `v` has weight `w + 1 - |v - mode|` with `w = max(mode - lo, hi - mode)`,
/// so every value of the run keeps a positive probability and the mode is the
/// most likely draw. `mode` is clamped into the run first.
pub fn sample_triangular<R: Rng + ?Sized>(lo: usize, hi: usize, mode: usize, rng: &mut R) -> usize {
    assert!(lo <= hi, "empty run [{lo}, {hi}]");
    if lo == hi {
        return lo;
    }
    let mode = mode.clamp(lo, hi);
    let w = (mode - lo).max(hi - mode);
    let weight = |v: usize| (w + 1 - v.abs_diff(mode)) as u64;

    let total: u64 = (lo..=hi).map(weight).sum();
    let mut ticket = rng.random_range(0..total);
    for v in lo..=hi {
        let wv = weight(v);
        if ticket < wv {
            return v;
        }
        ticket -= wv;
    }
    unreachable!("ticket exceeded total weight")
}
