//! Counter-based seed splitting for sweeps.

/// The SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `hash64(master, solver_index, n_index, trial_index)`: each coordinate is
/// folded in with one SplitMix64 round, so the result depends on every
/// coordinate and on their order.
pub fn cell_seed(master: u64, solver_index: u64, n_index: u64, trial_index: u64) -> u64 {
    [solver_index, n_index, trial_index]
        .into_iter()
        .fold(splitmix64(master), |acc, x| splitmix64(acc ^ splitmix64(x)))
}
