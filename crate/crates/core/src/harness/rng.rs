use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for one trial: the seed picks the key, the trial index picks
/// the stream, and draws advance the block counter. Trials never share
/// state, so any worker count yields the same numbers.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
