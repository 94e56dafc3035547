use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Independent stream for path `index` of an ensemble seeded by `base_seed`.
///
/// The seed selects the key and the index selects the ChaCha stream, so any
/// single path can be regenerated from the pair alone.
pub fn path_rng(base_seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}
