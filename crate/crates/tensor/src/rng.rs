use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one generator type used everywhere: counter-based, seeded, portable.
pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw via Box-Muller; kept local so parameter draws never
/// depend on a distribution crate's sampling algorithm.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}
