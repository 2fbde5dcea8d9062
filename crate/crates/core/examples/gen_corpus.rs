//! Writes the seeded two-region corpus used by the oracle-equivalence tests.
//!
//! `cargo run -p hetdubins --example gen_corpus`

#[path = "../tests/common/mod.rs"]
mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;
const COUNT: usize = 24;

fn main() -> std::io::Result<()> {
    let dir = common::corpus_dir();
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for i in 0..COUNT {
        let spec = common::TwoRegion::random(&mut rng, false);
        let json = common::scenario_json(&spec.scenario(), SEED);
        let path = dir.join(format!("two_region_{i:02}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&json)? + "\n")?;
        println!("{}", path.display());
    }
    Ok(())
}
