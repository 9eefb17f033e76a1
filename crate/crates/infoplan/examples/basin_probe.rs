//! Throwaway: pilot-fit sanity under different knobs (delete me).

use infoplan::gp::{self, Dataset, Hyperparams};
use infoplan::pipeline::Preprocessor;
use infoplan::world::{bezier_pilot_path, inject_outliers, sense, synth_terrain};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let world = synth_terrain(7, 50, 50, 14);
    let extent = world.extent();

    for (label, noise, rho, iters) in [
        ("clean  n=0.1 i=500", 0.1, 0.0, 500usize),
        ("spiky  n=0.1 i=500", 0.1, 0.1, 500),
        ("spiky  n=1.0 i=500", 1.0, 0.1, 500),
        ("spiky  n=2.0 i=500", 2.0, 0.1, 500),
        ("spiky  n=4.0 i=500", 4.0, 0.1, 500),
        ("spiky  n=0.1 i=100", 0.1, 0.1, 100),
        ("spiky  n=2.0 i=100", 2.0, 0.1, 100),
    ] {
        let mut noise_rng = ChaCha12Rng::seed_from_u64(11);
        let mut inj_rng = ChaCha12Rng::seed_from_u64(12);
        let path = bezier_pilot_path(extent, 60);
        let mut batch: Vec<_> = path
            .iter()
            .map(|&p| sense(&world, p, noise, &mut noise_rng).unwrap())
            .collect();
        inject_outliers(&mut batch, rho, &mut inj_rng);
        let vals: Vec<f64> = batch.iter().map(|s| s.value).collect();
        let prep = Preprocessor::from_pilot(extent, &vals).unwrap();
        let mut data = Dataset::new(2);
        for s in &batch {
            data.push(&prep.transform_input(s.location), prep.transform_target(s.value))
                .unwrap();
        }
        let out = gp::optimize_hyperparams(&data, &Hyperparams::standard_init(2), iters);
        let hp = out.hyperparams;
        println!(
            "{label} -> lml={:8.2} ls=[{:.3},{:.3}] sn={:.3} amp={:.2}",
            out.lml,
            hp.lengthscales()[0],
            hp.lengthscales()[1],
            hp.noise_std(),
            hp.amplitude()
        );
    }
}
