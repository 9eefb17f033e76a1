//! Gaussian process regression on a noisy 2-D field.
//!
//! Draws training samples from a known smooth function, optimizes the kernel
//! hyperparameters by Adam ascent on the log marginal likelihood, and reports
//! the predictive accuracy on a held-out grid — first with the untuned
//! starting hyperparameters, then with the optimized ones.
//!
//! Run with: `cargo run --example gp_fit`

use infoplan::gp::{self, Dataset, Hyperparams};
use infoplan::SeedTree;
use ndarray::Array2;
use rand::Rng;

fn truth(x1: f64, x2: f64) -> f64 {
    (1.3 * x1).sin() * (0.9 * x2).cos() + 0.5 * x1 * x2
}

fn main() {
    let mut rng = SeedTree::new(42).stream("gp-example", 0);

    // 80 noisy samples at uniform random locations in [-1, 1]^2.
    let noise = 0.05;
    let mut data = Dataset::new(2);
    for _ in 0..80 {
        let x1 = rng.random_range(-1.0..1.0);
        let x2 = rng.random_range(-1.0..1.0);
        let y = truth(x1, x2) + noise * rng.random_range(-1.0..1.0);
        data.push(&[x1, x2], y).expect("dimensions match");
    }

    // A 20x20 evaluation grid, never seen during training.
    let m = 20;
    let mut queries = Array2::zeros((m * m, 2));
    for i in 0..m {
        for j in 0..m {
            queries[(i * m + j, 0)] = -1.0 + 2.0 * (j as f64 + 0.5) / m as f64;
            queries[(i * m + j, 1)] = -1.0 + 2.0 * (i as f64 + 0.5) / m as f64;
        }
    }
    let eval = |hp: &Hyperparams| {
        let model = gp::fit(&data, hp).expect("fit");
        let (mean, var) = gp::predict(&model, &queries);
        let mut sq = 0.0;
        for (k, &mu) in mean.iter().enumerate() {
            let t = truth(queries[(k, 0)], queries[(k, 1)]);
            sq += (mu - t) * (mu - t);
        }
        let rmse = (sq / mean.len() as f64).sqrt();
        let mean_std = var.mapv(f64::sqrt).mean().unwrap();
        (rmse, mean_std)
    };

    let init = Hyperparams::standard_init(2);
    let lml0 = gp::log_marginal_likelihood(&data, &init).expect("lml");
    let (rmse0, std0) = eval(&init);
    println!("initial     lml {lml0:8.2}  held-out rmse {rmse0:.4}  mean pred std {std0:.4}");
    println!(
        "            amplitude {:.3}  lengthscales [{:.3}, {:.3}]  noise {:.4}",
        init.amplitude(),
        init.lengthscales()[0],
        init.lengthscales()[1],
        init.noise_std()
    );

    let outcome = gp::optimize_hyperparams(&data, &init, 400);
    if let Some(warning) = &outcome.warning {
        println!("optimizer stopped early: {warning}");
    }
    let hp = &outcome.hyperparams;
    let (rmse1, std1) = eval(hp);
    println!("optimized   lml {:8.2}  held-out rmse {rmse1:.4}  mean pred std {std1:.4}", outcome.lml);
    println!(
        "            amplitude {:.3}  lengthscales [{:.3}, {:.3}]  noise {:.4}",
        hp.amplitude(),
        hp.lengthscales()[0],
        hp.lengthscales()[1],
        hp.noise_std()
    );
    println!(
        "\nmarginal likelihood climbed {:.2} nats; rmse shrank by {:.1}x",
        outcome.lml - lml0,
        rmse0 / rmse1
    );
}
