//! Monte Carlo tree search over steering sequences, scalar vs multi-objective.
//!
//! Hand-builds two reward maps on a small grid — an "information" layer with a
//! peak in the north-east and a "revisit" layer with a peak due north — and
//! plans from the same start pose three ways: scalar search on each layer
//! alone, then Pareto search on both. The Pareto trajectory lands between the
//! two single-objective ones: it trades the layers off instead of committing
//! to either.
//!
//! Run with: `cargo run --example pareto_search`

use infoplan::mcts::{pareto_front, search, RewardMaps, SearchConfig, SearchRngs};
use infoplan::world::{Extent, GridGeometry, MotionConfig, RobotState, Workspace};
use infoplan::SeedTree;
use ndarray::Array2;

/// A smooth bump of height 1 centered at `(cx, cy)` with radius `r`.
fn bump(rows: usize, cols: usize, cx: f64, cy: f64, r: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (x, y) = (j as f64 + 0.5, i as f64 + 0.5);
        let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        (-d2 / (2.0 * r * r)).exp()
    })
}

fn run(ws: &Workspace, maps: &RewardMaps, objectives: usize, label: &str) {
    let config = SearchConfig::new(1.0, 600, 5, objectives).expect("valid config");
    let seeds = SeedTree::new(9);
    let mut rngs = SearchRngs {
        select: seeds.stream("search", 0),
        expand: seeds.stream("expansion", 0),
    };
    let start = RobotState::new(10.0, 2.0, std::f64::consts::FRAC_PI_2);
    let outcome = search(ws, start, maps, &config, &mut rngs).expect("search runs");

    let mut pose = start;
    let mut path = vec![pose];
    for &action in &outcome.actions {
        pose = ws.step(pose, action);
        path.push(pose);
    }
    let end = path.last().unwrap();
    print!("{label:\u{20}<26} actions {:?} -> ", outcome.actions);
    println!("end ({:4.1}, {:4.1})", end.x1, end.x2);
}

fn main() {
    let extent = Extent::new(0.0, 20.0, 0.0, 20.0).expect("valid extent");
    let geometry = GridGeometry::new(extent, 20, 20).expect("valid grid");
    let motion = MotionConfig::symmetric(2.0, 1.0, 0.3, 5).expect("valid motion");
    let ws = Workspace::new(extent, motion);

    let info = bump(20, 20, 17.0, 14.0, 3.0); // north-east
    let revisit = bump(20, 20, 10.0, 18.0, 3.0); // due north

    let single_info = RewardMaps::new(geometry, vec![info.clone()]).unwrap();
    let single_revisit = RewardMaps::new(geometry, vec![revisit.clone()]).unwrap();
    let both = RewardMaps::new(geometry, vec![info, revisit]).unwrap();

    println!("start (10.0, 2.0) heading north; 600 iterations each\n");
    run(&ws, &single_info, 1, "scalar: information");
    run(&ws, &single_revisit, 1, "scalar: revisit");
    run(&ws, &both, 2, "pareto: both layers");

    // The same non-dominated sweep the tree uses during selection, on a
    // hand-made candidate set: only (4,1), (2,3), and (1,4) survive.
    let candidates = vec![[4.0, 1.0], [2.0, 3.0], [1.0, 4.0], [2.0, 1.0], [1.0, 3.0]];
    let front = pareto_front(&candidates);
    println!("\npareto_front({candidates:?}) = {front:?}");
}
