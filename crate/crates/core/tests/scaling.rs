//! Per-iteration cost grows roughly like `m + n²`: doubling `n` at a fixed
//! sampling rate should cost about four times as much per iteration.

use std::time::Instant;

use edg::dualbasis::universe_size;
use edg::geometry::PointConfig;
use edg::init::init_one_step;
use edg::linalg::gaussian_matrix;
use edg::sampling::{measure_points, sample_uniform_replacement};
use edg::solvers::{run_solver, SolverConfig, Variant};

fn per_iteration_secs(n: usize) -> f64 {
    let p = PointConfig::new(gaussian_matrix(3, n, 1)).unwrap().centered();
    let omega = sample_uniform_replacement(n, universe_size(n) / 10, 2).unwrap();
    let obs = measure_points(&p, &omega).unwrap();
    let x0 = init_one_step(&omega, &obs, 3).unwrap();
    let mut cfg = SolverConfig::new(3, Variant::FrameDescent);
    cfg.max_iters = 40;
    cfg.rel_tol = 1e-300;
    (0..5)
        .map(|_| {
            let start = Instant::now();
            let (_, rep) = run_solver(&omega, &obs, &cfg, &x0).unwrap();
            start.elapsed().as_secs_f64() / rep.iterations.max(1) as f64
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn doubling_n_costs_at_most_six_times() {
    let small = per_iteration_secs(400);
    let large = per_iteration_secs(800);
    let ratio = large / small;
    println!("per-iteration seconds: n=400 {small:.3e}, n=800 {large:.3e}, ratio {ratio:.2}");
    assert!(ratio <= 6.0, "ratio {ratio}");
}
