use stochavg::env::two_point_environment;
use stochavg::io::{read_paths_csv, write_paths_csv, EnvColumns, Provenance};
use stochavg::lattice::MigrationKernel;
use stochavg::limits::{euler_maruyama, walker_limit_sample, SdeSpec};
use stochavg::numeric::{mean_se, mean_var};
use stochavg::path::{uniform_grid, Ensemble};
use stochavg::simulate::{
    brwre_ensemble, speed_walker_ensemble, BrwreOptions, ParticleState, SpeedLaw,
};

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap()
        .install(f)
}

fn brwre(n: u32, n_paths: usize, seed: u64) -> Ensemble {
    let kernel = MigrationKernel::complete(2, 1.0).unwrap();
    let env = two_point_environment(0.5, 0.3, n).unwrap();
    let x0 = ParticleState::from_scaled(&[1.0, 0.5], n).unwrap();
    let grid = uniform_grid(1.0, 0.25);
    brwre_ensemble(
        &kernel,
        &env,
        &x0,
        1.0,
        &grid,
        n_paths,
        seed,
        BrwreOptions::default(),
    )
    .unwrap()
}

fn to_csv(e: &Ensemble) -> Vec<u8> {
    let env = two_point_environment(0.5, 0.3, e.n).unwrap();
    let mut buf = Vec::new();
    write_paths_csv(
        &mut buf,
        e,
        &Provenance::new("0".repeat(64), e.seed),
        EnvColumns::Offspring(&env),
    )
    .unwrap();
    buf
}

#[test]
fn csv_round_trip_preserves_scaled_states() {
    let e = brwre(10, 20, 5);
    let table = read_paths_csv(to_csv(&e).as_slice()).unwrap();
    let back = table.ensemble;
    assert_eq!(back.n_paths(), 20);
    assert_eq!(back.grid, e.grid);
    assert_eq!(back.demes, 2);
    for k in 0..e.grid.len() {
        for d in 0..2 {
            assert_eq!(back.column(k, d), e.column(k, d));
        }
    }
    assert!(table.comments.iter().any(|c| c.contains("seed")));
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    let one = in_pool(1, || to_csv(&brwre(10, 16, 9)));
    let many = in_pool(5, || to_csv(&brwre(10, 16, 9)));
    assert_eq!(one, many);

    let spec = SdeSpec::new(MigrationKernel::single(), 0.5, 0.91, 0.09).unwrap();
    let grid = uniform_grid(1.0, 0.5);
    let a = in_pool(1, || {
        euler_maruyama(&spec, &[1.0], 1.0, 0.01, 32, 3, &grid).unwrap()
    });
    let b = in_pool(4, || {
        euler_maruyama(&spec, &[1.0], 1.0, 0.01, 32, 3, &grid).unwrap()
    });
    assert_eq!(a.column(2, 0), b.column(2, 0));
    assert_eq!(a.clamp_events, b.clamp_events);
}

#[test]
fn total_mass_grows_at_the_averaged_rate() {
    // symmetric migration keeps the total; its mean grows like e^{(alpha + sigma_e^2) t}
    let e = brwre(20, 800, 17);
    let last = e.grid.len() - 1;
    let totals: Vec<f64> = (0..e.n_paths())
        .map(|p| e.paths[p].value(last, 0) + e.paths[p].value(last, 1))
        .collect();
    let (m, se) = mean_se(&totals);
    let want = 1.5 * (0.5_f64 + 0.09).exp();
    assert!((m - want).abs() < 4.0 * se, "mean {m} +- {se}, want {want}");
}

#[test]
fn walker_moments_approach_the_brownian_limit() {
    let law = SpeedLaw::two_point(0.5 / 40.0, 0.5).unwrap();
    let grid = [0.0, 1.0];
    let w = speed_walker_ensemble(&law, 40, 1.0, &grid, 4000, 21, false).unwrap();
    let b = walker_limit_sample(0.5, 1.0, &grid, 4000, 22).unwrap();
    let (mw, vw) = mean_var(&w.column(1, 0));
    let (mb, vb) = mean_var(&b.column(1, 0));
    assert!((mw - mb).abs() < 0.1, "{mw} vs {mb}");
    assert!((vw / vb - 1.0).abs() < 0.1, "{vw} vs {vb}");
}
