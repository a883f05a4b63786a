//! Development harness: prints the empirical quantities the defaults and
//! acceptance tolerances are pinned against. Run with --release.

use phasebench_core::campaign::verify_ground_truth;
use phasebench_core::grid::MagnitudeField;
use phasebench_core::instance::*;
use phasebench_core::solvers::{
    alternating_solve, charge_flip_solve, rrr_solve, SolverConfig,
};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("i2");

    match mode {
        "i2" => untuned_i2(),
        "tune" => tuning(),
        "ratio" => ratios(&args[2..]),
        "solve" => solve(&args[2..]),
        "ap" => alternating(),
        "cf" => charge_flip(),
        "trace" => trace(&args[2..]),
        other => eprintln!("unknown mode {other}"),
    }
}

fn alternating() {
    for trial in 0..20 {
        let spec = InstanceSpec::new(100, Grade::E, 3000 + trial);
        let (table, _) = generate(&spec).unwrap();
        let data = MagnitudeField::from_photon_table(&table);
        let mut cfg = SolverConfig::new(7000 + trial);
        cfg.max_iterations = 100_000;
        let out = alternating_solve(&data, 800, &cfg).unwrap();
        println!(
            "trial {trial}: iters {} solved {} stalled {} ratio {:.4}",
            out.report.iterations, out.report.solved, out.report.stalled, out.report.final_ratio
        );
    }
}

fn charge_flip() {
    let mut iters = Vec::new();
    for trial in 0..20 {
        let spec = InstanceSpec::new(100, Grade::E, 4000 + trial);
        let (table, _) = generate(&spec).unwrap();
        let data = MagnitudeField::from_photon_table(&table);
        let mut cfg = SolverConfig::new(8000 + trial);
        cfg.max_iterations = 3_000_000;
        let out = charge_flip_solve(&data, 800, &cfg).unwrap();
        println!(
            "trial {trial}: iters {} solved {} ratio {:.4} ({:.1}s)",
            out.report.iterations, out.report.solved, out.report.final_ratio,
            out.report.wall_seconds
        );
        iters.push((out.report.iterations, out.report.solved));
    }
    let solved = iters.iter().filter(|(_, s)| *s).count();
    println!("solved {solved}/20");
}

fn trace(args: &[String]) {
    let seed: u64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(0);
    let spec = InstanceSpec::new(100, Grade::H, seed);
    let (table, _) = generate(&spec).unwrap();
    let data = MagnitudeField::from_photon_table(&table);
    let mut cfg = SolverConfig::new(seed + 100);
    cfg.max_iterations = 3_000_000;
    cfg.trace_stride = 1;
    let out = rrr_solve(&data, 800, &cfg).unwrap();
    let trace = out.report.trace.unwrap();
    let ratios: Vec<f64> = trace.iter().map(|&(_, r)| r).collect();
    let solved_at = out.report.iterations;
    let first_cross_08 = trace
        .iter()
        .find(|&&(_, r)| r > 0.8)
        .map(|&(i, _)| i)
        .unwrap_or(0);
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    println!(
        "seed {seed}: solved at {solved_at}, first>0.8 at {first_cross_08} (gap {}), median plateau {median:.4}",
        solved_at - first_cross_08
    );
}

fn untuned_i2() {
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let seeds = 20;
    for seed in 0..seeds {
        let atoms = sample_atoms(100, seed).unwrap();
        let i2 = intensity_second_moment(&synthesize_intensities(&atoms, DEFAULT_FILTER_B));
        sum += i2;
        lo = lo.min(i2);
        hi = hi.max(i2);
        println!("seed {seed}: i2 = {i2:.4}");
    }
    println!("mean {:.4}  min {lo:.4}  max {hi:.4}", sum / seeds as f64);
}

fn tuning() {
    for n in [100usize, 400] {
        for (grade, target, dir) in [
            ("E", 4.5, TuneDirection::Increase),
            ("H", 3.5, TuneDirection::Decrease),
        ] {
            let t0 = Instant::now();
            let atoms = sample_atoms(n, 1).unwrap();
            let start = intensity_second_moment(&synthesize_intensities(&atoms, DEFAULT_FILTER_B));
            let (tuned, achieved) = tune_i2(&atoms, target, dir, 1, DEFAULT_FILTER_B).unwrap();
            let exact = intensity_second_moment(&synthesize_intensities(&tuned, DEFAULT_FILTER_B));
            println!(
                "N={n} {grade}: start {start:.4} -> achieved {achieved:.5} (exact {exact:.5}, overshoot {:+.5}) in {:.2}s",
                achieved - target,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}

fn ratios(args: &[String]) {
    let ppa: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(10_000.0);
    let seeds: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(5);
    for n in [100usize, 200, 300, 400] {
        let mut ratios = Vec::new();
        let t0 = Instant::now();
        for seed in 0..seeds {
            let spec = InstanceSpec {
                n,
                grade: Grade::M,
                seed,
                photons_per_atom: ppa,
                filter_b: DEFAULT_FILTER_B,
            };
            let (table, gt) = generate(&spec).unwrap();
            let v = verify_ground_truth(&table, &gt, ppa, 0.95).unwrap();
            ratios.push(v.ratio);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "ppa={ppa:.0} N={n}: mean ratio {mean:.5} min {min:.5} ({:.1}s)",
            t0.elapsed().as_secs_f64()
        );
    }
}

fn solve(args: &[String]) {
    let n: usize = args.first().map(|s| s.parse().unwrap()).unwrap_or(100);
    let grade: Grade = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(Grade::E);
    let trials: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let mut iters = Vec::new();
    let t0 = Instant::now();
    for trial in 0..trials {
        let spec = InstanceSpec {
            n,
            grade,
            seed: 1000 + trial,
            photons_per_atom: DEFAULT_PHOTONS_PER_ATOM,
            filter_b: DEFAULT_FILTER_B,
        };
        let (table, _) = generate(&spec).unwrap();
        let data = MagnitudeField::from_photon_table(&table);
        let mut cfg = SolverConfig::new(5000 + trial);
        cfg.max_iterations = 3_000_000;
        let out = rrr_solve(&data, 8 * n, &cfg).unwrap();
        iters.push(out.report.iterations);
        println!(
            "trial {trial}: iters {} solved {} ratio {:.4} ({:.2}s)",
            out.report.iterations, out.report.solved, out.report.final_ratio, out.report.wall_seconds
        );
    }
    let mean = iters.iter().sum::<u64>() as f64 / iters.len() as f64;
    println!(
        "N={n}{grade}: mean {mean:.1} log10 {:.2} total {:.1}s",
        mean.log10(),
        t0.elapsed().as_secs_f64()
    );
}
