//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any of them fails.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xagent_core::agent::{infer_waypoints, run_mission_algorithm2, trajectory_svg, waypoint_errors};
use xagent_core::causal::{
    infer_g, predict_accel, run_experiment, CausalConfig, CausalModel, Description, GProfile, HardwareSpec,
    Prediction, DEFAULT_DESCRIPTION,
};
use xagent_core::control::{Outcome, PController, DEFAULT_TIME_LIMIT};
use xagent_core::demo::{run_demonstrator, DemoConfig, Demonstration};
use xagent_core::maps;
use xagent_core::optimize::SearchSpec;
use xagent_core::scaling::{loglog_slope, scaling_row, ScalingSetup};
use xagent_core::vision::dist;
use xagent_core::world::{is_traversable, view, MapParams};
use xagent_core::{Frame, Kernel, Position, TileMap, WorldState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn with_seed(name: &str, seed: u64) -> TileMap {
    let mut map = maps::bundled(name).unwrap().unwrap();
    let mut p = map.params();
    p.seed = seed;
    map.set_params(p);
    map
}

fn record(map: &TileMap, config: &DemoConfig) -> Demonstration {
    run_demonstrator(&mut WorldState::new(map.clone()), map.path(), config, "acceptance").unwrap()
}

fn mission_pattern() -> Verdict {
    let spec = SearchSpec::default();
    let h = spec.step;
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, want) in [("mission1", Outcome::Success), ("mission2", Outcome::Fail), ("mission3", Outcome::Success)] {
        let started = Instant::now();
        let map = maps::bundled(name).unwrap().unwrap();
        let demo = record(&map, &DemoConfig::default());
        let report = run_mission_algorithm2(
            &mut WorldState::new(map),
            &demo,
            &spec,
            &Kernel::default(),
            &PController::default(),
            DEFAULT_TIME_LIMIT,
        )
        .unwrap();
        let elapsed = started.elapsed();
        let err = report.max_waypoint_error();
        let err_ok = if want == Outcome::Fail { err > 2.0 * h } else { err <= h };
        pass &= report.outcome == want && err_ok && elapsed <= Duration::from_secs(60);
        parts.push(format!("{name} {:?} max_err {err:.2} in {:.1}s", report.outcome, elapsed.as_secs_f64()));
    }
    verdict(pass, parts.join("; "))
}

fn efficiency_scaling() -> Verdict {
    let started = Instant::now();
    let setup = ScalingSetup {
        params: MapParams::default(),
        demo: DemoConfig::default(),
        spec: SearchSpec::default(),
        kernel: Kernel::default(),
        ctl: PController::default(),
        time_limit: DEFAULT_TIME_LIMIT,
    };
    let rows: Vec<_> = [10, 20, 40].iter().map(|&l| scaling_row(l, &setup).unwrap()).collect();
    let agent: Vec<(f64, f64)> = rows.iter().map(|r| (r.l as f64, r.agent_interactions as f64)).collect();
    let base: Vec<(f64, f64)> = rows.iter().map(|r| (r.l as f64, r.baseline_interactions as f64)).collect();
    let (sa, sb) = (loglog_slope(&agent), loglog_slope(&base));
    let increasing = rows.windows(2).all(|w| w[1].ratio() > w[0].ratio());
    let elapsed = started.elapsed();
    let pass = (sa - 1.0).abs() <= 0.3
        && (sb - 2.0).abs() <= 0.3
        && increasing
        && elapsed <= Duration::from_secs(300);
    let ratios: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.ratio())).collect();
    verdict(
        pass,
        format!(
            "agent slope {sa:.3}, sweep slope {sb:.3}, ratios {} in {:.1}s",
            ratios.join(" < "),
            elapsed.as_secs_f64()
        ),
    )
}

fn image_distance_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0usize;
    let frames = 10_000;
    for _ in 0..frames {
        let kernel = Kernel::gaussian(rng.random_range(0.1..5.0)).unwrap();
        let min = kernel.size();
        let (w, h) = (rng.random_range(min..min + 16), rng.random_range(min..min + 16));
        let a: f64 = rng.random_range(0.1..10.0);
        // keep a·u + b inside [0, 1] so the affine image is an unclamped frame
        let span = (1.0 / a).min(1.0);
        let u_px: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..span)).collect();
        let b: f64 = rng.random_range(0.0..=(1.0 - a * span).max(0.0));
        let v_px: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let u = Frame::new(w, h, u_px.clone()).unwrap();
        let v = Frame::new(w, h, v_px).unwrap();
        let au = Frame::new(w, h, u_px.iter().map(|p| (a * p + b).min(1.0)).collect()).unwrap();

        let id = dist(&u, &u, &kernel).unwrap();
        let uv = dist(&u, &v, &kernel).unwrap();
        let vu = dist(&v, &u, &kernel).unwrap();
        let auv = dist(&au, &v, &kernel).unwrap();
        let taps: f64 = kernel.taps().iter().sum();
        if id != 0.0 || (uv - vu).abs() > 1e-9 || (auv - uv).abs() > 1e-6 || (taps - 1.0).abs() > 1e-9 {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures} of {frames} randomized frames violated a property"))
}

fn open_room() -> TileMap {
    let rows = [
        "#########",
        "#S......#",
        "#.......#",
        "#.......#",
        "#.......#",
        "#.......#",
        "#.......#",
        "#......G#",
        "#########",
    ];
    let mut map = TileMap::from_grid(&rows, MapParams::default()).unwrap();
    map.set_path(vec![
        Position::new(6.5, 1.5),
        Position::new(4.0, 4.5),
        Position::new(7.5, 7.5),
    ]);
    map
}

/// Global argmin over every traversable point of the spawn-anchored lattice,
/// restricted to the window around the previous waypoint.
fn oracle_waypoints(map: &TileMap, demo: &Demonstration, spec: &SearchSpec, kernel: &Kernel) -> Vec<Position> {
    let spawn = map.spawn();
    let n = (map.width().max(map.height()) as f64 / spec.step).ceil() as i64;
    let mut lattice: Vec<Position> = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let p = spawn.offset(i as f64 * spec.step, j as f64 * spec.step);
            if is_traversable(map, p) {
                lattice.push(p);
            }
        }
    }
    lattice.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let values: Vec<Vec<f64>> = demo.frames[1..]
        .iter()
        .map(|target| lattice.iter().map(|&p| dist(target, &view(map, p), kernel).unwrap()).collect())
        .collect();
    let mut prev = spawn;
    let mut out = Vec::new();
    for row in &values {
        let eps = 1e-9;
        let mut best: Option<(Position, f64)> = None;
        for (&p, &d) in lattice.iter().zip(row) {
            if (p.x - prev.x).abs() > spec.radius + eps || (p.y - prev.y).abs() > spec.radius + eps {
                continue;
            }
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((p, d));
            }
        }
        prev = best.unwrap().0;
        out.push(prev);
    }
    out
}

fn oracle_equivalence() -> Verdict {
    let map = open_room();
    let demo = record(
        &map,
        &DemoConfig {
            noise: false,
            ..DemoConfig::default()
        },
    );
    let spec = SearchSpec {
        n_avg: 1,
        noise: false,
        ..SearchSpec::default()
    };
    let kernel = Kernel::default();
    let agent = infer_waypoints(&mut WorldState::new(map.clone()), &demo, &spec, &kernel).unwrap();
    let oracle = oracle_waypoints(&map, &demo, &spec, &kernel);
    let close = |a: &Position, b: &Position| (a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9;
    let mismatches = agent.iter().zip(&oracle).filter(|(a, o)| !close(a, o)).count();
    let pass = agent.len() == oracle.len() && mismatches == 0 && !agent.is_empty();
    verdict(pass, format!("{} frames, {mismatches} mismatches against the oracle", agent.len()))
}

fn averaging_benefit() -> Verdict {
    // a fine lattice and a narrow blur put neighbouring candidates within
    // reach of pixel noise; with the default coarse search both rates are
    // close to zero
    let kernel = Kernel::gaussian(0.5).unwrap();
    let rate = |n_avg: usize| {
        let spec = SearchSpec {
            step: 0.25,
            n_avg,
            ..SearchSpec::default()
        };
        let (mut off, mut total) = (0, 0);
        for seed in 0..20 {
            let map = with_seed("mission3", seed);
            let demo = record(&map, &DemoConfig::default());
            let wps = infer_waypoints(&mut WorldState::new(map), &demo, &spec, &kernel).unwrap();
            let errors = waypoint_errors(&wps, &demo.positions);
            off += errors.iter().filter(|&&e| e > spec.step).count();
            total += errors.len();
        }
        (off, total)
    };
    let (one, total) = rate(1);
    let (three, _) = rate(3);
    verdict(
        three < one,
        format!("off-by-more-than-h: n_avg=1 {one}/{total}, n_avg=3 {three}/{total}"),
    )
}

fn causal_recovery() -> (Verdict, Verdict, Verdict) {
    let started = Instant::now();
    let cfg = CausalConfig::default();
    assert_eq!(cfg.source_hp, vec![60.0, 120.0]);
    assert_eq!((cfg.dt, cfg.profile, cfg.duration), (0.01, GProfile::Bumpy, 20.0));
    let description: Description = DEFAULT_DESCRIPTION.parse().unwrap();
    let exp = run_experiment(&description, &cfg).unwrap();
    let r = &exp.report;
    let elapsed = started.elapsed();
    let six = verdict(
        r.recovery_rel_l2 <= 0.05 && r.per_car_rel_l2 <= 0.05 && elapsed <= Duration::from_secs(10),
        format!(
            "pooled rel L2 {:.4} over {} bins, per-car {:.4} over {} shared bins, {:.2}s",
            r.recovery_rel_l2,
            r.covered_bins,
            r.per_car_rel_l2,
            r.per_car_shared_bins,
            elapsed.as_secs_f64()
        ),
    );

    // every query in an unvisited bin must come back Uncovered
    let model = CausalModel::new(description, cfg.bin_width).unwrap();
    let logs: Vec<_> = exp.source_logs.iter().map(|(s, l)| (*s, l)).collect();
    let model = infer_g(&model, &logs).unwrap();
    let target = HardwareSpec::new(cfg.target_hp).unwrap();
    let mut silent = 0;
    let mut probes = 0;
    let mut y = -10.0;
    while y < 40.0 {
        let covered = model.table().contains_key(&model.bin_of(y));
        let p = predict_accel(&model, 0.05, y, target);
        if covered != matches!(p, Prediction::Accel(_)) {
            silent += 1;
        }
        probes += 1;
        y += 0.01;
    }
    let seven = verdict(
        r.prediction_rel_l2 <= 0.05 && silent == 0,
        format!(
            "rel L2 {:.4} over {} do(u) queries; {silent} of {probes} probes answered outside coverage",
            r.prediction_rel_l2, r.prediction_queries
        ),
    );
    let eight = verdict(
        r.rms_transfer <= 0.5 * r.rms_naive,
        format!(
            "RMS transferred {:.4} vs naive {:.4} (ratio {:.3}), k_fb {}",
            r.rms_transfer, r.rms_naive, r.rms_ratio, cfg.k_fb
        ),
    );
    (six, seven, eight)
}

/// Every persisted artifact of one seeded pass, as bytes.
fn artifacts(seed: u64) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let map = with_seed("mission3", seed);
    let demo = record(&map, &DemoConfig::default());
    demo.save(dir.path()).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files {
        out.push((f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&f).unwrap()));
    }
    let report = run_mission_algorithm2(
        &mut WorldState::new(map.clone()),
        &Demonstration::load(dir.path()).unwrap(),
        &SearchSpec::default(),
        &Kernel::default(),
        &PController::default(),
        DEFAULT_TIME_LIMIT,
    )
    .unwrap();
    out.push(("report.json".into(), report.to_json().into_bytes()));
    out.push(("trajectory.svg".into(), trajectory_svg(&map, &report).into_bytes()));
    let description: Description = DEFAULT_DESCRIPTION.parse().unwrap();
    let exp = run_experiment(&description, &CausalConfig::default()).unwrap();
    out.push(("causal_report.json".into(), serde_json::to_vec_pretty(&exp.report).unwrap()));
    out.push(("target.csv".into(), exp.target_log.to_csv_string().into_bytes()));
    out
}

fn determinism() -> Verdict {
    let a = artifacts(11);
    let b = artifacts(11);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    verdict(
        a.len() == b.len() && differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", a.len()),
    )
}

#[test]
fn acceptance() {
    let (six, seven, eight) = causal_recovery();
    let results = [
        ("1 mission outcome pattern", mission_pattern()),
        ("2 efficiency scaling", efficiency_scaling()),
        ("3 image distance properties", image_distance_properties()),
        ("4 waypoint oracle equivalence", oracle_equivalence()),
        ("5 averaging benefit", averaging_benefit()),
        ("6 mechanism recovery", six),
        ("7 transfer prediction", seven),
        ("8 transfer control benefit", eight),
        ("9 determinism", determinism()),
    ];
    // written to the raw handle so the lines show even when output is captured
    let mut err = std::io::stderr().lock();
    let mut all = true;
    for (name, v) in &results {
        let mark = if v.pass { "PASS" } else { "FAIL" };
        writeln!(err, "{mark} criterion {name}: {}", v.detail).unwrap();
        all &= v.pass;
    }
    assert!(all, "at least one acceptance criterion failed");
}
