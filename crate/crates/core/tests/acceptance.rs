//! Acceptance suite. Every criterion writes one PASS/FAIL line to stderr
//! (visible without `--nocapture`) and fails its test when it does not hold.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use common::{micro, patched, scenario, scenario_path};
use dronenet::channel::{p_los, pl_nlos, ChannelParams};
use dronenet::energy::EnergyModel;
use dronenet::problems::{build_partial, build_perfect, build_zero, Complexity, Knowledge, Problem, ZeroInput};
use dronenet::scenario::Scenario;
use dronenet::sim::{compare, plan_perfect, substream, ComparisonReport, Draw, SimOptions, Trace};
use dronenet::solver::{branch_and_bound, brute_force, relaxed_heuristic, Status};

const ALL: [Knowledge; 3] = [Knowledge::Zero, Knowledge::Perfect, Knowledge::Partial];

fn verdict(n: usize, name: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).map(|i| substream(0, "re", i)).collect()
}

fn opts() -> SimOptions {
    SimOptions { tree_seed: substream(0, "tree", 0), ..SimOptions::default() }
}

fn case_mean(r: &ComparisonReport, case: Knowledge) -> f64 {
    r.case(case).expect("case was run").mean_energy_j
}

fn desk_report() -> &'static ComparisonReport {
    static CELL: OnceLock<ComparisonReport> = OnceLock::new();
    CELL.get_or_init(|| compare(&scenario("desk.json"), &ALL, &seeds(20), &opts()).unwrap())
}

fn congested(x: f64, eta: f64) -> Scenario {
    patched(
        "desk_congested.json",
        json!({"params": {"harvest_efficiency": eta}, "re": {"uncertainty": {"kind": "two_point", "x": x}}}),
    )
}

/// Congested comparisons at 30 % and 5 % spread, and at 5 % without harvesting.
fn congested_reports() -> &'static [ComparisonReport; 3] {
    static CELL: OnceLock<[ComparisonReport; 3]> = OnceLock::new();
    CELL.get_or_init(|| {
        let run = |x, eta| compare(&congested(x, eta), &ALL, &seeds(20), &opts()).unwrap();
        [run(0.30, 0.6), run(0.05, 0.6), run(0.05, 0.0)]
    })
}

/// A random oracle-sized program: single-slot or whole-horizon.
fn random_program(rng: &mut ChaCha8Rng) -> (Scenario, Problem) {
    loop {
        let (m, d, z, b) = (rng.gen_range(1..=3), rng.gen_range(1..=2), rng.gen_range(1..=4), rng.gen_range(1..=2));
        let users: Vec<f64> = (0..b).map(|_| rng.gen_range(0.0..190.0f64).round()).collect();
        let s = micro(m, d, z, &users, rng.gen_range(0.0..10.0));
        let problem = if rng.gen_bool(0.5) {
            let slot = rng.gen_range(0..b);
            let prev: Vec<usize> = (0..d).map(|_| rng.gen_range(0..=z)).collect();
            if (1..=z).any(|i| prev.iter().filter(|&&p| p == i).count() > 1) {
                continue;
            }
            let levels: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..10_000.0)).collect();
            let phi: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..4.0)).collect();
            build_zero(&s, ZeroInput { slot, prev_sites: &prev, batteries: &levels, phi: &phi }).unwrap()
        } else {
            build_perfect(&s, &s.re.realization(rng.gen())).unwrap()
        };
        if problem.bilp.num_binaries() <= 20 {
            return (s, problem);
        }
    }
}

#[test]
fn criterion_01_solver_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut mismatches, mut feasible, mut worst) = (0, 0, 0.0f64);
    for _ in 0..200 {
        let (_, p) = random_program(&mut rng);
        let oracle = brute_force(&p.bilp).unwrap();
        let bnb = branch_and_bound(&p.bilp, Duration::from_secs(60)).unwrap();
        if oracle.status.has_solution() {
            feasible += 1;
            let diff = (bnb.objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
            worst = worst.max(diff);
            if bnb.status != Status::Optimal || diff > 1e-9 {
                mismatches += 1;
            }
        } else if bnb.status != Status::Infeasible {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "solver exactness",
        mismatches == 0 && secs < 120.0,
        format!("200 programs ({feasible} feasible), {mismatches} mismatches, worst rel. diff {worst:.1e}, {secs:.1} s"),
    );
}

#[test]
fn criterion_02_linearization_equivalence() {
    let shapes = [(1, 1, 2), (1, 2, 2), (1, 3, 3), (2, 2, 2), (2, 1, 3), (1, 5, 2), (3, 1, 2), (2, 5, 1)];
    let profiles: [&[f64]; 3] = [&[60.0, 140.0, 120.0], &[140.0, 150.0, 140.0], &[0.0, 100.0, 0.0]];
    let (mut solved, mut broken) = (0, 0);
    for (d, z, b) in shapes {
        assert!(d * b * (z + 1) <= 12);
        for (t, users) in profiles.iter().enumerate() {
            let s = micro(2, d, z, &users[..b], 6.0);
            let p = build_perfect(&s, &s.re.realization(t as u64)).unwrap();
            let r = branch_and_bound(&p.bilp, Duration::from_secs(60)).unwrap();
            let Some(x) = r.x else { continue };
            solved += 1;
            let bit = |j: usize| x[j].round() as u8;
            let m = &p.map;
            for bb in 0..b {
                for l in 0..d {
                    for j in 0..=z {
                        for i in 0..=z {
                            let before = if bb == 0 { u8::from(j == 0) } else { bit(m.eps(0, bb - 1, l, j)) };
                            let zeta = x[m.zeta(0, bb, l, j, i)];
                            if zeta != f64::from(bit(m.zeta(0, bb, l, j, i)))
                                || bit(m.zeta(0, bb, l, j, i)) != before * bit(m.eps(0, bb, l, i))
                            {
                                broken += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    verdict(
        2,
        "linearization equivalence",
        broken == 0 && solved > 0,
        format!("{solved} optimal plans checked, {broken} transition entries differ from the product"),
    );
}

#[test]
fn criterion_03_complexity_conformance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    for _ in 0..50 {
        let (m, d, z, b, w) =
            (rng.gen_range(1..=4), rng.gen_range(1..=3), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
        let users: Vec<f64> = (0..b).map(|_| rng.gen_range(40.0..160.0)).collect();
        let s = micro(m, d, z, &users, 6.0);
        let sq = (z + 1) * (z + 1);
        // (pi, eps, zeta, battery, storage, one-hot, exclusivity, capacity, linearization)
        let table = |bb: usize, ww: usize, horizon: bool| Complexity {
            pi: m * bb,
            eps: d * (z + 1) * bb * ww,
            zeta: if horizon { d * sq * bb * ww } else { 0 },
            battery: d * bb * ww,
            storage: d * bb * ww,
            one_hot: d * bb * ww,
            exclusivity: z * bb * ww,
            capacity: bb * ww,
            linearization: if horizon { 3 * d * sq * bb * ww } else { 0 },
        };
        let zero = build_zero(
            &s,
            ZeroInput { slot: 0, prev_sites: &vec![0; d], batteries: &vec![6000.0; d], phi: &vec![2.0; d] },
        )
        .unwrap();
        let perfect = build_perfect(&s, &s.re.mean).unwrap();
        let partial = build_partial(&s, &s.re.sampled_tree(w, rng.gen())).unwrap();
        for (name, p, want) in
            [("zero", &zero, table(1, 1, false)), ("perfect", &perfect, table(b, 1, true)), ("partial", &partial, table(b, w, true))]
        {
            if Complexity::measure(p) != want {
                failures.push(format!("{name} (M={m} D={d} Z={z} B={b} W={w})"));
            }
        }
    }
    verdict(3, "complexity conformance", failures.is_empty(), format!("50 tuples x 3 builders, mismatches: {failures:?}"));
}

#[test]
fn criterion_04_physics_spot_values() {
    let s = scenario("baseline.json");
    let ch = ChannelParams::from_system(&s.params);
    let hover = s.params.kinetics.hover_power();
    let nlos = pl_nlos(&ch, 100.0).unwrap();
    let los = p_los(&ch, 9.6).unwrap();
    let station = EnergyModel::new(&s).unwrap().drone_slot(0, 0, 0, 0.0).unwrap();
    let pass = (hover - 17.98).abs() <= 0.05
        && (nlos - 92.05).abs() <= 0.01
        && (los - 0.09434).abs() <= 1e-5
        && s.params.slot_s == 600.0
        && (station.consumed - 1740.0).abs() < 1e-9
        && (station.charged - 6000.0).abs() < 1e-9;
    verdict(
        4,
        "physics spot values",
        pass,
        format!(
            "hover {hover:.3} W, NLoS loss at 100 m {nlos:.3} dB, LoS probability at 9.6 deg {los:.5}, station slot {} J used / {} J charged",
            station.consumed, station.charged
        ),
    );
}

#[test]
fn criterion_05_case_dominance() {
    let s = scenario("desk.json");
    let start = Instant::now();
    let plan = plan_perfect(&s, &Draw::new(&s, seeds(1)[0]), &opts()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let r = desk_report();
    let (zero, perfect, partial) =
        (case_mean(r, Knowledge::Zero), case_mean(r, Knowledge::Perfect), case_mean(r, Knowledge::Partial));
    let feasible = r.traces.iter().all(|t| t.overloads() == 0)
        && r.traces.iter().filter(|t| t.case == Knowledge::Perfect).all(|t| t.status == "optimal");
    let tol = 1e-9 * zero;
    let pass = plan.report.status == Status::Optimal
        && secs < 60.0
        && feasible
        && perfect <= partial + tol
        && partial <= zero + tol;
    verdict(
        5,
        "case dominance",
        pass,
        format!(
            "20 seeds, mean J perfect {perfect:.2} <= partial(5%) {partial:.2} <= zero {zero:.2}; perfect solve {} in {secs:.1} s",
            plan.report.status.name()
        ),
    );
}

#[test]
fn criterion_06_uncertainty_crossover() {
    let [high, low, _] = congested_reports();
    let (p30, z30) = (case_mean(high, Knowledge::Partial), case_mean(high, Knowledge::Zero));
    let (p5, z5) = (case_mean(low, Knowledge::Partial), case_mean(low, Knowledge::Zero));
    let statuses: Vec<&str> = {
        let mut v: Vec<&str> = high.traces.iter().map(|t| t.status.as_str()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    verdict(
        6,
        "uncertainty crossover",
        p30 > z30 && p5 <= z5,
        format!("congested, 20 seeds: x=30% partial {p30:.2} vs zero {z30:.2} (needs >); x=5% partial {p5:.2} vs zero {z5:.2} (needs <=); statuses {statuses:?}"),
    );
}

#[test]
fn criterion_07_harvesting_benefit() {
    let [_, with, without] = congested_reports();
    let zero_runs = |r: &ComparisonReport| -> Vec<usize> {
        r.traces.iter().filter(|t| t.case == Knowledge::Zero).take(10).map(Trace::overloads).collect()
    };
    let (a, b) = (zero_runs(with), zero_runs(without));
    let never_worse = a.iter().zip(&b).all(|(x, y)| x <= y);
    let strict = a.iter().zip(&b).filter(|(x, y)| x < y).count();
    verdict(
        7,
        "harvesting benefit",
        never_worse && strict >= 1,
        format!("overload slots per seed, eta=0.6 {a:?} vs eta=0 {b:?}; strictly fewer on {strict}/10 seeds"),
    );
}

#[test]
fn criterion_08_heuristic_quality() {
    let loads = [60.0, 100.0, 140.0];
    let mut medians = Vec::new();
    let (mut instances, mut infeasible) = (0, 0);
    for u in loads {
        let s = patched("desk.json", json!({"users_per_slot": u}));
        let mut gaps = Vec::new();
        for seed in seeds(2) {
            let p = build_perfect(&s, &Draw::new(&s, seed).phi).unwrap();
            let exact = branch_and_bound(&p.bilp, Duration::from_secs(300)).unwrap();
            if exact.status != Status::Optimal {
                continue;
            }
            instances += 1;
            match relaxed_heuristic(&p, &s) {
                Ok(h) if h.x.as_ref().is_some_and(|x| p.bilp.is_feasible(x)) => {
                    gaps.push((h.objective - exact.objective) / exact.objective);
                }
                _ => infeasible += 1,
            }
        }
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len();
        medians.push(if n == 0 { f64::NAN } else if n % 2 == 1 { gaps[n / 2] } else { 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]) });
    }
    let monotone = medians.windows(2).all(|w| w[1] >= w[0]);
    let pass = instances > 0 && infeasible == 0 && medians[0] <= 0.10 && monotone;
    verdict(
        8,
        "heuristic quality",
        pass,
        format!(
            "{instances} desk programs, {infeasible} without a feasible heuristic plan; median gap at U=60/100/140: {:.4}/{:.4}/{:.4}",
            medians[0], medians[1], medians[2]
        ),
    );
}

#[test]
fn criterion_09_conservation() {
    let reports = std::iter::once(desk_report()).chain(congested_reports().iter());
    let (mut traces, mut worst, mut out_of_range) = (0, 0.0f64, 0);
    for r in reports {
        for t in &r.traces {
            traces += 1;
            worst = worst.max(t.conservation_error());
            let levels = t.initial_batteries.iter().chain(t.slots.iter().flat_map(|s| &s.batteries));
            out_of_range += levels.filter(|&&v| !(0.0..=10_000.0).contains(&v)).count();
        }
    }
    verdict(
        9,
        "conservation",
        worst <= 1e-9 && out_of_range == 0,
        format!("{traces} traces, worst relative ledger error {worst:.1e}, {out_of_range} levels outside [0, 10 kJ]"),
    );
}

#[test]
fn criterion_10_determinism() {
    let bin = env!("CARGO_BIN_EXE_dronenet");
    let run = |scenario: &str, cases: &str, seeds: &str| {
        let dir = tempfile::tempdir().unwrap();
        let status = std::process::Command::new(bin)
            .args(["compare", "--scenario"])
            .arg(scenario_path(scenario))
            .args(["--cases", cases, "--seeds", seeds, "--seed", "11", "--out"])
            .arg(dir.path())
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        ["traces.csv", "placements.csv", "summary.csv"].map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    let mut identical = 0;
    let runs = [("desk_congested.json", "zero,perfect,partial", "4"), ("desk.json", "zero", "3")];
    for (scenario, cases, seeds) in runs {
        let (a, b) = (run(scenario, cases, seeds), run(scenario, cases, seeds));
        identical += a.iter().zip(&b).filter(|(x, y)| x == y && !x.is_empty()).count();
    }
    verdict(10, "determinism", identical == 6, format!("{identical}/6 CSV artifacts byte-identical across repeated CLI runs"));
}
