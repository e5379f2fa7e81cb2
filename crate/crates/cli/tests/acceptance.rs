//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use msn_cli::config::MazeScenarioConfig;
use msn_cli::scenario::{bundled_maze, run_scenario};
use msn_core::maze::*;
use msn_core::metrics::*;
use msn_core::network::*;
use msn_core::social::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget_s: u64) -> Result<(), String> {
    check(elapsed <= Duration::from_secs(budget_s), || {
        format!("took {:.1}s, budget {budget_s}s", elapsed.as_secs_f64())
    })
}

// ---- 1: analytic degree ----

/// P(two uniform 5-subsets of 10 share >= 3) by enumerating all ordered pairs.
fn enumerated_expected_degree() -> f64 {
    let all: Vec<u32> = (0u32..1 << 10).filter(|m| m.count_ones() == 5).collect();
    let hits = all
        .iter()
        .flat_map(|a| all.iter().map(move |b| (a & b).count_ones()))
        .filter(|&shared| shared >= 3)
        .count();
    99.0 * hits as f64 / (all.len() * all.len()) as f64
}

fn analytic_degree() -> Outcome {
    let start = Instant::now();
    let expected = enumerated_expected_degree();
    check(expected == 49.5, || {
        format!("enumeration oracle gave {expected}")
    })?;
    let cfg = SimConfig {
        weights: Weights::new(1.0, 0.0, 0.0).unwrap(),
        decay: DecayParams::new(0.1, 0.5).unwrap(),
        churn: Churn::NONE,
        steps: 200,
        ..SimConfig::default()
    };
    let seeds: Vec<u64> = (1..=50).collect();
    let out = threshold_sweep(
        &cfg,
        &[0.5],
        &seeds,
        FixedBaseline::default(),
        SweepStatistic::HorizonEnd,
    )
    .map_err(|e| e.to_string())?;
    let mean = out[0].mean_connections;
    within_budget(start.elapsed(), 60)?;
    check((mean - expected).abs() <= 2.0, || {
        format!("mean {mean} outside {expected} +/- 2.0")
    })?;
    Ok(format!(
        "mean {mean:.4} (oracle {expected}), {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---- 2: default sweep ----

fn default_sweep() -> Outcome {
    let start = Instant::now();
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let seeds: Vec<u64> = (1..=20).collect();
    let out = threshold_sweep(
        &SimConfig::default(),
        &thresholds,
        &seeds,
        FixedBaseline { degree: 50 },
        SweepStatistic::default(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(out.len() == 21, || format!("{} rows", out.len()))?;
    for w in out.windows(2) {
        let n = w[0].seeds as f64;
        let se = w[0].std_connections.max(w[1].std_connections) / n.sqrt();
        check(w[1].mean_connections <= w[0].mean_connections + se, || {
            format!(
                "rise {} -> {} at c_th {} -> {} exceeds 1 SE ({se})",
                w[0].mean_connections, w[1].mean_connections, w[0].c_th, w[1].c_th
            )
        })?;
    }
    check(out[0].mean_connections == 99.0, || {
        format!("c_th=0 gives {}", out[0].mean_connections)
    })?;
    check(out[20].mean_connections < 1.0, || {
        format!("c_th=1 gives {}", out[20].mean_connections)
    })?;
    let crossover = crossover_threshold(&out).map_err(|e| e.to_string())?;
    let c = crossover.ok_or("no crossover with baseline degree 50")?;
    check((0.3..=0.6).contains(&c), || {
        format!("crossover {c} outside [0.3, 0.6]")
    })?;
    within_budget(elapsed, 300)?;
    Ok(format!(
        "crossover c_th {}, baseline {}, {:.1}s",
        format_sig6(c),
        format_sig6(out[0].baseline_connections),
        elapsed.as_secs_f64()
    ))
}

// ---- 3: decay lifetime ----

fn frozen_lifetime(a: f64, c_th: f64) -> Result<(), String> {
    // identical interests and interest-only weights: every pair forms at step 0
    let cfg = SimConfig {
        machine_count: 6,
        subspace_count: 1,
        interest_universe: 4,
        interests_per_machine: 4,
        weights: Weights::new(1.0, 0.0, 0.0).unwrap(),
        decay: DecayParams::new(a, c_th).unwrap(),
        churn: Churn::NONE,
        ..SimConfig::default()
    };
    let Expiry::After(expiry) = link_expiry_step(a, c_th).unwrap() else {
        return Err(format!("no finite expiry for a={a} c_th={c_th}"));
    };
    let mut net = Network::new(cfg).unwrap();
    let first = net.step();
    check(first.formed == 30, || {
        format!("a={a} c_th={c_th}: {} links formed", first.formed)
    })?;
    net.set_discovery(false);
    let created: BTreeSet<u64> = net.links().map(|l| l.created_at).collect();
    check(created == BTreeSet::from([0]), || {
        format!("creation steps {created:?}")
    })?;
    loop {
        let r = net.step();
        if r.step < expiry {
            check(r.expired == 0 && r.live == 30, || {
                format!(
                    "a={a} c_th={c_th}: {} expired at step {} (expiry {expiry})",
                    r.expired, r.step
                )
            })?;
        } else {
            check(r.step == expiry && r.expired == 30 && r.live == 0, || {
                format!(
                    "a={a} c_th={c_th}: step {} expired {} live {}",
                    r.step, r.expired, r.live
                )
            })?;
            return Ok(());
        }
    }
}

fn decay_lifetime() -> Outcome {
    let start = Instant::now();
    check(link_expiry_step(0.1, 0.45) == Ok(Expiry::After(8)), || {
        "spot value (0.1, 0.45) is not 8".into()
    })?;
    let mut cells = 0;
    for ai in 1..=200 {
        for ci in 1..=19 {
            frozen_lifetime(ai as f64 * 0.01, ci as f64 * 0.05)?;
            cells += 1;
        }
    }
    within_budget(start.elapsed(), 10)?;
    Ok(format!(
        "{cells} grid cells, spot value 8, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---- 4: similarity oracle ----

fn brute_overlap(own: &[usize], other: &[usize]) -> f64 {
    if own.is_empty() {
        return 0.0;
    }
    let shared = own.iter().filter(|x| other.iter().any(|y| y == *x)).count();
    shared as f64 / own.len() as f64
}

fn random_subset(rng: &mut ChaCha8Rng, universe: usize) -> Vec<usize> {
    let p = rng.gen_range(0.0..=1.0);
    (0..universe).filter(|_| rng.gen_bool(p)).collect()
}

fn similarity_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10_000 {
        let universe = rng.gen_range(1..=12);
        let (ii, ij) = (
            random_subset(&mut rng, universe),
            random_subset(&mut rng, universe),
        );
        // followee ids live in 2..2+universe so neither machine follows itself
        let (ni, nj) = (
            random_subset(&mut rng, universe),
            random_subset(&mut rng, universe),
        );
        let max_dist = rng.gen_range(1..=12usize);
        let (li, lj) = (rng.gen_range(0..=max_dist), rng.gen_range(0..=max_dist));
        let mut w = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w[2] = 1.0 - w[0] - w[1];
        let weights = Weights {
            interest: w[0],
            spatial: w[1],
            neighbor: w[2],
        };

        let shift = |v: &[usize]| v.iter().map(|&x| x as u32 + 2).collect::<Vec<_>>();
        let a = MachineProfile::new(0, li, ii.iter().copied())
            .with_followees(shift(&ni))
            .unwrap();
        let b = MachineProfile::new(1, lj, ij.iter().copied())
            .with_followees(shift(&nj))
            .unwrap();

        let (bi, bn) = (brute_overlap(&ii, &ij), brute_overlap(&ni, &nj));
        check(interest_similarity(&a, &b) == bi, || {
            format!("case {case}: interest mismatch")
        })?;
        check(neighbor_similarity(&a, &b) == bn, || {
            format!("case {case}: neighbor mismatch")
        })?;
        let d = 1.0 - (li as f64 - lj as f64).abs() / max_dist as f64;
        let expected = w[0] * bi + w[1] * d + w[2] * bn;
        let got =
            connection_strength(&a, &b, &weights, max_dist as f64).map_err(|e| e.to_string())?;
        check((got.total - expected).abs() <= 1e-12, || {
            format!("case {case}: strength {} vs {expected}", got.total)
        })?;
    }
    Ok("10000 pairs exact, strength within 1e-12".into())
}

// ---- 5: dissemination oracle ----

fn reach(n: usize, edges: &[(u32, u32)], origin: u32) -> BTreeSet<u32> {
    let mut seen = vec![false; n];
    seen[origin as usize] = true;
    let mut queue = VecDeque::from([origin]);
    while let Some(v) = queue.pop_front() {
        // a post travels from a followee to its followers
        for &(follower, followee) in edges {
            if followee == v && !seen[follower as usize] {
                seen[follower as usize] = true;
                queue.push_back(follower);
            }
        }
    }
    (0..n as u32).filter(|&v| seen[v as usize]).collect()
}

fn dissemination_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let m = rng.gen_range(1..=20usize);
        let p = rng.gen_range(0.0..0.4);
        let mut edges = Vec::new();
        let profiles = (0..m as u32)
            .map(|i| {
                let follows: Vec<u32> = (0..m as u32)
                    .filter(|&j| j != i && rng.gen_bool(p))
                    .collect();
                edges.extend(follows.iter().map(|&j| (i, j)));
                MachineProfile::new(i, 0, [0])
                    .with_followees(follows)
                    .unwrap()
            })
            .collect();
        let net = Network::from_profiles(
            SimConfig {
                churn: Churn::NONE,
                ..SimConfig::default()
            },
            profiles,
        )
        .map_err(|e| e.to_string())?;
        let origin = rng.gen_range(0..m as u32);
        let got = net
            .disseminate(&Post::unlimited(origin, "post"))
            .map_err(|e| e.to_string())?;
        let want = reach(m, &edges, origin);
        check(got == want, || format!("case {case}: {got:?} vs {want:?}"))?;
    }
    Ok("200 networks, exact set equality".into())
}

// ---- 6: maze dominance ----

fn oracle_distance(world: &MazeWorld) -> u64 {
    let (w, h) = (world.width(), world.height());
    let mut dist = vec![u64::MAX; w * h];
    let e = world.entry();
    dist[e.y * w + e.x] = 0;
    let mut queue = VecDeque::from([e]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.y * w + c.x];
        let mut next = vec![Coord::new(c.x + 1, c.y), Coord::new(c.x, c.y + 1)];
        if c.x > 0 {
            next.push(Coord::new(c.x - 1, c.y));
        }
        if c.y > 0 {
            next.push(Coord::new(c.x, c.y - 1));
        }
        for n in next {
            if world.is_road(n) && dist[n.y * w + n.x] == u64::MAX {
                dist[n.y * w + n.x] = d + 1;
                queue.push_back(n);
            }
        }
    }
    let x = world.exit();
    dist[x.y * w + x.x]
}

/// Replays a configuration step by step, checking that every agent's map is
/// truthful and only grows.
fn replay(
    world: &MazeWorld,
    agents: Vec<AgentState>,
    archive: Archive,
    options: MazeOptions,
) -> Result<MazeReport, String> {
    let mut run = MazeRun::new(world, agents, archive, options).map_err(|e| e.to_string())?;
    let mut before: Vec<KnownMap> = run.agents().iter().map(|a| a.known.clone()).collect();
    while !run.is_finished() {
        run.step().map_err(|e| e.to_string())?;
        for (a, prev) in run.agents().iter().zip(&before) {
            check(
                a.known.is_truthful(world) && prev.is_subset_of(&a.known),
                || {
                    format!(
                        "agent {} map regressed at step {}",
                        a.id,
                        run.current_step()
                    )
                },
            )?;
        }
        if let Some(stored) = run.archive().get() {
            check(stored.is_truthful(world), || {
                "archive holds a false cell".into()
            })?;
        }
        before = run.agents().iter().map(|a| a.known.clone()).collect();
    }
    Ok(run.into_report())
}

fn maze_case(world: &MazeWorld, seed: u64) -> Result<(), String> {
    let cfg = MazeScenarioConfig {
        seed,
        ..MazeScenarioConfig::default()
    };
    let report = run_scenario(world, &cfg).map_err(|e| e.to_string())?;
    let shortest = oracle_distance(world);

    let reader = report.archive.outcome(3).ok_or("no reader")?;
    check(reader.escaped && reader.steps_taken == shortest, || {
        format!(
            "seed {seed}: reader took {} steps, shortest is {shortest}",
            reader.steps_taken
        )
    })?;
    for id in [1, 2] {
        let (c, s) = (
            report.cooperative.outcome(id).unwrap(),
            report.solo.outcome(id).unwrap(),
        );
        check(
            c.escaped && s.escaped && c.steps_taken <= s.steps_taken,
            || {
                format!(
                    "seed {seed} agent {id}: cooperative {} vs solo {}",
                    c.steps_taken, s.steps_taken
                )
            },
        )?;
    }

    let agent = |id, start| AgentState::new(id, world, start).unwrap();
    let explorers = || vec![agent(1, world.entry()), agent(2, report.second_start)];
    let coop = MazeOptions::default();
    let solo = MazeOptions {
        sharing: false,
        ..coop
    };
    let replays = [
        (
            replay(
                world,
                explorers(),
                Archive::new(ArchiveMode::NonArchive),
                solo,
            )?,
            &report.solo,
        ),
        (
            replay(
                world,
                explorers(),
                Archive::new(ArchiveMode::NonArchive),
                coop,
            )?,
            &report.cooperative,
        ),
    ];
    let mut with_reader = explorers();
    with_reader.push(agent(3, world.entry()).with_entry_step(report.reader_entry_step));
    let archived = replay(
        world,
        with_reader,
        Archive::new(ArchiveMode::Archive),
        MazeOptions {
            max_steps: report.reader_entry_step + coop.max_steps,
            ..coop
        },
    )?;
    for (got, want) in replays
        .iter()
        .map(|(g, w)| (g, *w))
        .chain([(&archived, &report.archive)])
    {
        check(got.agents == want.agents, || {
            format!("seed {seed}: replay differs from scenario")
        })?;
    }
    Ok(())
}

fn maze_dominance() -> Outcome {
    let start = Instant::now();
    maze_case(&bundled_maze(), 1)?;
    for i in 0..25u64 {
        let (w, h) = (5 + 2 * (i as usize % 6), 5 + 2 * ((i as usize / 2) % 6));
        maze_case(&MazeWorld::generate(w, h, 100 + i), i)?;
    }
    within_budget(start.elapsed(), 60)?;
    Ok(format!("26 mazes, {:.1}s", start.elapsed().as_secs_f64()))
}

// ---- 7: determinism ----

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_msn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr))
    })
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [(&[&str], &[&str]); 3] = [
        (
            &["sweep", "--thresholds", "0,0.45,0.6,1", "--seeds", "1..3"],
            &["sweep.csv", "sweep.json"],
        ),
        (&["run", "--seed", "3"], &["run.csv", "run.json"]),
        (&["maze", "--seed", "7"], &["maze_report.json"]),
    ];
    let mut compared = 0;
    for (k, (args, files)) in commands.iter().enumerate() {
        let (a, b) = (
            tmp.path().join(format!("{k}a")),
            tmp.path().join(format!("{k}b")),
        );
        run_cli(args, &a)?;
        run_cli(args, &b)?;
        for f in *files {
            let (x, y) = (
                fs::read(a.join(f)).map_err(|e| e.to_string())?,
                fs::read(b.join(f)).map_err(|e| e.to_string())?,
            );
            check(!x.is_empty() && x == y, || {
                format!("{f} differs between runs of {args:?}")
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} artifacts byte-identical"))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 analytic degree", analytic_degree),
        ("2 default sweep", default_sweep),
        ("3 decay lifetime", decay_lifetime),
        ("4 similarity oracle", similarity_oracle),
        ("5 dissemination oracle", dissemination_oracle),
        ("6 maze dominance", maze_dominance),
        ("7 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL [{name}] {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
