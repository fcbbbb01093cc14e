//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use forkbench::analytic;
use forkbench::chains::{self, ChainVariant};
use forkbench::cli;
use forkbench::decision::{self, AttractedRule, Axis, SweepCells, SweepMode, SweepPlan};
use forkbench::economics::{self, DosScenario, NetworkParams};
use forkbench::harness::{self, CheckResult, TableId};
use forkbench::model::{
    Actor, AttackerStrategy, MinerPower, PowerSplit, ProfitQuery, RushingAbility,
};
use forkbench::montecarlo::{simulate, SimConfig};

const ROUNDS: u64 = 10_000_000;
const SEED: u64 = 20_240_601;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: impl AsRef<str>) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} {id} {}",
            if pass { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
    }
}

fn g(x: f64) -> RushingAbility {
    RushingAbility::new(x).unwrap()
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Summarizes a group of checks: all must pass.
fn group(report: &mut Report, id: &str, label: &str, checks: &[&CheckResult]) {
    let failing: Vec<&&CheckResult> = checks.iter().filter(|c| !c.pass).collect();
    let worst = checks
        .iter()
        .map(|c| (c.expected - c.computed).abs())
        .fold(
            0.0,
            |m: f64, d| if d.is_nan() { f64::INFINITY } else { m.max(d) },
        );
    let mut detail = format!(
        "{label}: {}/{} within tolerance, largest deviation {worst:.6}",
        checks.len() - failing.len(),
        checks.len()
    );
    if let Some(first) = failing.first() {
        detail.push_str(&format!(
            "; e.g. {} expected {} computed {:.6} tolerance {}",
            first.id, first.expected, first.computed, first.tolerance
        ));
    }
    report.line(id, failing.is_empty(), detail);
}

fn table_criterion(report: &mut Report, id: &str, tables: &[TableId], limit: Duration) {
    let start = Instant::now();
    for (k, table) in tables.iter().enumerate() {
        let checks = harness::run_table_checks(*table, ROUNDS, SEED, workers());
        let suffix = |s: &str| {
            checks
                .iter()
                .filter(|c| c.id.ends_with(s))
                .collect::<Vec<_>>()
        };
        let tag = |part: &str| format!("{id}.{}{part}", k + 1);
        group(
            report,
            &tag("a"),
            &format!("table {table} closed forms vs published (0.01pp)"),
            &suffix("/analytic"),
        );
        group(
            report,
            &tag("b"),
            &format!("table {table} simulation vs closed form (4 sigma, 1e7 rounds)"),
            &suffix("/simulated"),
        );
        let zeros = suffix("/zero");
        if !zeros.is_empty() {
            group(
                report,
                &tag("c"),
                &format!("table {table} alpha_i=0 column exactly zero (1e-9)"),
                &zeros,
            );
        }
    }
    let elapsed = start.elapsed();
    report.line(
        &format!("{id}.t"),
        elapsed < limit * tables.len() as u32,
        format!(
            "runtime {:.1}s (limit {}s per table)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    );
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let third = 1.0 / 3.0;
    let powers = PowerSplit::with_attracted(third, third).unwrap();
    let q = ProfitQuery::new(powers, g(0.0), AttackerStrategy::Psm).unwrap();
    let share = analytic::psm_profits(&q).unwrap().share_attacker;
    report.line(
        "C1.a",
        (share - 0.3403).abs() <= 5e-5,
        format!("PSM share at (1/3, 1/3, 0): expected 0.3403 +- 5e-5, computed {share:.10}"),
    );
    let chain = chains::solve(powers, g(0.0), ChainVariant::PsmAttacker)
        .unwrap()
        .share_attacker;
    report.line(
        "C1.b",
        (share - chain).abs() <= 1e-9,
        format!(
            "closed form vs chain solve: gap {:.3e} (tolerance 1e-9)",
            (share - chain).abs()
        ),
    );
    let cfg = SimConfig {
        rounds: ROUNDS,
        seed: SEED,
        workers: workers(),
        variant: ChainVariant::PsmAttacker,
    };
    let sim = simulate(&powers, g(0.0), &cfg).unwrap();
    let (s, se) = (sim.share(Actor::Attacker), sim.std_error(Actor::Attacker));
    report.line(
        "C1.c",
        (s - share).abs() <= 4.0 * se,
        format!(
            "simulated {s:.6} vs closed form {share:.6}: {:.2} sigma (limit 4)",
            (s - share).abs() / se
        ),
    );
    let elapsed = start.elapsed();
    report.line(
        "C1.t",
        elapsed < Duration::from_secs(10),
        format!("runtime {:.2}s (limit 10s)", elapsed.as_secs_f64()),
    );
}

fn criterion_5(report: &mut Report) {
    let a = analytic::selfish_profit(1.0 / 3.0, g(0.0)).unwrap();
    report.line(
        "C5.a",
        (a - 1.0 / 3.0).abs() <= 1e-12,
        format!("selfish(1/3, 0) = {a:.15} (expected 1/3 +- 1e-12)"),
    );
    let b = analytic::selfish_profit(0.25, g(0.5)).unwrap();
    report.line(
        "C5.b",
        (b - 0.25).abs() <= 1e-12,
        format!("selfish(1/4, 1/2) = {b:.15} (expected 1/4 +- 1e-12)"),
    );
}

fn criterion_6(report: &mut Report) {
    let checks = harness::run_equivalence_checks(200, SEED);
    for (k, variant) in harness::EQUIVALENCE_VARIANTS.iter().enumerate() {
        let prefix = format!("equiv/{}/", variant.name());
        let subset: Vec<&CheckResult> = checks
            .iter()
            .filter(|c| c.id.starts_with(&prefix))
            .collect();
        group(
            report,
            &format!("C6.{}", k + 1),
            &format!("{} chain vs closed form, 200 points (1e-9)", variant.name()),
            &subset,
        );
    }
    let truncated: Vec<&CheckResult> = checks
        .iter()
        .filter(|c| c.id.contains("-truncated/"))
        .collect();
    group(
        report,
        "C6.5",
        "A-PSM chain cut at depth 64 vs closed form (ratio^64)",
        &truncated,
    );
}

fn criterion_7(report: &mut Report) {
    let mut worst = f64::INFINITY;
    let mut points = 0;
    for a in 0..50 {
        for i in 0..(50 - a) {
            let (a, i) = (a as f64 * 0.01, i as f64 * 0.01);
            if a + i >= 0.5 {
                continue;
            }
            for k in 0..=10 {
                let gamma = g(k as f64 * 0.1);
                let q = ProfitQuery::new(
                    PowerSplit::with_attracted(a, i).unwrap(),
                    gamma,
                    AttackerStrategy::Apsm,
                )
                .unwrap();
                let apsm = analytic::apsm_profits(&q).unwrap().share_attacker;
                let selfish = analytic::selfish_profit(a, gamma).unwrap();
                worst = worst.min(apsm - selfish);
                points += 1;
            }
        }
    }
    report.line(
        "C7",
        worst >= -1e-9,
        format!("A-PSM minus selfish share over {points} grid points: minimum {worst:.3e} (must be >= -1e-9)"),
    );
}

fn criterion_8(report: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for a in 1..50 {
        for k in 0..=10 {
            let (a, gamma) = (a as f64 * 0.01, g(k as f64 * 0.1));
            let t = analytic::join_threshold(a, gamma).unwrap();
            let Ok(mk) = MinerPower::new(t) else { continue };
            worst = worst.max(analytic::psm_miner_rer(a, mk, gamma).unwrap().value().abs());
            points += 1;
        }
    }
    report.line(
        "C8",
        worst <= 1e-9,
        format!(
            "|RER| at the join threshold over {points} points: max {worst:.3e} (tolerance 1e-9)"
        ),
    );
}

fn criterion_9(report: &mut Report) {
    let plan = SweepPlan {
        alpha_a: Axis::new(0.25, 0.45, 0.005).unwrap(),
        gamma: Axis::single(0.0),
        attracted: AttractedRule::Fixed(0.0),
        mode: SweepMode::Verdict,
    };
    let SweepCells::Verdict(cells) = decision::sweep(&plan).unwrap().cells else {
        unreachable!()
    };
    let flip = cells
        .iter()
        .find(|c| c.verdict.best == AttackerStrategy::Selfish)
        .map(|c| c.alpha_a);
    let pass = flip.is_some_and(|a| (a - 1.0 / 3.0).abs() <= 0.005);
    report.line("C9.a", pass, format!("honest/selfish boundary at gamma=0: first selfish alpha_a = {flip:?} (expected 1/3 +- 0.005)"));
    for (id, a, i, gamma) in [("C9.b", 0.09, 0.01, 0.9), ("C9.c", 0.25, 0.5, 0.0)] {
        let v =
            decision::best_attacker_strategy(PowerSplit::with_attracted(a, i).unwrap(), g(gamma))
                .unwrap();
        let profits: Vec<String> = v
            .profits
            .iter()
            .map(|(s, p)| format!("{s}={p:.6}"))
            .collect();
        report.line(
            id,
            v.best == AttackerStrategy::Psm,
            format!(
                "verdict at ({a}, {i}, {gamma}): {} (expected psm); {}",
                v.best,
                profits.join(" ")
            ),
        );
    }
}

fn cli_output(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut full = vec!["forkbench"];
    full.extend_from_slice(args);
    let code = cli::run(full, None, &mut out, &mut std::io::sink());
    (code, out)
}

fn criterion_10(report: &mut Report) {
    let sim = [
        "simulate",
        "--strategy",
        "apsm",
        "--alpha-a",
        "0.2",
        "--alpha-i",
        "0.2",
        "--gamma",
        "0.5",
        "--rounds",
        "500000",
        "--seed",
        "11",
    ];
    let sweep = [
        "sweep",
        "--alpha-a-range",
        "0.05:0.45",
        "--gamma-range",
        "0:1",
        "--step",
        "0.05",
        "--alpha-i",
        "0.02",
    ];
    let threshold = [
        "sweep",
        "--alpha-a-range",
        "0.05:0.45",
        "--gamma-range",
        "0:1",
        "--step",
        "0.1",
        "--mode",
        "min-alpha-i",
    ];
    for (id, base) in [
        ("C10.a", &sim[..]),
        ("C10.b", &sweep[..]),
        ("C10.c", &threshold[..]),
    ] {
        let mut outputs = Vec::new();
        for format in ["json", "csv"] {
            for workers in ["1", "2", "4"] {
                let mut args = base.to_vec();
                args.extend(["--format", format, "--workers", workers]);
                outputs.push(cli_output(&args));
            }
        }
        let ok = outputs.iter().all(|(code, _)| *code == 0)
            && outputs[..3].windows(2).all(|w| w[0].1 == w[1].1)
            && outputs[3..].windows(2).all(|w| w[0].1 == w[1].1);
        report.line(
            id,
            ok,
            format!(
                "`{}` byte-identical across 1, 2, 4 workers (json and csv)",
                base[0]
            ),
        );
    }
    let run = || {
        let mut buf = Vec::new();
        let mut checks = harness::run_table_checks(TableId::PsmVsHonest, 200_000, 5, 1);
        checks.extend(harness::run_table_checks(
            TableId::PsmVsHonest,
            200_000,
            5,
            3,
        ));
        harness::write_report(&checks, &mut buf).unwrap();
        buf
    };
    report.line(
        "C10.d",
        run() == run(),
        "harness report reproduced byte-identically for a fixed seed",
    );
}

fn criterion_11(report: &mut Report) {
    let net = NetworkParams::default();
    let p = economics::find_probability(net.t_avg, 1.0, &net).unwrap();
    report.line(
        "C11.a",
        p == 0.64,
        format!("find_probability(t_avg, 1) = {p} (expected exactly 0.64)"),
    );

    let mut worst: f64 = 0.0;
    for bytes in 1..=16 {
        for fraction in [0.001, 0.01, 0.1, 0.5, 1.0] {
            let t = economics::secret_search_time(bytes, fraction, &net).unwrap();
            let back = economics::required_hidden_bytes(t, fraction, &net).unwrap();
            worst = worst.max((back - f64::from(bytes)).abs());
        }
    }
    report.line(
        "C11.b",
        worst <= 1e-9,
        format!("search-time/bytes round trip: max error {worst:.3e} (tolerance 1e-9)"),
    );

    let mut monotone = true;
    for n in [0, 1, 10, 100] {
        for a in [0.05, 0.2, 0.45] {
            let powers = PowerSplit::with_attracted(a, 0.0).unwrap();
            let mut prev: Option<(f64, bool)> = None;
            for step in 1..=2000 {
                let s = DosScenario {
                    collateral_blocks: n,
                    challenge_period: step as f64 * 300.0,
                    powers,
                };
                let v = economics::dos_viability(&s, &net).unwrap();
                if let Some((e, viable)) = prev {
                    monotone &= v.expected_blocks >= e && (v.viable || !viable);
                }
                prev = Some((v.expected_blocks, v.viable));
            }
        }
    }
    report.line(
        "C11.c",
        monotone,
        "dos_viability monotone in the challenge period",
    );
}

fn criterion_12(report: &mut Report) {
    let long = SimConfig {
        rounds: 1_000_000_000,
        seed: SEED,
        workers: 1,
        variant: ChainVariant::PsmAttacker,
    };
    report.line(
        "C12",
        harness::DEFAULT_ROUNDS == ROUNDS && long.validate().is_ok(),
        format!("desk-scale default of {} rounds with 4 sigma acceptance; long runs accepted via --rounds", harness::DEFAULT_ROUNDS),
    );
}

fn main() {
    let mut report = Report {
        failed: 0,
        total: 0,
    };
    criterion_1(&mut report);
    table_criterion(
        &mut report,
        "C2",
        &[TableId::MinerGreedyVsPublic],
        Duration::from_secs(300),
    );
    table_criterion(
        &mut report,
        "C3",
        &[TableId::PsmVsHonest, TableId::PsmVsSelfish],
        Duration::from_secs(300),
    );
    table_criterion(
        &mut report,
        "C4",
        &[TableId::ApsmVsHonest, TableId::ApsmVsSelfish],
        Duration::from_secs(300),
    );
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);
    criterion_11(&mut report);
    criterion_12(&mut report);
    println!(
        "acceptance: {}/{} passed, {} failed",
        report.total - report.failed,
        report.total,
        report.failed
    );
    if report.failed > 0 {
        std::process::exit(1);
    }
}
