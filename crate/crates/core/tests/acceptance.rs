//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary so the lines are always shown.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{as_offline, check_capacity, check_oracle_run, instance, naive_opt, pack, play_oracle, tiny_context};
use vplb_core::algorithms::{zoo, AlgorithmSpec};
use vplb_core::exactnum::{format_ratio, ExactValue};
use vplb_core::harness::bounds::bounds_for;
use vplb_core::harness::trace::TraceRecord;
use vplb_core::harness::verify::verify_records;
use vplb_core::harness::{run, Report, RunOutcome};
use vplb_core::oracle::brute_force_opt;
use vplb_core::setfamily::{FamilyKind, SubsetFamily};
use vplb_core::strategies::{Certificate, StrategyConfig};
use vplb_core::vpcore::{counting_lower_bound, offline_verify, OfflineSolution};

type Outcome = Result<String, String>;
type Runs = Vec<(String, RunOutcome)>;

fn r(p: u64, q: u64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

/// Deterministic members plus random-fit over ten seeds.
fn full_zoo() -> Vec<AlgorithmSpec> {
    let mut algs: Vec<AlgorithmSpec> = zoo(0).into_iter().filter(|a| !matches!(a, AlgorithmSpec::RandomFit(_))).collect();
    algs.extend((0..10).map(AlgorithmSpec::RandomFit));
    algs
}

fn run_grid(cfgs: &[StrategyConfig], algs: &[AlgorithmSpec]) -> Result<Runs, String> {
    let grid: Vec<_> = cfgs.iter().flat_map(|c| algs.iter().map(move |a| (c, a))).collect();
    grid.into_par_iter()
        .map(|(c, a)| {
            let label = format!("{} {:?} vs {a}", c.id(), c);
            run(c, a, false).map(|o| (label.clone(), o)).map_err(|e| format!("{label}: {e}"))
        })
        .collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_checks_pass(label: &str, cert: &Certificate) -> Result<(), String> {
    let failed: Vec<_> = cert.failed_checks().iter().map(|c| format!("{}: {}", c.name, c.statement)).collect();
    ensure(failed.is_empty(), || format!("{label}: failed checks {failed:?}"))?;
    for b in &cert.branches {
        ensure(b.offline_violation.is_none(), || format!("{label}: offline solution of {} does not verify", b.label))?;
    }
    Ok(())
}

fn counter(label: &str, cert: &Certificate, key: &str) -> Result<i64, String> {
    cert.get(key).ok_or_else(|| format!("{label}: no counter {key}"))
}

fn min_ratio<'a>(certs: impl Iterator<Item = &'a Certificate>) -> String {
    certs.map(|c| c.certified_ratio.clone()).min().map(|v| format_ratio(&v)).unwrap_or_default()
}

fn criterion_bounds(_: &mut Runs) -> Outcome {
    let expect = [(14, r(3, 1)), (98, r(6, 1)), (12, r(20, 7)), (16, r(28, 9)), (6, r(12, 5)), (7, r(5, 2)), (9, r(21, 8)), (10, r(8, 3)), (11, r(27, 10))];
    for (d, v) in &expect {
        let e = bounds_for(*d);
        ensure(&e.best.bound == v, || format!("d={d}: got {}, want {}", format_ratio(&e.best.bound), format_ratio(v)))?;
    }
    Ok(format!("{} dimensions exact", expect.len()))
}

fn criterion_medium(runs: &mut Runs) -> Outcome {
    let small = StrategyConfig::MediumD { d: 5, n: 6, alpha: 3, beta: 3 };
    let big = StrategyConfig::MediumD { d: 14, n: 12, alpha: 6, beta: 4 };
    let mut out = Runs::new();
    for (cfg, alg, cap) in [(small, 18, 9), (big, 48, 17)] {
        let grid = run_grid(&[cfg], &full_zoo())?;
        for (label, o) in &grid {
            let cert = &o.certificate;
            all_checks_pass(label, cert)?;
            ensure(cert.max_alg_cost() == alg, || format!("{label}: ALG {} != {alg}", cert.max_alg_cost()))?;
            ensure(cert.max_offline_cost() <= cap, || format!("{label}: offline {} > {cap}", cert.max_offline_cost()))?;
            ensure(cert.certified_ratio >= r(alg, cap), || format!("{label}: ratio {}", format_ratio(&cert.certified_ratio)))?;
        }
        out.extend(grid);
    }
    let msg = format!("{} runs, ALG 18/48 exact, min certified {}", out.len(), min_ratio(out.iter().map(|(_, o)| &o.certificate)));
    runs.extend(out);
    Ok(msg)
}

fn d3_run_ok(label: &str, cert: &Certificate, n: u64, want: &BigRational) -> Result<(), String> {
    all_checks_pass(label, cert)?;
    let x = counter(label, cert, "X")?;
    ensure(x >= 2 * n as i64, || format!("{label}: X = {x}"))?;
    if !cert.early_stop {
        let (z1, z2) = (counter(label, cert, "Z1")?, counter(label, cert, "Z2")?);
        ensure(z1 + 2 * z2 == 2 * n as i64, || format!("{label}: Z1 + 2Z2 = {}", z1 + 2 * z2))?;
    }
    let need = (9 * n).div_ceil(2);
    ensure(cert.max_alg_cost() >= need, || format!("{label}: max ALG {} < {need}", cert.max_alg_cost()))?;
    ensure(cert.max_offline_cost() <= 2 * n + 7, || format!("{label}: offline {}", cert.max_offline_cost()))?;
    ensure(&cert.certified_ratio >= want, || format!("{label}: ratio {}", format_ratio(&cert.certified_ratio)))
}

fn criterion_d3(runs: &mut Runs) -> Outcome {
    let at40 = run_grid(&[StrategyConfig::D3 { n: 40, k: 40 }], &full_zoo())?;
    for (label, o) in &at40 {
        d3_run_ok(label, &o.certificate, 40, &r(180, 87))?;
    }
    let start = Instant::now();
    let at120 = run_grid(&[StrategyConfig::D3 { n: 120, k: 120 }], &zoo(0))?;
    let t120 = start.elapsed();
    for (label, o) in &at120 {
        d3_run_ok(label, &o.certificate, 120, &r(540, 247))?;
    }
    ensure(t120 < Duration::from_secs(60), || format!("N=K=120 took {t120:.1?}"))?;
    let msg = format!(
        "{} runs at N=K=40 (min certified {}), {} at N=K=120 in {t120:.1?} (min certified {})",
        at40.len(),
        min_ratio(at40.iter().map(|(_, o)| &o.certificate)),
        at120.len(),
        min_ratio(at120.iter().map(|(_, o)| &o.certificate)),
    );
    runs.extend(at40);
    runs.extend(at120);
    Ok(msg)
}

fn criterion_d8(runs: &mut Runs) -> Outcome {
    let out = run_grid(&[StrategyConfig::D8 { n: 40, k: 40 }], &full_zoo())?;
    for (label, o) in &out {
        let cert = &o.certificate;
        all_checks_pass(label, cert)?;
        let q = counter(label, cert, "Q")?;
        ensure(q >= 80, || format!("{label}: Q = {q}"))?;
        if !cert.early_stop {
            let (x, y, z) = (counter(label, cert, "X")?, counter(label, cert, "Y")?, counter(label, cert, "Z")?);
            ensure(3 * x + 2 * y + z == 240, || format!("{label}: 3X+2Y+Z = {}", 3 * x + 2 * y + z))?;
            ensure(cert.branches.len() == 10, || format!("{label}: {} branches", cert.branches.len()))?;
        }
        ensure(cert.max_alg_cost() >= 210, || format!("{label}: max ALG {}", cert.max_alg_cost()))?;
        ensure(cert.branches.iter().all(|b| b.offline_cost <= 87), || format!("{label}: offline above 87"))?;
        ensure(cert.certified_ratio >= r(210, 87), || format!("{label}: ratio {}", format_ratio(&cert.certified_ratio)))?;
    }
    let msg = format!("{} runs, min certified {}", out.len(), min_ratio(out.iter().map(|(_, o)| &o.certificate)));
    runs.extend(out);
    Ok(msg)
}

fn criterion_large(runs: &mut Runs) -> Outcome {
    let fam = SubsetFamily::powerset(4).map_err(|e| e.to_string())?;
    ensure(fam.alpha() == 15, || format!("powerset alpha {}", fam.alpha()))?;
    let powerset = StrategyConfig::LargeD { d: 240, n: 10, nu: 4, family: FamilyKind::Powerset, seed: 0 };
    let out = run_grid(&[powerset], &full_zoo())?;
    let mut early = 0;
    for (label, o) in &out {
        let cert = &o.certificate;
        all_checks_pass(label, cert)?;
        let alg = counter(label, cert, "alg_cost")?;
        let phi = counter(label, cert, "Phi")?;
        if cert.early_stop {
            early += 1;
            ensure(alg >= 75, || format!("{label}: early stop with ALG {alg}"))?;
        } else {
            ensure(phi >= 75 && alg >= (phi + 3) / 4, || format!("{label}: Phi {phi}, ALG {alg}"))?;
        }
        let per_phase = cert.checks.iter().find(|c| c.name == "per_phase_delta_phi");
        ensure(per_phase.is_none_or(|c| c.pass), || format!("{label}: per-phase ΔΦ below 2"))?;
        ensure(cert.max_offline_cost() <= 40, || format!("{label}: offline {}", cert.max_offline_cost()))?;
    }

    let code = SubsetFamily::code(8, 0).map_err(|e| e.to_string())?;
    code.verify().map_err(|e| e.to_string())?;
    ensure(code.beta() >= 3, || format!("code distance {}", code.beta()))?;
    let cfg = StrategyConfig::LargeD { d: 256, n: 10, nu: 8, family: FamilyKind::Code, seed: 0 };
    let coded = run_grid(&[cfg], &full_zoo())?;
    for (label, o) in &coded {
        all_checks_pass(label, &o.certificate)?;
    }
    let msg = format!(
        "powerset: {} runs ({early} early stops); code family alpha={} beta={}: {} runs",
        out.len(),
        code.alpha(),
        code.beta(),
        coded.len()
    );
    runs.extend(out);
    runs.extend(coded);
    Ok(msg)
}

fn criterion_oracle(_: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let m = rng.gen_range(1..=60);
        let bits: Vec<bool> = (0..m).map(|_| rng.gen()).collect();
        let snaps: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.3)).collect();
        let run = play_oracle(&bits, &snaps).map_err(|e| format!("case {case}: {e}"))?;
        check_oracle_run(&run).map_err(|e| format!("case {case}: {e}"))?;
    }
    for m in 1..=12 {
        check_capacity(m)?;
    }
    Ok("1000 fuzzed strings, capacity exhaustive for M <= 12".into())
}

fn criterion_sandwich(_: &mut Runs) -> Outcome {
    let ctx = tiny_context();
    let strategy = instance(8, 3);
    let mut runner = TestRunner::deterministic();
    let mut tight = 0;
    for case in 0..500 {
        let items = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let lb = counting_lower_bound(&items, &ctx);
        let opt = brute_force_opt(&items, &ctx).map_err(|e| format!("case {case}: {e}"))?;
        offline_verify(&items, &opt.witness, &ctx).map_err(|e| format!("case {case}: witness: {e}"))?;
        ensure(opt.witness.cost() == opt.opt_cost, || format!("case {case}: witness cost"))?;
        ensure(opt.opt_cost == naive_opt(&items), || format!("case {case}: disagrees with partition enumeration"))?;
        ensure(lb <= opt.opt_cost as u64, || format!("case {case}: counting bound {lb} > opt {}", opt.opt_cost))?;
        let d = items.first().map_or(1, |i| i.dimension());
        let mut singles = OfflineSolution::new();
        for it in &items {
            singles.assign(it.id, it.id);
        }
        for spec in zoo(case) {
            let sol = as_offline(&pack(&spec, &items, d).0);
            offline_verify(&items, &sol, &ctx).map_err(|e| format!("case {case}: {spec}: {e}"))?;
            ensure(opt.opt_cost <= sol.cost(), || format!("case {case}: {spec} beats opt"))?;
        }
        ensure(opt.opt_cost <= singles.cost(), || format!("case {case}: singletons beat opt"))?;
        tight += usize::from(lb == opt.opt_cost as u64);
    }
    Ok(format!("500 instances, counting bound tight on {tight}"))
}

fn criterion_traces(runs: &mut Runs) -> Outcome {
    ensure(!runs.is_empty(), || "no runs recorded by the earlier criteria".into())?;
    runs.par_iter().try_for_each(|(label, o)| {
        let cert = verify_records(&o.records).map_err(|vs| format!("{label}: {}", vs[0]))?;
        let a = serde_json::to_value(Report::new(&cert)).map_err(|e| e.to_string())?;
        let b = serde_json::to_value(o.report()).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{label}: report not reproduced"))
    })?;

    // one tampered trace per construction
    let mut seen = std::collections::BTreeSet::new();
    let mut tampered = 0;
    for (label, o) in runs.iter() {
        let id = o.certificate.strategy.clone();
        if !seen.insert(id) {
            continue;
        }
        let mut records = o.records.clone();
        let idxs: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, TraceRecord::Placement { .. }))
            .map(|(i, _)| i)
            .collect();
        let idx = idxs[idxs.len() / 2];
        let TraceRecord::Placement { seq, item, .. } = &mut records[idx] else { unreachable!() };
        let seq = *seq;
        item.components[0] = &item.components[0] + &ExactValue::from_ratio(r(1, 2));
        match verify_records(&records) {
            Ok(_) => return Err(format!("{label}: tampered trace accepted")),
            Err(vs) => ensure(vs[0].seq == Some(seq), || format!("{label}: violation not located: {}", vs[0]))?,
        }
        tampered += 1;
    }
    Ok(format!("{} traces verified and reports reproduced, {tampered} tampered traces rejected at the altered seq", runs.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    body: fn(&mut Runs) -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "bounds table exactness", limit: Duration::from_secs(1), body: criterion_bounds },
        Criterion { id: 2, name: "medium-d certificate", limit: Duration::from_secs(5), body: criterion_medium },
        Criterion { id: 3, name: "d3 certificate", limit: Duration::from_secs(120), body: criterion_d3 },
        Criterion { id: 4, name: "d8 certificate", limit: Duration::from_secs(120), body: criterion_d8 },
        Criterion { id: 5, name: "large-d certificate", limit: Duration::from_secs(60), body: criterion_large },
        Criterion { id: 6, name: "adaptive oracle properties", limit: Duration::from_secs(30), body: criterion_oracle },
        Criterion { id: 7, name: "oracle sandwich", limit: Duration::from_secs(30), body: criterion_sandwich },
        Criterion { id: 8, name: "trace integrity", limit: Duration::from_secs(300), body: criterion_traces },
    ];
    let mut runs = Runs::new();
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.body)(&mut runs);
        let took = start.elapsed();
        let result = result.and_then(|m| {
            ensure(took <= c.limit, || format!("took {took:.1?}, limit {:?}", c.limit)).map(|_| m)
        });
        match result {
            Ok(m) => println!("PASS criterion {} {}: {m} [{took:.2?}]", c.id, c.name),
            Err(e) => {
                failures += 1;
                println!("FAIL criterion {} {}: {e} [{took:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
