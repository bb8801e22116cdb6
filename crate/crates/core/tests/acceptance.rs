//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Run with `cargo test -p mpcmp-core --test acceptance`.

use std::time::Instant;

use mpcmp_core::audit::{
    complexity_report, share_secrecy_audit, view_indistinguishability_audit, ComplexityParams, ViewAuditParams,
    ViewProtocol,
};
use mpcmp_core::encoding::{self, BitString, EncodingMode};
use mpcmp_core::field::{is_prime, MERSENNE_61};
use mpcmp_core::par::{self, Execution};
use mpcmp_core::protocols::{oracle, Verdict};
use mpcmp_core::runtime::{replay, replay_lines, run_in_memory, run_session, Record, TcpTransport, TestHooks};
use mpcmp_core::{FieldConfig, Outcome, ProtocolConfig, ProtocolSpec, SessionOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(spec: &ProtocolSpec, cfg: &ProtocolConfig) -> Result<Outcome, String> {
    run_in_memory(spec, cfg, SessionOptions::sequential())
        .map(|r| r.public_output().clone())
        .map_err(|e| format!("{spec:?}: {e}"))
}

fn distinct(rng: &mut ChaCha20Rng, k: usize, bound: u64) -> Vec<u64> {
    let mut xs = Vec::with_capacity(k);
    while xs.len() < k {
        let x = rng.gen_range(0..bound);
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs
}

fn zero_count_theorem() -> Check {
    let field = FieldConfig::mersenne61();
    let mut cases = 0u64;
    for bits in 1..=6u32 {
        let size = 1u64 << bits;
        let bad = par::fold_range(
            Execution::Parallel,
            (size * size) as usize,
            || Ok(0u64),
            |acc: Result<u64, String>, i| {
                let mut n = acc?;
                let (a, b) = (i as u64 / size, i as u64 % size);
                for seed in 0..100u64 {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed * 4096 + i as u64);
                    let z = encoding::zero_count_oracle(a, b, bits, &field, &mut rng).map_err(|e| e.to_string())?;
                    if z.count() > 1 || (z.count() == 1) != (a > b) {
                        return Err(format!("L={bits} a={a} b={b} seed={seed}: zeros at {:?}", z.zero_positions));
                    }
                    n += 1;
                }
                Ok(n)
            },
            |x, y| Ok(x? + y?),
        )?;
        cases += bad;
    }
    Ok(format!("{cases} encodings, zero count in {{0,1}} and 1 iff a > b"))
}

fn worked_example() -> Check {
    let field = FieldConfig::new(257).unwrap();
    let va = encoding::partition_vector(10, 4, &field, EncodingMode::Raw).map_err(|e| e.to_string())?;
    let vb = encoding::zero_coded_vector_with(9, 4, &field, EncodingMode::Raw, |i| match i {
        1 => BitString::parse("11").unwrap(),
        4 => BitString::parse("100").unwrap(),
        _ => unreachable!("only one-bits take fillers"),
    })
    .map_err(|e| e.to_string())?;
    let a: Vec<u64> = va.entries().iter().map(|x| x.value()).collect();
    let b: Vec<u64> = vb.entries().iter().map(|x| x.value()).collect();
    ensure(a == [1, 2, 5, 10], || format!("partition {a:?}"))?;
    ensure(b == [3, 3, 5, 4], || format!("0-coded {b:?}"))?;
    let z = encoding::count_zeros(&va, &vb);
    ensure(z.zero_positions == [3], || format!("zeros at {:?}", z.zero_positions))?;
    Ok("[1,2,5,10] vs [3,3,5,4], single zero at position 3".into())
}

fn exhaustive_small() -> Result<usize, String> {
    let cfg = |seed: u64| ProtocolConfig::new(3, 1, 257, 3, seed).unwrap();
    let mut jobs: Vec<(ProtocolSpec, Outcome)> = Vec::new();
    for a in 0..8u64 {
        for b in 0..8 {
            jobs.push((
                ProtocolSpec::Sci { inputs: vec![a, b] },
                Outcome::Bit { value: oracle::sci(a, b) },
            ));
            for c in 0..8 {
                let xs = vec![a, b, c];
                jobs.push((ProtocolSpec::ScgChain { inputs: xs.clone() }, Outcome::Value { value: oracle::max(&xs) }));
                jobs.push((ProtocolSpec::Max { inputs: xs.clone() }, Outcome::Value { value: oracle::max(&xs) }));
                jobs.push((ProtocolSpec::Min { inputs: xs.clone() }, Outcome::Value { value: oracle::min(&xs) }));
                jobs.push((
                    ProtocolSpec::Median {
                        inputs: xs.clone(),
                        tie_safe: true,
                        reveal_index: false,
                    },
                    Outcome::Value { value: oracle::median(&xs) },
                ));
                for t in 0..3 {
                    jobs.push((
                        ProtocolSpec::Rank {
                            inputs: xs.clone(),
                            t,
                            tie_safe: true,
                        },
                        Outcome::Value { value: oracle::rank(&xs, t) },
                    ));
                }
                if a != b && b != c && a != c {
                    jobs.push((
                        ProtocolSpec::Outliers {
                            inputs: xs.clone(),
                            server: 1,
                        },
                        Outcome::Distances {
                            values: oracle::outliers(&xs),
                        },
                    ));
                }
                for d in 0..8 {
                    let groups = vec![vec![a, b], vec![c, d]];
                    let (value, index) = oracle::maximin(&groups);
                    jobs.push((ProtocolSpec::Maximin { groups }, Outcome::Winner { value, index }));
                }
            }
        }
    }
    let results = par::map_range(Execution::Parallel, jobs.len(), |i| {
        let (spec, want) = &jobs[i];
        let got = run(spec, &cfg(i as u64))?;
        ensure(got == *want, || format!("{spec:?}: got {got:?}, want {want:?}"))
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;

    // compare: the verdict is the public output
    let compares = par::map_range(Execution::Parallel, 64, |i| {
        let (a, b) = (i as u64 / 8, i as u64 % 8);
        match run(&ProtocolSpec::Compare { inputs: vec![a, b] }, &cfg(i as u64))? {
            Outcome::Comparison { revealed, verdict } => ensure(
                verdict == oracle::compare(a, b) && (revealed == 0) == (a > b),
                || format!("compare {a},{b}: {verdict:?}"),
            ),
            other => Err(format!("compare gave {other:?}")),
        }
    });
    compares.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(jobs.len() + 64)
}

fn randomized_large() -> Result<usize, String> {
    const TRIALS: usize = 1000;
    let bits = 16;
    let bound = 1u64 << bits;
    let protocols = 9;
    let results = par::map_range(Execution::Parallel, TRIALS * protocols, |job| {
        let (kind, trial) = (job % protocols, job / protocols);
        let mut rng = ChaCha20Rng::seed_from_u64(job as u64);
        let cfg = ProtocolConfig::new(5, 2, MERSENNE_61, bits, rng.gen()).unwrap();
        let k = rng.gen_range(2..=5);
        let xs = distinct(&mut rng, k, bound);
        let (spec, want) = match kind {
            0 => {
                let (a, b) = (xs[0], if trial % 10 == 0 { xs[0] } else { xs[1] });
                let got = run(&ProtocolSpec::Compare { inputs: vec![a, b] }, &cfg)?;
                return match got {
                    Outcome::Comparison { verdict, .. } if verdict == oracle::compare(a, b) => Ok(()),
                    other => Err(format!("compare {a},{b}: {other:?}")),
                };
            }
            1 => (
                ProtocolSpec::Sci { inputs: xs[..2].to_vec() },
                Outcome::Bit { value: oracle::sci(xs[0], xs[1]) },
            ),
            2 => (ProtocolSpec::ScgChain { inputs: xs.clone() }, Outcome::Value { value: oracle::max(&xs) }),
            3 => (ProtocolSpec::Max { inputs: xs.clone() }, Outcome::Value { value: oracle::max(&xs) }),
            4 => (ProtocolSpec::Min { inputs: xs.clone() }, Outcome::Value { value: oracle::min(&xs) }),
            5 => (
                ProtocolSpec::Median {
                    inputs: xs.clone(),
                    tie_safe: false,
                    reveal_index: false,
                },
                Outcome::Value { value: oracle::median(&xs) },
            ),
            6 => {
                let t = rng.gen_range(0..k);
                (
                    ProtocolSpec::Rank {
                        inputs: xs.clone(),
                        t,
                        tie_safe: false,
                    },
                    Outcome::Value { value: oracle::rank(&xs, t) },
                )
            }
            7 => {
                let groups: Vec<Vec<u64>> = (0..rng.gen_range(1..=3))
                    .map(|_| (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..bound)).collect())
                    .collect();
                let (value, index) = oracle::maximin(&groups);
                (ProtocolSpec::Maximin { groups }, Outcome::Winner { value, index })
            }
            _ => {
                let server = rng.gen_range(1..=5);
                let cfg_out = cfg.clone();
                let r = run_in_memory(
                    &ProtocolSpec::Outliers {
                        inputs: xs.clone(),
                        server,
                    },
                    &cfg_out,
                    SessionOptions::sequential(),
                )
                .map_err(|e| e.to_string())?;
                let want = Outcome::Distances {
                    values: oracle::outliers(&xs),
                };
                for (p, o) in r.outputs.iter().enumerate() {
                    let expect = if p + 1 == server { &want } else { &Outcome::Nothing };
                    ensure(o == expect, || format!("outliers {xs:?} party {}: {o:?}", p + 1))?;
                }
                return Ok(());
            }
        };
        let got = run(&spec, &cfg)?;
        ensure(got == want, || format!("{spec:?}: got {got:?}, want {want:?}"))
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TRIALS * protocols)
}

fn end_to_end() -> Check {
    let small = exhaustive_small()?;
    let large = randomized_large()?;
    Ok(format!("{small} exhaustive sessions (L=3, q=257) and {large} randomized (L=16, q=2^61-1, N=5, T=2), all agree"))
}

fn fermat_indicator() -> Check {
    let cfg = |seed| ProtocolConfig::new(3, 1, 13, 1, seed).unwrap();
    for x in 0..13u64 {
        let got = run(&ProtocolSpec::ZeroIndicator { input: x }, &cfg(x))?;
        ensure(got == Outcome::Bit { value: u64::from(x != 0) }, || format!("x={x}: {got:?}"))?;
    }
    Ok("x^12 over F_13 correct for all 13 residues".into())
}

/// Largest prime `q` with `bitlen(q - 1) = lq`.
fn prime_for(lq: u32) -> u64 {
    (1..=(1u64 << lq)).rev().find(|&q| is_prime(q) && 64 - (q - 1).leading_zeros() == lq).unwrap()
}

fn complexity() -> Check {
    let mut lines = Vec::new();
    let wide = complexity_report(&ComplexityParams::default()).map_err(|e| e.to_string())?;
    let mut failures: Vec<String> = Vec::new();
    let mut rows = wide.rows.clone();
    // tight sweep: small fields where the bound is close
    for lq in 3..=8 {
        let q = prime_for(lq);
        let Some(bits) = (1..lq).rev().find(|&b| (1u64 << (b + 2)) < q) else {
            lines.push(format!("Lq={lq}: no input width fits q={q}, skipped"));
            continue;
        };
        let r = complexity_report(&ComplexityParams {
            q,
            bits: vec![bits],
            ..ComplexityParams::default()
        })
        .map_err(|e| e.to_string())?;
        rows.extend(r.rows);
    }
    for r in &rows {
        if !r.pass {
            failures.push(format!("{} L={} Lq={} K={}: {} > {}", r.protocol, r.bits, r.lq, r.inputs, r.measured, r.bound));
        }
    }
    for r in rows.iter().filter(|r| r.lq <= 8) {
        lines.push(format!(
            "{} L={} Lq={} K={} measured={} bound={}",
            r.protocol, r.bits, r.lq, r.inputs, r.measured, r.bound
        ));
    }
    let max_k8 = wide
        .rows
        .iter()
        .find(|r| r.protocol == "max" && r.inputs == 8 && r.bits == 8)
        .map(|r| r.measured)
        .unwrap_or(0);
    for l in &lines {
        println!("      {l}");
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{} settings within bounds (max of 8 at q=2^61-1, L=8: {max_k8} invocations)", rows.len()))
}

fn shamir_secrecy() -> Check {
    let mut out = Vec::new();
    for (q, n, t) in [(11, 3, 1), (13, 5, 2)] {
        let r = share_secrecy_audit(q, n, t).map_err(|e| e.to_string())?;
        ensure(r.max_tv == 0.0, || format!("q={q}: tv {}", r.max_tv))?;
        ensure(r.inversion_min_tv > 0.0, || format!("q={q}: T+1 coalition cannot distinguish"))?;
        out.push(format!("q={q} N={n} T={t}: tv=0, T+1 tv={}", r.inversion_min_tv));
    }
    Ok(out.join("; "))
}

fn view_audit() -> Check {
    // the literal q=11 cannot hold 3-bit sentinel encodings
    ensure(ProtocolConfig::new(3, 1, 11, 3, 0).is_err(), || "q=11, L=3 accepted".into())?;
    let q = 37;
    let cases = [
        (ViewProtocol::Compare, vec![3], (5, 2), (6, 1), true),
        (ViewProtocol::Sci, vec![3], (2, 5), (1, 6), true),
        (ViewProtocol::Compare, vec![2, 3], (5, 2), (6, 1), false),
    ];
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (protocol, coalition, first, second, expect_pass) in cases {
        let mut p = ViewAuditParams::new(protocol, q, 3, coalition.clone(), first, second);
        p.seed = 2024;
        let r = view_indistinguishability_audit(&p).map_err(|e| e.to_string())?;
        let ok = if expect_pass { r.tv < 0.05 } else { r.tv > 0.2 };
        let line = format!("{protocol:?} {coalition:?} {first:?}/{second:?} tv={:.4}", r.tv);
        if !ok {
            bad.push(format!("{line} (worst: {})", r.worst_feature));
        }
        out.push(line);
    }
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok(format!("q={q}, 10^5 samples each: {}", out.join("; ")))
}

fn mask_regeneration() -> Check {
    let results = par::map_range(Execution::Parallel, 1000, |i| {
        let mut rng = ChaCha20Rng::seed_from_u64(i as u64 + 77);
        let (a, b) = (rng.gen_range(0..1u64 << 16), rng.gen_range(0..1u64 << 16));
        let cfg = ProtocolConfig::new(3, 1, MERSENNE_61, 16, rng.gen()).unwrap();
        let hooks = TestHooks {
            force_zero_masks: 1,
            ..TestHooks::default()
        };
        let r = run_in_memory(&ProtocolSpec::Compare { inputs: vec![a, b] }, &cfg, SessionOptions::with_hooks(hooks))
            .map_err(|e| e.to_string())?;
        ensure(r.transcript.mask_retries == 1, || format!("trial {i}: {} regenerations", r.transcript.mask_retries))?;
        match r.public_output() {
            Outcome::Comparison { verdict, .. } => {
                ensure(*verdict == oracle::compare(a, b), || format!("trial {i}: {a} vs {b} gave {verdict:?}"))?;
                Ok(*verdict == Verdict::FirstGreater)
            }
            other => Err(format!("trial {i}: {other:?}")),
        }
    });
    let verdicts = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let greater = verdicts.iter().filter(|&&g| g).count();
    Ok(format!("1000 trials, one regeneration each, {greater} first>second verdicts all correct"))
}

fn all_specs(rng: &mut ChaCha20Rng, i: usize) -> ProtocolSpec {
    let xs = distinct(rng, 3, 16);
    match i % 12 {
        0 => ProtocolSpec::Compare { inputs: xs[..2].to_vec() },
        1 => ProtocolSpec::Sci { inputs: xs[..2].to_vec() },
        2 => ProtocolSpec::ZeroIndicator { input: xs[0] },
        3 => ProtocolSpec::Equality { inputs: vec![xs[0], xs[i % 2]] },
        4 => ProtocolSpec::ScgChain { inputs: xs },
        5 => ProtocolSpec::Max { inputs: xs },
        6 => ProtocolSpec::Min { inputs: xs },
        7 => ProtocolSpec::Auction { inputs: xs },
        8 => ProtocolSpec::Median {
            inputs: xs,
            tie_safe: i % 2 == 0,
            reveal_index: false,
        },
        9 => ProtocolSpec::Rank {
            inputs: xs,
            t: i % 3,
            tie_safe: false,
        },
        10 => ProtocolSpec::Outliers { inputs: xs, server: 2 },
        _ => ProtocolSpec::Maximin {
            groups: vec![xs[..2].to_vec(), vec![xs[2]]],
        },
    }
}

fn cross_transport() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for i in 0..50 {
        let spec = all_specs(&mut rng, i);
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 500 + i as u64).unwrap();
        let mem = run_in_memory(&spec, &cfg, SessionOptions::sequential()).map_err(|e| e.to_string())?;
        let transport = TcpTransport::connect(3, None).map_err(|e| e.to_string())?;
        let tcp = run_session(&spec, &cfg, Box::new(transport), SessionOptions::default()).map_err(|e| e.to_string())?;
        ensure(mem.outputs == tcp.outputs, || format!("session {i} {spec:?}: outputs differ"))?;
        for from in 1..=3 {
            for to in 1..=3 {
                let proj = |t: &mpcmp_core::Transcript| -> Vec<_> {
                    t.messages.iter().filter(|m| m.from == from && m.to == to).cloned().collect()
                };
                ensure(proj(&mem.transcript) == proj(&tcp.transcript), || {
                    format!("session {i}: link {from}->{to} differs")
                })?;
            }
        }
    }
    Ok("50 sessions over 12 protocols: same outputs and per-link message streams".into())
}

fn replay_check() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    for i in 0..24 {
        let spec = all_specs(&mut rng, i);
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 900 + i as u64).unwrap();
        let r = run_in_memory(&spec, &cfg, SessionOptions::default()).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("t{i}.jsonl"));
        r.transcript.write_to(&path).map_err(|e| e.to_string())?;
        let report = replay(&path).map_err(|e| e.to_string())?;
        ensure(report.identical && report.outputs == r.outputs, || {
            format!("{spec:?}: {:?}", report.first_divergence)
        })?;
    }
    // negative control: one flipped payload element
    let cfg = ProtocolConfig::new(3, 1, 257, 4, 1).unwrap();
    let r = run_in_memory(&ProtocolSpec::Max { inputs: vec![1, 2, 3] }, &cfg, SessionOptions::sequential())
        .map_err(|e| e.to_string())?;
    let mut lines = r.transcript.to_lines();
    let idx = lines.len() / 2;
    let mut rec: Record = serde_json::from_str(&lines[idx]).map_err(|e| e.to_string())?;
    if let Record::Message(m) = &mut rec {
        m.payload[0] = (m.payload[0] + 1) % 257;
    }
    lines[idx] = serde_json::to_string(&rec).unwrap();
    let report = replay_lines(&lines).map_err(|e| e.to_string())?;
    ensure(report.first_divergence.map(|d| d.line) == Some(idx + 1), || "tamper not located".into())?;
    Ok("24 exported transcripts replay identically; tampered line located".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("zero-count comparison oracle, exhaustive L<=6", zero_count_theorem),
        ("worked example in raw mode", worked_example),
        ("protocols vs plaintext oracles", end_to_end),
        ("Fermat zero indicator over F_13", fermat_indicator),
        ("invocation bounds", complexity),
        ("Shamir secrecy by enumeration", shamir_secrecy),
        ("protocol view indistinguishability", view_audit),
        ("zero-mask regeneration", mask_regeneration),
        ("in-memory vs TCP equivalence", cross_transport),
        ("transcript determinism and replay", replay_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
