//! Privacy audits at small field sizes, and invocation accounting.
//!
//! Share secrecy is checked exactly by enumerating every sharing
//! polynomial. Protocol views are checked statistically: many seeded runs
//! per input pair, then the largest total-variation distance between the
//! two empirical distributions over all view features.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::field::{lagrange_weights_at_zero, FieldConfig, FieldElement};
use crate::par::{self, Execution};
use crate::protocols::{self, oracle, ProtocolSpec};
use crate::runtime::{run_in_memory, Message, Session, SessionOptions};
use crate::sharing::ProtocolConfig;
use crate::{Error, Result};

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for p in start..=n {
            cur.push(p);
            go(p + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, size, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SecrecyReport {
    pub q: u64,
    pub n: usize,
    pub t: usize,
    /// Sharing polynomials enumerated per secret (`q^T`).
    pub polynomials: u64,
    pub coalitions: usize,
    /// Largest distance between two secrets' coalition views, over every
    /// coalition of size at most `T`. Exact.
    pub max_tv: f64,
    /// Smallest such distance for coalitions of size `T + 1`; positive
    /// means every pair of secrets is told apart.
    pub inversion_min_tv: f64,
    pub pass: bool,
}

/// Enumerates all degree-`T` sharings of every secret in `F_q` and
/// compares the joint share distribution of each coalition.
pub fn share_secrecy_audit(q: u64, n: usize, t: usize) -> Result<SecrecyReport> {
    if q > 17 || t > 2 || n > 5 {
        return Err(Error::Audit(format!(
            "enumeration limited to q <= 17, T <= 2, N <= 5 (got q = {q}, T = {t}, N = {n})"
        )));
    }
    if t == 0 || n < t + 1 {
        return Err(Error::Audit("need 1 <= T < N".into()));
    }
    let field = FieldConfig::new(q)?;
    let polys = q.pow(t as u32);
    let alphas: Vec<FieldElement> = (1..=n as u64).map(|a| field.elem(a)).collect();

    // views[s][p - 1][c] = share of party p for secret s under coefficient index c
    let views: Vec<Vec<Vec<u64>>> = (0..q)
        .map(|s| {
            alphas
                .iter()
                .map(|&a| {
                    (0..polys)
                        .map(|c| {
                            let mut acc = field.elem(s);
                            let mut rest = c;
                            let mut x = a;
                            for _ in 0..t {
                                acc = acc + field.elem(rest % q) * x;
                                rest /= q;
                                x = x * a;
                            }
                            acc.value()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let hist = |s: usize, coalition: &[usize]| -> HashMap<u64, u64> {
        let mut h = HashMap::new();
        for c in 0..polys as usize {
            let key = coalition.iter().fold(0u64, |k, &p| k * q + views[s][p - 1][c]);
            *h.entry(key).or_insert(0) += 1;
        }
        h
    };
    // exact distance as a count difference over 2 * polys
    let distance = |a: &HashMap<u64, u64>, b: &HashMap<u64, u64>| -> u64 {
        let mut diff = 0;
        for (k, &ca) in a {
            diff += ca.abs_diff(*b.get(k).unwrap_or(&0));
        }
        for (k, &cb) in b {
            if !a.contains_key(k) {
                diff += cb;
            }
        }
        diff
    };
    let worst = |coalitions: &[Vec<usize>], pick_max: bool| -> u64 {
        let per: Vec<u64> = par::map_range(Execution::Parallel, coalitions.len(), |i| {
            let hs: Vec<_> = (0..q as usize).map(|s| hist(s, &coalitions[i])).collect();
            let mut best = if pick_max { 0 } else { u64::MAX };
            for s1 in 0..hs.len() {
                for s2 in s1 + 1..hs.len() {
                    let d = distance(&hs[s1], &hs[s2]);
                    best = if pick_max { best.max(d) } else { best.min(d) };
                }
            }
            best
        });
        if pick_max {
            per.into_iter().max().unwrap_or(0)
        } else {
            per.into_iter().min().unwrap_or(0)
        }
    };

    let small: Vec<Vec<usize>> = (1..=t).flat_map(|k| subsets(n, k)).collect();
    let large = subsets(n, t + 1);
    let max_diff = worst(&small, true);
    let inv_diff = worst(&large, false);
    let denom = 2.0 * polys as f64;
    Ok(SecrecyReport {
        q,
        n,
        t,
        polynomials: polys,
        coalitions: small.len(),
        max_tv: max_diff as f64 / denom,
        inversion_min_tv: inv_diff as f64 / denom,
        pass: max_diff == 0 && inv_diff > 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewProtocol {
    Compare,
    Sci,
}

impl ViewProtocol {
    fn spec(self, inputs: (u64, u64)) -> ProtocolSpec {
        let inputs = vec![inputs.0, inputs.1];
        match self {
            ViewProtocol::Compare => ProtocolSpec::Compare { inputs },
            ViewProtocol::Sci => ProtocolSpec::Sci { inputs },
        }
    }

    fn public_output(self, (a, b): (u64, u64)) -> u64 {
        match self {
            ViewProtocol::Compare => u64::from(oracle::compare(a, b) == protocols::Verdict::FirstGreater),
            ViewProtocol::Sci => oracle::sci(a, b),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewAuditParams {
    pub protocol: ViewProtocol,
    pub q: u64,
    pub bits: u32,
    pub n: usize,
    pub t: usize,
    pub coalition: Vec<usize>,
    pub first: (u64, u64),
    pub second: (u64, u64),
    pub samples: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl ViewAuditParams {
    pub fn new(protocol: ViewProtocol, q: u64, bits: u32, coalition: Vec<usize>, first: (u64, u64), second: (u64, u64)) -> Self {
        Self {
            protocol,
            q,
            bits,
            n: 3,
            t: 1,
            coalition,
            first,
            second,
            samples: 100_000,
            seed: 0,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewReport {
    pub params: ViewAuditParams,
    /// Largest empirical distance over all features.
    pub tv: f64,
    pub worst_feature: String,
    pub features: usize,
    pub pass: bool,
}

/// `(round, from, to, step, element)`; `to = 0` marks a value
/// interpolated from what the whole coalition received.
type FeatureKey = (u64, usize, usize, Arc<str>, usize);
type Histograms = HashMap<FeatureKey, HashMap<u64, u32>>;

fn view_features(messages: &[Message], coalition: &[usize], weights: &[FieldElement], field: &FieldConfig, out: &mut Histograms) {
    let mut joint: HashMap<(u64, usize, Arc<str>), Vec<(usize, &Message)>> = HashMap::new();
    for m in messages.iter().filter(|m| coalition.contains(&m.to)) {
        for (e, &v) in m.payload.iter().enumerate() {
            let key = (m.round, m.from, m.to, m.step.clone(), e);
            *out.entry(key).or_default().entry(v).or_insert(0) += 1;
        }
        if coalition.len() > 1 && !coalition.contains(&m.from) {
            joint
                .entry((m.round, m.from, m.step.clone()))
                .or_default()
                .push((m.to, m));
        }
    }
    for ((round, from, step), got) in joint {
        if got.len() != coalition.len() {
            continue;
        }
        let width = got.iter().map(|(_, m)| m.payload.len()).min().unwrap_or(0);
        for e in 0..width {
            let mut acc = field.zero();
            for (to, m) in &got {
                let slot = coalition.iter().position(|p| p == to).expect("member");
                acc = acc + weights[slot] * field.elem(m.payload[e]);
            }
            let key = (round, from, 0, step.clone(), e);
            *out.entry(key).or_default().entry(acc.value()).or_insert(0) += 1;
        }
    }
}

fn merge(mut a: Histograms, b: Histograms) -> Histograms {
    for (k, h) in b {
        let dst = a.entry(k).or_default();
        for (v, c) in h {
            *dst.entry(v).or_insert(0) += c;
        }
    }
    a
}

fn collect_views(params: &ViewAuditParams, inputs: (u64, u64), stream: u64) -> Result<Histograms> {
    let cfg = ProtocolConfig::new(params.n, params.t, params.q, params.bits, 0)?;
    let field = cfg.field;
    let alphas: Vec<FieldElement> = params.coalition.iter().map(|&p| cfg.alpha(p)).collect();
    let weights = lagrange_weights_at_zero(&alphas)?;
    let spec = params.protocol.spec(inputs);
    let seed_base = params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream;
    par::fold_range(
        Execution::Parallel,
        params.samples,
        || Ok(Histograms::new()),
        |acc: Result<Histograms>, i| {
            let mut acc = acc?;
            let cfg = cfg.clone().with_seed(seed_base.wrapping_add((i as u64) << 1));
            let mut session = Session::in_memory(cfg)?;
            protocols::execute(&mut session, &spec)?;
            view_features(session.messages(), &params.coalition, &weights, &field, &mut acc);
            Ok(acc)
        },
        |a, b| Ok(merge(a?, b?)),
    )
}

fn feature_tv(a: Option<&HashMap<u64, u32>>, b: Option<&HashMap<u64, u32>>, samples: f64) -> f64 {
    let empty = HashMap::new();
    let a = a.unwrap_or(&empty);
    let b = b.unwrap_or(&empty);
    let mut sum = 0.0;
    let mut seen_a = 0u64;
    let mut seen_b = 0u64;
    for (v, &ca) in a {
        seen_a += ca as u64;
        let cb = *b.get(v).unwrap_or(&0);
        sum += (ca as f64 - cb as f64).abs();
    }
    for (v, &cb) in b {
        seen_b += cb as u64;
        if !a.contains_key(v) {
            sum += cb as f64;
        }
    }
    // the "absent" outcome
    sum += (seen_a as f64 - seen_b as f64).abs();
    0.5 * sum / samples
}

/// Monte-Carlo distance between the coalition's views on two input pairs
/// with the same public output.
pub fn view_indistinguishability_audit(params: &ViewAuditParams) -> Result<ViewReport> {
    if params.q > 257 || params.bits > 3 {
        return Err(Error::Audit("view audit expects a small field and at most 3 bits".into()));
    }
    if params.coalition.is_empty() || params.coalition.iter().any(|&p| p == 0 || p > params.n) {
        return Err(Error::Audit(format!("bad coalition {:?}", params.coalition)));
    }
    if params.samples == 0 {
        return Err(Error::Audit("need at least one sample".into()));
    }
    let (oa, ob) = (params.protocol.public_output(params.first), params.protocol.public_output(params.second));
    if oa != ob {
        return Err(Error::Audit(format!(
            "inputs {:?} and {:?} have different public outputs",
            params.first, params.second
        )));
    }
    let ha = collect_views(params, params.first, 0)?;
    let hb = collect_views(params, params.second, 1)?;
    let samples = params.samples as f64;
    let mut keys: Vec<&FeatureKey> = ha.keys().chain(hb.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut tv = 0.0;
    let mut worst = String::new();
    for k in &keys {
        let d = feature_tv(ha.get(*k), hb.get(*k), samples);
        if d > tv {
            tv = d;
            let who = if k.2 == 0 { "coalition".to_string() } else { format!("party {}", k.2) };
            worst = format!("round {} {} from {} to {} [{}]", k.0, k.3, k.1, who, k.4);
        }
    }
    Ok(ViewReport {
        params: params.clone(),
        tv,
        worst_feature: worst,
        features: keys.len(),
        pass: tv < params.threshold,
    })
}

/// Invocation bounds, with `L` the bit length of `q - 1`.
pub mod bounds {
    pub fn compare(l: u64) -> u64 {
        l + 2
    }
    pub fn zero_indicator(l: u64) -> u64 {
        2 * l
    }
    pub fn sci(l: u64) -> u64 {
        3 * l + 2
    }
    pub fn scg(l: u64) -> u64 {
        5 * l + 2
    }
    pub fn max(l: u64, k: u64) -> u64 {
        k.saturating_sub(1) * scg(l)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityRow {
    pub protocol: String,
    /// Input bit length.
    pub bits: u32,
    /// Bit length of `q - 1`; the bounds are evaluated here.
    pub lq: u32,
    pub inputs: usize,
    /// Invocations excluding mask verification.
    pub measured: u64,
    pub verification: u64,
    pub total: u64,
    pub bound: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Baseline {
    pub scheme: &'static str,
    pub task: &'static str,
    pub formula: &'static str,
    pub invocations: f64,
}

/// Reference costs of earlier comparison and equality protocols at `L`.
pub fn baselines(l: u32) -> Vec<Baseline> {
    let l = l as f64;
    let lg = l.log2();
    vec![
        Baseline {
            scheme: "damgard2006",
            task: "comparison",
            formula: "188 L log L + 205 L",
            invocations: 188.0 * l * lg + 205.0 * l,
        },
        Baseline {
            scheme: "nishide2007",
            task: "comparison",
            formula: "279 L + 5",
            invocations: 279.0 * l + 5.0,
        },
        Baseline {
            scheme: "rabbit2021",
            task: "comparison",
            formula: "53 L",
            invocations: 53.0 * l,
        },
        Baseline {
            scheme: "damgard2006",
            task: "equality",
            formula: "94 L log L + 92",
            invocations: 94.0 * l * lg + 92.0,
        },
        Baseline {
            scheme: "nishide2007",
            task: "equality",
            formula: "81 L",
            invocations: 81.0 * l,
        },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    pub q: u64,
    pub n: usize,
    pub t: usize,
    pub rows: Vec<ComplexityRow>,
    pub baselines: Vec<Baseline>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ComplexityParams {
    pub q: u64,
    pub n: usize,
    pub t: usize,
    pub bits: Vec<u32>,
    pub inputs: Vec<usize>,
    pub seed: u64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        Self {
            q: crate::field::MERSENNE_61,
            n: 3,
            t: 1,
            bits: (3..=8).collect(),
            inputs: (2..=8).collect(),
            seed: 1,
        }
    }
}

/// Runs each protocol once per setting and compares measured invocations
/// with the bounds. Inputs are fixed distinct values in range.
pub fn complexity_report(params: &ComplexityParams) -> Result<ComplexityReport> {
    let field = FieldConfig::new(params.q)?;
    let lq = field.bit_length();
    let mut jobs: Vec<(String, u32, usize, ProtocolSpec, u64)> = Vec::new();
    for &bits in &params.bits {
        let top = (1u64 << bits) - 1;
        let l = lq as u64;
        jobs.push(("compare".into(), bits, 2, ProtocolSpec::Compare { inputs: vec![top, top / 2] }, bounds::compare(l)));
        jobs.push(("zero_indicator".into(), bits, 1, ProtocolSpec::ZeroIndicator { input: top }, bounds::zero_indicator(l)));
        jobs.push(("sci".into(), bits, 2, ProtocolSpec::Sci { inputs: vec![top / 2, top] }, bounds::sci(l)));
        jobs.push(("scg".into(), bits, 2, ProtocolSpec::ScgChain { inputs: vec![top / 2, top] }, bounds::scg(l)));
        for &k in &params.inputs {
            let inputs: Vec<u64> = (0..k as u64).map(|i| (i * 7 + 3) % (top + 1)).collect();
            jobs.push(("max".into(), bits, k, ProtocolSpec::Max { inputs }, bounds::max(l, k as u64)));
        }
    }
    let rows: Vec<Result<ComplexityRow>> = par::map_range(Execution::Parallel, jobs.len(), |i| {
        let (name, bits, k, spec, bound) = &jobs[i];
        let cfg = ProtocolConfig::new(params.n, params.t, params.q, *bits, params.seed.wrapping_add(i as u64))?;
        let r = run_in_memory(spec, &cfg, SessionOptions::sequential())?;
        let c = &r.transcript.invocations;
        Ok(ComplexityRow {
            protocol: name.clone(),
            bits: *bits,
            lq,
            inputs: *k,
            measured: c.core(),
            verification: c.mask_verification(),
            total: c.total(),
            bound: *bound,
            pass: c.core() <= *bound,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ComplexityReport {
        q: params.q,
        n: params.n,
        t: params.t,
        pass: rows.iter().all(|r| r.pass),
        rows,
        baselines: baselines(lq),
    })
}

impl ComplexityReport {
    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<15} {:>4} {:>4} {:>3} {:>9} {:>7} {:>6}\n",
            "protocol", "L", "Lq", "K", "measured", "bound", "ok"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<15} {:>4} {:>4} {:>3} {:>9} {:>7} {:>6}\n",
                r.protocol,
                r.bits,
                r.lq,
                r.inputs,
                r.measured,
                r.bound,
                if r.pass { "yes" } else { "NO" }
            ));
        }
        for b in &self.baselines {
            s.push_str(&format!("{:<12} {:<11} {:<20} {:>10.0}\n", b.scheme, b.task, b.formula, b.invocations));
        }
        s
    }
}
