//! Comparison gates and the circuits built from them.
//!
//! Inputs are encoded by their owners (partition and 0-coded vectors, see
//! [`crate::encoding`]) and shared in one round. Gates keep everything
//! shared; a circuit opens only its final answer, plus one equality bit
//! per rejected candidate in the rank-selection circuits.
//!
//! Input `k` (0-based) of a protocol is owned by party `(k mod N) + 1`.

use serde::{Deserialize, Serialize};

use crate::encoding::{
    self, check_field_capacity, complement, complement_constant, decode_last_entry, partition_vector,
    public_filler, sentinel_offset, zero_coded_vector, EncodingMode,
};
use crate::field::FieldElement;
use crate::mpc::{self, joint_random_nonzero, mul_batch, pow_batch, product_fold, product_fold_batch};
use crate::runtime::{decimal, decimal_vec, Session};
use crate::sharing::{Shared, SharedVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "first>second")]
    FirstGreater,
    #[serde(rename = "first<=second")]
    NotGreater,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::FirstGreater => "first>second",
            Verdict::NotGreater => "first<=second",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonOutcome {
    pub revealed: FieldElement,
    pub verdict: Verdict,
}

impl ComparisonOutcome {
    pub fn from_revealed(revealed: FieldElement) -> Self {
        let verdict = if revealed.is_zero() {
            Verdict::FirstGreater
        } else {
            Verdict::NotGreater
        };
        Self { revealed, verdict }
    }
}

/// What to run and on which inputs. Travels in transcript headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolSpec {
    /// Opens the masked comparison value of `inputs[0]` vs `inputs[1]`.
    Compare { inputs: Vec<u64> },
    /// Opens the comparison bit: 0 iff `inputs[0] > inputs[1]`.
    Sci { inputs: Vec<u64> },
    /// Opens `x^(q-1)` for a field element.
    ZeroIndicator { input: u64 },
    /// Opens 0 iff the two field elements are equal.
    Equality { inputs: Vec<u64> },
    /// Maximum through a linear chain of gates.
    ScgChain { inputs: Vec<u64> },
    Max { inputs: Vec<u64> },
    Min { inputs: Vec<u64> },
    /// Highest bid and the 1-based position of its bidder.
    Auction { inputs: Vec<u64> },
    Median {
        inputs: Vec<u64>,
        #[serde(default)]
        tie_safe: bool,
        #[serde(default)]
        reveal_index: bool,
    },
    /// Element with exactly `t` strictly greater others.
    Rank {
        inputs: Vec<u64>,
        t: usize,
        #[serde(default)]
        tie_safe: bool,
    },
    /// Squared distances to the median, opened to `server` only.
    Outliers { inputs: Vec<u64>, server: usize },
    /// Largest group minimum and its 1-based group number.
    Maximin { groups: Vec<Vec<u64>> },
}

impl ProtocolSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::Compare { .. } => "compare",
            ProtocolSpec::Sci { .. } => "sci",
            ProtocolSpec::ZeroIndicator { .. } => "zero_indicator",
            ProtocolSpec::Equality { .. } => "equality",
            ProtocolSpec::ScgChain { .. } => "scg_chain",
            ProtocolSpec::Max { .. } => "max",
            ProtocolSpec::Min { .. } => "min",
            ProtocolSpec::Auction { .. } => "auction",
            ProtocolSpec::Median { .. } => "median",
            ProtocolSpec::Rank { .. } => "rank",
            ProtocolSpec::Outliers { .. } => "outliers",
            ProtocolSpec::Maximin { .. } => "maximin",
        }
    }
}

/// What one party learned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Comparison {
        #[serde(with = "decimal")]
        revealed: u64,
        verdict: Verdict,
    },
    Bit {
        value: u64,
    },
    Value {
        value: u64,
    },
    Index {
        index: u64,
    },
    Winner {
        value: u64,
        index: u64,
    },
    Distances {
        #[serde(with = "decimal_vec")]
        values: Vec<u64>,
    },
    Nothing,
}

/// Shared encodings of one secret, and optionally its identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateOutput {
    pub partition: SharedVector,
    pub zero_coded: SharedVector,
    pub index: Option<Shared>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Want {
    Partition,
    ZeroCoded,
    Both,
}

#[derive(Debug, Clone, Copy)]
pub struct EncodeRequest {
    pub owner: usize,
    pub value: u64,
    pub want: Want,
    /// Identifier shared alongside the encodings.
    pub index: Option<u64>,
}

/// Owners encode their secrets with `bits` bits and share every entry in
/// a single round. Fillers come from the owner's randomness.
pub fn share_encoded(session: &mut Session, step: &str, bits: u32, requests: &[EncodeRequest]) -> Result<Vec<GateOutput>> {
    let field = session.config().field;
    check_field_capacity(bits, &field, EncodingMode::Sentinel)?;
    for r in requests {
        encoding::to_bits(r.value, bits)?;
    }
    let built: Vec<Result<Vec<(usize, Vec<FieldElement>)>>> = session.local(|party| {
        let mut out = Vec::new();
        for (k, r) in requests.iter().enumerate() {
            if r.owner != party.id {
                continue;
            }
            let mut values = Vec::with_capacity(2 * bits as usize + 1);
            if r.want != Want::ZeroCoded {
                values.extend_from_slice(partition_vector(r.value, bits, &field, EncodingMode::Sentinel)?.entries());
            }
            if r.want != Want::Partition {
                let z = zero_coded_vector(r.value, bits, &field, EncodingMode::Sentinel, &mut party.rng)?;
                values.extend_from_slice(z.entries());
            }
            if let Some(i) = r.index {
                values.push(field.elem(i));
            }
            out.push((k, values));
        }
        Ok(out)
    });
    let mut per_request: Vec<Vec<FieldElement>> = vec![Vec::new(); requests.len()];
    for party in built {
        for (k, values) in party? {
            per_request[k] = values;
        }
    }
    let items: Vec<(usize, Vec<FieldElement>)> = requests
        .iter()
        .zip(per_request)
        .map(|(r, v)| (r.owner, v))
        .collect();
    let dealt = session.share_inputs(step, &items)?;

    let l = bits as usize;
    Ok(requests
        .iter()
        .zip(dealt)
        .map(|(r, mut shares)| {
            let index = r.index.map(|_| shares.pop().expect("index share"));
            let (partition, zero_coded) = match r.want {
                Want::Partition => (shares, Vec::new()),
                Want::ZeroCoded => (Vec::new(), shares),
                Want::Both => {
                    let z = shares.split_off(l);
                    (shares, z)
                }
            };
            GateOutput {
                partition: SharedVector::new(partition),
                zero_coded: SharedVector::new(zero_coded),
                index,
            }
        })
        .collect())
}

/// Masked comparison: opens `p * prod(va - vb0)` with a verified nonzero
/// random `p`. The opened value is 0 iff `a > b`.
pub fn secure_compare(session: &mut Session, va: &SharedVector, vb0: &SharedVector) -> Result<ComparisonOutcome> {
    if va.len() != vb0.len() || va.is_empty() {
        return Err(Error::LengthMismatch);
    }
    let p = joint_random_nonzero(session, "jrand")?;
    let diff = va.sub(vb0);
    let u = product_fold(session, "fold", diff.coords())?;
    let s = mpc::mul(session, "mask", &p, &u)?;
    let revealed = session.reveal_one("reveal", &s)?;
    Ok(ComparisonOutcome::from_revealed(revealed))
}

/// Shared `x^(q-1)`: 0 if `x = 0`, else 1.
pub fn zero_indicator(session: &mut Session, x: &Shared) -> Result<Shared> {
    Ok(zero_indicator_batch(session, "zero", std::slice::from_ref(x))?.remove(0))
}

pub fn zero_indicator_batch(session: &mut Session, step: &str, xs: &[Shared]) -> Result<Vec<Shared>> {
    let e = session.config().field.modulus() - 1;
    pow_batch(session, step, xs, e)
}

/// Shared 0 iff `x = y`.
pub fn equality_test(session: &mut Session, x: &Shared, y: &Shared) -> Result<Shared> {
    zero_indicator(session, &x.sub(y))
}

/// Shared comparison bits, 0 iff `a > b`, for each `(partition(a),
/// zero_coded(b))` pair. Products are unmasked; nothing is opened.
pub fn sci_batch(session: &mut Session, pairs: &[(&SharedVector, &SharedVector)]) -> Result<Vec<Shared>> {
    let mut diffs = Vec::with_capacity(pairs.len());
    for (va, vb0) in pairs {
        if va.len() != vb0.len() || va.is_empty() {
            return Err(Error::LengthMismatch);
        }
        diffs.push(va.sub(vb0).into_coords());
    }
    let products = product_fold_batch(session, "fold", &diffs)?;
    zero_indicator_batch(session, "zero", &products)
}

pub fn sci(session: &mut Session, va: &SharedVector, vb0: &SharedVector) -> Result<Shared> {
    Ok(sci_batch(session, &[(va, vb0)])?.remove(0))
}

/// Shared encodings of `max(a, b)`. Ties select `b`. Indices, when both
/// sides carry one, are selected with the same bit.
pub fn scg(session: &mut Session, a: &GateOutput, b: &GateOutput) -> Result<GateOutput> {
    let g = sci(session, &a.partition, &b.zero_coded)?;
    let mut operands: Vec<(&[Shared], &[Shared])> = vec![
        (a.partition.coords(), b.partition.coords()),
        (a.zero_coded.coords(), b.zero_coded.coords()),
    ];
    let with_index = match (&a.index, &b.index) {
        (Some(ia), Some(ib)) => {
            operands.push((std::slice::from_ref(ia), std::slice::from_ref(ib)));
            true
        }
        _ => false,
    };
    let mut out = mpc::select_many(session, "select", &g, &operands)?.into_iter();
    let partition = SharedVector::new(out.next().expect("partition"));
    let zero_coded = SharedVector::new(out.next().expect("zero-coded"));
    let index = if with_index {
        out.next().map(|mut v| v.remove(0))
    } else {
        None
    };
    Ok(GateOutput {
        partition,
        zero_coded,
        index,
    })
}

/// Binary tournament of gates; an odd item at any level advances
/// unchanged. Gate `s` of level `l` runs under the label `scg/l/s`.
pub fn tournament(session: &mut Session, mut items: Vec<GateOutput>) -> Result<GateOutput> {
    if items.is_empty() {
        return Err(Error::EmptyInput("tournament"));
    }
    let mut level = 0;
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        let mut slot = 0;
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => {
                    next.push(session.scoped(format!("scg/{level}/{slot}"), |s| scg(s, &a, &b))?);
                    slot += 1;
                }
                None => next.push(a),
            }
        }
        items = next;
        level += 1;
    }
    Ok(items.pop().expect("one left"))
}

/// Left-to-right chain `scg(..scg(scg(x1, x2), x3).., xK)`.
pub fn chain(session: &mut Session, items: Vec<GateOutput>) -> Result<GateOutput> {
    let mut it = items.into_iter();
    let mut acc = it.next().ok_or(Error::EmptyInput("chain"))?;
    for (k, b) in it.enumerate() {
        acc = session.scoped(format!("scg/{k}/0"), |s| scg(s, &acc, &b))?;
    }
    Ok(acc)
}

/// Shared secret behind a partition vector: its last entry minus `2^L`.
pub fn shared_value(g: &GateOutput, bits: u32, field: &crate::FieldConfig) -> Shared {
    g.partition
        .last()
        .add_constant(-field.elem(sentinel_offset(bits)))
}

fn open_value(session: &mut Session, step: &str, g: &GateOutput, bits: u32) -> Result<u64> {
    let last = session.reveal_one(step, g.partition.last())?;
    Ok(decode_last_entry(last, bits)?)
}

fn owner(session: &Session, k: usize) -> usize {
    k % session.n() + 1
}

fn encode_all(session: &mut Session, bits: u32, values: &[u64], with_index: bool) -> Result<Vec<GateOutput>> {
    let requests: Vec<EncodeRequest> = values
        .iter()
        .enumerate()
        .map(|(k, &value)| EncodeRequest {
            owner: owner(session, k),
            value,
            want: Want::Both,
            index: with_index.then_some(k as u64 + 1),
        })
        .collect();
    share_encoded(session, "share", bits, &requests)
}

/// Secure maximum; with `with_index` also the 1-based position of the
/// winning input.
pub fn max_circuit(session: &mut Session, values: &[u64], with_index: bool) -> Result<(u64, Option<u64>)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("max"));
    }
    let bits = session.config().bits;
    let encs = encode_all(session, bits, values, with_index)?;
    let winner = tournament(session, encs)?;
    let value = open_value(session, "reveal", &winner, bits)?;
    let index = match &winner.index {
        Some(i) => Some(session.reveal_one("reveal_index", i)?.value()),
        None => None,
    };
    Ok((value, index))
}

/// Secure minimum: owners submit `2^L - 1 - s` and the maximum of those
/// is complemented back.
pub fn min_circuit(session: &mut Session, values: &[u64]) -> Result<u64> {
    let bits = session.config().bits;
    for &v in values {
        encoding::to_bits(v, bits)?;
    }
    let flipped: Vec<u64> = values.iter().map(|&v| complement(v, bits)).collect();
    let (m, _) = max_circuit(session, &flipped, false)?;
    Ok(complement(m, bits))
}

fn ceil_log2(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// `x * K + k` for input `k`: distinct and order-preserving. Returns the
/// widened bit length.
fn tie_break(values: &[u64], bits: u32) -> (Vec<u64>, u32) {
    let k = values.len() as u64;
    let widened = bits + ceil_log2(values.len());
    (values.iter().enumerate().map(|(i, &x)| x * k + i as u64).collect(), widened)
}

/// Scans candidates in input order and opens, for each, only whether its
/// count of strictly greater inputs equals `target`. Returns the 0-based
/// position of the first match.
pub fn find_rank(session: &mut Session, encs: &[GateOutput], target: usize) -> Result<usize> {
    let field = session.config().field;
    let n = session.n();
    let k = encs.len();
    for i in 0..k {
        let hit = session.scoped(format!("cand/{}", i + 1), |s| -> Result<bool> {
            let pairs: Vec<(&SharedVector, &SharedVector)> = (0..k)
                .filter(|&j| j != i)
                .map(|j| (&encs[j].partition, &encs[i].zero_coded))
                .collect();
            let bits = sci_batch(s, &pairs)?;
            // greater = sum(1 - bit) - target
            let mut g = Shared::constant(field.elem((k - 1) as u64) - field.elem(target as u64), n);
            for b in &bits {
                g = g.sub(b);
            }
            let e = zero_indicator_batch(s, "eq", &[g])?;
            Ok(s.reveal_one("reveal", &e[0])?.is_zero())
        })?;
        if hit {
            return Ok(i);
        }
    }
    Err(Error::NoCandidate)
}

/// Element with exactly `t` strictly greater inputs; `t = 0` is the max.
/// Returns the value and its 1-based position.
pub fn rank_circuit(session: &mut Session, values: &[u64], t: usize, tie_safe: bool) -> Result<(u64, u64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("rank"));
    }
    if t >= values.len() {
        return Err(Error::InvalidInput(format!("rank {t} out of range for {} inputs", values.len())));
    }
    let bits = session.config().bits;
    for &v in values {
        encoding::to_bits(v, bits)?;
    }
    let (work, wbits) = if tie_safe {
        tie_break(values, bits)
    } else {
        (values.to_vec(), bits)
    };
    let encs = encode_all(session, wbits, &work, false)?;
    let i = find_rank(session, &encs, t)?;
    let opened = open_value(session, "output", &encs[i], wbits)?;
    let value = if tie_safe { opened / values.len() as u64 } else { opened };
    Ok((value, i as u64 + 1))
}

/// Lower median for even K: the element with `floor(K / 2)` strictly greater.
pub fn median_target(k: usize) -> usize {
    k / 2
}

/// Median value, or its 1-based position when `reveal_index` is set (the
/// value then stays hidden).
pub fn median_circuit(session: &mut Session, values: &[u64], tie_safe: bool, reveal_index: bool) -> Result<Outcome> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median"));
    }
    let target = median_target(values.len());
    if !reveal_index {
        let (value, _) = rank_circuit(session, values, target, tie_safe)?;
        return Ok(Outcome::Value { value });
    }
    let bits = session.config().bits;
    for &v in values {
        encoding::to_bits(v, bits)?;
    }
    let (work, wbits) = if tie_safe {
        tie_break(values, bits)
    } else {
        (values.to_vec(), bits)
    };
    let encs = encode_all(session, wbits, &work, false)?;
    let i = find_rank(session, &encs, target)?;
    Ok(Outcome::Index { index: i as u64 + 1 })
}

/// Squared distance of each input to the median, opened to `server` only.
///
/// The median is selected obliviously: every candidate's equality bit
/// `e_i` stays shared and `m = sum((1 - e_i) x_i)`.
pub fn outlier_distances(session: &mut Session, values: &[u64], server: usize) -> Result<Vec<u64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("outliers"));
    }
    if server == 0 || server > session.n() {
        return Err(Error::InvalidInput(format!("server {server} is not a party")));
    }
    let field = session.config().field;
    let n = session.n();
    let bits = session.config().bits;
    let k = values.len();
    let encs = encode_all(session, bits, values, false)?;
    let target = median_target(k);

    let xs: Vec<Shared> = encs.iter().map(|g| shared_value(g, bits, &field)).collect();
    let m = session.scoped("median", |s| -> Result<Shared> {
        let mut pairs = Vec::with_capacity(k * k.saturating_sub(1));
        for i in 0..k {
            for j in 0..k {
                if j != i {
                    pairs.push((&encs[j].partition, &encs[i].zero_coded));
                }
            }
        }
        let bits_all = sci_batch(s, &pairs)?;
        let gs: Vec<Shared> = (0..k)
            .map(|i| {
                let mut g = Shared::constant(field.elem((k - 1) as u64) - field.elem(target as u64), n);
                for b in &bits_all[i * (k - 1)..(i + 1) * (k - 1)] {
                    g = g.sub(b);
                }
                g
            })
            .collect();
        let es = zero_indicator_batch(s, "eq", &gs)?;
        let picks: Vec<Shared> = es.iter().map(|e| e.scale(field.elem_i64(-1)).add_constant(field.one())).collect();
        let pairs: Vec<(&Shared, &Shared)> = picks.iter().zip(&xs).collect();
        let terms = mul_batch(s, "pick", &pairs)?;
        let mut m = Shared::constant(field.zero(), n);
        for t in &terms {
            m = m.add(t);
        }
        Ok(m)
    })?;
    let diffs: Vec<Shared> = xs.iter().map(|x| x.sub(&m)).collect();
    let pairs: Vec<(&Shared, &Shared)> = diffs.iter().map(|d| (d, d)).collect();
    let squares = mul_batch(session, "square", &pairs)?;
    let opened = session.reveal("reveal", &squares, Some(&[server]))?;
    Ok(opened.iter().map(|v| v.value()).collect())
}

/// Re-derives the 0-coded vector from a shared partition vector using the
/// public filler `2^(L+1)` at one-bits. One invocation per coordinate.
fn rebuild_zero_coded(session: &mut Session, partition: &SharedVector, bits: u32) -> Result<SharedVector> {
    let field = session.config().field;
    let n = session.n();
    let two = field.elem(2);
    let filler = field.elem(public_filler(bits));
    let mut prev = Shared::constant(field.one(), n);
    let mut bases = Vec::with_capacity(partition.len());
    let mut bit_shares = Vec::with_capacity(partition.len());
    let mut gaps = Vec::with_capacity(partition.len());
    for p in partition.coords() {
        let twice = prev.scale(two);
        let base = twice.add_constant(field.one());
        bit_shares.push(p.sub(&twice));
        gaps.push(base.scale(field.elem_i64(-1)).add_constant(filler));
        bases.push(base);
        prev = p.clone();
    }
    let pairs: Vec<(&Shared, &Shared)> = bit_shares.iter().zip(&gaps).collect();
    let lifts = mul_batch(session, "reencode", &pairs)?;
    Ok(SharedVector::new(bases.iter().zip(&lifts).map(|(b, l)| b.add(l)).collect()))
}

/// `max_k min_j groups[k][j]` and the 1-based group achieving it. Ties
/// between groups go to the later group.
pub fn maximin(session: &mut Session, groups: &[Vec<u64>]) -> Result<(u64, u64)> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("maximin"));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("maximin group"));
    }
    let bits = session.config().bits;
    let field = session.config().field;
    let n = session.n();
    let mut requests = Vec::new();
    let mut flat = 0;
    for g in groups {
        for &v in g {
            encoding::to_bits(v, bits)?;
            requests.push(EncodeRequest {
                owner: owner(session, flat),
                value: complement(v, bits),
                want: Want::Both,
                index: None,
            });
            flat += 1;
        }
    }
    let mut encs = share_encoded(session, "share", bits, &requests)?.into_iter();

    let mut minima = Vec::with_capacity(groups.len());
    for (k, g) in groups.iter().enumerate() {
        let members: Vec<GateOutput> = encs.by_ref().take(g.len()).collect();
        let gm = session.scoped(format!("group/{}", k + 1), |s| -> Result<GateOutput> {
            let flipped = tournament(s, members)?;
            let partition = SharedVector::new(
                flipped
                    .partition
                    .coords()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.scale(field.elem_i64(-1)).add_constant(field.elem(complement_constant(i + 1))))
                    .collect(),
            );
            let zero_coded = rebuild_zero_coded(s, &partition, bits)?;
            Ok(GateOutput {
                partition,
                zero_coded,
                index: Some(Shared::constant(field.elem(k as u64 + 1), n)),
            })
        })?;
        minima.push(gm);
    }
    let winner = tournament(session, minima)?;
    let value = open_value(session, "reveal", &winner, bits)?;
    let index = session.reveal_one("reveal_index", winner.index.as_ref().expect("group index"))?;
    Ok((value, index.value()))
}

fn check_inputs(session: &Session, values: &[u64]) -> Result<()> {
    let bits = session.config().bits;
    for &v in values {
        encoding::to_bits(v, bits)?;
    }
    Ok(())
}

fn check_distinct(values: &[u64]) -> Result<()> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("inputs must be pairwise distinct (use tie-safe mode)".into()));
    }
    Ok(())
}

fn pair(inputs: &[u64], what: &str) -> Result<(u64, u64)> {
    match inputs {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidInput(format!("{what} takes exactly two inputs, got {}", inputs.len()))),
    }
}

/// Runs `spec` on the session; returns what each party learned.
pub fn execute(session: &mut Session, spec: &ProtocolSpec) -> Result<Vec<Outcome>> {
    let n = session.n();
    let field = session.config().field;
    let bits = session.config().bits;
    let public = match spec {
        ProtocolSpec::Compare { inputs } | ProtocolSpec::Sci { inputs } => {
            let (a, b) = pair(inputs, spec.name())?;
            check_inputs(session, &[a, b])?;
            let requests = [
                EncodeRequest {
                    owner: owner(session, 0),
                    value: a,
                    want: Want::Partition,
                    index: None,
                },
                EncodeRequest {
                    owner: owner(session, 1),
                    value: b,
                    want: Want::ZeroCoded,
                    index: None,
                },
            ];
            let encs = share_encoded(session, "share", bits, &requests)?;
            if matches!(spec, ProtocolSpec::Compare { .. }) {
                let c = secure_compare(session, &encs[0].partition, &encs[1].zero_coded)?;
                Outcome::Comparison {
                    revealed: c.revealed.value(),
                    verdict: c.verdict,
                }
            } else {
                let bit = sci(session, &encs[0].partition, &encs[1].zero_coded)?;
                Outcome::Bit {
                    value: session.reveal_one("reveal", &bit)?.value(),
                }
            }
        }
        ProtocolSpec::ZeroIndicator { input } => {
            let x = field_input(field.modulus(), *input)?;
            let shared = session.share_inputs("share", &[(owner(session, 0), vec![field.elem(x)])])?;
            let z = zero_indicator(session, &shared[0][0])?;
            Outcome::Bit {
                value: session.reveal_one("reveal", &z)?.value(),
            }
        }
        ProtocolSpec::Equality { inputs } => {
            let (a, b) = pair(inputs, spec.name())?;
            let (a, b) = (field_input(field.modulus(), a)?, field_input(field.modulus(), b)?);
            let items = [
                (owner(session, 0), vec![field.elem(a)]),
                (owner(session, 1), vec![field.elem(b)]),
            ];
            let shared = session.share_inputs("share", &items)?;
            let e = equality_test(session, &shared[0][0], &shared[1][0])?;
            Outcome::Bit {
                value: session.reveal_one("reveal", &e)?.value(),
            }
        }
        ProtocolSpec::ScgChain { inputs } => {
            if inputs.is_empty() {
                return Err(Error::EmptyInput("scg chain"));
            }
            let encs = encode_all(session, bits, inputs, false)?;
            let top = chain(session, encs)?;
            Outcome::Value {
                value: open_value(session, "reveal", &top, bits)?,
            }
        }
        ProtocolSpec::Max { inputs } => Outcome::Value {
            value: max_circuit(session, inputs, false)?.0,
        },
        ProtocolSpec::Min { inputs } => Outcome::Value {
            value: min_circuit(session, inputs)?,
        },
        ProtocolSpec::Auction { inputs } => {
            let (value, index) = max_circuit(session, inputs, true)?;
            Outcome::Winner {
                value,
                index: index.expect("indexed tournament"),
            }
        }
        ProtocolSpec::Median {
            inputs,
            tie_safe,
            reveal_index,
        } => {
            if !tie_safe {
                check_distinct(inputs)?;
            }
            median_circuit(session, inputs, *tie_safe, *reveal_index)?
        }
        ProtocolSpec::Rank { inputs, t, tie_safe } => {
            if !tie_safe {
                check_distinct(inputs)?;
            }
            Outcome::Value {
                value: rank_circuit(session, inputs, *t, *tie_safe)?.0,
            }
        }
        ProtocolSpec::Outliers { inputs, server } => {
            check_distinct(inputs)?;
            let d = outlier_distances(session, inputs, *server)?;
            return Ok((1..=n)
                .map(|p| {
                    if p == *server {
                        Outcome::Distances { values: d.clone() }
                    } else {
                        Outcome::Nothing
                    }
                })
                .collect());
        }
        ProtocolSpec::Maximin { groups } => {
            let (value, index) = maximin(session, groups)?;
            Outcome::Winner { value, index }
        }
    };
    Ok(vec![public; n])
}

fn field_input(q: u64, x: u64) -> Result<u64> {
    if x >= q {
        return Err(Error::InvalidInput(format!("{x} is not a field element (q = {q})")));
    }
    Ok(x)
}

/// Plaintext references the circuits are tested against.
pub mod oracle {
    use super::{median_target, Verdict};

    pub fn compare(a: u64, b: u64) -> Verdict {
        if a > b {
            Verdict::FirstGreater
        } else {
            Verdict::NotGreater
        }
    }

    /// 0 iff `a > b`.
    pub fn sci(a: u64, b: u64) -> u64 {
        u64::from(a <= b)
    }

    pub fn max(xs: &[u64]) -> u64 {
        *xs.iter().max().expect("non-empty")
    }

    pub fn min(xs: &[u64]) -> u64 {
        *xs.iter().min().expect("non-empty")
    }

    /// 1-based position of the maximum; the last one on ties within
    /// adjacent gate pairs is not modelled, so inputs should be distinct.
    pub fn argmax(xs: &[u64]) -> u64 {
        let m = max(xs);
        xs.iter().position(|&x| x == m).expect("present") as u64 + 1
    }

    /// Value with exactly `t` larger ones, by sorting descending.
    pub fn rank(xs: &[u64], t: usize) -> u64 {
        let mut s = xs.to_vec();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s[t]
    }

    pub fn median(xs: &[u64]) -> u64 {
        rank(xs, median_target(xs.len()))
    }

    pub fn outliers(xs: &[u64]) -> Vec<u64> {
        let m = median(xs) as i128;
        xs.iter().map(|&x| ((x as i128 - m) * (x as i128 - m)) as u64).collect()
    }

    /// Value and 1-based group; ties go to the later group.
    pub fn maximin(groups: &[Vec<u64>]) -> (u64, u64) {
        let mins: Vec<u64> = groups.iter().map(|g| min(g)).collect();
        let best = max(&mins);
        let idx = mins.iter().rposition(|&m| m == best).expect("present");
        (best, idx as u64 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::run_in_memory;
    use crate::sharing::ProtocolConfig;
    use crate::SessionOptions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn run(spec: ProtocolSpec, n: usize, t: usize, q: u64, bits: u32, seed: u64) -> Outcome {
        let cfg = ProtocolConfig::new(n, t, q, bits, seed).unwrap();
        run_in_memory(&spec, &cfg, SessionOptions::sequential())
            .unwrap()
            .public_output()
            .clone()
    }

    fn value(o: Outcome) -> u64 {
        match o {
            Outcome::Value { value } => value,
            other => panic!("expected value, got {other:?}"),
        }
    }

    #[test]
    fn compare_ten_nine() {
        let o = run(ProtocolSpec::Compare { inputs: vec![10, 9] }, 3, 1, 257, 4, 1);
        assert_eq!(
            o,
            Outcome::Comparison {
                revealed: 0,
                verdict: Verdict::FirstGreater
            }
        );
        let o = run(ProtocolSpec::Compare { inputs: vec![9, 10] }, 3, 1, 257, 4, 1);
        assert!(matches!(o, Outcome::Comparison { revealed, verdict: Verdict::NotGreater } if revealed != 0));
        let o = run(ProtocolSpec::Compare { inputs: vec![7, 7] }, 3, 1, 257, 4, 2);
        assert!(matches!(o, Outcome::Comparison { verdict: Verdict::NotGreater, .. }));
    }

    #[test]
    fn compare_cost_within_bound() {
        let cfg = ProtocolConfig::new(5, 2, crate::field::MERSENNE_61, 16, 3).unwrap();
        let r = run_in_memory(&ProtocolSpec::Compare { inputs: vec![40000, 123] }, &cfg, SessionOptions::sequential()).unwrap();
        let c = &r.transcript.invocations;
        assert_eq!(c.core(), 16 + 1);
        assert_eq!(c.mask_verification(), 119);
    }

    #[test]
    fn sci_exhaustive_l3() {
        for a in 0..8 {
            for b in 0..8 {
                let o = run(ProtocolSpec::Sci { inputs: vec![a, b] }, 3, 1, 257, 3, a * 8 + b);
                assert_eq!(o, Outcome::Bit { value: oracle::sci(a, b) }, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn zero_and_equality_small_fields() {
        for x in 0..13 {
            let o = run(ProtocolSpec::ZeroIndicator { input: x }, 3, 1, 13, 1, x);
            assert_eq!(o, Outcome::Bit { value: u64::from(x != 0) });
        }
        for a in 0..11 {
            for b in 0..11 {
                let o = run(ProtocolSpec::Equality { inputs: vec![a, b] }, 3, 1, 11, 1, a * 11 + b);
                assert_eq!(o, Outcome::Bit { value: u64::from(a != b) });
            }
        }
    }

    #[test]
    fn small_circuits() {
        assert_eq!(value(run(ProtocolSpec::Max { inputs: vec![3, 9, 4, 1] }, 3, 1, 257, 4, 1)), 9);
        assert_eq!(value(run(ProtocolSpec::Max { inputs: vec![6] }, 3, 1, 257, 4, 1)), 6);
        assert_eq!(value(run(ProtocolSpec::Min { inputs: vec![3, 9, 4] }, 3, 1, 257, 4, 1)), 3);
        assert_eq!(value(run(ProtocolSpec::ScgChain { inputs: vec![5, 12, 7] }, 3, 1, 257, 4, 1)), 12);
        let median = |xs: Vec<u64>| {
            value(run(
                ProtocolSpec::Median {
                    inputs: xs,
                    tie_safe: false,
                    reveal_index: false,
                },
                3,
                1,
                257,
                4,
                1,
            ))
        };
        assert_eq!(median(vec![5, 1, 9]), 5);
        assert_eq!(median(vec![1, 2, 3, 4]), 2);
        assert_eq!(median(vec![8]), 8);
        for (t, want) in [(0, 9), (1, 5), (2, 1)] {
            let o = run(
                ProtocolSpec::Rank {
                    inputs: vec![5, 1, 9],
                    t,
                    tie_safe: false,
                },
                3,
                1,
                257,
                4,
                1,
            );
            assert_eq!(value(o), want);
        }
        assert_eq!(
            run(ProtocolSpec::Auction { inputs: vec![3, 9, 4, 1] }, 3, 1, 257, 4, 1),
            Outcome::Winner { value: 9, index: 2 }
        );
        assert_eq!(
            run(ProtocolSpec::Maximin { groups: vec![vec![3, 7], vec![5, 6]] }, 3, 1, 257, 3, 1),
            Outcome::Winner { value: 5, index: 2 }
        );
        assert_eq!(
            run(ProtocolSpec::Maximin { groups: vec![vec![4, 2, 6]] }, 3, 1, 257, 3, 1),
            Outcome::Winner { value: 2, index: 1 }
        );
    }

    #[test]
    fn ties_select_second_operand() {
        assert_eq!(
            run(ProtocolSpec::Auction { inputs: vec![7, 7] }, 3, 1, 257, 4, 5),
            Outcome::Winner { value: 7, index: 2 }
        );
    }

    #[test]
    fn tie_safe_median_with_duplicates() {
        let o = run(
            ProtocolSpec::Median {
                inputs: vec![4, 4, 1, 4],
                tie_safe: true,
                reveal_index: false,
            },
            3,
            1,
            crate::field::MERSENNE_61,
            4,
            2,
        );
        assert_eq!(value(o), 4);
        let dup = ProtocolSpec::Median {
            inputs: vec![4, 4],
            tie_safe: false,
            reveal_index: false,
        };
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 1).unwrap();
        assert!(matches!(run_in_memory(&dup, &cfg, SessionOptions::sequential()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn median_index_only() {
        let o = run(
            ProtocolSpec::Median {
                inputs: vec![5, 1, 9],
                tie_safe: false,
                reveal_index: true,
            },
            3,
            1,
            257,
            4,
            3,
        );
        assert_eq!(o, Outcome::Index { index: 1 });
    }

    #[test]
    fn outliers_go_to_server_only() {
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 4).unwrap();
        let r = run_in_memory(&ProtocolSpec::Outliers { inputs: vec![1, 5, 9], server: 2 }, &cfg, SessionOptions::sequential()).unwrap();
        assert_eq!(r.outputs[0], Outcome::Nothing);
        assert_eq!(r.outputs[1], Outcome::Distances { values: vec![16, 0, 16] });
        assert_eq!(r.outputs[2], Outcome::Nothing);
        let last = r.transcript.reveals.last().unwrap();
        assert_eq!(last.recipients, [2]);
        // nobody but the server receives shares at the final step
        assert!(r.transcript.messages.iter().filter(|m| &*m.step == "reveal").all(|m| m.to == 2));
    }

    #[test]
    fn random_circuits_match_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for trial in 0..30 {
            let k = rng.gen_range(2..6);
            let mut xs: Vec<u64> = Vec::new();
            while xs.len() < k {
                let x = rng.gen_range(0..32);
                if !xs.contains(&x) {
                    xs.push(x);
                }
            }
            let seed = 1000 + trial;
            assert_eq!(value(run(ProtocolSpec::Max { inputs: xs.clone() }, 3, 1, 257, 5, seed)), oracle::max(&xs));
            assert_eq!(value(run(ProtocolSpec::Min { inputs: xs.clone() }, 3, 1, 257, 5, seed)), oracle::min(&xs));
            let o = run(
                ProtocolSpec::Median {
                    inputs: xs.clone(),
                    tie_safe: false,
                    reveal_index: false,
                },
                3,
                1,
                257,
                5,
                seed,
            );
            assert_eq!(value(o), oracle::median(&xs));
        }
    }

    #[test]
    fn reveal_discipline_for_max() {
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 9).unwrap();
        let r = run_in_memory(&ProtocolSpec::Max { inputs: vec![3, 9, 4, 1, 7] }, &cfg, SessionOptions::sequential()).unwrap();
        let steps: Vec<&str> = r.transcript.reveals.iter().map(|e| e.step.as_str()).collect();
        assert_eq!(steps, ["reveal"]);
        assert!(r.transcript.invocations.by_step().keys().any(|k| k.starts_with("scg/2/0/")));
    }

    #[test]
    fn out_of_range_rejected_before_messages() {
        let cfg = ProtocolConfig::new(3, 1, 257, 4, 1).unwrap();
        let err = run_in_memory(&ProtocolSpec::Max { inputs: vec![3, 16] }, &cfg, SessionOptions::sequential()).unwrap_err();
        assert!(err.to_string().contains("does not fit in 4 bits"), "{err}");
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ProtocolSpec::Median {
            inputs: vec![1, 2],
            tie_safe: true,
            reveal_index: false,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.starts_with(r#"{"protocol":"median""#), "{s}");
        assert_eq!(serde_json::from_str::<ProtocolSpec>(&s).unwrap(), spec);
        let o = Outcome::Comparison {
            revealed: 0,
            verdict: Verdict::FirstGreater,
        };
        let s = serde_json::to_string(&o).unwrap();
        assert!(s.contains(r#""verdict":"first>second""#), "{s}");
    }
}
