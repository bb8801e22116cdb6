//! Interactive arithmetic on sharings.
//!
//! Multiplication re-shares each party's local product with a fresh
//! degree-`T` polynomial and recombines the sub-shares with the Lagrange
//! weights for interpolation at zero over all `N` points. Every call that
//! multiplies `k` pairs in one round is `k` invocations on the session
//! counter. Linear operations are local and free.

use crate::field::{DensePolynomial, FieldElement};
use crate::runtime::Session;
use crate::sharing::Shared;
use crate::{Error, Result};

const MASK_ATTEMPTS: u32 = 64;

/// Multiplies each pair in one round; `pairs.len()` invocations.
///
/// A pair where one side is a public constant (degree 0) is multiplied
/// locally and not counted.
pub fn mul_batch(session: &mut Session, step: &str, pairs: &[(&Shared, &Shared)]) -> Result<Vec<Shared>> {
    let t = session.config().t;
    let n = session.n();
    let mut out: Vec<Option<Shared>> = vec![None; pairs.len()];
    let mut interactive = Vec::new();
    for (k, (x, y)) in pairs.iter().enumerate() {
        for s in [x, y] {
            if s.degree() > t {
                return Err(Error::DegreeTooHigh {
                    degree: s.degree(),
                    max: t,
                });
            }
        }
        if x.degree() == 0 || y.degree() == 0 {
            let local = x
                .values()
                .iter()
                .zip(y.values())
                .map(|(&a, &b)| a * b)
                .collect();
            out[k] = Some(Shared::from_values(local, x.degree().max(y.degree())));
        } else {
            interactive.push(k);
        }
    }
    if interactive.is_empty() {
        return Ok(out.into_iter().map(Option::unwrap).collect());
    }

    let alphas = session.config().alphas.clone();
    // sub[p-1][j][r-1]: party p's sub-share of its j-th local product for recipient r
    let sub: Vec<Vec<Vec<FieldElement>>> = session.local(|party| {
        interactive
            .iter()
            .map(|&k| {
                let (x, y) = pairs[k];
                let d = x.values()[party.id - 1] * y.values()[party.id - 1];
                let poly = DensePolynomial::random_with_constant(d, t, &mut party.rng);
                alphas.iter().map(|&a| poly.eval(a).expect("same field")).collect()
            })
            .collect()
    });
    let outgoing = (1..=n)
        .map(|p| {
            (1..=n)
                .filter(|&r| r != p)
                .map(|r| (r, sub[p - 1].iter().map(|e| e[r - 1].value()).collect()))
                .collect()
        })
        .collect();
    let inboxes = session.exchange(step, outgoing)?;

    let field = session.config().field;
    let weights = session.weights().to_vec();
    for (j, &k) in interactive.iter().enumerate() {
        let shares = (1..=n)
            .map(|r| {
                let mut acc = field.zero();
                for p in 1..=n {
                    let piece = if p == r {
                        sub[r - 1][j][r - 1]
                    } else {
                        let (_, payload) = inboxes[r - 1]
                            .iter()
                            .find(|(from, _)| *from == p)
                            .expect("every party re-shares");
                        field.elem(payload[j])
                    };
                    acc = acc + weights[p - 1] * piece;
                }
                acc
            })
            .collect();
        out[k] = Some(Shared::from_values(shares, t));
    }
    session.count(step, interactive.len() as u64);
    Ok(out.into_iter().map(Option::unwrap).collect())
}

pub fn mul(session: &mut Session, step: &str, x: &Shared, y: &Shared) -> Result<Shared> {
    Ok(mul_batch(session, step, &[(x, y)])?.remove(0))
}

/// `constant + sum(coeffs[k] * xs[k])`, computed locally.
pub fn affine(xs: &[&Shared], coeffs: &[FieldElement], constant: FieldElement, n: usize) -> Result<Shared> {
    if xs.len() != coeffs.len() {
        return Err(Error::LengthMismatch);
    }
    let mut acc = Shared::constant(constant, n);
    for (x, &c) in xs.iter().zip(coeffs) {
        acc = acc.add(&x.scale(c));
    }
    Ok(acc)
}

/// Left fold of products; `xs.len() - 1` invocations.
pub fn product_fold(session: &mut Session, step: &str, xs: &[Shared]) -> Result<Shared> {
    Ok(product_fold_batch(session, step, &[xs.to_vec()])?.remove(0))
}

/// Several left folds advanced in lockstep, one round per fold depth.
pub fn product_fold_batch(session: &mut Session, step: &str, lists: &[Vec<Shared>]) -> Result<Vec<Shared>> {
    if lists.iter().any(|l| l.is_empty()) {
        return Err(Error::EmptyInput("product fold"));
    }
    let mut acc: Vec<Shared> = lists.iter().map(|l| l[0].clone()).collect();
    let depth = lists.iter().map(Vec::len).max().unwrap_or(0);
    for j in 1..depth {
        let active: Vec<usize> = (0..lists.len()).filter(|&k| lists[k].len() > j).collect();
        let pairs: Vec<(&Shared, &Shared)> = active.iter().map(|&k| (&acc[k], &lists[k][j])).collect();
        let products = mul_batch(session, step, &pairs)?;
        for (k, p) in active.into_iter().zip(products) {
            acc[k] = p;
        }
    }
    Ok(acc)
}

/// `x^e` by left-to-right square-and-multiply: `bitlen(e) - 1` squarings
/// plus one multiply per set bit after the leading one.
pub fn pow_shares(session: &mut Session, step: &str, x: &Shared, e: u64) -> Result<Shared> {
    Ok(pow_batch(session, step, std::slice::from_ref(x), e)?.remove(0))
}

pub fn pow_batch(session: &mut Session, step: &str, xs: &[Shared], e: u64) -> Result<Vec<Shared>> {
    let n = session.n();
    let one = session.config().field.one();
    if e == 0 {
        return Ok(xs.iter().map(|_| Shared::constant(one, n)).collect());
    }
    let mut acc = xs.to_vec();
    let top = 63 - e.leading_zeros();
    for bit in (0..top).rev() {
        let pairs: Vec<(&Shared, &Shared)> = acc.iter().map(|a| (a, a)).collect();
        acc = mul_batch(session, step, &pairs)?;
        if (e >> bit) & 1 == 1 {
            let pairs: Vec<(&Shared, &Shared)> = acc.iter().zip(xs).collect();
            acc = mul_batch(session, step, &pairs)?;
        }
    }
    Ok(acc)
}

/// Number of invocations [`pow_shares`] spends on exponent `e`.
pub fn pow_cost(e: u64) -> u64 {
    if e == 0 {
        return 0;
    }
    (63 - e.leading_zeros() as u64) + e.count_ones() as u64 - 1
}

/// `a + g (b - a)` coordinatewise: `a` when `g = 0`, `b` when `g = 1`.
/// One invocation per coordinate.
pub fn select(session: &mut Session, step: &str, g: &Shared, a: &[Shared], b: &[Shared]) -> Result<Vec<Shared>> {
    select_many(session, step, g, &[(a, b)]).map(|mut v| v.remove(0))
}

/// Several selections under the same selector bit, in one round.
pub fn select_many(
    session: &mut Session,
    step: &str,
    g: &Shared,
    operands: &[(&[Shared], &[Shared])],
) -> Result<Vec<Vec<Shared>>> {
    let mut diffs = Vec::new();
    for (a, b) in operands {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch);
        }
        diffs.extend(a.iter().zip(b.iter()).map(|(x, y)| y.sub(x)));
    }
    let pairs: Vec<(&Shared, &Shared)> = diffs.iter().map(|d| (g, d)).collect();
    let mut products = mul_batch(session, step, &pairs)?.into_iter();
    Ok(operands
        .iter()
        .map(|(a, _)| a.iter().map(|x| x.add(&products.next().expect("one per coordinate"))).collect())
        .collect())
}

/// Uniform shared secret nobody knows: every party shares a random
/// contribution and the sharings are summed. Counted as one invocation.
pub fn joint_random_secret(session: &mut Session, step: &str) -> Result<Shared> {
    joint_random_inner(session, step, false)
}

fn joint_random_inner(session: &mut Session, step: &str, force_zero: bool) -> Result<Shared> {
    let field = session.config().field;
    let n = session.n();
    let mut contributions: Vec<FieldElement> = session.local(|party| field.sample_uniform(&mut party.rng));
    if let Some(fixed) = &session.hooks().contributions {
        if fixed.len() != n {
            return Err(Error::InvalidInput(format!(
                "hook supplies {} contributions for {n} parties",
                fixed.len()
            )));
        }
        contributions = fixed.iter().map(|&c| field.elem(c)).collect();
    }
    if force_zero {
        // last party cancels the others
        let others = contributions[..n - 1]
            .iter()
            .fold(field.zero(), |acc, &c| acc + c);
        contributions[n - 1] = -others;
    }
    let items: Vec<(usize, Vec<FieldElement>)> = contributions
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i + 1, vec![c]))
        .collect();
    let dealt = session.share_inputs(step, &items)?;
    let mut sum = dealt[0][0].clone();
    for d in &dealt[1..] {
        sum = sum.add(&d[0]);
    }
    session.count(step, 1);
    Ok(sum)
}

/// Joint random secret that is verified nonzero. The check computes the
/// shared zero indicator and opens only that bit; a zero draw is discarded
/// and regenerated. Verification work is recorded under `<step>/verify/`.
pub fn joint_random_nonzero(session: &mut Session, step: &str) -> Result<Shared> {
    let q = session.config().field.modulus();
    for _ in 0..MASK_ATTEMPTS {
        let forced = session.take_forced_zero_mask();
        let r = joint_random_inner(session, step, forced)?;
        let nonzero = session.scoped(format!("{step}/verify"), |s| -> Result<bool> {
            let z = pow_shares(s, "zero", &r, q - 1)?;
            Ok(!s.reveal_one("reveal", &z)?.is_zero())
        })?;
        if nonzero {
            return Ok(r);
        }
        session.note_mask_retry();
    }
    Err(Error::RetryExhausted(MASK_ATTEMPTS))
}
