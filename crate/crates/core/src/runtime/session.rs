use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::transcript::{ConfigRecord, RevealEvent, Transcript};
use super::{InMemoryTransport, InvocationCounter, Message, Transport, TransportKind};
use crate::field::{DensePolynomial, FieldElement};
use crate::par::{self, Execution};
use crate::protocols::{self, Outcome, ProtocolSpec};
use crate::sharing::{ProtocolConfig, Shared};
use crate::{Error, Result};

/// Knobs for exercising rare branches deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestHooks {
    /// Force every contribution to zero for the first `k` random-secret
    /// generations that are checked for being nonzero.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub force_zero_masks: u32,
    /// Replace the parties' random contributions (one per party) in every
    /// joint random secret.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contributions: Option<Vec<u64>>,
}

fn is_zero(x: &u32) -> bool {
    *x == 0
}

impl TestHooks {
    pub fn is_empty(&self) -> bool {
        *self == TestHooks::default()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub hooks: TestHooks,
    /// How party-local work inside a round is scheduled.
    pub execution: Execution,
    /// Overrides the derived session id.
    pub session_id: Option<String>,
}

impl SessionOptions {
    pub fn sequential() -> Self {
        Self {
            execution: Execution::Sequential,
            ..Self::default()
        }
    }

    pub fn with_hooks(hooks: TestHooks) -> Self {
        Self {
            hooks,
            execution: Execution::Sequential,
            session_id: None,
        }
    }
}

/// Private state of one party: its identity and its randomness.
pub struct PartyState {
    pub id: usize,
    pub(crate) rng: ChaCha20Rng,
}

impl PartyState {
    fn new(seed: u64, id: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        Self { id, rng }
    }
}

/// Per-party inbox of one round: `(from, payload)` sorted by sender.
pub(crate) type Inbox = Vec<(usize, Vec<u64>)>;

pub struct Session {
    cfg: ProtocolConfig,
    id: Arc<str>,
    parties: Vec<PartyState>,
    transport: Box<dyn Transport>,
    round: u64,
    scope: Vec<String>,
    counter: InvocationCounter,
    messages: Vec<Message>,
    reveals: Vec<RevealEvent>,
    hooks: TestHooks,
    weights: Vec<FieldElement>,
    exec: Execution,
    mask_retries: u64,
    masks_checked: u32,
}

impl Session {
    pub fn new(cfg: ProtocolConfig, transport: Box<dyn Transport>, options: SessionOptions) -> Result<Self> {
        cfg.validate()?;
        if transport.parties() != cfg.n {
            return Err(Error::InvalidInput(format!(
                "transport wired for {} parties, config has {}",
                transport.parties(),
                cfg.n
            )));
        }
        let id: Arc<str> = options
            .session_id
            .unwrap_or_else(|| format!("s{:016x}", cfg.seed))
            .into();
        Ok(Self {
            parties: (1..=cfg.n).map(|i| PartyState::new(cfg.seed, i)).collect(),
            weights: cfg.full_weights(),
            cfg,
            id,
            transport,
            round: 0,
            scope: Vec::new(),
            counter: InvocationCounter::default(),
            messages: Vec::new(),
            reveals: Vec::new(),
            hooks: options.hooks,
            exec: options.execution,
            mask_retries: 0,
            masks_checked: 0,
        })
    }

    /// In-memory session, sequential scheduling.
    pub fn in_memory(cfg: ProtocolConfig) -> Result<Self> {
        let n = cfg.n;
        Self::new(cfg, Box::new(InMemoryTransport::new(n)), SessionOptions::sequential())
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn n(&self) -> usize {
        self.cfg.n
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn counter(&self) -> &InvocationCounter {
        &self.counter
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn reveals(&self) -> &[RevealEvent] {
        &self.reveals
    }

    pub fn mask_retries(&self) -> u64 {
        self.mask_retries
    }

    pub fn transport_kind(&self) -> TransportKind {
        self.transport.kind()
    }

    pub(crate) fn hooks(&self) -> &TestHooks {
        &self.hooks
    }

    /// Lagrange weights at zero over all `N` evaluation points.
    pub(crate) fn weights(&self) -> &[FieldElement] {
        &self.weights
    }

    pub(crate) fn note_mask_retry(&mut self) {
        self.mask_retries += 1;
    }

    /// Returns whether the next checked mask should be forced to zero.
    pub(crate) fn take_forced_zero_mask(&mut self) -> bool {
        let forced = self.masks_checked < self.hooks.force_zero_masks;
        self.masks_checked += 1;
        forced
    }

    /// Runs `f` with `label` pushed onto the step path.
    pub fn scoped<T>(&mut self, label: impl Into<String>, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push(label.into());
        let out = f(self);
        self.scope.pop();
        out
    }

    /// Full label for a step inside the current scope.
    pub fn step_path(&self, step: &str) -> String {
        if self.scope.is_empty() {
            step.to_owned()
        } else {
            format!("{}/{}", self.scope.join("/"), step)
        }
    }

    pub(crate) fn count(&mut self, step: &str, k: u64) {
        let path = self.step_path(step);
        self.counter.record(&path, k);
    }

    /// Party-local computation with access to each party's private state.
    pub(crate) fn local<T, F>(&mut self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut PartyState) -> T + Sync + Send,
    {
        par::map_mut(self.exec, &mut self.parties, |_, p| f(p))
    }

    /// One synchronous round. `outgoing[p - 1]` holds party `p`'s sends as
    /// `(to, payload)`; returns every party's inbox.
    pub(crate) fn exchange(&mut self, step: &str, outgoing: Vec<Vec<(usize, Vec<u64>)>>) -> Result<Vec<Inbox>> {
        let step: Arc<str> = self.step_path(step).into();
        let round = self.round;
        let mut batch = Vec::new();
        for (i, sends) in outgoing.into_iter().enumerate() {
            for (to, payload) in sends {
                batch.push(Message {
                    session_id: self.id.clone(),
                    round,
                    step: step.clone(),
                    from: i + 1,
                    to,
                    payload,
                });
            }
        }
        for m in &batch {
            super::check_route(self.cfg.n, m)?;
        }
        self.messages.extend(batch.iter().cloned());
        let inboxes = self.transport.deliver(round, batch)?;
        self.round += 1;
        Ok(inboxes
            .into_iter()
            .map(|inbox| inbox.into_iter().map(|m| (m.from, m.payload)).collect())
            .collect())
    }

    /// Owners share field elements with fresh degree-`T` polynomials; one
    /// round for all owners. Returns one [`Shared`] per element, in the
    /// order given.
    pub fn share_inputs(&mut self, step: &str, items: &[(usize, Vec<FieldElement>)]) -> Result<Vec<Vec<Shared>>> {
        let n = self.cfg.n;
        let t = self.cfg.t;
        for (owner, _) in items {
            if *owner == 0 || *owner > n {
                return Err(Error::InvalidInput(format!("owner {owner} is not a party")));
            }
        }
        let alphas = self.cfg.alphas.clone();
        // evals[p][k] = party p's evaluations (one per recipient) for each element it owns
        let evals: Vec<Vec<Vec<FieldElement>>> = self.local(|party| {
            let mut out = Vec::new();
            for (owner, values) in items {
                if *owner != party.id {
                    continue;
                }
                for &v in values {
                    let poly = DensePolynomial::random_with_constant(v, t, &mut party.rng);
                    out.push(alphas.iter().map(|&a| poly.eval(a).expect("same field")).collect());
                }
            }
            out
        });
        let outgoing: Vec<Vec<(usize, Vec<u64>)>> = evals
            .iter()
            .enumerate()
            .map(|(i, per_value)| {
                if per_value.is_empty() {
                    return Vec::new();
                }
                (1..=n)
                    .filter(|&to| to != i + 1)
                    .map(|to| (to, per_value.iter().map(|e| e[to - 1].value()).collect()))
                    .collect()
            })
            .collect();
        let inboxes = self.exchange(step, outgoing)?;

        // share_of[p][owner] = flat list of p's shares of everything `owner` dealt
        let field = self.cfg.field;
        let mut cursor = vec![0usize; n];
        let mut result = Vec::with_capacity(items.len());
        for (owner, values) in items {
            let mut shared = Vec::with_capacity(values.len());
            for _ in values {
                let k = cursor[*owner - 1];
                let shares = (1..=n)
                    .map(|p| {
                        if p == *owner {
                            evals[*owner - 1][k][p - 1]
                        } else {
                            let (_, payload) = inboxes[p - 1]
                                .iter()
                                .find(|(from, _)| from == owner)
                                .expect("owner sent to every party");
                            field.elem(payload[k])
                        }
                    })
                    .collect();
                shared.push(Shared::from_values(shares, t));
                cursor[*owner - 1] += 1;
            }
            result.push(shared);
        }
        Ok(result)
    }

    /// Opens `xs` to `recipients` (every party when `None`). Each recipient
    /// interpolates from its own share plus the ones it received.
    pub fn reveal(&mut self, step: &str, xs: &[Shared], recipients: Option<&[usize]>) -> Result<Vec<FieldElement>> {
        let n = self.cfg.n;
        let all: Vec<usize> = (1..=n).collect();
        let recipients = recipients.unwrap_or(&all).to_vec();
        for x in xs {
            if x.degree() >= n {
                return Err(Error::DegreeTooHigh {
                    degree: x.degree(),
                    max: n - 1,
                });
            }
        }
        let outgoing: Vec<Vec<(usize, Vec<u64>)>> = (1..=n)
            .map(|p| {
                recipients
                    .iter()
                    .filter(|&&r| r != p)
                    .map(|&r| (r, xs.iter().map(|x| x.values()[p - 1].value()).collect()))
                    .collect()
            })
            .collect();
        let inboxes = self.exchange(step, outgoing)?;
        let field = self.cfg.field;
        let mut opened: Option<Vec<FieldElement>> = None;
        for &r in &recipients {
            let inbox = &inboxes[r - 1];
            let values: Vec<FieldElement> = (0..xs.len())
                .map(|k| {
                    let mut acc = field.zero();
                    for p in 1..=n {
                        let share = if p == r {
                            xs[k].values()[p - 1]
                        } else {
                            let (_, payload) = inbox.iter().find(|(from, _)| *from == p).expect("broadcast");
                            field.elem(payload[k])
                        };
                        acc = acc + self.weights[p - 1] * share;
                    }
                    acc
                })
                .collect();
            match &opened {
                None => opened = Some(values),
                Some(prev) if *prev != values => {
                    return Err(Error::Inconsistent(format!("reveal at {}", self.step_path(step))));
                }
                Some(_) => {}
            }
        }
        let values = opened.unwrap_or_default();
        self.reveals.push(RevealEvent {
            step: self.step_path(step),
            values: values.iter().map(|v| v.value()).collect(),
            recipients,
        });
        Ok(values)
    }

    pub fn reveal_one(&mut self, step: &str, x: &Shared) -> Result<FieldElement> {
        Ok(self.reveal(step, std::slice::from_ref(x), None)?[0])
    }

    /// Snapshot of everything recorded so far.
    pub fn transcript(&self, header: ConfigRecord, outputs: Vec<Outcome>) -> Transcript {
        Transcript {
            header,
            messages: self.messages.clone(),
            reveals: self.reveals.clone(),
            invocations: self.counter.clone(),
            rounds: self.round,
            mask_retries: self.mask_retries,
            outputs,
        }
    }
}

/// Outputs of a finished session.
#[derive(Debug, Clone)]
pub struct SessionResult {
    /// `outputs[p - 1]` is what party `p` learned.
    pub outputs: Vec<Outcome>,
    pub transcript: Transcript,
}

impl SessionResult {
    /// The output every recipient agrees on (party 1's, or the first
    /// party holding one).
    pub fn public_output(&self) -> &Outcome {
        self.outputs
            .iter()
            .find(|o| !matches!(o, Outcome::Nothing))
            .unwrap_or(&self.outputs[0])
    }
}

/// Runs `spec` to completion. Deterministic in `cfg.seed` for a given
/// transport ordering; the in-memory transport is fully deterministic.
pub fn run_session(
    spec: &ProtocolSpec,
    cfg: &ProtocolConfig,
    transport: Box<dyn Transport>,
    options: SessionOptions,
) -> Result<SessionResult> {
    let hooks = options.hooks.clone();
    let mut session = Session::new(cfg.clone(), transport, options)?;
    let outputs = protocols::execute(&mut session, spec)?;
    let header = ConfigRecord::new(cfg, spec.clone(), session.id().to_owned(), hooks);
    let transcript = session.transcript(header, outputs.clone());
    Ok(SessionResult { outputs, transcript })
}

/// [`run_session`] over the in-memory transport.
pub fn run_in_memory(spec: &ProtocolSpec, cfg: &ProtocolConfig, options: SessionOptions) -> Result<SessionResult> {
    run_session(spec, cfg, Box::new(InMemoryTransport::new(cfg.n)), options)
}
