//! Shamir sharing with threshold `T`: degree-`T` polynomials, so any `T`
//! shares are independent of the secret and any `T + 1` reconstruct it.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::encoding::{check_field_capacity, EncodingError, EncodingMode};
use crate::field::{lagrange_weights_at_zero, DensePolynomial, FieldConfig, FieldElement, FieldError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("need N >= 2T+1 parties for multiplication, got N = {n}, T = {t}")]
    TooFewParties { n: usize, t: usize },
    #[error("expected {expected} evaluation points, got {got}")]
    AlphaCount { expected: usize, got: usize },
    #[error("evaluation points must be nonzero")]
    ZeroAlpha,
    #[error("evaluation points must be distinct (duplicate {0})")]
    DuplicateAlpha(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("need at least {need} shares, got {got}")]
    InsufficientShares { need: usize, got: usize },
    #[error("party {0} appears more than once")]
    DuplicateParty(usize),
    #[error("party {0} is not in 1..=N")]
    UnknownParty(usize),
    #[error("share vectors have mismatched lengths")]
    LengthMismatch,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Session parameters. Parties are numbered `1..=n`; party `i` evaluates
/// at `alphas[i - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub n: usize,
    pub t: usize,
    pub field: FieldConfig,
    pub bits: u32,
    pub alphas: Vec<FieldElement>,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Config with the default evaluation points `alpha_i = i`.
    pub fn new(n: usize, t: usize, q: u64, bits: u32, seed: u64) -> Result<Self, ConfigError> {
        let field = FieldConfig::new(q)?;
        let alphas = (1..=n as u64).map(|i| field.elem(i)).collect();
        let cfg = Self {
            n,
            t,
            field,
            bits,
            alphas,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alphas(mut self, alphas: Vec<u64>) -> Result<Self, ConfigError> {
        self.alphas = alphas.into_iter().map(|a| self.field.elem(a)).collect();
        self.validate()?;
        Ok(self)
    }

    pub fn with_bits(mut self, bits: u32) -> Result<Self, ConfigError> {
        self.bits = bits;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 * self.t + 1 {
            return Err(ConfigError::TooFewParties { n: self.n, t: self.t });
        }
        if self.alphas.len() != self.n {
            return Err(ConfigError::AlphaCount {
                expected: self.n,
                got: self.alphas.len(),
            });
        }
        for (i, a) in self.alphas.iter().enumerate() {
            if a.modulus() != self.field.modulus() {
                return Err(FieldError::ModulusMismatch(a.modulus(), self.field.modulus()).into());
            }
            if a.is_zero() {
                return Err(ConfigError::ZeroAlpha);
            }
            if self.alphas[..i].contains(a) {
                return Err(ConfigError::DuplicateAlpha(a.value()));
            }
        }
        check_field_capacity(self.bits, &self.field, EncodingMode::Sentinel)?;
        Ok(())
    }

    pub fn alpha(&self, party: usize) -> FieldElement {
        self.alphas[party - 1]
    }

    /// Lagrange weights at zero over all `n` evaluation points.
    pub fn full_weights(&self) -> Vec<FieldElement> {
        lagrange_weights_at_zero(&self.alphas).expect("validated alphas")
    }
}

/// One party's point on a sharing polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Share {
    pub party: usize,
    pub value: FieldElement,
    /// Degree of the underlying polynomial (`T`, or `2T` after a local product).
    pub degree_hint: usize,
}

/// One party's shares of a length-`L` vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShareVector {
    pub party: usize,
    pub values: Vec<FieldElement>,
}

/// All `n` shares of one value, indexed by party (`shares[i]` belongs to
/// party `i + 1`). This is how the simulator carries a distributed value;
/// local operations touch each party's entry independently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shared {
    shares: Vec<FieldElement>,
    degree: usize,
}

impl Shared {
    pub fn from_values(shares: Vec<FieldElement>, degree: usize) -> Self {
        Self { shares, degree }
    }

    /// Public constant held identically by every party (degree 0).
    pub fn constant(value: FieldElement, n: usize) -> Self {
        Self {
            shares: vec![value; n],
            degree: 0,
        }
    }

    pub fn values(&self) -> &[FieldElement] {
        &self.shares
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn share(&self, party: usize) -> Share {
        Share {
            party,
            value: self.shares[party - 1],
            degree_hint: self.degree,
        }
    }

    pub fn to_shares(&self) -> Vec<Share> {
        (1..=self.shares.len()).map(|p| self.share(p)).collect()
    }

    /// `self + other`, share by share.
    pub fn add(&self, other: &Shared) -> Shared {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Shared) -> Shared {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: FieldElement) -> Shared {
        Shared {
            shares: self.shares.iter().map(|&s| s * k).collect(),
            degree: self.degree,
        }
    }

    pub fn add_constant(&self, c: FieldElement) -> Shared {
        Shared {
            shares: self.shares.iter().map(|&s| s + c).collect(),
            degree: self.degree,
        }
    }

    fn zip_with(&self, other: &Shared, f: impl Fn(FieldElement, FieldElement) -> FieldElement) -> Shared {
        assert_eq!(self.shares.len(), other.shares.len(), "party count mismatch");
        Shared {
            shares: self
                .shares
                .iter()
                .zip(&other.shares)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            degree: self.degree.max(other.degree),
        }
    }
}

/// Coordinate-major sharing of a vector: `coords[j]` shares entry `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedVector {
    coords: Vec<Shared>,
}

impl SharedVector {
    pub fn new(coords: Vec<Shared>) -> Self {
        Self { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Shared] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Shared> {
        self.coords
    }

    pub fn last(&self) -> &Shared {
        self.coords.last().expect("non-empty vector")
    }

    /// Party `party`'s view of the vector.
    pub fn party_view(&self, party: usize) -> ShareVector {
        ShareVector {
            party,
            values: self.coords.iter().map(|c| c.values()[party - 1]).collect(),
        }
    }

    pub fn sub(&self, other: &SharedVector) -> SharedVector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        SharedVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.sub(b))
                .collect(),
        )
    }
}

/// Degree-`T` sharing polynomial evaluated at every party's point.
pub fn share_secret<R: Rng + ?Sized>(s: FieldElement, cfg: &ProtocolConfig, rng: &mut R) -> Vec<Share> {
    share_shared(s, cfg, rng).to_shares()
}

pub(crate) fn share_shared<R: Rng + ?Sized>(s: FieldElement, cfg: &ProtocolConfig, rng: &mut R) -> Shared {
    let poly = DensePolynomial::random_with_constant(s, cfg.t, rng);
    Shared {
        shares: cfg
            .alphas
            .iter()
            .map(|&a| poly.eval(a).expect("same field"))
            .collect(),
        degree: cfg.t,
    }
}

/// Componentwise sharing with independent polynomials per coordinate.
pub fn share_vector<R: Rng + ?Sized>(v: &[FieldElement], cfg: &ProtocolConfig, rng: &mut R) -> Vec<ShareVector> {
    let coords: Vec<Shared> = v.iter().map(|&x| share_shared(x, cfg, rng)).collect();
    let sv = SharedVector::new(coords);
    (1..=cfg.n).map(|p| sv.party_view(p)).collect()
}

/// Interpolates at zero. Needs `degree + 1` distinct parties, where the
/// degree is the largest `degree_hint` among the shares.
pub fn reconstruct(shares: &[Share], cfg: &ProtocolConfig) -> Result<FieldElement, SharingError> {
    let degree = shares.iter().map(|s| s.degree_hint).max().unwrap_or(cfg.t);
    if shares.len() < degree + 1 {
        return Err(SharingError::InsufficientShares {
            need: degree + 1,
            got: shares.len(),
        });
    }
    let mut xs = Vec::with_capacity(shares.len());
    for (i, s) in shares.iter().enumerate() {
        if s.party == 0 || s.party > cfg.n {
            return Err(SharingError::UnknownParty(s.party));
        }
        if shares[..i].iter().any(|o| o.party == s.party) {
            return Err(SharingError::DuplicateParty(s.party));
        }
        xs.push(cfg.alpha(s.party));
    }
    let weights = lagrange_weights_at_zero(&xs)?;
    let mut acc = cfg.field.zero();
    for (w, s) in weights.iter().zip(shares) {
        acc = acc + *w * s.value;
    }
    Ok(acc)
}

/// Reconstructs every coordinate of per-party share vectors.
pub fn reconstruct_vector(parts: &[ShareVector], cfg: &ProtocolConfig) -> Result<Vec<FieldElement>, SharingError> {
    let len = parts.first().map(|p| p.values.len()).unwrap_or(0);
    if parts.iter().any(|p| p.values.len() != len) {
        return Err(SharingError::LengthMismatch);
    }
    (0..len)
        .map(|j| {
            let shares: Vec<Share> = parts
                .iter()
                .map(|p| Share {
                    party: p.party,
                    value: p.values[j],
                    degree_hint: cfg.t,
                })
                .collect();
            reconstruct(&shares, cfg)
        })
        .collect()
}
