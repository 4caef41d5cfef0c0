//! Finite-type reproduction laws built from independent parametric channels.
//!
//! A channel `parent -> child` draws a count `N` and then `N` birth ages
//! (i.i.d., or one shared age when `shared_age` is set). A type's life is the
//! union of its outgoing channels, sorted by age.

mod age;
mod count;
mod grid;
pub mod heavy;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use age::AgeDistribution;
pub use count::{CountDistribution, CountLaw, HeavyTailLaw};
pub use grid::{discretize_interval_model, IntervalKernel};

/// Index of a type in its [`TypeSpace`].
pub type TypeIndex = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("type space is empty")]
    EmptyTypeSpace,
    #[error("duplicate type label `{0}`")]
    DuplicateType(String),
    #[error("unknown type label `{0}`")]
    UnknownType(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("pmf sums to {sum}, not 1")]
    PmfNotNormalized { sum: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("type `{0}` has no outgoing channel and is not marked absorbing")]
    NoOutgoingChannels(String),
    #[error("count law has zero mean; its size-biased law is undefined")]
    ZeroMean,
    #[error("life would hold {points} point groups, limit is {limit}")]
    LifeTooLarge { points: u64, limit: usize },
    #[error("kernel row {row} is not integrable (non-finite or negative values)")]
    NonIntegrableKernel { row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub parent: String,
    pub child: String,
    #[serde(default)]
    pub shared_age: bool,
    pub count: CountDistribution,
    pub age: AgeDistribution,
}

/// Model file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub types: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absorbing: Vec<String>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lifespan: BTreeMap<String, AgeDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpace {
    labels: Vec<String>,
    index: HashMap<String, TypeIndex>,
}

impl TypeSpace {
    pub fn new(labels: &[String]) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::EmptyTypeSpace);
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(ModelError::DuplicateType(l.clone()));
            }
        }
        Ok(Self { labels: labels.to_vec(), index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: TypeIndex) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<TypeIndex, ModelError> {
        self.index.get(label).copied().ok_or_else(|| ModelError::UnknownType(label.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub parent: TypeIndex,
    pub child: TypeIndex,
    pub count: CountLaw,
    pub age: AgeDistribution,
    pub shared_age: bool,
    pub mean: f64,
}

impl Channel {
    /// All points of the channel share one age, so a life stores them as one group.
    pub fn grouped(&self) -> bool {
        self.shared_age || self.age.is_deterministic()
    }
}

/// A model that passed validation, with normalized pmfs and cached channel means.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    pub spec: ModelSpec,
    pub types: TypeSpace,
    pub channels: Vec<Channel>,
    outgoing: Vec<Vec<usize>>,
    pub lifespans: Vec<Option<AgeDistribution>>,
    pub absorbing: Vec<bool>,
    pub lattice: bool,
}

/// `n` children of one type born at the same maternal age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifePoint {
    pub age: f64,
    pub child: TypeIndex,
    pub multiplicity: u64,
}

/// One realized reproduction process; points sorted by age, run-length encoded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Life {
    pub points: Vec<LifePoint>,
    pub death_age: Option<f64>,
}

impl Life {
    pub fn total_children(&self) -> u64 {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_i exp(-alpha age_i) h(child_i)`.
    pub fn xi_bar(&self, alpha: f64, h: &[f64]) -> f64 {
        xi_bar(&self.points, alpha, h)
    }

    pub(crate) fn sort(&mut self) {
        self.points.sort_by(|a, b| a.age.total_cmp(&b.age));
    }
}

/// Discounted, `h`-weighted offspring mass of a point list.
pub fn xi_bar(points: &[LifePoint], alpha: f64, h: &[f64]) -> f64 {
    points.iter().map(|p| p.multiplicity as f64 * (-alpha * p.age).exp() * h[p.child]).sum()
}

pub fn validate_model(spec: &ModelSpec) -> Result<ValidatedModel, ModelError> {
    ValidatedModel::new(spec.clone())
}

impl ValidatedModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        let types = TypeSpace::new(&spec.types)?;
        let n = types.len();
        let mut channels = Vec::with_capacity(spec.channels.len());
        let mut outgoing = vec![Vec::new(); n];
        for c in &spec.channels {
            let parent = types.index_of(&c.parent)?;
            let child = types.index_of(&c.child)?;
            let count = c.count.validate()?;
            c.age.validate()?;
            let mean = count.mean();
            outgoing[parent].push(channels.len());
            channels.push(Channel { parent, child, count, age: c.age, shared_age: c.shared_age, mean });
        }
        let mut absorbing = vec![false; n];
        for l in &spec.absorbing {
            absorbing[types.index_of(l)?] = true;
        }
        for (s, out) in outgoing.iter().enumerate() {
            if out.is_empty() && !absorbing[s] {
                return Err(ModelError::NoOutgoingChannels(types.label(s).to_string()));
            }
        }
        let mut lifespans = vec![None; n];
        for (l, law) in &spec.lifespan {
            law.validate()?;
            lifespans[types.index_of(l)?] = Some(*law);
        }
        let lattice = is_lattice(&channels);
        Ok(Self { spec, types, channels, outgoing, lifespans, absorbing, lattice })
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Channel indices with parent `s`, in declaration order.
    pub fn outgoing(&self, s: TypeIndex) -> &[usize] {
        &self.outgoing[s]
    }

    pub fn has_lifespans(&self) -> bool {
        self.lifespans.iter().all(Option::is_some)
    }

    /// Appends `n` ordinary points of channel `c`; errors if more than `limit` groups would result.
    pub(crate) fn push_channel_points<R: Rng + ?Sized>(
        &self,
        c: usize,
        n: u64,
        out: &mut Vec<LifePoint>,
        limit: usize,
        rng: &mut R,
    ) -> Result<(), ModelError> {
        if n == 0 {
            return Ok(());
        }
        let ch = &self.channels[c];
        if ch.grouped() {
            if out.len() + 1 > limit {
                return Err(ModelError::LifeTooLarge { points: out.len() as u64 + 1, limit });
            }
            out.push(LifePoint { age: ch.age.sample(rng), child: ch.child, multiplicity: n });
        } else {
            if out.len() as u64 + n > limit as u64 {
                return Err(ModelError::LifeTooLarge { points: out.len() as u64 + n, limit });
            }
            for _ in 0..n {
                out.push(LifePoint { age: ch.age.sample(rng), child: ch.child, multiplicity: 1 });
            }
        }
        Ok(())
    }

    pub(crate) fn sample_death<R: Rng + ?Sized>(&self, s: TypeIndex, rng: &mut R) -> Option<f64> {
        self.lifespans[s].map(|law| law.sample(rng))
    }

    /// Draws a life from `P_s`.
    pub fn sample_life<R: Rng + ?Sized>(&self, s: TypeIndex, rng: &mut R) -> Life {
        self.sample_life_limited(s, usize::MAX, rng).expect("unbounded life sampling cannot fail")
    }

    /// Like [`Self::sample_life`] but refuses lives with more than `limit` point groups.
    pub fn sample_life_limited<R: Rng + ?Sized>(
        &self,
        s: TypeIndex,
        limit: usize,
        rng: &mut R,
    ) -> Result<Life, ModelError> {
        let mut points = Vec::new();
        for &c in &self.outgoing[s] {
            let n = self.channels[c].count.sample(rng);
            self.push_channel_points(c, n, &mut points, limit, rng)?;
        }
        let mut life = Life { points, death_age: self.sample_death(s, rng) };
        life.sort();
        Ok(life)
    }
}

/// All reproduction ages deterministic and pairwise commensurable.
fn is_lattice(channels: &[Channel]) -> bool {
    let mut values = Vec::new();
    for c in channels {
        match c.age {
            AgeDistribution::Deterministic { value } => values.push(value),
            _ => return false,
        }
    }
    let Some(&first) = values.first() else { return false };
    values.iter().all(|&v| {
        let r = v / first;
        (1..=1000u32).any(|q| {
            let x = r * q as f64;
            (x - x.round()).abs() < 1e-9 * x.max(1.0)
        })
    })
}
