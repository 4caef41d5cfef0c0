//! Event-driven simulation of the population, chronologically by birth time.
//!
//! Individuals are processed in order of birth (ties by Ulam–Harris label). When
//! an individual is processed its life is drawn and its children join the pending
//! set. Just before the first event later than a sample time `t`, the pending set
//! is exactly the coming generation `I_t`, and
//! `W_t = sum_{x in I_t} exp(-alpha tau_x) h(sigma_x) / h(sigma_0)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Life, TypeIndex, ValidatedModel};
use crate::parallel::{map_replicates, Execution};
use crate::rng::{replicate_rng, weighted_index, SimRng};
use crate::spectral::SpectralData;
use crate::spine::{sample_size_biased_life, SpineError};
use crate::stats::Neumaier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForwardError {
    #[error("caps must be positive")]
    ZeroCap,
    #[error("sample time {time} is beyond the horizon {horizon}")]
    SampleTimeBeyondHorizon { time: f64, horizon: f64 },
    #[error("sample times must be finite, nonnegative and sorted")]
    BadSampleTimes,
    #[error("the `alive` characteristic needs a lifespan law for every type")]
    AliveWithoutLifespan,
    #[error("type index {0} is out of range")]
    UnknownType(TypeIndex),
    #[error(transparent)]
    Spine(#[from] SpineError),
}

/// Random characteristic `chi(a)` evaluated at age `a >= 0`; all vanish for `a < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    Born,
    Alive,
    TypeCount(TypeIndex),
}

impl Characteristic {
    fn value(self, typ: TypeIndex, age: f64, death_age: Option<f64>) -> f64 {
        match self {
            Self::Born => 1.0,
            Self::Alive => match death_age {
                Some(d) if age < d => 1.0,
                _ => 0.0,
            },
            Self::TypeCount(r) => f64::from(u8::from(typ == r)),
        }
    }

    /// `born`, `alive` or `type_count:<label>`.
    pub fn parse(text: &str, model: &ValidatedModel) -> Option<Self> {
        match text {
            "born" => Some(Self::Born),
            "alive" => Some(Self::Alive),
            _ => {
                let label = text.strip_prefix("type_count:")?;
                model.types.index_of(label).ok().map(Self::TypeCount)
            }
        }
    }

    pub fn name(self, model: &ValidatedModel) -> String {
        match self {
            Self::Born => "born".into(),
            Self::Alive => "alive".into(),
            Self::TypeCount(r) => format!("type_count_{}", model.types.label(r)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootChoice {
    Fixed(TypeIndex),
    Pi,
    Nu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The ordinary population law.
    Ordinary,
    /// Spine lives size-biased, the distinguished child continuing the spine.
    SizeBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    /// Individuals processed (the root included).
    pub max_births: u64,
    /// Entries in the pending queue; children sharing mother, type and birth time form one entry.
    pub max_pending: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_births: 1_000_000, max_pending: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub root: RootChoice,
    pub horizon: f64,
    pub caps: Caps,
    pub sample_times: Vec<f64>,
    pub chis: Vec<Characteristic>,
    pub measure: Measure,
    /// Record every individual and pending-set snapshots; for small runs only.
    pub audit: bool,
}

impl SimConfig {
    pub fn new(root: RootChoice, horizon: f64, sample_times: Vec<f64>) -> Self {
        Self {
            root,
            horizon,
            caps: Caps::default(),
            sample_times,
            chis: vec![Characteristic::Born],
            measure: Measure::Ordinary,
            audit: false,
        }
    }

    pub fn validate(&self, model: &ValidatedModel) -> Result<(), ForwardError> {
        if self.caps.max_births == 0 || self.caps.max_pending == 0 {
            return Err(ForwardError::ZeroCap);
        }
        let ok = self.sample_times.iter().all(|t| t.is_finite() && *t >= 0.0)
            && self.sample_times.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(ForwardError::BadSampleTimes);
        }
        if let Some(&t) = self.sample_times.iter().find(|&&t| t > self.horizon) {
            return Err(ForwardError::SampleTimeBeyondHorizon { time: t, horizon: self.horizon });
        }
        if self.chis.contains(&Characteristic::Alive) && !model.has_lifespans() {
            return Err(ForwardError::AliveWithoutLifespan);
        }
        for &c in &self.chis {
            if let Characteristic::TypeCount(r) = c {
                if r >= model.n_types() {
                    return Err(ForwardError::UnknownType(r));
                }
            }
        }
        if let RootChoice::Fixed(s) = self.root {
            if s >= model.n_types() {
                return Err(ForwardError::UnknownType(s));
            }
        }
        Ok(())
    }
}

/// A processed individual, kept in audit mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Individual {
    pub id: Vec<u64>,
    pub typ: TypeIndex,
    pub birth_time: f64,
    pub mother: Option<Vec<u64>>,
    pub children: Vec<PendingBirth>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingBirth {
    pub id: Vec<u64>,
    pub typ: TypeIndex,
    pub scheduled_time: f64,
    /// `exp(-alpha scheduled_time) h(typ)`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audit {
    pub individuals: Vec<Individual>,
    /// Pending set recorded at each sample time.
    pub snapshots: Vec<(f64, Vec<PendingBirth>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub root_type: TypeIndex,
    /// Sample times actually reported (those before any truncation).
    pub sample_times: Vec<f64>,
    pub w: Vec<f64>,
    /// `z_chi[c][i]` for characteristic `c` at `sample_times[i]`.
    pub z_chi: Vec<Vec<f64>>,
    pub born_count: Vec<u64>,
    pub pending_count: Vec<u64>,
    pub extinct: bool,
    pub extinction_time: Option<f64>,
    pub truncated: bool,
    pub truncation_time: Option<f64>,
    /// Birth time of the first individual after the root.
    pub first_birth: Option<f64>,
    pub seed: u64,
    pub replicate: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<Audit>,
}

impl Trajectory {
    /// Index of sample time `t` if it was reported.
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        self.sample_times.iter().position(|&s| s == t)
    }
}

struct LabelNode {
    parent: Label,
    index: u64,
    depth: u32,
}

/// Ulam–Harris label; `None` is the root.
type Label = Option<Rc<LabelNode>>;

fn path(label: &Label) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cur = label;
    while let Some(node) = cur {
        out.push(node.index);
        cur = &node.parent;
    }
    out.reverse();
    out
}

fn depth(label: &Label) -> u32 {
    label.as_ref().map_or(0, |n| n.depth)
}

fn same(a: &Label, b: &Label) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => Rc::ptr_eq(x, y),
        (None, None) => true,
        _ => false,
    }
}

fn child_label(mother: &Label, index: u64) -> Label {
    Some(Rc::new(LabelNode { parent: mother.clone(), index, depth: depth(mother) + 1 }))
}

/// Lexicographic order of the labels `pa.ia` and `pb.ib`, without materializing paths.
fn cmp_child_labels(pa: &Label, ia: u64, pb: &Label, ib: u64) -> Ordering {
    let (da, db) = (depth(pa) + 1, depth(pb) + 1);
    let (mut a, mut ai, mut b, mut bi) = (pa, ia, pb, ib);
    for _ in db..da {
        let n = a.as_ref().expect("deeper label has a parent");
        ai = n.index;
        a = &n.parent;
    }
    for _ in da..db {
        let n = b.as_ref().expect("deeper label has a parent");
        bi = n.index;
        b = &n.parent;
    }
    loop {
        if same(a, b) {
            return if ai == bi { da.cmp(&db) } else { ai.cmp(&bi) };
        }
        let (na, nb) = (a.as_ref().expect("equal depths"), b.as_ref().expect("equal depths"));
        ai = na.index;
        bi = nb.index;
        a = &na.parent;
        b = &nb.parent;
    }
}

/// Children of one mother with the same type and birth time, labelled
/// `mother.first_index, ..., mother.(first_index + multiplicity - 1)`.
struct Pending {
    time: f64,
    typ: TypeIndex,
    mother: Label,
    first_index: u64,
    multiplicity: u64,
    spine: bool,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed so that the max-heap pops the earliest birth, then the smallest label
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| cmp_child_labels(&other.mother, other.first_index, &self.mother, self.first_index))
    }
}

struct Engine<'a> {
    model: &'a ValidatedModel,
    spectral: &'a SpectralData,
    config: &'a SimConfig,
    heap: BinaryHeap<Pending>,
    born: u64,
    next_sample: usize,
    z: Vec<Vec<f64>>,
    w: Vec<f64>,
    born_count: Vec<u64>,
    pending_count: Vec<u64>,
    first_birth: Option<f64>,
    last_birth: f64,
    truncation_time: Option<f64>,
    audit: Option<Audit>,
}

impl<'a> Engine<'a> {
    fn record_sample(&mut self, root_h: f64) {
        let t = self.config.sample_times[self.next_sample];
        let alpha = self.spectral.alpha;
        let mut acc = Neumaier::default();
        let mut pending = 0u64;
        for p in &self.heap {
            acc.add(p.multiplicity as f64 * (-alpha * (p.time - t)).exp() * self.spectral.h[p.typ]);
            pending += p.multiplicity;
        }
        self.w.push(acc.value() * (-alpha * t).exp() / root_h);
        self.born_count.push(self.born);
        self.pending_count.push(pending);
        if self.audit.is_some() {
            let mut snapshot = Vec::new();
            for p in &self.heap {
                for j in 0..p.multiplicity {
                    snapshot.push(self.pending_birth(&p.mother, p.first_index + j, p.typ, p.time));
                }
            }
            snapshot.sort_by(|a, b| a.id.cmp(&b.id));
            self.audit.as_mut().expect("audit on").snapshots.push((t, snapshot));
        }
        self.next_sample += 1;
    }

    fn pending_birth(&self, mother: &Label, index: u64, typ: TypeIndex, time: f64) -> PendingBirth {
        let mut id = path(mother);
        id.push(index);
        PendingBirth {
            id,
            typ,
            scheduled_time: time,
            weight: (-self.spectral.alpha * time).exp() * self.spectral.h[typ],
        }
    }

    fn draw_life(&self, typ: TypeIndex, on_spine: bool, rng: &mut SimRng) -> Result<(Life, Option<usize>), ForwardError> {
        if on_spine && self.config.measure == Measure::SizeBiased {
            let sb = sample_size_biased_life(self.model, self.spectral, typ, rng)?;
            Ok((sb.life, Some(sb.distinguished)))
        } else {
            Ok((self.model.sample_life(typ, rng), None))
        }
    }

    /// Returns `false` once a cap is hit.
    fn process(
        &mut self,
        label: Label,
        mother: &Label,
        typ: TypeIndex,
        time: f64,
        on_spine: bool,
        rng: &mut SimRng,
    ) -> Result<bool, ForwardError> {
        if self.born >= self.config.caps.max_births {
            self.truncation_time = Some(time);
            return Ok(false);
        }
        self.born += 1;
        self.last_birth = time;
        if label.is_some() && self.first_birth.is_none() {
            self.first_birth = Some(time);
        }
        let (life, distinguished) = self.draw_life(typ, on_spine, rng)?;
        for (c, chi) in self.config.chis.iter().enumerate() {
            for i in self.next_sample..self.config.sample_times.len() {
                let age = self.config.sample_times[i] - time;
                self.z[c][i] += chi.value(typ, age, life.death_age);
            }
        }
        let mut index = 0u64;
        let mut children = Vec::new();
        for (i, p) in life.points.iter().enumerate() {
            let entry = Pending {
                time: time + p.age,
                typ: p.child,
                mother: label.clone(),
                first_index: index,
                multiplicity: p.multiplicity,
                spine: distinguished == Some(i),
            };
            if self.audit.is_some() {
                for j in 0..p.multiplicity {
                    children.push(self.pending_birth(&label, index + j, p.child, entry.time));
                }
            }
            index += p.multiplicity;
            self.heap.push(entry);
        }
        if let Some(audit) = &mut self.audit {
            audit.individuals.push(Individual {
                id: path(&label),
                typ,
                birth_time: time,
                mother: label.as_ref().map(|_| path(mother)),
                children,
            });
        }
        if self.heap.len() > self.config.caps.max_pending {
            self.truncation_time = Some(time);
            return Ok(false);
        }
        Ok(true)
    }
}

/// One realization of the population up to `config.horizon`.
pub fn simulate(
    model: &ValidatedModel,
    spectral: &SpectralData,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<Trajectory, ForwardError> {
    config.validate(model)?;
    let root_type = match config.root {
        RootChoice::Fixed(s) => s,
        RootChoice::Pi => weighted_index(&spectral.pi, rng),
        RootChoice::Nu => weighted_index(&spectral.nu, rng),
    };
    let root_h = spectral.h[root_type];
    let n_samples = config.sample_times.len();
    let mut e = Engine {
        model,
        spectral,
        config,
        heap: BinaryHeap::new(),
        born: 0,
        next_sample: 0,
        z: vec![vec![0.0; n_samples]; config.chis.len()],
        w: Vec::with_capacity(n_samples),
        born_count: Vec::with_capacity(n_samples),
        pending_count: Vec::with_capacity(n_samples),
        first_birth: None,
        last_birth: 0.0,
        truncation_time: None,
        audit: config.audit.then(|| Audit { individuals: Vec::new(), snapshots: Vec::new() }),
    };
    let mut alive = e.process(None, &None, root_type, 0.0, true, rng)?;
    while alive {
        let next_time = e.heap.peek().map(|p| p.time);
        while e.next_sample < n_samples && next_time.is_none_or(|nt| nt > config.sample_times[e.next_sample]) {
            e.record_sample(root_h);
        }
        let Some(nt) = next_time else { break };
        if nt > config.horizon {
            break;
        }
        let entry = e.heap.pop().expect("peeked");
        for j in 0..entry.multiplicity {
            let label = child_label(&entry.mother, entry.first_index + j);
            if !e.process(label, &entry.mother, entry.typ, entry.time, entry.spine && j == 0, rng)? {
                alive = false;
                break;
            }
        }
    }
    let recorded = e.w.len();
    for z in &mut e.z {
        z.truncate(recorded);
    }
    let truncated = e.truncation_time.is_some();
    let extinct = !truncated && e.heap.is_empty();
    Ok(Trajectory {
        root_type,
        sample_times: config.sample_times[..recorded].to_vec(),
        w: e.w,
        z_chi: e.z,
        born_count: e.born_count,
        pending_count: e.pending_count,
        extinct,
        extinction_time: extinct.then_some(e.last_birth),
        truncated,
        truncation_time: e.truncation_time,
        first_birth: e.first_birth,
        seed: 0,
        replicate: 0,
        audit: e.audit,
    })
}

/// The ordinary population law `P_s` (or `P_pi` with a random root).
pub fn simulate_forward(
    model: &ValidatedModel,
    spectral: &SpectralData,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<Trajectory, ForwardError> {
    let config = SimConfig { measure: Measure::Ordinary, ..config.clone() };
    simulate(model, spectral, &config, rng)
}

/// Independent replicates; replicate `r` uses stream `r` of `seed`.
pub fn simulate_replicates(
    model: &ValidatedModel,
    spectral: &SpectralData,
    config: &SimConfig,
    replicates: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Trajectory>, ForwardError> {
    config.validate(model)?;
    map_replicates(replicates, exec, |r| {
        let mut tr = simulate(model, spectral, config, &mut replicate_rng(seed, r))?;
        tr.seed = seed;
        tr.replicate = r;
        Ok(tr)
    })
    .into_iter()
    .collect()
}

/// `E_pi[chi_hat(alpha)]` with `chi_hat(alpha) = alpha int_0^inf exp(-alpha a) chi(a) da`.
pub fn chi_hat_mean(chi: Characteristic, model: &ValidatedModel, spectral: &SpectralData) -> Result<f64, ForwardError> {
    match chi {
        Characteristic::Born => Ok(1.0),
        Characteristic::Alive => {
            let mut acc = 0.0;
            for (s, law) in model.lifespans.iter().enumerate() {
                let law = law.ok_or(ForwardError::AliveWithoutLifespan)?;
                acc += spectral.pi[s] * (1.0 - law.laplace(spectral.alpha));
            }
            Ok(acc)
        }
        Characteristic::TypeCount(r) => spectral.pi.get(r).copied().ok_or(ForwardError::UnknownType(r)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NermanConstant {
    pub value: f64,
    /// Set on lattice models, where `exp(-alpha t) Z_t` need not converge.
    pub lattice_warning: bool,
}

/// Limit constant `E_pi[chi_hat(alpha)] / (alpha beta) h(root)` of `exp(-alpha t) Z_t^chi / W`.
pub fn nerman_constant(
    chi: Characteristic,
    model: &ValidatedModel,
    spectral: &SpectralData,
    root: TypeIndex,
) -> Result<NermanConstant, ForwardError> {
    let h = *spectral.h.get(root).ok_or(ForwardError::UnknownType(root))?;
    let value = chi_hat_mean(chi, model, spectral)? / (spectral.alpha * spectral.beta) * h;
    Ok(NermanConstant { value, lattice_warning: model.lattice })
}
