//! Discrete measures, region masks, and exhaustion sequences over a shared node set.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{dist2, NodeSet};

/// Non-negative weights attached to the nodes of a shared [`NodeSet`].
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    nodes: Arc<NodeSet>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(nodes: Arc<NodeSet>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != nodes.len() {
            return Err(Error::Parameter(format!(
                "{} weights for {} nodes",
                weights.len(),
                nodes.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::Parameter(format!(
                "measure weights must be finite and non-negative, got {w}"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn zero(nodes: Arc<NodeSet>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            weights: vec![0.0; n],
        }
    }

    pub fn point_mass(nodes: Arc<NodeSet>, index: usize, mass: f64) -> Result<Self> {
        if index >= nodes.len() {
            return Err(Error::Parameter(format!("node index {index} out of range")));
        }
        let mut weights = vec![0.0; nodes.len()];
        weights[index] = mass;
        Self::new(nodes, weights)
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.nodes.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    /// `a * self + b * other` for non-negative coefficients.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same(other.nodes())?;
        Self::new(
            self.nodes.clone(),
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub(crate) fn check_same(&self, nodes: &Arc<NodeSet>) -> Result<()> {
        if same_nodes(&self.nodes, nodes) {
            Ok(())
        } else {
            Err(Error::NodeSetMismatch)
        }
    }
}

pub(crate) fn same_nodes(a: &Arc<NodeSet>, b: &Arc<NodeSet>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Signed measure stored as a pair of positive parts.
#[derive(Debug, Clone)]
pub struct SignedDiscreteMeasure {
    positive: DiscreteMeasure,
    negative: DiscreteMeasure,
}

impl SignedDiscreteMeasure {
    /// Pairs two positive measures; the supports need not be disjoint until
    /// [`hahn_jordan_normalize`] is applied.
    pub fn new(positive: DiscreteMeasure, negative: DiscreteMeasure) -> Result<Self> {
        positive.check_same(negative.nodes())?;
        Ok(Self { positive, negative })
    }

    /// Hahn-Jordan split of a signed weight vector.
    pub fn from_signed(nodes: Arc<NodeSet>, signed: &[f64]) -> Result<Self> {
        let pos = signed.iter().map(|&v| v.max(0.0)).collect();
        let neg = signed.iter().map(|&v| (-v).max(0.0)).collect();
        Ok(Self {
            positive: DiscreteMeasure::new(nodes.clone(), pos)?,
            negative: DiscreteMeasure::new(nodes, neg)?,
        })
    }

    pub fn positive(&self) -> &DiscreteMeasure {
        &self.positive
    }

    pub fn negative(&self) -> &DiscreteMeasure {
        &self.negative
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        self.positive.nodes()
    }

    pub fn signed_weights(&self) -> Vec<f64> {
        self.positive
            .weights
            .iter()
            .zip(&self.negative.weights)
            .map(|(p, n)| p - n)
            .collect()
    }

    pub fn has_disjoint_parts(&self) -> bool {
        self.positive
            .weights
            .iter()
            .zip(&self.negative.weights)
            .all(|(p, n)| *p == 0.0 || *n == 0.0)
    }
}

/// Boolean membership per node; the discrete form of a target set.
#[derive(Debug, Clone)]
pub struct RegionMask {
    nodes: Arc<NodeSet>,
    member: Vec<bool>,
}

impl RegionMask {
    pub fn new(nodes: Arc<NodeSet>, member: Vec<bool>) -> Result<Self> {
        if member.len() != nodes.len() {
            return Err(Error::Parameter(format!(
                "{} mask flags for {} nodes",
                member.len(),
                nodes.len()
            )));
        }
        Ok(Self { nodes, member })
    }

    pub fn full(nodes: Arc<NodeSet>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            member: vec![true; n],
        }
    }

    pub fn from_indices(nodes: Arc<NodeSet>, indices: &[usize]) -> Result<Self> {
        let mut member = vec![false; nodes.len()];
        for &i in indices {
            if i >= nodes.len() {
                return Err(Error::Parameter(format!("node index {i} out of range")));
            }
            member[i] = true;
        }
        Ok(Self { nodes, member })
    }

    pub fn from_predicate(nodes: Arc<NodeSet>, pred: impl Fn(&[f64]) -> bool) -> Self {
        let member = nodes.points().map(pred).collect();
        Self { nodes, member }
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.member
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&i| self.member[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.member.len() == other.member.len()
            && self.member.iter().zip(&other.member).all(|(a, b)| !*a || *b)
    }

    /// Errors unless the mask can serve as a balayage target.
    pub fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Parameter("target region has no nodes".into()))
        } else {
            Ok(())
        }
    }
}

/// Restriction of `mu` to the region.
pub fn trace(mu: &DiscreteMeasure, region: &RegionMask) -> Result<DiscreteMeasure> {
    mu.check_same(region.nodes())?;
    let weights = mu
        .weights
        .iter()
        .zip(&region.member)
        .map(|(w, m)| if *m { *w } else { 0.0 })
        .collect();
    DiscreteMeasure::new(mu.nodes.clone(), weights)
}

/// Sum of the weights.
pub fn total_mass(mu: &DiscreteMeasure) -> f64 {
    mu.weights.iter().sum()
}

/// Cancels the overlap of the two parts node by node.
pub fn hahn_jordan_normalize(xi: &SignedDiscreteMeasure) -> SignedDiscreteMeasure {
    let mut pos = Vec::with_capacity(xi.positive.len());
    let mut neg = Vec::with_capacity(xi.positive.len());
    for (&p, &n) in xi.positive.weights.iter().zip(&xi.negative.weights) {
        if p >= n {
            pos.push(p - n);
            neg.push(0.0);
        } else {
            pos.push(0.0);
            neg.push(n - p);
        }
    }
    SignedDiscreteMeasure {
        positive: DiscreteMeasure {
            nodes: xi.nodes().clone(),
            weights: pos,
        },
        negative: DiscreteMeasure {
            nodes: xi.nodes().clone(),
            weights: neg,
        },
    }
}

/// How the stages of an exhaustion are grown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExhaustionStrategy {
    /// Nodes enter in order of distance from the target's centroid.
    Radial,
    /// Nodes enter in a seeded random order.
    RandomNested { seed: u64 },
}

/// Nested increasing masks ending at the target.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    stages: Vec<RegionMask>,
}

impl Exhaustion {
    pub fn new(stages: Vec<RegionMask>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Parameter("an exhaustion needs at least one stage".into()));
        }
        for pair in stages.windows(2) {
            if !same_nodes(pair[0].nodes(), pair[1].nodes()) {
                return Err(Error::NodeSetMismatch);
            }
            if !pair[0].is_subset_of(&pair[1]) {
                return Err(Error::Parameter("exhaustion stages are not nested".into()));
            }
        }
        if stages[0].is_empty() {
            return Err(Error::Parameter("exhaustion stages must be non-empty".into()));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[RegionMask] {
        &self.stages
    }

    pub fn target(&self) -> &RegionMask {
        self.stages.last().expect("non-empty by construction")
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Splits the target into `n_stages` nested masks; duplicate stages are dropped
/// when there are fewer members than stages.
pub fn build_exhaustion(
    target: &RegionMask,
    n_stages: usize,
    strategy: ExhaustionStrategy,
) -> Result<Exhaustion> {
    if n_stages == 0 {
        return Err(Error::Parameter("n_stages must be at least 1".into()));
    }
    target.require_nonempty()?;
    let nodes = target.nodes();
    let mut order = target.indices();
    match strategy {
        ExhaustionStrategy::Radial => {
            let dim = nodes.dim();
            let mut centroid = vec![0.0; dim];
            for &i in &order {
                for (c, x) in centroid.iter_mut().zip(nodes.point(i)) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= order.len() as f64;
            }
            let d: Vec<f64> = (0..nodes.len())
                .map(|i| dist2(nodes.point(i), &centroid))
                .collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        }
        ExhaustionStrategy::RandomNested { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
        }
    }
    let m = order.len();
    let mut stages: Vec<RegionMask> = Vec::with_capacity(n_stages);
    let mut last = 0;
    for k in 1..=n_stages {
        let size = (k * m).div_ceil(n_stages);
        if size == last {
            continue;
        }
        last = size;
        stages.push(RegionMask::from_indices(nodes.clone(), &order[..size])?);
    }
    Exhaustion::new(stages)
}
