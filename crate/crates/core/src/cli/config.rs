//! Scenario files: JSON with every field either given or defaulted.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::balayage::SweepMode;
use crate::error::{Error, Result};
use crate::geometry;
use crate::kernels::{dist2, KernelSpec, NodeSet};
use crate::measures::{DiscreteMeasure, ExhaustionStrategy, RegionMask};
use crate::solvers::{SolverOptions, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelConfig,
    pub geometry: GeometryConfig,
    pub region: RegionConfig,
    pub source: SourceConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub n: usize,
    pub alpha: f64,
    #[serde(default)]
    pub epsilon: Epsilon,
}

/// Kernel regularization: a number, or `"auto"` for half the minimum spacing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    #[default]
    #[serde(with = "auto_literal")]
    Auto,
    Value(f64),
}

mod auto_literal {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let v = String::deserialize(d)?;
        if v == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"auto\" or a number"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Grid {
        min: Vec<f64>,
        max: Vec<f64>,
        counts: Vec<usize>,
    },
    BallShell {
        center: [f64; 3],
        radius: f64,
        count: usize,
    },
    PointList {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    RandomCloud {
        count: usize,
        min: Vec<f64>,
        max: Vec<f64>,
        /// Defaults to the scenario seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Region predicates. Ball membership allows a relative slack of `1e-9` on the
/// radius so that shell nodes count as inside a ball of the shell radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
    Indices { indices: Vec<usize> },
    /// Every geometry node; appended source nodes are left out.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Point masses at existing nodes (`index`) or at points, which are
    /// appended to the node set unless they coincide with a node.
    PointMasses { masses: Vec<PointMass> },
    /// Total mass spread over a region in proportion to the quadrature weights.
    UniformOnRegion { region: RegionConfig, total_mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMass {
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub index: Option<usize>,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub mode: SweepMode,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
            mode: SweepMode::GaussCapped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub exhaustion_stages: usize,
    pub exhaustion_strategy: ExhaustionStrategy,
    /// Inner region for the rest check; defaults to the nearer half of the
    /// region around its centroid.
    pub rest_region: Option<RegionConfig>,
    pub probes: usize,
    pub battery_size: usize,
    pub levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exhaustion_stages: 5,
            exhaustion_strategy: ExhaustionStrategy::Radial,
            rest_region: None,
            probes: 20,
            battery_size: 16,
            levels: 3,
        }
    }
}

/// Thresholds of every enforced check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub potential_gap: f64,
    pub mode_distance_rel: f64,
    pub symmetry_rel: f64,
    pub perturbed_factor: f64,
    pub rest_rel: f64,
    pub monotonicity: f64,
    pub mass_excess: f64,
    pub energy_rel: f64,
    pub mass_formula_rel: f64,
    pub equilibrium_settled: f64,
    pub probe_rel: f64,
    pub oracle_mass_rel: f64,
    pub oracle_capacity_rel: f64,
    pub oracle_density_l1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            potential_gap: 1e-7,
            mode_distance_rel: 1e-6,
            symmetry_rel: 1e-6,
            perturbed_factor: 100.0,
            rest_rel: 1e-6,
            monotonicity: 1e-7,
            mass_excess: 1e-9,
            energy_rel: 1e-8,
            mass_formula_rel: 1e-6,
            equilibrium_settled: 1e-7,
            probe_rel: 1e-9,
            oracle_mass_rel: 0.05,
            oracle_capacity_rel: 0.05,
            oracle_density_l1: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Epsilon::Value(e) = self.kernel.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Configuration("kernel.epsilon must be positive or \"auto\"".into()));
            }
        }
        KernelSpec::new(self.kernel.n, self.kernel.alpha, 1.0)
            .map_err(|e| Error::Configuration(e.to_string()))?;
        self.solver_options().validate()?;
        if self.run.exhaustion_stages == 0 || self.run.battery_size == 0 {
            return Err(Error::Configuration("exhaustion_stages and battery_size must be positive".into()));
        }
        if self.run.levels < 2 {
            return Err(Error::Configuration("run.levels must be at least 2".into()));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }
}

/// Nodes, kernel and measures built from a config.
pub struct Resolved {
    pub nodes: Arc<NodeSet>,
    pub spec: KernelSpec,
    pub omega: DiscreteMeasure,
    pub region: RegionMask,
}

fn geometry_points(cfg: &ScenarioConfig) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let set = match &cfg.geometry {
        GeometryConfig::Grid { min, max, counts } => geometry::grid(min, max, counts)?,
        GeometryConfig::BallShell {
            center,
            radius,
            count,
        } => geometry::sphere_shell(center, *radius, *count)?,
        GeometryConfig::PointList { points, weights } => {
            let w = weights.clone().unwrap_or_else(|| vec![1.0; points.len()]);
            NodeSet::new(points.clone(), w)?
        }
        GeometryConfig::RandomCloud {
            count,
            min,
            max,
            seed,
        } => geometry::random_cloud(*count, min, max, seed.unwrap_or(cfg.seed))?,
    };
    Ok((set.points().map(|p| p.to_vec()).collect(), set.quad_weights().to_vec()))
}

fn region_mask(nodes: &Arc<NodeSet>, region: &RegionConfig) -> Result<RegionMask> {
    let dim = nodes.dim();
    match region {
        RegionConfig::Ball { center, radius } => {
            if center.len() != dim || !(*radius > 0.0) {
                return Err(Error::Configuration("ball region needs a center of the node dimension and a positive radius".into()));
            }
            let r = radius * (1.0 + 1e-9);
            Ok(RegionMask::from_predicate(nodes.clone(), |x| dist2(x, center) <= r * r))
        }
        RegionConfig::Box { min, max } => {
            if min.len() != dim || max.len() != dim {
                return Err(Error::Configuration("box region bounds must match the node dimension".into()));
            }
            Ok(RegionMask::from_predicate(nodes.clone(), |x| {
                x.iter().zip(min.iter().zip(max)).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
            }))
        }
        RegionConfig::Indices { indices } => RegionMask::from_indices(nodes.clone(), indices),
        RegionConfig::All => {
            let member = match nodes.labels() {
                Some(l) => l.iter().map(|s| s != "source").collect(),
                None => vec![true; nodes.len()],
            };
            RegionMask::new(nodes.clone(), member)
        }
    }
}

impl Resolved {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let (mut points, mut quad) = geometry_points(cfg)?;
        let base = points.len();
        // point masses off the node set become extra nodes
        let mut source_nodes = Vec::new();
        if let SourceConfig::PointMasses { masses } = &cfg.source {
            if masses.is_empty() {
                return Err(Error::Configuration("source.masses is empty".into()));
            }
            for pm in masses {
                if !(pm.mass >= 0.0) || !pm.mass.is_finite() {
                    return Err(Error::Configuration("point masses must be non-negative".into()));
                }
                let idx = match (&pm.point, pm.index) {
                    (Some(p), None) => match points.iter().position(|q| q == p) {
                        Some(i) => i,
                        None => {
                            points.push(p.clone());
                            quad.push(1.0);
                            points.len() - 1
                        }
                    },
                    (None, Some(i)) if i < base => i,
                    (None, Some(i)) => {
                        return Err(Error::Configuration(format!("source index {i} out of range")))
                    }
                    _ => {
                        return Err(Error::Configuration(
                            "each point mass needs exactly one of point or index".into(),
                        ))
                    }
                };
                source_nodes.push((idx, pm.mass));
            }
        }
        let labels = (0..points.len())
            .map(|i| if i < base { "node".to_string() } else { "source".to_string() })
            .collect();
        let nodes = Arc::new(NodeSet::new(points, quad)?.with_labels(labels)?);
        let spec = KernelSpec::new(cfg.kernel.n, cfg.kernel.alpha, 1.0)?;
        let spec = match cfg.kernel.epsilon {
            Epsilon::Auto => spec.with_auto_regularization(&nodes)?,
            Epsilon::Value(e) => spec.with_regularization(e)?,
        };
        let region = region_mask(&nodes, &cfg.region)?;
        region
            .require_nonempty()
            .map_err(|_| Error::Configuration("region contains no nodes".into()))?;
        let mut w = vec![0.0; nodes.len()];
        match &cfg.source {
            SourceConfig::PointMasses { .. } => {
                for (i, m) in source_nodes {
                    w[i] += m;
                }
            }
            SourceConfig::UniformOnRegion { region, total_mass } => {
                if !(*total_mass >= 0.0) {
                    return Err(Error::Configuration("total_mass must be non-negative".into()));
                }
                let mask = region_mask(&nodes, region)?;
                let idx = mask.indices();
                let q: f64 = idx.iter().map(|&i| nodes.quad_weight(i)).sum();
                if idx.is_empty() {
                    return Err(Error::Configuration("source region contains no nodes".into()));
                }
                for i in idx {
                    w[i] = total_mass * nodes.quad_weight(i) / q;
                }
            }
        }
        let omega = DiscreteMeasure::new(nodes.clone(), w)?;
        Ok(Self {
            nodes,
            spec,
            omega,
            region,
        })
    }

    pub fn mask(&self, region: &RegionConfig) -> Result<RegionMask> {
        region_mask(&self.nodes, region)
    }
}
