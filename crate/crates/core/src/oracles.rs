//! Closed-form Newtonian ball formulas and refinement studies.
//!
//! Nothing in here is used by the solvers; these are the reference values the
//! tests and the `oracle-compare` pipeline check against.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::balayage::{equilibrium_measure, inner_balayage, BalayageResult, SweepMode};
use crate::energy::potential;
use crate::error::{Error, Result};
use crate::geometry::sphere_shell_points;
use crate::kernels::{assemble_matrix, KernelMatrix, KernelSpec, NodeSet};
use crate::measures::{DiscreteMeasure, RegionMask};
use crate::solvers::SolverOptions;

/// Largest node count a refinement level may use.
pub const REFINEMENT_NODE_CAP: usize = 5000;

/// Tolerance of the density self-check against the swept mass.
pub const DENSITY_SELF_CHECK_TOL: f64 = 1e-6;

fn norm3(a: &[f64; 3], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// A ball in `R^3` and a unit point mass outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallScenario {
    pub radius: f64,
    pub center: [f64; 3],
    pub source: [f64; 3],
    pub kernel: KernelSpec,
}

impl BallScenario {
    pub fn new(radius: f64, center: [f64; 3], source: [f64; 3], kernel: KernelSpec) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Parameter("ball radius must be positive".into()));
        }
        if center.iter().chain(&source).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("ball center and source must be finite".into()));
        }
        if norm3(&center, &source) <= radius {
            return Err(Error::Parameter("source must lie outside the closed ball".into()));
        }
        if kernel.dimension() != 3 {
            return Err(Error::Parameter("ball scenarios live in R^3".into()));
        }
        Ok(Self {
            radius,
            center,
            source,
            kernel,
        })
    }

    /// Newtonian kernel, unit ball at the origin, source on the x-axis.
    pub fn unit(source_distance: f64) -> Result<Self> {
        Self::new(
            1.0,
            [0.0; 3],
            [source_distance, 0.0, 0.0],
            KernelSpec::newtonian(1.0)?,
        )
    }

    pub fn source_distance(&self) -> f64 {
        norm3(&self.center, &self.source)
    }

    fn require_newtonian(&self) -> Result<()> {
        if self.kernel.is_newtonian() {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "closed forms exist only for the Newtonian kernel (n = 3, alpha = 2)".into(),
            ))
        }
    }
}

/// Equilibrium potential of the ball: 1 on the closed ball, `r / |x - c|` outside.
pub fn ball_equilibrium_potential(s: &BallScenario, x: &[f64]) -> Result<f64> {
    s.require_newtonian()?;
    if x.len() != 3 {
        return Err(Error::Parameter("evaluation point must be in R^3".into()));
    }
    let d = norm3(&s.center, x);
    Ok(if d <= s.radius { 1.0 } else { s.radius / d })
}

/// Mass of the swept unit point mass, `r / |y - c|`.
pub fn ball_swept_mass(s: &BallScenario) -> Result<f64> {
    s.require_newtonian()?;
    Ok(s.radius / s.source_distance())
}

/// Surface density of the swept point mass,
/// `(d^2 - r^2) / (4 pi r |x - y|^3)` with `d = |y - c|`.
///
/// Built only through [`SweptDensityOracle::new`], which integrates the density
/// over the sphere and refuses to hand out an oracle whose integral misses
/// [`ball_swept_mass`] by more than [`DENSITY_SELF_CHECK_TOL`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweptDensityOracle {
    scenario: BallScenario,
    integral: f64,
    self_check_error: f64,
}

impl SweptDensityOracle {
    pub fn new(s: &BallScenario) -> Result<Self> {
        s.require_newtonian()?;
        let (r, d) = (s.radius, s.source_distance());
        // integrate over the polar angle to the source axis, u = cos(theta)
        let f = |u: f64| {
            let dist2 = r * r + d * d - 2.0 * r * d * u;
            (d * d - r * r) / (4.0 * PI * r) * dist2.powf(-1.5) * 2.0 * PI * r * r
        };
        let integral = adaptive_simpson(&f, -1.0, 1.0, 1e-13, 50);
        let mass = ball_swept_mass(s)?;
        let self_check_error = (integral - mass).abs();
        if !(self_check_error <= DENSITY_SELF_CHECK_TOL) {
            return Err(Error::Solver(format!(
                "density oracle self-check failed: integral {integral} vs mass {mass}"
            )));
        }
        Ok(Self {
            scenario: *s,
            integral,
            self_check_error,
        })
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn self_check_error(&self) -> f64 {
        self.self_check_error
    }

    /// Density at a point of the sphere (relative distance tolerance `1e-9`).
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let s = &self.scenario;
        if x.len() != 3 {
            return Err(Error::Parameter("evaluation point must be in R^3".into()));
        }
        let rx = norm3(&s.center, x);
        if (rx - s.radius).abs() > 1e-9 * s.radius {
            return Err(Error::Parameter(format!(
                "point at distance {rx} from the center is not on the sphere of radius {}",
                s.radius
            )));
        }
        let d = s.source_distance();
        let dxy = norm3(&s.source, x);
        Ok((d * d - s.radius * s.radius) / (4.0 * PI * s.radius * dxy.powi(3)))
    }

    /// Relative L1 error of discrete weights against the density,
    /// `sum |w_i / q_i - sigma(x_i)| q_i / sum sigma(x_i) q_i` over `indices`.
    pub fn relative_l1_error(&self, nodes: &NodeSet, weights: &[f64], indices: &[usize]) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in indices {
            let q = nodes.quad_weight(i);
            let sigma = self.density(nodes.point(i))?;
            num += (weights[i] / q - sigma).abs() * q;
            den += sigma * q;
        }
        Ok(num / den)
    }
}

/// Builds the self-checked oracle and evaluates it at `x`.
pub fn ball_swept_density(s: &BallScenario, x: &[f64]) -> Result<f64> {
    SweptDensityOracle::new(s)?.density(x)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)
}

/// One level of a refinement study.
pub struct RefinementProblem {
    pub matrix: KernelMatrix,
    pub omega: DiscreteMeasure,
    pub region: RegionMask,
}

/// A family of discretizations indexed by refinement level.
pub trait RefinementScenario {
    /// Node count of `level`, checked against the cap before anything is built.
    fn node_count(&self, level: usize) -> usize;

    fn build(&self, level: usize) -> Result<RefinementProblem>;

    /// Closed-form swept mass, when one exists.
    fn exact_mass(&self) -> Option<f64> {
        None
    }

    /// Closed-form capacity of the region, when one exists.
    fn exact_capacity(&self) -> Option<f64> {
        None
    }

    /// Off-node points with their exact swept potential.
    fn potential_probes(&self) -> Vec<(Vec<f64>, f64)> {
        Vec::new()
    }

    fn density_oracle(&self) -> Option<SweptDensityOracle> {
        None
    }
}

/// Sphere shell of `base_nodes * 4^level` nodes plus the source as an extra
/// node, regularization half the minimum spacing.
#[derive(Debug, Clone, Copy)]
pub struct BallRefinement {
    pub scenario: BallScenario,
    pub base_nodes: usize,
}

impl BallRefinement {
    pub fn new(scenario: BallScenario, base_nodes: usize) -> Result<Self> {
        if base_nodes < 2 {
            return Err(Error::Parameter("ball refinement needs at least two base nodes".into()));
        }
        Ok(Self {
            scenario,
            base_nodes,
        })
    }
}

impl RefinementScenario for BallRefinement {
    fn node_count(&self, level: usize) -> usize {
        self.base_nodes
            .saturating_mul(4usize.saturating_pow(level as u32))
            .saturating_add(1)
    }

    fn build(&self, level: usize) -> Result<RefinementProblem> {
        let s = &self.scenario;
        let count = self.node_count(level) - 1;
        let mut points = sphere_shell_points(&s.center, s.radius, count);
        points.push(s.source.to_vec());
        let mut q = vec![4.0 * PI * s.radius * s.radius / count as f64; count];
        q.push(1.0);
        let nodes = Arc::new(NodeSet::new(points, q)?);
        let spec = s.kernel.with_auto_regularization(&nodes)?;
        let matrix = assemble_matrix(&spec, nodes.clone())?;
        let omega = DiscreteMeasure::point_mass(nodes.clone(), count, 1.0)?;
        let region = RegionMask::from_indices(nodes, &(0..count).collect::<Vec<_>>())?;
        Ok(RefinementProblem {
            matrix,
            omega,
            region,
        })
    }

    fn exact_mass(&self) -> Option<f64> {
        ball_swept_mass(&self.scenario).ok()
    }

    fn exact_capacity(&self) -> Option<f64> {
        self.scenario.kernel.is_newtonian().then_some(self.scenario.radius)
    }

    /// Inside the ball the swept potential equals the source potential.
    fn potential_probes(&self) -> Vec<(Vec<f64>, f64)> {
        if !self.scenario.kernel.is_newtonian() {
            return Vec::new();
        }
        let s = &self.scenario;
        let mut pts = vec![s.center.to_vec()];
        for axis in 0..3 {
            for sign in [-0.5, 0.5] {
                let mut p = s.center.to_vec();
                p[axis] += sign * s.radius;
                pts.push(p);
            }
        }
        pts.into_iter()
            .map(|p| {
                let u = 1.0 / norm3(&s.source, &p);
                (p, u)
            })
            .collect()
    }

    fn density_oracle(&self) -> Option<SweptDensityOracle> {
        SweptDensityOracle::new(&self.scenario).ok()
    }
}

/// Fixed nodes, measure and region; only the regularization shrinks,
/// `epsilon = base_epsilon / 2^level`.
pub struct EpsilonRefinement {
    pub kernel: KernelSpec,
    pub nodes: Arc<NodeSet>,
    pub omega_weights: Vec<f64>,
    pub region: Vec<bool>,
    pub base_epsilon: f64,
}

impl RefinementScenario for EpsilonRefinement {
    fn node_count(&self, _level: usize) -> usize {
        self.nodes.len()
    }

    fn build(&self, level: usize) -> Result<RefinementProblem> {
        let eps = self.base_epsilon / 2f64.powi(level as i32);
        let spec = self.kernel.with_regularization(eps)?;
        let matrix = assemble_matrix(&spec, self.nodes.clone())?;
        Ok(RefinementProblem {
            matrix,
            omega: DiscreteMeasure::new(self.nodes.clone(), self.omega_weights.clone())?,
            region: RegionMask::new(self.nodes.clone(), self.region.clone())?,
        })
    }
}

/// The same problem at every level.
pub struct FixedScenario {
    pub matrix: KernelMatrix,
    pub omega: DiscreteMeasure,
    pub region: RegionMask,
}

impl RefinementScenario for FixedScenario {
    fn node_count(&self, _level: usize) -> usize {
        self.matrix.len()
    }

    fn build(&self, _level: usize) -> Result<RefinementProblem> {
        Ok(RefinementProblem {
            matrix: self.matrix.clone(),
            omega: self.omega.clone(),
            region: self.region.clone(),
        })
    }
}

/// Monitored quantities of one refinement level.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub level: usize,
    pub nodes: usize,
    pub min_spacing: Option<f64>,
    pub epsilon: f64,
    pub swept_mass: f64,
    pub mass_gap: Option<f64>,
    /// Max relative error of the swept potential at the scenario's probe points.
    pub potential_gap: Option<f64>,
    /// Max over nodes of `(U^{omega^A} - U^omega)+`.
    pub domination_defect: f64,
    pub capacity: f64,
    pub capacity_gap: Option<f64>,
    pub density_l1_error: Option<f64>,
    #[serde(skip)]
    pub result: Option<BalayageResult>,
}

/// Solves every level in order. Levels are numbered `0..levels`.
pub fn refinement_oracle(
    scenario: &dyn RefinementScenario,
    levels: usize,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<Vec<RefinementLevel>> {
    if levels < 2 {
        return Err(Error::Parameter("a refinement study needs at least two levels".into()));
    }
    for level in 0..levels {
        let n = scenario.node_count(level);
        if n > REFINEMENT_NODE_CAP {
            return Err(Error::ResourceCap {
                what: "refinement node count",
                value: n,
                cap: REFINEMENT_NODE_CAP,
            });
        }
    }
    let density = scenario.density_oracle();
    let probes = scenario.potential_probes();
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let p = scenario.build(level)?;
        let result = inner_balayage(&p.matrix, &p.omega, &p.region, mode, opts)?;
        let eq = equilibrium_measure(&p.matrix, &p.region, opts)?;
        let potential_gap = if probes.is_empty() {
            None
        } else {
            let pts: Vec<Vec<f64>> = probes.iter().map(|(x, _)| x.clone()).collect();
            let u = potential(&p.matrix, &result.swept, Some(&pts))?.values;
            Some(
                u.iter()
                    .zip(&probes)
                    .map(|(a, (_, exact))| (a - exact).abs() / exact.abs())
                    .fold(0.0, f64::max),
            )
        };
        let density_l1_error = match &density {
            Some(o) => Some(o.relative_l1_error(
                p.matrix.nodes(),
                result.swept.weights(),
                &p.region.indices(),
            )?),
            None => None,
        };
        out.push(RefinementLevel {
            level,
            nodes: p.matrix.len(),
            min_spacing: p.matrix.nodes().min_spacing(),
            epsilon: p.matrix.spec().regularization(),
            swept_mass: result.mass,
            mass_gap: scenario.exact_mass().map(|e| (result.mass - e).abs()),
            potential_gap,
            domination_defect: result.domination_violation,
            capacity: eq.capacity,
            capacity_gap: scenario.exact_capacity().map(|c| (eq.capacity - c).abs()),
            density_l1_error,
            result: Some(result),
        });
    }
    Ok(out)
}
