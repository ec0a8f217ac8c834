//! Sampled continuous fields over `[0, 1]` and `[0, 1]²`.
//!
//! Fibres are block operators on fixed Peter–Weyl layouts; fibres away from
//! the deformation point are identified through their common basis, which is
//! the declared trivialization. Lifting of projections and unitaries runs
//! through functional calculus on the exactness window.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::block::{direct_sum, split, BlockLabel, BlockLayout, BlockOperator};
use crate::cartan::{Numeric, QNum};
use crate::classical::{dual_action, quantum_motion_membership, FibreSample, InducedSpaceModel, QuadratureOrders};
use crate::double::{DoubleElement, DoubleGroup};
use crate::pseries::{minimal_ktype, minimal_ktype_projection, ParamPoint, ReprHandle, SectionSpaceModel};
use crate::qea::QGroup;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, op_norm};

/// Membership test for one fibre; returns a description of the violation.
pub type Predicate = Arc<dyn Fn(usize, &BlockOperator) -> std::result::Result<(), String> + Send + Sync>;

#[derive(Clone)]
pub struct FibreDescriptor {
    pub name: String,
    predicate: Predicate,
}

impl std::fmt::Debug for FibreDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FibreDescriptor({})", self.name)
    }
}

impl FibreDescriptor {
    pub fn new(name: impl Into<String>, predicate: Predicate) -> Self {
        FibreDescriptor { name: name.into(), predicate }
    }

    /// A fibre with no membership condition beyond the layout.
    pub fn any(name: impl Into<String>) -> Self {
        Self::new(name, Arc::new(|_, _| Ok(())))
    }

    /// Operator norm on the window at most `bound`.
    pub fn norm_bounded(name: impl Into<String>, bound: f64) -> Self {
        Self::new(
            name,
            Arc::new(move |_, op: &BlockOperator| {
                let n = op.window_norm();
                if n <= bound {
                    Ok(())
                } else {
                    Err(format!("window norm {n:.6e} exceeds {bound}"))
                }
            }),
        )
    }

    pub fn check(&self, point: usize, op: &BlockOperator) -> std::result::Result<(), String> {
        (self.predicate)(point, op)
    }
}

/// `2^level + 1` points on `[0, 1]`, `t ↦ (2^{st} − 1)/(2^s − 1)` applied to
/// the uniform grid, so spacing shrinks geometrically toward 0 for `s > 0`.
/// Grids of consecutive levels are nested.
pub fn graded_grid(level: u32, grading: f64) -> Vec<f64> {
    let n = 1usize << level;
    (0..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            if grading.abs() < 1e-12 {
                t
            } else {
                (2f64.powf(grading * t) - 1.0) / (2f64.powf(grading) - 1.0)
            }
        })
        .collect()
}

/// A continuous field sampled on a grid, with named sections.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub grid: Vec<f64>,
    pub fibres: Vec<FibreDescriptor>,
    sections: BTreeMap<String, Vec<BlockOperator>>,
}

impl SampledField {
    pub fn new(grid: Vec<f64>, fibres: Vec<FibreDescriptor>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != fibres.len() {
            return Err(Error::Config(format!("{} grid points with {} fibre descriptors", grid.len(), fibres.len())));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid must increase strictly from 0 to 1".into()));
        }
        Ok(SampledField { grid, fibres, sections: BTreeMap::new() })
    }

    /// Same fibre descriptor at every point.
    pub fn uniform(grid: Vec<f64>, fibre: FibreDescriptor) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![fibre; n])
    }

    pub fn insert_section(&mut self, name: impl Into<String>, values: Vec<BlockOperator>) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::Config(format!("section has {} values on {} points", values.len(), self.grid.len())));
        }
        for (i, (v, f)) in values.iter().zip(&self.fibres).enumerate() {
            f.check(i, v).map_err(|detail| Error::NotInFibre { point: i, detail })?;
        }
        self.sections.insert(name.into(), values);
        Ok(())
    }

    pub fn section(&self, name: &str) -> Result<&[BlockOperator]> {
        self.sections.get(name).map(|v| v.as_slice()).ok_or_else(|| Error::Config(format!("no section named {name}")))
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(|s| s.as_str())
    }

    /// Restriction to the grid points `indices` (which must keep both
    /// endpoints).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let grid = indices.iter().map(|&i| self.grid[i]).collect();
        let fibres = indices.iter().map(|&i| self.fibres[i].clone()).collect();
        let mut out = Self::new(grid, fibres)?;
        for (name, v) in &self.sections {
            out.sections.insert(name.clone(), indices.iter().map(|&i| v[i].clone()).collect());
        }
        Ok(out)
    }

    /// Per-point membership of a section.
    pub fn membership(&self, name: &str) -> Result<Vec<std::result::Result<(), String>>> {
        let s = self.section(name)?;
        Ok(s.iter().enumerate().map(|(i, v)| self.fibres[i].check(i, v)).collect())
    }
}

/// One adjacent pair in a [`ModulusTable`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusRow {
    pub left: f64,
    pub right: f64,
    /// `‖a_x − a_y‖` on the common window.
    pub gap: f64,
    /// `|‖a_x‖ − ‖a_y‖|`.
    pub norm_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusTable {
    pub rows: Vec<ModulusRow>,
    pub max_gap: f64,
    /// Indices of rows whose slope stands out from the rest of the section.
    pub jumps: Vec<usize>,
}

impl ModulusTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("left,right,gap,norm_gap\n");
        for r in &self.rows {
            writeln!(s, "{:e},{:e},{:e},{:e}", r.left, r.right, r.gap, r.norm_gap).unwrap();
        }
        s
    }
}

const JUMP_FACTOR: f64 = 8.0;
const JUMP_FLOOR: f64 = 1e-8;

fn window_gap(a: &BlockOperator, b: &BlockOperator) -> Result<f64> {
    if a.layout != b.layout || a.truncation != b.truncation {
        return Err(Error::WindowMismatch("fibres use different layouts".into()));
    }
    let s = a.window_spin().min(b.window_spin());
    Ok(op_norm(&(a.compress(s) - b.compress(s))))
}

/// Norm gaps of a section between adjacent grid points.
pub fn continuity_modulus(field: &SampledField, name: &str) -> Result<ModulusTable> {
    let s = field.section(name)?;
    let mut rows = Vec::with_capacity(s.len() - 1);
    for i in 0..s.len() - 1 {
        let gap = window_gap(&s[i], &s[i + 1])?;
        let norm_gap = (s[i].window_norm() - s[i + 1].window_norm()).abs();
        rows.push(ModulusRow { left: field.grid[i], right: field.grid[i + 1], gap, norm_gap });
    }
    let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let mut slopes: Vec<f64> = rows.iter().map(|r| r.gap / (r.right - r.left)).collect();
    let raw = slopes.clone();
    slopes.sort_by(|a, b| a.total_cmp(b));
    let median = slopes[slopes.len() / 2];
    let jumps = raw
        .iter()
        .enumerate()
        .filter(|&(i, &sl)| rows[i].gap > JUMP_FLOOR && sl > JUMP_FACTOR * median.max(JUMP_FLOOR))
        .map(|(i, _)| i)
        .collect();
    Ok(ModulusTable { rows, max_gap, jumps })
}

/// Max adjacent gap on each nested sub-grid of a `2^L + 1`-point grid,
/// coarsest first (levels `1..=L`).
pub fn refinement_moduli(field: &SampledField, name: &str) -> Result<Vec<f64>> {
    let n = field.grid.len() - 1;
    if !n.is_power_of_two() {
        return Err(Error::Config(format!("{} points is not 2^L + 1", field.grid.len())));
    }
    let levels = n.trailing_zeros();
    let mut out = Vec::new();
    for l in 1..=levels {
        let stride = n >> l;
        let idx: Vec<usize> = (0..=n).step_by(stride).collect();
        out.push(continuity_modulus(&field.restrict(&idx)?, name)?.max_gap);
    }
    Ok(out)
}

fn embed(op: &BlockOperator, w: &DMatrix<Complex64>) -> BlockOperator {
    let idx = op.window_indices();
    let mut m = DMatrix::zeros(op.dim(), op.dim());
    for (a, &r) in idx.iter().enumerate() {
        for (b, &c) in idx.iter().enumerate() {
            m[(r, c)] = w[(a, b)];
        }
    }
    BlockOperator::new(op.layout.clone(), op.truncation, op.budget, m)
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `χ_{(1/2, ∞)}(a)` on the window of `a`'s self-adjoint part, provided its
/// spectrum avoids `(1/4, 3/4)`.
pub fn spectral_projection(a: &BlockOperator, point: usize) -> Result<(BlockOperator, usize)> {
    let h = hermitian_part(&a.window());
    let eig = h.clone().symmetric_eigen();
    let bad: Vec<f64> = eig.eigenvalues.iter().copied().filter(|&l| l > 0.25 && l < 0.75).collect();
    if !bad.is_empty() {
        return Err(Error::SpectralGap { point, detail: format!("eigenvalues {bad:?} within 1/4 of 1/2") });
    }
    let n = h.nrows();
    let mut p = DMatrix::<Complex64>::zeros(n, n);
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.5 {
            let v = eig.eigenvectors.column(k);
            p += &v * v.adjoint();
            rank += 1;
        }
    }
    Ok((embed(a, &p), rank))
}

#[derive(Clone, Debug)]
pub struct ProjectionLift {
    pub section: Vec<BlockOperator>,
    pub ranks: Vec<usize>,
    /// Largest `max(‖p² − p‖, ‖p − p*‖)` along the grid.
    pub max_defect: f64,
}

impl ProjectionLift {
    pub fn rank_is_constant(&self) -> bool {
        self.ranks.windows(2).all(|w| w[0] == w[1])
    }
}

fn check_projection(p: &DMatrix<Complex64>) -> f64 {
    max_abs(&(p * p - p)).max(max_abs(&(p - p.adjoint())))
}

/// Lift a projection `p0` in the fibre over 0 to a section of projections.
/// With `lift = Some(name)` the named section (which must pass through `p0`)
/// supplies the approximate lift at every point; otherwise the projection at
/// the previous point is carried over by the trivialization. Each point is
/// then corrected by `χ_{(1/2, ∞)}`.
pub fn lift_projection(field: &SampledField, p0: &BlockOperator, lift: Option<&str>) -> Result<ProjectionLift> {
    let pw = p0.window();
    if check_projection(&pw) > 1e-10 {
        return Err(Error::Config("p0 is not a self-adjoint idempotent on its window".into()));
    }
    let seeds = match lift {
        Some(name) => {
            let s = field.section(name)?;
            if window_gap(&s[0], p0)? > 1e-8 {
                return Err(Error::Config(format!("section {name} does not pass through p0")));
            }
            Some(s)
        }
        None => None,
    };
    let mut section = Vec::with_capacity(field.grid.len());
    let mut ranks = Vec::with_capacity(field.grid.len());
    let mut defect = 0.0f64;
    let mut prev = p0.clone();
    for i in 0..field.grid.len() {
        let a = match seeds {
            Some(s) => s[i].clone(),
            None => prev.clone(),
        };
        let (p, r) = spectral_projection(&a, i)?;
        defect = defect.max(check_projection(&p.window()));
        prev = p.clone();
        section.push(p);
        ranks.push(r);
    }
    Ok(ProjectionLift { section, ranks, max_defect: defect })
}

#[derive(Clone, Debug)]
pub struct UnitaryLift {
    pub section: Vec<BlockOperator>,
    /// `‖u*u − 1‖` at the first and last grid points.
    pub endpoint_defects: (f64, f64),
}

/// Unitary part of the polar decomposition on the window.
pub fn polar_unitary(a: &BlockOperator, point: usize) -> Result<BlockOperator> {
    let w = a.window();
    let svd = w.svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12) {
        return Err(Error::NonInvertibleLift(point));
    }
    let u = svd.u.unwrap() * svd.v_t.unwrap();
    Ok(embed(a, &u))
}

fn unitary_defect(u: &DMatrix<Complex64>) -> f64 {
    max_abs(&(u.adjoint() * u - DMatrix::identity(u.ncols(), u.ncols())))
}

/// Lift a unitary `u0` over 0 to a section of unitaries by polar
/// decomposition of a lift (`lift` as in [`lift_projection`]).
pub fn lift_unitary(field: &SampledField, u0: &BlockOperator, lift: Option<&str>) -> Result<UnitaryLift> {
    if unitary_defect(&u0.window()) > 1e-10 {
        return Err(Error::Config("u0 is not unitary on its window".into()));
    }
    let seeds = match lift {
        Some(name) => Some(field.section(name)?),
        None => None,
    };
    let mut section: Vec<BlockOperator> = Vec::with_capacity(field.grid.len());
    let mut prev = u0.clone();
    for i in 0..field.grid.len() {
        let a = match seeds {
            Some(s) => s[i].clone(),
            None => prev.clone(),
        };
        let u = polar_unitary(&a, i)?;
        prev = u.clone();
        section.push(u);
    }
    let d0 = unitary_defect(&section[0].window());
    let d1 = unitary_defect(&section.last().unwrap().window());
    Ok(UnitaryLift { section, endpoint_defects: (d0, d1) })
}

/// A section of a field over `[0, 1]²` sampled on the boundary of the square.
#[derive(Clone, Debug)]
pub struct SquareField {
    pub sigma_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    values: BTreeMap<(usize, usize), BlockOperator>,
}

impl SquareField {
    /// Evaluates `f(σ, τ)` on all boundary points of the product grid.
    pub fn on_boundary(
        sigma_grid: Vec<f64>,
        tau_grid: Vec<f64>,
        mut f: impl FnMut(f64, f64) -> Result<BlockOperator>,
    ) -> Result<Self> {
        for g in [&sigma_grid, &tau_grid] {
            if g.len() < 2 || g[0] != 0.0 || *g.last().unwrap() != 1.0 {
                return Err(Error::Config("square grids must run from 0 to 1".into()));
            }
        }
        let (ns, nt) = (sigma_grid.len(), tau_grid.len());
        let mut values = BTreeMap::new();
        for i in 0..ns {
            for j in 0..nt {
                if i == 0 || j == 0 || i == ns - 1 || j == nt - 1 {
                    values.insert((i, j), f(sigma_grid[i], tau_grid[j])?);
                }
            }
        }
        Ok(SquareField { sigma_grid, tau_grid, values })
    }

    pub fn value(&self, i: usize, j: usize) -> Option<&BlockOperator> {
        self.values.get(&(i, j))
    }

    pub fn value_mut(&mut self, i: usize, j: usize) -> Option<&mut BlockOperator> {
        self.values.get_mut(&(i, j))
    }

    /// Boundary edges as index paths: left `σ = 0`, top `τ = 1`, bottom
    /// `τ = 0`, right `σ = 1`, each oriented away from `(0, 0)` or toward
    /// `(1, 1)`.
    fn edges(&self) -> [(&'static str, Vec<(usize, usize)>); 4] {
        let (ns, nt) = (self.sigma_grid.len(), self.tau_grid.len());
        [
            ("left", (0..nt).map(|j| (0, j)).collect()),
            ("top", (0..ns).map(|i| (i, nt - 1)).collect()),
            ("bottom", (0..ns).map(|i| (i, 0)).collect()),
            ("right", (0..nt).map(|j| (ns - 1, j)).collect()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquareReport {
    /// Ranks of the lifted projection along each edge.
    pub edge_ranks: Vec<(String, Vec<usize>)>,
    pub flagged_edges: Vec<String>,
    pub corner_ranks: (usize, usize),
    /// `‖U P_a U* − P_b‖` for the unitary `U` built from the two corner
    /// projections.
    pub conjugacy_residual: f64,
    pub corners_agree: bool,
}

/// Lift `p0` from `(0, 0)` to `(1, 1)` along `left·top` and `bottom·right`
/// and compare the two projections at `(1, 1)`.
pub fn square_check(square: &SquareField, p0: &BlockOperator, tol: f64) -> Result<SquareReport> {
    let edges = square.edges();
    // axioms: away from (0, 0) every boundary fibre uses the layout of (1, 1)
    let (ns, nt) = (square.sigma_grid.len(), square.tau_grid.len());
    let corner = square.value(ns - 1, nt - 1).expect("corner sampled");
    for (name, path) in &edges {
        for &(i, j) in path {
            if (i, j) == (0, 0) {
                continue;
            }
            let v = square.value(i, j).expect("boundary sampled");
            if v.layout != corner.layout || v.truncation != corner.truncation {
                return Err(Error::AxiomViolation(format!("{name} edge fibre at ({i}, {j}) is not identified with the corner")));
            }
        }
    }
    let origin = square.value(0, 0).expect("origin sampled");
    if window_gap(origin, p0)? > 1e-8 {
        return Err(Error::Config("section does not pass through p0 at (0, 0)".into()));
    }
    let mut edge_ranks = Vec::new();
    let mut flagged = Vec::new();
    let mut ends = Vec::new();
    for pair in [[0usize, 1], [2, 3]] {
        let mut last = None;
        for e in pair {
            let (name, path) = &edges[e];
            let mut ranks = Vec::with_capacity(path.len());
            for &(i, j) in path {
                let (p, r) = spectral_projection(square.value(i, j).unwrap(), i * nt + j)?;
                ranks.push(r);
                last = Some(p);
            }
            if ranks.windows(2).any(|w| w[0] != w[1]) {
                flagged.push(name.to_string());
            }
            edge_ranks.push((name.to_string(), ranks));
        }
        ends.push(last.unwrap());
    }
    let (pa, pb) = (ends[0].window(), ends[1].window());
    let n = pa.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let x = &pb * &pa + (&id - &pb) * (&id - &pa);
    let svd = x.svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let residual = if smin > 1e-12 {
        let u = svd.u.unwrap() * svd.v_t.unwrap();
        max_abs(&(&u * &pa * u.adjoint() - &pb))
    } else {
        f64::INFINITY
    };
    let ra = edge_ranks[1].1.last().copied().unwrap();
    let rb = edge_ranks[3].1.last().copied().unwrap();
    Ok(SquareReport {
        corners_agree: ra == rb && residual <= tol && flagged.is_empty(),
        edge_ranks,
        flagged_edges: flagged,
        corner_ranks: (ra, rb),
        conjugacy_residual: residual,
    })
}

/// Corner algebra `p_n Q_n p_n` of one filtration level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerType {
    /// `C(T)`.
    Circle,
    /// `C(T)^{ℤ₂} ≅ C[0, 1]`.
    CircleQuotient,
    /// `C₀(ℝ)`.
    Line,
    /// `C₀(ℝ)^{ℤ₂} ≅ C₀[0, ∞)`.
    HalfLine,
}

impl CornerType {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "C(T)" | "circle" => Ok(CornerType::Circle),
            "C(T)^Z2" | "circle/Z2" => Ok(CornerType::CircleQuotient),
            "C0(R)" | "line" => Ok(CornerType::Line),
            "C0(R)^Z2" | "half-line" => Ok(CornerType::HalfLine),
            other => Err(Error::UnknownCornerType(other.to_string())),
        }
    }

    /// `(rank K₀, rank K₁)` over ℤ.
    pub fn ranks(self) -> (u32, u32) {
        match self {
            CornerType::Circle => (1, 1),
            CornerType::CircleQuotient => (1, 0),
            CornerType::Line => (0, 1),
            CornerType::HalfLine => (0, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiltrationLevel {
    pub ktype: u32,
    pub corner: CornerType,
}

/// Minimal K-types in filtration order with their corner algebras.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KTypeFiltrationLedger {
    pub levels: Vec<FiltrationLevel>,
}

impl KTypeFiltrationLedger {
    /// Levels must respect dominance: smaller K-types come first.
    pub fn new(levels: Vec<FiltrationLevel>) -> Result<Self> {
        if levels.windows(2).any(|w| w[0].ktype > w[1].ktype) {
            return Err(Error::Config("filtration levels violate the dominance order".into()));
        }
        Ok(KTypeFiltrationLedger { levels })
    }

    /// Corners of `C*_red(G_q)` (and of `K ⋉ C(K)`) for `SU(2)`, K-types `0..=max`.
    pub fn su2_double(max: u32) -> Self {
        let levels = (0..=max)
            .map(|m| FiltrationLevel {
                ktype: m,
                corner: if m == 0 { CornerType::CircleQuotient } else { CornerType::Circle },
            })
            .collect();
        KTypeFiltrationLedger { levels }
    }

    /// Corners of `K ⋉ C₀(𝔨)` for `SU(2)`, K-types `0..=max`.
    pub fn su2_motion(max: u32) -> Self {
        let levels = (0..=max)
            .map(|m| FiltrationLevel { ktype: m, corner: if m == 0 { CornerType::HalfLine } else { CornerType::Line } })
            .collect();
        KTypeFiltrationLedger { levels }
    }
}

pub const ADDITIVITY_ASSUMPTION: &str =
    "ranks assembled by additivity over filtration levels; connecting maps of the six-term sequences assumed zero";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    /// Ranks as `R(K)`-modules.
    pub k0: u32,
    pub k1: u32,
    /// Ranks over ℤ of the truncated groups.
    pub z_ranks: (u32, u32),
    pub levels: usize,
    pub assumption: &'static str,
}

/// K-group ranks of the algebra filtered by the first `levels` K-types.
/// `R(K)` truncated to the same K-types has ℤ-rank `levels`, so the
/// `R(K)`-rank is the ℤ-rank divided by `levels`, rounded to the nearest
/// integer.
pub fn ktheory_ranks(ledger: &KTypeFiltrationLedger, levels: usize) -> RankReport {
    let used = &ledger.levels[..levels.min(ledger.levels.len())];
    let (z0, z1) = used.iter().fold((0, 0), |(a, b), l| {
        let (r0, r1) = l.corner.ranks();
        (a + r0, b + r1)
    });
    let n = used.len() as u32;
    let r = |z: u32| if n == 0 { 0 } else { (2 * z + n) / (2 * n) };
    RankReport { k0: r(z0), k1: r(z1), z_ranks: (z0, z1), levels: used.len(), assumption: ADDITIVITY_ASSUMPTION }
}

/// The quantum assembly field over `σ ∈ [0, 1]`: the fibre at `σ` is the
/// direct sum of principal-series representations at `q^σ` over `handles`,
/// so the fibre at 0 is the `K ⋉ C(K)` model.
#[derive(Clone, Debug)]
pub struct AssemblyField {
    pub q: f64,
    pub truncation: u32,
    pub handles: Vec<ParamPoint>,
    pub field: SampledField,
    layouts: Vec<Arc<BlockLayout>>,
}

impl AssemblyField {
    /// Builds the field with one section per named element. The fibre at 0
    /// checks the `K ⋉ C(K)` membership conditions at tolerance `tol`.
    pub fn new(
        q: f64,
        truncation: u32,
        grid: Vec<f64>,
        handles: Vec<ParamPoint>,
        sections: &[(String, DoubleElement<QNum>)],
        tol: f64,
    ) -> Result<Self> {
        let layouts: Vec<Arc<BlockLayout>> =
            handles.iter().map(|h| SectionSpaceModel::new(h.mu, truncation).layout).collect();
        let zero = {
            let handles = handles.clone();
            let layouts = layouts.clone();
            let pred: Predicate = Arc::new(move |_, op: &BlockOperator| {
                let parts = split(op, &layouts).map_err(|e| e.to_string())?;
                let diag = direct_sum(&parts).map_err(|e| e.to_string())?;
                let leak = max_abs(&(&op.matrix - &diag.matrix));
                if leak > tol {
                    return Err(format!("entries between handles of size {leak:.3e}"));
                }
                let samples: Vec<FibreSample> = handles
                    .iter()
                    .zip(parts)
                    .map(|(h, op)| FibreSample { mu: h.mu, param: h.theta, op })
                    .collect();
                let rep = quantum_motion_membership(&samples, tol);
                if rep.is_member() {
                    Ok(())
                } else {
                    Err(rep.violations.join("; "))
                }
            });
            FibreDescriptor::new("K x C(K)", pred)
        };
        let mut fibres = vec![zero];
        fibres.extend((1..grid.len()).map(|_| FibreDescriptor::any("C*_red(G_q)")));
        let mut field = SampledField::new(grid.clone(), fibres)?;
        let spin = sections.iter().map(|(_, a)| a.coeff_spin()).max().unwrap_or(0);
        let values: Vec<Vec<BlockOperator>> = grid
            .par_iter()
            .map(|&sigma| {
                let g = QGroup::new(Numeric::new(q.powf(sigma)), truncation + 2 * spin + 2);
                let d = Arc::new(DoubleGroup::new(g));
                let hs = handles
                    .iter()
                    .map(|&p| ReprHandle::new(d.clone(), p, truncation))
                    .collect::<Result<Vec<_>>>()?;
                sections
                    .iter()
                    .map(|(_, a)| direct_sum(&hs.iter().map(|h| h.represent(a)).collect::<Result<Vec<_>>>()?))
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (k, (name, _)) in sections.iter().enumerate() {
            field.insert_section(name.clone(), values.iter().map(|v| v[k].clone()).collect())?;
        }
        Ok(AssemblyField { q, truncation, handles, field, layouts })
    }

    /// The summand of a fibre belonging to handle `h`.
    pub fn component(&self, op: &BlockOperator, h: usize) -> Result<BlockOperator> {
        Ok(split(op, &self.layouts)?.swap_remove(h))
    }
}

/// Generators `ω^1_{ij} ⋈ u^1_{kl}` with `i ≤ j`, `k ≤ l` and the pure
/// generators `ω^1_{ij} ⋈ 1`, `1 ⋈ u^1_{kl}`, named by their indices.
pub fn generator_sections() -> Vec<(String, DoubleElement<QNum>)> {
    let mut out = Vec::new();
    let pairs = [(0u32, 0u32), (0, 1), (1, 1)];
    for &(k, l) in &pairs {
        out.push((format!("1*u{k}{l}"), DoubleElement::basis(None, (1, k, l))));
    }
    for &(i, j) in &pairs {
        out.push((format!("w{i}{j}*1"), DoubleElement::basis(Some((1, i, j)), (0, 0, 0))));
        for &(k, l) in &pairs {
            out.push((format!("w{i}{j}*u{k}{l}"), DoubleElement::basis(Some((1, i, j)), (1, k, l))));
        }
    }
    out
}

/// Boundary of the `SL(2, ℂ)` deformation square for the projection `p_n`:
/// at `(σ, τ)` with `τ > 0` the principal series at `q^{στ}` over `handles`,
/// on `τ = 0` the classical model of `K ⋉ C₀(𝔨)` and `C*_red(G)`, on which
/// `p_n` acts through the `K`-side of the induced picture.
pub fn sl2c_deformation_square(
    q: f64,
    truncation: u32,
    handles: &[ParamPoint],
    n: usize,
    sigma_grid: Vec<f64>,
    tau_grid: Vec<f64>,
) -> Result<SquareField> {
    let p = minimal_ktype_projection::<QNum>(n);
    let mu = minimal_ktype(n);
    let classical: Vec<BlockOperator> = handles
        .iter()
        .map(|h| {
            let orders = QuadratureOrders::uniform(2 * truncation as usize + 2, 2);
            let model = InducedSpaceModel::new(h.mu, truncation, orders, 1e-10)?;
            Ok(dual_action(&[(Some((mu, 0, 0)), Complex64::new(1.0, 0.0))], &model))
        })
        .collect::<Result<_>>()?;
    let classical = direct_sum(&classical)?;
    SquareField::on_boundary(sigma_grid, tau_grid, |sigma, tau| {
        if tau == 0.0 {
            return Ok(classical.clone());
        }
        let g = QGroup::new(Numeric::new(q.powf(sigma * tau)), truncation + 2);
        let d = Arc::new(DoubleGroup::new(g));
        let ops = handles
            .iter()
            .map(|&h| ReprHandle::new(d.clone(), h, truncation)?.represent(&p))
            .collect::<Result<Vec<_>>>()?;
        direct_sum(&ops)
    })
}

const MAGIC: &[u8; 4] = b"QBCF";

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema: u32,
    grid: Vec<f64>,
    fibres: Vec<String>,
    sections: BTreeMap<String, Vec<String>>,
}

fn put_u32(buf: &mut Vec<u8>, x: u32) {
    buf.extend_from_slice(&x.to_le_bytes());
}

/// Binary layout: `QBCF`, then little-endian `u32` version, truncation,
/// budget and block count; per block `u32` key length, key entries, spin and
/// dimension; then the matrix row-major as interleaved `f64` real and
/// imaginary parts.
pub fn encode_operator(op: &BlockOperator) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, 1);
    put_u32(&mut buf, op.truncation);
    put_u32(&mut buf, op.budget);
    put_u32(&mut buf, op.layout.blocks().len() as u32);
    for b in op.layout.blocks() {
        put_u32(&mut buf, b.key.len() as u32);
        for &k in &b.key {
            put_u32(&mut buf, k);
        }
        put_u32(&mut buf, b.spin);
        put_u32(&mut buf, b.dim as u32);
    }
    for r in 0..op.dim() {
        for c in 0..op.dim() {
            let z = op.matrix[(r, c)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    buf
}

pub fn decode_operator(bytes: &[u8]) -> Result<BlockOperator> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a block-operator file".into()));
    }
    let u32s = |r: &mut &[u8]| -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let version = u32s(&mut r)?;
    if version != 1 {
        return Err(Error::Io(format!("unsupported version {version}")));
    }
    let truncation = u32s(&mut r)?;
    let budget = u32s(&mut r)?;
    let nblocks = u32s(&mut r)?;
    let mut blocks = Vec::with_capacity(nblocks as usize);
    for _ in 0..nblocks {
        let kl = u32s(&mut r)?;
        let key = (0..kl).map(|_| u32s(&mut r)).collect::<Result<Vec<_>>>()?;
        let spin = u32s(&mut r)?;
        let dim = u32s(&mut r)? as usize;
        blocks.push(BlockLabel { key, spin, dim });
    }
    let layout = Arc::new(BlockLayout::new(blocks));
    let d = layout.dim();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            r.read_exact(&mut b)?;
            m[(i, j)] = Complex64::new(re, f64::from_le_bytes(b));
        }
    }
    Ok(BlockOperator::new(layout, truncation, budget, m))
}

/// Write a field as `manifest.json` plus one binary file per section and
/// grid point.
pub fn write_snapshot(field: &SampledField, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sections = BTreeMap::new();
    for (name, values) in &field.sections {
        let mut files = Vec::new();
        for (i, v) in values.iter().enumerate() {
            let file = format!("{}_{i:04}.bin", sanitize(name));
            fs::File::create(dir.join(&file))?.write_all(&encode_operator(v))?;
            files.push(file);
        }
        sections.insert(name.clone(), files);
    }
    let manifest = Manifest {
        schema: 1,
        grid: field.grid.clone(),
        fibres: field.fibres.iter().map(|f| f.name.clone()).collect(),
        sections,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Read a snapshot; fibre predicates come back as unconstrained descriptors
/// carrying the stored names.
pub fn read_snapshot(dir: &Path) -> Result<SampledField> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
    let fibres = m.fibres.iter().map(|n| FibreDescriptor::any(n.clone())).collect();
    let mut field = SampledField::new(m.grid, fibres)?;
    for (name, files) in m.sections {
        let values = files.iter().map(|f| decode_operator(&fs::read(dir.join(f))?)).collect::<Result<Vec<_>>>()?;
        field.insert_section(name, values)?;
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Arc<BlockLayout> {
        Arc::new(BlockLayout::new(vec![
            BlockLabel { key: vec![0], spin: 0, dim: 1 },
            BlockLabel { key: vec![2], spin: 2, dim: 3 },
        ]))
    }

    fn op(m: DMatrix<Complex64>) -> BlockOperator {
        BlockOperator::new(layout(), 2, 0, m)
    }

    fn diag(d: &[f64]) -> BlockOperator {
        op(DMatrix::from_fn(4, 4, |i, j| if i == j { Complex64::new(d[i], 0.0) } else { Complex64::new(0.0, 0.0) }))
    }

    fn line_field(f: impl Fn(f64) -> BlockOperator) -> SampledField {
        let mut field = SampledField::uniform(graded_grid(4, 0.0), FibreDescriptor::any("matrices")).unwrap();
        let v = field.grid.iter().map(|&x| f(x)).collect();
        field.insert_section("a", v).unwrap();
        field
    }

    #[test]
    fn graded_grids_nest() {
        let g4 = graded_grid(4, 3.0);
        let g3 = graded_grid(3, 3.0);
        assert_eq!(g4.len(), 17);
        for (k, x) in g3.iter().enumerate() {
            assert!((g4[2 * k] - x).abs() < 1e-15);
        }
        assert!(g4[1] - g4[0] < g4[16] - g4[15]);
    }

    #[test]
    fn constant_section_has_zero_gaps() {
        let f = line_field(|_| diag(&[1.0, 0.5, 0.2, 0.0]));
        let t = continuity_modulus(&f, "a").unwrap();
        assert_eq!(t.max_gap, 0.0);
        assert!(t.jumps.is_empty());
    }

    #[test]
    fn jump_is_flagged() {
        let f = line_field(|x| diag(&[x, if x > 0.5 { 1.0 } else { 0.0 }, 0.0, 0.0]));
        let t = continuity_modulus(&f, "a").unwrap();
        assert_eq!(t.jumps.len(), 1);
        assert!(t.rows[t.jumps[0]].left <= 0.5 && t.rows[t.jumps[0]].right > 0.5);
    }

    #[test]
    fn nested_moduli_never_more_than_halve() {
        let f = line_field(|x| diag(&[x * x, (3.0 * x).sin(), 0.0, x]));
        let m = refinement_moduli(&f, "a").unwrap();
        for w in m.windows(2) {
            assert!(w[0] <= 2.0 * w[1] + 1e-15);
        }
    }

    #[test]
    fn membership_is_enforced_on_insert() {
        let mut f = SampledField::uniform(vec![0.0, 1.0], FibreDescriptor::norm_bounded("contractions", 1.0)).unwrap();
        let err = f.insert_section("a", vec![diag(&[0.5; 4]), diag(&[2.0, 0.0, 0.0, 0.0])]);
        assert!(matches!(err, Err(Error::NotInFibre { point: 1, .. })));
    }

    #[test]
    fn projection_lifts() {
        let p0 = diag(&[1.0, 0.0, 1.0, 0.0]);
        let f = line_field(|_| diag(&[0.0; 4]));
        let l = lift_projection(&f, &p0, None).unwrap();
        assert!(l.rank_is_constant() && l.ranks[0] == 2);
        assert!(l.section.iter().all(|p| max_abs(&(&p.matrix - &p0.matrix)) < 1e-14));
        let z = lift_projection(&f, &diag(&[0.0; 4]), None).unwrap();
        assert!(z.ranks.iter().all(|&r| r == 0));
        // a perturbed lift is corrected back to projections
        let g = line_field(|x| diag(&[1.0 - 0.1 * x, 0.1 * x, 1.0, 0.0]));
        let l = lift_projection(&g, &p0, Some("a")).unwrap();
        assert!(l.max_defect < 1e-10 && l.rank_is_constant());
        let bad = line_field(|x| diag(&[1.0 - x, 0.0, 1.0, 0.0]));
        assert!(matches!(lift_projection(&bad, &p0, Some("a")), Err(Error::SpectralGap { .. })));
    }

    #[test]
    fn unitary_lifts() {
        let id = op(DMatrix::identity(4, 4));
        let f = line_field(|_| diag(&[0.0; 4]));
        let l = lift_unitary(&f, &id, None).unwrap();
        assert!(l.section.iter().all(|u| max_abs(&(&u.matrix - &id.matrix)) < 1e-14));
        // diagonal phases at 0, a non-unitary lift at 1
        let ph = |t: f64| Complex64::from_polar(1.0, t);
        let u0 = op(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ph(0.3), ph(1.0), ph(-2.0), ph(0.0)])));
        let mut two = SampledField::uniform(vec![0.0, 1.0], FibreDescriptor::any("m")).unwrap();
        let mut lifted = u0.matrix.clone();
        lifted[(1, 1)] *= 1.7;
        lifted[(2, 3)] = Complex64::new(0.2, 0.0);
        two.insert_section("a", vec![u0.clone(), op(lifted)]).unwrap();
        let l = lift_unitary(&two, &u0, Some("a")).unwrap();
        assert!(l.endpoint_defects.0 < 1e-12 && l.endpoint_defects.1 < 1e-12);
        let mut sing = u0.matrix.clone();
        sing[(0, 0)] = Complex64::new(0.0, 0.0);
        two.insert_section("b", vec![u0.clone(), op(sing)]).unwrap();
        assert_eq!(lift_unitary(&two, &u0, Some("b")).unwrap_err(), Error::NonInvertibleLift(1));
    }

    #[test]
    fn square_checks() {
        let p0 = diag(&[1.0, 0.0, 0.0, 0.0]);
        let g = vec![0.0, 0.5, 1.0];
        let sq = SquareField::on_boundary(g.clone(), g.clone(), |_, _| Ok(p0.clone())).unwrap();
        let r = square_check(&sq, &p0, 1e-10).unwrap();
        assert!(r.corners_agree && r.conjugacy_residual < 1e-14);
        let sq = SquareField::on_boundary(g.clone(), g, |s, t| {
            Ok(if t == 0.0 && s > 0.0 { diag(&[1.0, 1.0, 0.0, 0.0]) } else { p0.clone() })
        })
        .unwrap();
        let r = square_check(&sq, &p0, 1e-10).unwrap();
        assert!(!r.corners_agree);
        assert!(r.flagged_edges.contains(&"bottom".to_string()));
    }

    #[test]
    fn rank_fixtures() {
        let d = ktheory_ranks(&KTypeFiltrationLedger::su2_double(6), 7);
        assert_eq!((d.k0, d.k1), (1, 1));
        assert_eq!(d.z_ranks, (7, 6));
        let m = ktheory_ranks(&KTypeFiltrationLedger::su2_motion(6), 7);
        assert_eq!((m.k0, m.k1), (0, 1));
        let e = ktheory_ranks(&KTypeFiltrationLedger::default(), 3);
        assert_eq!((e.k0, e.k1), (0, 0));
        assert_eq!(CornerType::parse("C(T)^Z2").unwrap(), CornerType::CircleQuotient);
        assert_eq!(CornerType::parse("C(S^2)"), Err(Error::UnknownCornerType("C(S^2)".into())));
        let bad = vec![
            FiltrationLevel { ktype: 2, corner: CornerType::Circle },
            FiltrationLevel { ktype: 1, corner: CornerType::Circle },
        ];
        assert!(KTypeFiltrationLedger::new(bad).is_err());
    }

    fn weyl_closed_handles() -> Vec<ParamPoint> {
        let mut v = Vec::new();
        for mu in [0i64, 1] {
            for th in [0.0, 0.7, std::f64::consts::PI] {
                let p = ParamPoint::new(mu, th);
                v.push(p);
                if mu != 0 || (th != 0.0 && th != std::f64::consts::PI) {
                    v.push(p.weyl());
                }
            }
        }
        v
    }

    #[test]
    fn assembly_field_zero_fibre_is_in_the_motion_algebra() {
        let gens = generator_sections();
        let f = AssemblyField::new(0.5, 3, graded_grid(2, 4.0), weyl_closed_handles(), &gens, 1e-10).unwrap();
        for (name, _) in &gens {
            let t = continuity_modulus(&f.field, name).unwrap();
            assert!(t.max_gap < 2.0, "{name}");
        }
        // a fibre-0 value that mixes blocks is rejected
        let mut bad = f.field.section("w00*1").unwrap().to_vec();
        let d = bad[0].dim();
        let mut g = f.field.clone();
        let mut leak = bad.clone();
        leak[0].matrix[(0, d - 1)] = Complex64::new(0.3, 0.0);
        assert!(matches!(g.insert_section("leak", leak), Err(Error::NotInFibre { point: 0, .. })));
        bad[0].matrix[(0, 1)] = Complex64::new(0.3, 0.0);
        assert!(matches!(g.insert_section("bad", bad), Err(Error::NotInFibre { point: 0, .. })));
    }

    #[test]
    fn minimal_ktype_projections_lift_with_constant_rank() {
        let handles = weyl_closed_handles();
        for n in 1..=3 {
            let p = vec![(format!("p{n}"), minimal_ktype_projection::<QNum>(n))];
            let f = AssemblyField::new(0.5, 3, graded_grid(2, 4.0), handles.clone(), &p, 1e-10).unwrap();
            let p0 = f.field.section(&p[0].0).unwrap()[0].clone();
            let l = lift_projection(&f.field, &p0, Some(&p[0].0)).unwrap();
            assert!(l.rank_is_constant() && l.max_defect < 1e-10);
            let s = sl2c_deformation_square(0.5, 3, &handles, n, vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
            let r = square_check(&s, &p0, 1e-10).unwrap();
            assert!(r.corners_agree, "{r:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn restriction_is_coherent(mask in proptest::collection::vec(proptest::bool::ANY, 15), jump in 0.05f64..0.95) {
            let f = line_field(|x| diag(&[x, if x > jump { 1.0 } else { 0.0 }, x * x, 0.0]));
            let mut f = f;
            let bounded = FibreDescriptor::norm_bounded("contractions", 0.9);
            let n = f.grid.len();
            f.fibres = vec![bounded; n];
            let mut idx = vec![0];
            idx.extend((1..16).filter(|&i| mask[i - 1]));
            idx.push(16);
            let r = f.restrict(&idx).unwrap();
            let full = f.membership("a").unwrap();
            let sub = r.membership("a").unwrap();
            for (k, &i) in idx.iter().enumerate() {
                proptest::prop_assert_eq!(&full[i], &sub[k]);
            }
            // gaps between consecutive kept points agree with direct evaluation
            let t = continuity_modulus(&r, "a").unwrap();
            let s = f.section("a").unwrap();
            for (k, w) in idx.windows(2).enumerate() {
                proptest::prop_assert_eq!(t.rows[k].gap, window_gap(&s[w[0]], &s[w[1]]).unwrap());
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let f = line_field(|x| op(DMatrix::from_fn(4, 4, |i, j| Complex64::new(x * i as f64, j as f64 - x))));
        let dir = std::env::temp_dir().join(format!("qbc-snapshot-{}", std::process::id()));
        write_snapshot(&f, &dir).unwrap();
        let g = read_snapshot(&dir).unwrap();
        assert_eq!(g.grid, f.grid);
        for (a, b) in g.section("a").unwrap().iter().zip(f.section("a").unwrap()) {
            assert_eq!(a.matrix, b.matrix);
            assert_eq!(*a.layout, *b.layout);
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
