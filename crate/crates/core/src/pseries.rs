//! Principal-series representations of the Drinfeld double on Peter–Weyl
//! truncations of the section spaces `Γ(E_μ) ⊂ 𝒞^∞(K_q)`.
//!
//! `Γ(E_μ)` is spanned by the matrix coefficients `u^ν_{i,j}` whose column
//! index has weight `μ`, for `ν ≡ μ (mod 2)` and `ν ≥ |μ|`. The dual acts by
//! `x·ξ = (Ŝ(x), ξ_(1)) ξ_(2)` and functions by the twisted adjoint action
//! `f·ξ = f_(1) ξ S(f_(3)) (K_{2ρ+λ}, f_(2))`. The parameter `λ` enters as the
//! pure phase `(K_λ, u_{cc}) = e^{iθ wt(c)}`, so it lives on the circle
//! `θ ∈ [0, 2π)`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::block::{BlockLabel, BlockLayout, BlockOperator};
use crate::cartan::{Backend, Field, Numeric};
use crate::double::{dual_antipode, l2_norms, DoubleElement, DoubleGroup, DualElement, DualKey};
use crate::error::{Error, Result};
use crate::funalg::{self, CoeffElement, CoeffKey};
use crate::linalg::{max_abs, numeric_rank, Mat};

/// Period of the parameter angle `θ`.
pub const PERIOD: f64 = TAU;

/// A point `(μ, λ)` of the parameter space, with `λ` stored as an angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub mu: i64,
    pub theta: f64,
}

impl ParamPoint {
    pub fn new(mu: i64, theta: f64) -> Self {
        let mut t = theta.rem_euclid(PERIOD);
        if t >= PERIOD {
            t -= PERIOD;
        }
        ParamPoint { mu, theta: t }
    }

    /// The nontrivial Weyl element: `(μ, λ) ↦ (−μ, −λ)`.
    pub fn weyl(&self) -> Self {
        Self::new(-self.mu, -self.theta)
    }
}

/// Truncated `Γ(E_μ)`: blocks `ν = |μ|, |μ|+2, …, ≤ N`, each spanned by
/// `u^ν_{i,j(ν)}` with `wt(j(ν)) = μ`.
#[derive(Clone, Debug)]
pub struct SectionSpaceModel {
    pub mu: i64,
    pub truncation: u32,
    pub layout: Arc<BlockLayout>,
    basis: Vec<CoeffKey>,
    index: HashMap<CoeffKey, usize>,
}

impl SectionSpaceModel {
    pub fn new(mu: i64, truncation: u32) -> Self {
        let spins: Vec<u32> = (mu.unsigned_abs() as u32..=truncation).step_by(2).collect();
        let layout = BlockLayout::new(
            spins.iter().map(|&nu| BlockLabel { key: vec![nu], spin: nu, dim: nu as usize + 1 }).collect(),
        );
        let mut basis = Vec::new();
        for &nu in &spins {
            let j = ((nu as i64 - mu) / 2) as u32;
            for i in 0..=nu {
                basis.push((nu, i, j));
            }
        }
        let index = basis.iter().enumerate().map(|(k, &b)| (b, k)).collect();
        SectionSpaceModel { mu, truncation, layout: Arc::new(layout), basis, index }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The matrix coefficient spanning basis vector `k`.
    pub fn basis_key(&self, k: usize) -> CoeffKey {
        self.basis[k]
    }

    pub fn index_of(&self, key: CoeffKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn spins(&self) -> impl Iterator<Item = u32> + '_ {
        self.layout.blocks().iter().map(|b| b.spin)
    }
}

/// A realized principal-series representation at one parameter point.
#[derive(Debug)]
pub struct ReprHandle<B: Backend> {
    pub param: ParamPoint,
    pub space: SectionSpaceModel,
    pub double: Arc<DoubleGroup<B>>,
    gram: Vec<B::F>,
    phases: HashMap<i64, B::F>,
    dual_cache: RwLock<HashMap<DualKey, Arc<Mat<B::F>>>>,
    fun_cache: RwLock<HashMap<CoeffKey, Arc<Mat<B::F>>>>,
}

impl<B: Backend> ReprHandle<B> {
    pub fn new(double: Arc<DoubleGroup<B>>, param: ParamPoint, truncation: u32) -> Result<Self> {
        let space = SectionSpaceModel::new(param.mu, truncation);
        let norms = l2_norms(&double.group, truncation)?;
        let gram = (0..space.dim()).map(|k| norms[&space.basis_key(k)].clone()).collect();
        let mut phases = HashMap::new();
        for w in -(2 * truncation as i64 + 2)..=(2 * truncation as i64 + 2) {
            let p = double.group.backend.phase(param.theta, w).ok_or_else(|| {
                Error::Config(format!("phase e^(i·{}·{w}) is not representable in this backend", param.theta))
            })?;
            phases.insert(w, p);
        }
        Ok(ReprHandle {
            param,
            space,
            double,
            gram,
            phases,
            dual_cache: RwLock::new(HashMap::new()),
            fun_cache: RwLock::new(HashMap::new()),
        })
    }

    /// `φ(ξ* ξ)` for each basis vector.
    pub fn gram(&self) -> &[B::F] {
        &self.gram
    }

    fn basis_dual_matrix(&self, x: DualKey) -> Result<Arc<Mat<B::F>>> {
        if let Some(m) = self.dual_cache.read().unwrap().get(&x) {
            return Ok(m.clone());
        }
        let g = &*self.double.group;
        let sx = dual_antipode(g, &DualElement::zero().with(x, B::F::one()))?;
        let d = self.space.dim();
        let mut m = Mat::zeros(d, d);
        for (b, label) in self.space.layout.blocks().iter().enumerate() {
            let nu = label.spin;
            if x.is_some_and(|k| k.0 != nu) {
                continue;
            }
            // x·u_{ij} = Σ_k [π_ν(Ŝx)]_{ik} u_{kj}
            let p = sx.block(nu);
            let off = self.space.layout.range(b).start;
            for i in 0..=nu as usize {
                for k in 0..=nu as usize {
                    m.set(off + k, off + i, p.get(i, k).clone());
                }
            }
        }
        let m = Arc::new(m);
        self.dual_cache.write().unwrap().insert(x, m.clone());
        Ok(m)
    }

    fn basis_fun_matrix(&self, f: CoeffKey) -> Result<Arc<Mat<B::F>>> {
        if let Some(m) = self.fun_cache.read().unwrap().get(&f) {
            return Ok(m.clone());
        }
        let d = self.double.as_ref();
        let g = &*d.group;
        let (beta, a, b) = f;
        let dim = self.space.dim();
        let mut m = Mat::zeros(dim, dim);
        // S(u^β_{cb}) for each c
        let antipodes: Vec<CoeffElement<B::F>> = (0..=beta)
            .map(|c| funalg::antipode(g, &CoeffElement::basis(beta, c, b)))
            .collect::<Result<_>>()?;
        for col in 0..dim {
            let xi = self.space.basis_key(col);
            let mut acc = CoeffElement::zero();
            for c in 0..=beta {
                let w = funalg::weight_of(beta, c);
                let tw = g.backend.q_pow(w as i32).mul_ref(&self.phases[&w]);
                let left = d.coeff_product((beta, a, c), xi)?;
                for (&lk, lc) in left.iter() {
                    for (&rk, rc) in antipodes[c as usize].iter() {
                        let prod = d.coeff_product(lk, rk)?;
                        let s = lc.mul_ref(rc).mul_ref(&tw);
                        acc = acc.add(&prod.scale(&s));
                    }
                }
            }
            for (&k, c) in acc.iter() {
                if k.0 > self.space.truncation {
                    continue;
                }
                let row = self.space.index_of(k).ok_or_else(|| {
                    Error::DimensionMismatch(format!("twisted adjoint action left Γ(E_μ): {k:?}"))
                })?;
                m.set(row, col, c.clone());
            }
        }
        let m = Arc::new(m);
        self.fun_cache.write().unwrap().insert(f, m.clone());
        Ok(m)
    }

    /// Matrix of `x·` in the basis `u^ν_{i,j(ν)}`; block diagonal.
    pub fn dual_matrix(&self, x: &DualElement<B::F>) -> Result<Mat<B::F>> {
        let d = self.space.dim();
        let mut m = Mat::zeros(d, d);
        for (&k, c) in x.iter() {
            m = m.add(&self.basis_dual_matrix(k)?.scale(c));
        }
        Ok(m)
    }

    /// Matrix of `f·` in the basis `u^ν_{i,j(ν)}`; columns with
    /// `ν ≤ N − 2·spin(f)` are exact.
    pub fn fun_matrix(&self, f: &CoeffElement<B::F>) -> Result<Mat<B::F>> {
        let d = self.space.dim();
        let mut m = Mat::zeros(d, d);
        for (&k, c) in f.iter() {
            m = m.add(&self.basis_fun_matrix(k)?.scale(c));
        }
        Ok(m)
    }

    /// `x·ξ` on coordinates in the basis `u^ν_{i,j(ν)}`.
    pub fn act_dual(&self, x: &DualElement<B::F>, xi: &[B::F]) -> Result<Vec<B::F>> {
        Ok(self.dual_matrix(x)?.apply(xi))
    }

    /// `f·ξ` on coordinates in the basis `u^ν_{i,j(ν)}`.
    pub fn act_fun(&self, f: &CoeffElement<B::F>, xi: &[B::F]) -> Result<Vec<B::F>> {
        Ok(self.fun_matrix(f)?.apply(xi))
    }

    /// Matrix of `a` in the basis `u^ν_{i,j(ν)}`, with its spin budget.
    pub fn represent_matrix(&self, a: &DoubleElement<B::F>) -> Result<(Mat<B::F>, u32)> {
        let d = self.space.dim();
        let mut m = Mat::zeros(d, d);
        for (&(x, f), c) in a.iter() {
            let dx = self.basis_dual_matrix(x)?;
            let ff = self.basis_fun_matrix(f)?;
            m = m.add(&dx.mul(&ff).scale(c));
        }
        Ok((m, 2 * a.coeff_spin()))
    }

    /// Hilbert-space adjoint of a matrix in the basis `u^ν_{i,j(ν)}`.
    pub fn adjoint(&self, m: &Mat<B::F>) -> Mat<B::F> {
        Mat::from_fn(m.cols, m.rows, |r, c| {
            m.get(c, r).conj().mul_ref(&self.gram[c]).div_ref(&self.gram[r])
        })
    }

    /// Basis indices of blocks with spin at most `s`.
    pub fn indices_up_to(&self, s: i64) -> Vec<usize> {
        self.space.layout.indices_up_to(s)
    }

    /// `a` as a block operator on the orthonormal basis, evaluating exact
    /// scalars at `q`.
    pub fn represent_at(&self, a: &DoubleElement<B::F>, q: f64) -> Result<BlockOperator> {
        let (m, budget) = self.represent_matrix(a)?;
        let norms: Vec<f64> = self.gram.iter().map(|g| g.eval(q).re.sqrt()).collect();
        let d = self.space.dim();
        let on = DMatrix::from_fn(d, d, |r, c| m.get(r, c).eval(q) * (norms[r] / norms[c]));
        Ok(BlockOperator::new(self.space.layout.clone(), self.space.truncation, budget, on))
    }
}

impl ReprHandle<Numeric> {
    /// `a` as a block operator on the orthonormal basis.
    pub fn represent(&self, a: &DoubleElement<crate::cartan::QNum>) -> Result<BlockOperator> {
        self.represent_at(a, self.double.group.backend.q)
    }
}

/// Outcome of [`weyl_equivalence`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntertwinerReport {
    /// Largest entry of `U π₁(a) − π₂(a) U` over probes, on window columns.
    pub residual: f64,
    /// Largest `|‖U_ν‖ − 1|` over window blocks, with `U` scaled so that the
    /// lowest block has unit norm.
    pub unitarity_defect: f64,
    /// Smallest singular value of the stacked system relative to the largest.
    pub relative_gap: f64,
    pub window_spin: i64,
}

/// Least-squares search for `U` with `U π₁(a) = π₂(a) U` for all probes, `U`
/// block diagonal over the common Peter–Weyl blocks.
pub fn weyl_equivalence(
    h1: &ReprHandle<Numeric>,
    h2: &ReprHandle<Numeric>,
    probes: &[DoubleElement<crate::cartan::QNum>],
) -> Result<IntertwinerReport> {
    if h1.space.layout.blocks().iter().map(|b| b.spin).ne(h2.space.layout.blocks().iter().map(|b| b.spin))
        || h1.space.truncation != h2.space.truncation
    {
        return Err(Error::WindowMismatch("the two section spaces have different blocks".into()));
    }
    let layout = h1.space.layout.clone();
    let ops: Vec<(BlockOperator, BlockOperator)> =
        probes.iter().map(|a| Ok((h1.represent(a)?, h2.represent(a)?))).collect::<Result<_>>()?;
    let budget = ops.iter().map(|(a, _)| a.budget).max().unwrap_or(0);
    let window = h1.space.truncation as i64 - budget as i64;
    // unknowns: entries of each diagonal block of U
    let mut unknowns = Vec::new();
    for b in 0..layout.blocks().len() {
        let r = layout.range(b);
        for i in r.clone() {
            for j in r.clone() {
                unknowns.push((i, j));
            }
        }
    }
    let cols = layout.indices_up_to(window);
    let n = layout.dim();
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (a1, a2) in &ops {
        // (U A1 − A2 U)[r, c] = Σ_x U[r,x] A1[x,c] − Σ_x A2[r,x] U[x,c]
        for &c in &cols {
            for r in 0..n {
                let mut row = vec![Complex64::new(0.0, 0.0); unknowns.len()];
                let mut any = false;
                for (u, &(i, j)) in unknowns.iter().enumerate() {
                    let mut v = Complex64::new(0.0, 0.0);
                    if i == r {
                        v += a1.matrix[(j, c)];
                    }
                    if j == c {
                        v -= a2.matrix[(r, i)];
                    }
                    if v != Complex64::new(0.0, 0.0) {
                        any = true;
                    }
                    row[u] = v;
                }
                if any {
                    rows.push(row);
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::SingularSolve("no equations".into()));
    }
    let sys = DMatrix::from_fn(rows.len(), unknowns.len(), |i, j| rows[i][j]);
    let svd = sys.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::SingularSolve("SVD failed".into()))?;
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    for (k, &(i, j)) in unknowns.iter().enumerate() {
        u[(i, j)] = v_t[(imin, k)].conj();
    }
    // scale so the lowest block has unit operator norm
    let first = layout.range(0);
    let u0 = u.view((first.start, first.start), (first.len(), first.len())).into_owned();
    let s0 = crate::linalg::op_norm(&u0);
    if s0 < 1e-300 {
        return Err(Error::SingularSolve("intertwiner vanishes on the lowest block".into()));
    }
    u /= Complex64::new(s0, 0.0);
    let mut residual = 0.0f64;
    for (a1, a2) in &ops {
        let d = &u * &a1.matrix - &a2.matrix * &u;
        residual = residual.max(max_abs(&d.select_columns(&cols)));
    }
    let mut defect = 0.0f64;
    for (b, l) in layout.blocks().iter().enumerate() {
        if l.spin as i64 > window {
            continue;
        }
        let r = layout.range(b);
        let ub = u.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let g = ub.adjoint() * &ub;
        defect = defect.max(max_abs(&(g - DMatrix::identity(r.len(), r.len()))));
    }
    Ok(IntertwinerReport { residual, unitarity_defect: defect, relative_gap: smin / smax.max(1e-300), window_spin: window })
}

/// Probe set: all `ω ⋈ 1` and `1 ⋈ u` with spins at most one.
pub fn probe_set<F: Field>() -> Vec<DoubleElement<F>> {
    let mut v = Vec::new();
    for key in crate::double::dual_basis(1) {
        v.push(DoubleElement::basis(key, (0, 0, 0)));
    }
    for key in crate::double::coeff_basis(1).into_iter().skip(1) {
        v.push(DoubleElement::basis(None, key));
    }
    v
}

/// Weight of the `n`-th minimal K-type (1-based) in the order `0, 1, 2, …`.
pub fn minimal_ktype(n: usize) -> u32 {
    assert!(n >= 1, "minimal K-types are indexed from 1");
    (n - 1) as u32
}

/// `p_n = ω^{μ_n}_{hh} ⋈ 1`, the projection onto the highest weight vector of
/// the `n`-th minimal K-type.
pub fn minimal_ktype_projection<F: Field>(n: usize) -> DoubleElement<F> {
    let mu = minimal_ktype(n);
    DoubleElement::basis(Some((mu, 0, 0)), (0, 0, 0))
}

/// Samples `θ ↦` the eigenvalue of `p_n π_{μ_n,θ}(a) p_n` on the rank-one
/// range of `π(p_n)`.
pub fn corner_function(
    double: &Arc<DoubleGroup<Numeric>>,
    n: usize,
    a: &DoubleElement<crate::cartan::QNum>,
    thetas: &[f64],
    truncation: u32,
) -> Result<Vec<Complex64>> {
    let mu = minimal_ktype(n) as i64;
    let p = minimal_ktype_projection(n);
    let mut out = Vec::with_capacity(thetas.len());
    for (k, &t) in thetas.iter().enumerate() {
        let h = ReprHandle::new(double.clone(), ParamPoint::new(mu, t), truncation)?;
        let pm = h.represent(&p)?;
        if numeric_rank(&pm.matrix, 1e-10) == 0 {
            return Err(Error::ZeroRankCorner(k));
        }
        // the range of π(p_n) is spanned by the highest weight vector of the μ-block
        let block = pm.layout.position(&[mu as u32]).ok_or(Error::ZeroRankCorner(k))?;
        let v = pm.layout.range(block).start;
        let am = h.represent(a)?;
        if (am.window_spin()) < mu {
            return Err(Error::TruncationExceeded { needed: mu as u32 + am.budget, available: truncation });
        }
        out.push(am.matrix[(v, v)]);
    }
    Ok(out)
}

/// CSV rows `theta,sigma,block,row,col,re,im` of `π_{μ,θ}(a)` at `q^σ` over
/// a grid.
pub fn sweep_csv(
    q: f64,
    mu: i64,
    truncation: u32,
    a: &DoubleElement<crate::cartan::QNum>,
    thetas: &[f64],
    sigmas: &[f64],
) -> Result<String> {
    use std::fmt::Write;
    let mut s = String::from("theta,sigma,block,row,col,re,im\n");
    for &sigma in sigmas {
        let qs = q.powf(sigma);
        let g = crate::qea::QGroup::new(Numeric::new(qs), truncation + 2 * a.coeff_spin() + 2);
        let d = Arc::new(DoubleGroup::new(g));
        for &t in thetas {
            let h = ReprHandle::new(d.clone(), ParamPoint::new(mu, t), truncation)?;
            let op = h.represent(a)?;
            for (b, l) in op.layout.blocks().iter().enumerate() {
                let r = op.layout.range(b);
                for i in r.clone() {
                    for j in 0..op.dim() {
                        let z = op.matrix[(i, j)];
                        if z.norm() > 0.0 {
                            writeln!(s, "{t},{sigma},{},{i},{j},{:e},{:e}", l.spin, z.re, z.im).unwrap();
                        }
                    }
                }
            }
        }
    }
    Ok(s)
}
