//! The discrete dual `𝒟(K_q)`, the Drinfeld double `𝒟(K_q) ⋈ 𝒞^∞(K_q)`,
//! dual Haar functionals and the truncated multiplicative unitary.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::block::{BlockLabel, BlockLayout, BlockOperator};
use crate::cartan::{Backend, Field, Numeric, QNum};
use crate::error::{Error, Result};
use crate::funalg::{self, CoeffElement, CoeffKey};
use crate::linalg::Mat;
use crate::qea::QGroup;

/// Basis label of `𝒟(K_q)` extended by the formal unit (`None`), which is
/// the multiplier `Σ_μ p_μ`.
pub type DualKey = Option<(u32, u32, u32)>;

/// Finite combination of matrix units `ω^ν_{ij}`, plus a multiple of the unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DualElement<F: Field> {
    terms: BTreeMap<DualKey, F>,
}

impl<F: Field> Default for DualElement<F> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<F: Field> DualElement<F> {
    pub fn zero() -> Self {
        DualElement { terms: BTreeMap::new() }
    }

    pub fn unit() -> Self {
        Self::zero().with(None, F::one())
    }

    pub fn basis(nu: u32, i: u32, j: u32) -> Self {
        assert!(i <= nu && j <= nu);
        Self::zero().with(Some((nu, i, j)), F::one())
    }

    /// Central projection `p_η = Σ_i ω^η_{ii}`.
    pub fn central_projection(eta: u32) -> Self {
        (0..=eta).fold(Self::zero(), |acc, i| acc.with(Some((eta, i, i)), F::one()))
    }

    pub fn with(mut self, key: DualKey, c: F) -> Self {
        self.add_term(key, c);
        self
    }

    pub fn add_term(&mut self, key: DualKey, c: F) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(F::zero);
        *e = e.add_ref(&c);
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DualKey, &F)> {
        self.terms.iter()
    }

    pub fn get(&self, key: DualKey) -> F {
        self.terms.get(&key).cloned().unwrap_or_else(F::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn unit_coefficient(&self) -> F {
        self.get(None)
    }

    pub fn max_spin(&self) -> u32 {
        self.terms.keys().filter_map(|k| k.map(|k| k.0)).max().unwrap_or(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (&k, c) in &o.terms {
            out.add_term(k, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &F) -> Self {
        let mut out = Self::zero();
        for (&k, x) in &self.terms {
            out.add_term(k, x.mul_ref(c));
        }
        out
    }

    /// `ω^μ_{ij} ω^ν_{kl} = δ_{μν} δ_{jk} ω^μ_{il}`.
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (&a, x) in &self.terms {
            for (&b, y) in &o.terms {
                let key = match (a, b) {
                    (None, k) | (k, None) => k,
                    (Some((m, i, j)), Some((n, k, l))) => {
                        if m != n || j != k {
                            continue;
                        }
                        Some((m, i, l))
                    }
                };
                out.add_term(key, x.mul_ref(y));
            }
        }
        out
    }

    /// `π_ν(x)` in the weight basis of `V(ν)`.
    pub fn block(&self, nu: u32) -> Mat<F> {
        let d = nu as usize + 1;
        let u = self.unit_coefficient();
        let mut m = Mat::identity(d).scale(&u);
        for (&k, c) in &self.terms {
            if let Some((n, i, j)) = k {
                if n == nu {
                    let v = m.get(i as usize, j as usize).add_ref(c);
                    m.set(i as usize, j as usize, v);
                }
            }
        }
        m
    }

    /// Element with the given block matrices.
    pub fn from_blocks(blocks: &[(u32, Mat<F>)]) -> Self {
        let mut out = Self::zero();
        for (nu, m) in blocks {
            for i in 0..m.rows {
                for j in 0..m.cols {
                    out.add_term(Some((*nu, i as u32, j as u32)), m.get(i, j).clone());
                }
            }
        }
        out
    }
}

/// `(x, f)`: `(ω^μ_{ij}, u^ν_{kl}) = δ_{μν}δ_{ik}δ_{jl}`, `(1, u_{kl}) = δ_{kl}`.
pub fn pair_dual<F: Field>(x: &DualElement<F>, f: &CoeffElement<F>) -> F {
    let mut acc = F::zero();
    for (&k, c) in x.iter() {
        let v = match k {
            None => funalg::counit(f),
            Some(key) => f.get(key),
        };
        acc = acc.add_ref(&c.mul_ref(&v));
    }
    acc
}

/// `(ω^μ_{ij})* = (G_ii / G_jj) ω^μ_{ji}` (the plain transpose in an orthonormal basis).
pub fn dual_star<B: Backend>(g: &QGroup<B>, x: &DualElement<B::F>) -> Result<DualElement<B::F>> {
    let mut out = DualElement::zero();
    for (&k, c) in x.iter() {
        match k {
            None => out.add_term(None, c.conj()),
            Some((nu, i, j)) => {
                let gr = &g.irrep(nu)?.gram;
                let w = gr[i as usize].div_ref(&gr[j as usize]);
                out.add_term(Some((nu, j, i)), c.conj().mul_ref(&w));
            }
        }
    }
    Ok(out)
}

/// `Ŝ(x)` on `𝒟(K_q)`: blockwise `J' π_ν(x)^T J'^{-1}`.
pub fn dual_antipode<B: Backend>(g: &QGroup<B>, x: &DualElement<B::F>) -> Result<DualElement<B::F>> {
    let mut out = DualElement::zero().with(None, x.unit_coefficient());
    let spins: Vec<u32> = {
        let mut s: Vec<u32> = x.iter().filter_map(|(k, _)| k.map(|k| k.0)).collect();
        s.dedup();
        s
    };
    for nu in spins {
        let v = g.irrep(nu)?;
        let mut only = DualElement::zero();
        for (&k, c) in x.iter() {
            if k.is_some_and(|k| k.0 == nu) {
                only.add_term(k, c.clone());
            }
        }
        let m = v.twist_transpose(&only.block(nu), false);
        out = out.add(&DualElement::from_blocks(&[(nu, m)]));
    }
    Ok(out)
}

/// Which dual Haar functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `φ̂`, twisted by `K_{2ρ}`.
    Left,
    /// `ψ̂`, twisted by `K_{-2ρ}`.
    Right,
}

/// `φ̂(x) = Σ_μ dim_q V(μ) tr(K_{2ρ} p_μ x)` (or `ψ̂` with `K_{-2ρ}`).
pub fn dual_haar<B: Backend>(g: &QGroup<B>, x: &DualElement<B::F>, side: Side) -> Result<B::F> {
    if !x.unit_coefficient().is_zero() {
        return Err(Error::DimensionMismatch("the dual Haar weights are infinite on the unit".into()));
    }
    let sign = if side == Side::Left { 1 } else { -1 };
    let b = &g.backend;
    let mut acc = B::F::zero();
    for (&k, c) in x.iter() {
        let (nu, i, j) = k.expect("unit excluded above");
        if i == j {
            let w = funalg::weight_of(nu, i) as i32;
            let t = b.q_int(nu as i64 + 1).mul_ref(&b.q_pow(sign * w));
            acc = acc.add_ref(&c.mul_ref(&t));
        }
    }
    Ok(acc)
}

/// Quantum dimension `Σ_i q^{wt(i)} = [ν+1]_q`.
pub fn quantum_dimension<B: Backend>(g: &QGroup<B>, nu: u32) -> B::F {
    let mut acc = B::F::zero();
    for i in 0..=nu {
        acc = acc.add_ref(&g.backend.q_pow(funalg::weight_of(nu, i) as i32));
    }
    acc
}

/// Basis label `ω ⋈ u` of the double.
pub type DoubleKey = (DualKey, CoeffKey);

/// Finite combination of `ω^μ_{ij} ⋈ u^ν_{kl}` (with the formal unit allowed on the left).
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleElement<F: Field> {
    terms: BTreeMap<DoubleKey, F>,
}

impl<F: Field> Default for DoubleElement<F> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<F: Field> DoubleElement<F> {
    pub fn zero() -> Self {
        DoubleElement { terms: BTreeMap::new() }
    }

    pub fn unit() -> Self {
        Self::zero().with((None, (0, 0, 0)), F::one())
    }

    pub fn basis(dual: DualKey, coeff: CoeffKey) -> Self {
        Self::zero().with((dual, coeff), F::one())
    }

    /// `x ⋈ f`.
    pub fn tensor(x: &DualElement<F>, f: &CoeffElement<F>) -> Self {
        let mut out = Self::zero();
        for (&a, c) in x.iter() {
            for (&b, d) in f.iter() {
                out.add_term((a, b), c.mul_ref(d));
            }
        }
        out
    }

    /// `x ⋈ 1`.
    pub fn from_dual(x: &DualElement<F>) -> Self {
        Self::tensor(x, &CoeffElement::unit())
    }

    /// `1 ⋈ f`.
    pub fn from_coeff(f: &CoeffElement<F>) -> Self {
        Self::tensor(&DualElement::unit(), f)
    }

    pub fn with(mut self, key: DoubleKey, c: F) -> Self {
        self.add_term(key, c);
        self
    }

    pub fn add_term(&mut self, key: DoubleKey, c: F) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(F::zero);
        *e = e.add_ref(&c);
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DoubleKey, &F)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (&k, c) in &o.terms {
            out.add_term(k, c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&F::from_i64(-1)))
    }

    pub fn scale(&self, c: &F) -> Self {
        let mut out = Self::zero();
        for (&k, x) in &self.terms {
            out.add_term(k, x.mul_ref(c));
        }
        out
    }

    /// Largest spin on the function-algebra leg.
    pub fn coeff_spin(&self) -> u32 {
        self.terms.keys().map(|k| k.1 .0).max().unwrap_or(0)
    }

    /// Largest spin on the dual leg.
    pub fn dual_spin(&self) -> u32 {
        self.terms.keys().filter_map(|k| k.0.map(|d| d.0)).max().unwrap_or(0)
    }
}

type Exchange<F> = Arc<Vec<(DualElement<F>, CoeffKey)>>;

/// The double of a [`QGroup`] with a cache of exchange relations.
#[derive(Debug)]
pub struct DoubleGroup<B: Backend> {
    pub group: Arc<QGroup<B>>,
    exchange_cache: RwLock<HashMap<(CoeffKey, DualKey), Exchange<B::F>>>,
    product_cache: RwLock<HashMap<(CoeffKey, CoeffKey), Arc<CoeffElement<B::F>>>>,
}

impl<B: Backend> DoubleGroup<B> {
    pub fn new(group: Arc<QGroup<B>>) -> Self {
        DoubleGroup { group, exchange_cache: RwLock::new(HashMap::new()), product_cache: RwLock::new(HashMap::new()) }
    }

    /// `u_a u_b` for basis coefficients, cached.
    pub fn coeff_product(&self, a: CoeffKey, b: CoeffKey) -> Result<Arc<CoeffElement<B::F>>> {
        if let Some(p) = self.product_cache.read().unwrap().get(&(a, b)) {
            return Ok(p.clone());
        }
        let p = Arc::new(funalg::multiply(
            &self.group,
            &CoeffElement::basis(a.0, a.1, a.2),
            &CoeffElement::basis(b.0, b.1, b.2),
        )?);
        self.product_cache.write().unwrap().insert((a, b), p.clone());
        Ok(p)
    }

    /// `(1 ⋈ u^β_{kl})(y ⋈ 1) = Σ (y_(1), u_{ka})(Ŝ(y_(3)), u_{bl}) y_(2) ⋈ u_{ab}`.
    pub fn exchange(&self, f: CoeffKey, y: DualKey) -> Result<Exchange<B::F>> {
        if let Some(e) = self.exchange_cache.read().unwrap().get(&(f, y)) {
            return Ok(e.clone());
        }
        let e = Arc::new(self.compute_exchange(f, y)?);
        self.exchange_cache.write().unwrap().insert((f, y), e.clone());
        Ok(e)
    }

    fn compute_exchange(&self, (beta, k, l): CoeffKey, y: DualKey) -> Result<Vec<(DualElement<B::F>, CoeffKey)>> {
        let g = &*self.group;
        let Some((alpha, a, b)) = y else {
            return Ok(vec![(DualElement::unit(), (beta, k, l))]);
        };
        if beta == 0 {
            return Ok(vec![(DualElement::basis(alpha, a, b), (0, 0, 0))]);
        }
        let vb = g.irrep(beta)?;
        let (jp, jpinv) = &vb.theta;
        let bd = beta as usize + 1;
        let wt = |nu: u32, i: u32| funalg::weight_of(nu, i);
        // Components of Y_{a'b'} keyed by (a', b').
        let mut parts: BTreeMap<(u32, u32), DualElement<B::F>> = BTreeMap::new();
        let s_l = beta - l;
        let jinv = jpinv.get(s_l as usize, l as usize).clone();
        let lo = alpha.saturating_sub(2 * beta);
        for gamma in (lo..=alpha + 2 * beta).filter(|gm| (gm + alpha) % 2 == 0) {
            if gamma > g.max_spin() {
                return Err(Error::TruncationExceeded { needed: gamma, available: g.max_spin() });
            }
            let gd = gamma as usize + 1;
            // middle index c of the row fixed by weight conservation
            let wc = wt(alpha, a) - wt(beta, k) - wt(beta, s_l);
            if wc.abs() > gamma as i64 || (gamma as i64 - wc) % 2 != 0 {
                continue;
            }
            let c = ((gamma as i64 - wc) / 2) as u32;
            let cg1 = g.cg.get(g, beta, gamma)?;
            for s1 in &cg1.summands {
                let r = s1.p;
                if alpha + beta < r || alpha + r < beta || r + beta < alpha {
                    continue;
                }
                let cg2 = g.cg.get(g, r, beta)?;
                let Some(s2) = cg2.summand(alpha) else { continue };
                // x_r[(k, c, s_l)] = Σ_t ι1[(k,c), t] ι2[(t, s_l), a]
                let mut xv = B::F::zero();
                for t in 0..=r as usize {
                    let i1 = s1.iota.get(k as usize * gd + c as usize, t);
                    if i1.is_zero() {
                        continue;
                    }
                    let i2 = s2.iota.get(t * bd + s_l as usize, a as usize);
                    xv = xv.add_ref(&i1.mul_ref(i2));
                }
                if xv.is_zero() {
                    continue;
                }
                let xv = xv.mul_ref(&jinv);
                for ap in 0..=beta {
                    for bp in 0..=beta {
                        let rp = beta - bp;
                        let wd = wt(alpha, b) - wt(beta, ap) - wt(beta, rp);
                        if wd.abs() > gamma as i64 || (gamma as i64 - wd) % 2 != 0 {
                            continue;
                        }
                        let d = ((gamma as i64 - wd) / 2) as u32;
                        // y_r[(a', d, r')] = Σ_t P2[b, (t, r')] P1[t, (a', d)]
                        let mut yv = B::F::zero();
                        for t in 0..=r as usize {
                            let p2 = s2.proj.get(b as usize, t * bd + rp as usize);
                            if p2.is_zero() {
                                continue;
                            }
                            let p1 = s1.proj.get(t, ap as usize * gd + d as usize);
                            yv = yv.add_ref(&p2.mul_ref(p1));
                        }
                        if yv.is_zero() {
                            continue;
                        }
                        let val = xv.mul_ref(&yv).mul_ref(jp.get(bp as usize, rp as usize));
                        parts.entry((ap, bp)).or_default().add_term(Some((gamma, c, d)), val);
                    }
                }
            }
        }
        Ok(parts
            .into_iter()
            .filter(|(_, y)| !y.is_zero())
            .map(|((ap, bp), y)| (y, (beta, ap, bp)))
            .collect())
    }

    /// `(x ⋈ f)(y ⋈ g) = x (y_(1), f_(1)) y_(2) ⋈ f_(2) (Ŝ(y_(3)), f_(3)) g`.
    pub fn multiply(&self, a: &DoubleElement<B::F>, b: &DoubleElement<B::F>) -> Result<DoubleElement<B::F>> {
        let mut out = DoubleElement::zero();
        for (&(x, f), c1) in a.iter() {
            let xe = DualElement::zero().with(x, B::F::one());
            for (&(y, h), c2) in b.iter() {
                let c = c1.mul_ref(c2);
                for (yy, ff) in self.exchange(f, y)?.iter() {
                    let left = xe.mul(yy);
                    if left.is_zero() {
                        continue;
                    }
                    let right = self.coeff_product(*ff, h)?;
                    for (&lk, lc) in left.iter() {
                        let lc = lc.mul_ref(&c);
                        for (&rk, rc) in right.iter() {
                            out.add_term((lk, rk), lc.mul_ref(rc));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(x ⋈ f)* = (1 ⋈ f*)(x* ⋈ 1)`.
    pub fn star(&self, a: &DoubleElement<B::F>) -> Result<DoubleElement<B::F>> {
        let g = &*self.group;
        let mut out = DoubleElement::zero();
        for (&(x, f), c) in a.iter() {
            let xs = dual_star(g, &DualElement::zero().with(x, B::F::one()))?;
            let fs = funalg::star(g, &CoeffElement::basis(f.0, f.1, f.2))?;
            let prod = self.multiply(&DoubleElement::from_coeff(&fs), &DoubleElement::from_dual(&xs))?;
            out = out.add(&prod.scale(&c.conj()));
        }
        Ok(out)
    }
}

/// `φ_{G_q}(f ⊗ x) = φ(f) ψ̂(x)` on the function-algebra side, where a
/// basis label `(x, f)` is read as `f ⊗ x`.
pub fn haar_double<B: Backend>(g: &QGroup<B>, a: &DoubleElement<B::F>) -> Result<B::F> {
    let mut acc = B::F::zero();
    for (&(x, f), c) in a.iter() {
        if f != (0, 0, 0) {
            continue;
        }
        let psi = dual_haar(g, &DualElement::zero().with(x, B::F::one()), Side::Right)?;
        acc = acc.add_ref(&c.mul_ref(&psi));
    }
    Ok(acc)
}

/// Product in the function-algebra side model `𝒞^∞(K_q) ⊗ 𝒟(K_q)`
/// (componentwise in both legs).
pub fn function_side_multiply<B: Backend>(
    g: &QGroup<B>,
    a: &DoubleElement<B::F>,
    b: &DoubleElement<B::F>,
) -> Result<DoubleElement<B::F>> {
    let mut out = DoubleElement::zero();
    for (&(x, f), c1) in a.iter() {
        for (&(y, h), c2) in b.iter() {
            let xy = DualElement::zero().with(x, B::F::one()).mul(&DualElement::zero().with(y, B::F::one()));
            if xy.is_zero() {
                continue;
            }
            let fh = funalg::multiply(g, &CoeffElement::basis(f.0, f.1, f.2), &CoeffElement::basis(h.0, h.1, h.2))?;
            out = out.add(&DoubleElement::tensor(&xy, &fh).scale(&c1.mul_ref(c2)));
        }
    }
    Ok(out)
}

/// Componentwise star in the function-algebra side model.
pub fn function_side_star<B: Backend>(g: &QGroup<B>, a: &DoubleElement<B::F>) -> Result<DoubleElement<B::F>> {
    let mut out = DoubleElement::zero();
    for (&(x, f), c) in a.iter() {
        let xs = dual_star(g, &DualElement::zero().with(x, B::F::one()))?;
        let fs = funalg::star(g, &CoeffElement::basis(f.0, f.1, f.2))?;
        out = out.add(&DoubleElement::tensor(&xs, &fs).scale(&c.conj()));
    }
    Ok(out)
}

/// Outcome of [`associativity_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct AssociativityReport {
    pub checked: usize,
    pub failures: Vec<(CoeffKey, DualKey, CoeffKey, DualKey)>,
    pub max_residual: f64,
}

/// Compares `((1⋈f₁)(x₂⋈f₂))(x₃⋈1)` with `(1⋈f₁)((x₂⋈f₂)(x₃⋈1))` over all
/// basis labels of spin at most `max`.
///
/// Left multiplication by `x⋈1` and right multiplication by `1⋈g` act on one
/// leg only, so these quadruples decide associativity on all basis triples
/// `(x₁⋈f₁, x₂⋈f₂, x₃⋈f₃)`. The residual is the largest coefficient of the
/// difference evaluated at `q`.
pub fn associativity_check<B: Backend>(d: &DoubleGroup<B>, max: u32, q: f64) -> Result<AssociativityReport> {
    let cb = coeff_basis(max);
    let db = dual_basis(max);
    let mut right: HashMap<(DualKey, CoeffKey, DualKey), DoubleElement<B::F>> = HashMap::new();
    for &x2 in &db {
        for &f2 in &cb {
            for &x3 in &db {
                let r = d.multiply(&DoubleElement::basis(x2, f2), &DoubleElement::basis(x3, (0, 0, 0)))?;
                right.insert((x2, f2, x3), r);
            }
        }
    }
    let mut report = AssociativityReport { checked: 0, failures: Vec::new(), max_residual: 0.0 };
    for &f1 in &cb {
        let a = DoubleElement::basis(None, f1);
        for &x2 in &db {
            for &f2 in &cb {
                let ab = d.multiply(&a, &DoubleElement::basis(x2, f2))?;
                for &x3 in &db {
                    let lhs = d.multiply(&ab, &DoubleElement::basis(x3, (0, 0, 0)))?;
                    let rhs = d.multiply(&a, &right[&(x2, f2, x3)])?;
                    let diff = lhs.sub(&rhs);
                    report.checked += 1;
                    if !diff.is_zero() {
                        let r = diff.iter().map(|(_, c)| c.eval(q).norm()).fold(0.0, f64::max);
                        report.max_residual = report.max_residual.max(r);
                        report.failures.push((f1, x2, f2, x3));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Squared `L²` norms `φ((u^ν_{ij})* u^ν_{ij})` for spins up to `max`.
pub fn l2_norms<B: Backend>(g: &QGroup<B>, max: u32) -> Result<HashMap<CoeffKey, B::F>> {
    let mut out = HashMap::new();
    for key in coeff_basis(max) {
        let u = CoeffElement::basis(key.0, key.1, key.2);
        let us = funalg::star(g, &u)?;
        out.insert(key, funalg::haar_state(&funalg::multiply(g, &us, &u)?));
    }
    Ok(out)
}

/// Sparse vector in a tensor power of `L²(K_q)`, in the (unnormalized)
/// matrix-coefficient basis.
pub type TensorVector<F> = BTreeMap<Vec<CoeffKey>, F>;

/// Applies `W = Σ λ(u^μ_{ab}) ⊗ λ̂(ω^μ_{ab})` to legs `(first, second)` of
/// `v`, where `λ` is left multiplication and `λ̂(x) g = (Ŝ(x), g_(1)) g_(2)`.
///
/// Since `π_ν(Ŝ(ω_{ab})) = J' E_{ba} J'^{-1}` with `J'` antidiagonal,
/// `λ̂(ω_{ab}) u_{kl} = δ_{k,ν−b} J'_{ν−b,b} J'^{-1}_{a,ν−a} u_{ν−a,l}`.
pub fn apply_multiplicative_unitary<B: Backend>(
    d: &DoubleGroup<B>,
    v: &TensorVector<B::F>,
    first: usize,
    second: usize,
) -> Result<TensorVector<B::F>> {
    let mut out: TensorVector<B::F> = BTreeMap::new();
    for (key, c) in v {
        let (nu, k, l) = key[second];
        let (jp, jpinv) = &d.group.irrep(nu)?.theta;
        let b = nu - k;
        let jb = jp.get(k as usize, b as usize);
        for a in 0..=nu {
            let w = jb.mul_ref(jpinv.get(a as usize, (nu - a) as usize)).mul_ref(c);
            let prod = d.coeff_product((nu, a, b), key[first])?;
            for (&pk, pc) in prod.iter() {
                let mut nk = key.clone();
                nk[first] = pk;
                nk[second] = (nu, nu - a, l);
                let e = out.entry(nk).or_insert_with(B::F::zero);
                *e = e.add_ref(&pc.mul_ref(&w));
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

/// Block layout of `L²(K_q)^{⊗legs}` truncated at spin `n` in each leg, with
/// the orthonormal basis `u^ν_{ij}/‖u^ν_{ij}‖` ordered lexicographically.
pub fn l2_tensor_layout(n: u32, legs: usize) -> (BlockLayout, Vec<Vec<CoeffKey>>) {
    let mut spins: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..legs {
        spins = spins
            .into_iter()
            .flat_map(|s| (0..=n).map(move |nu| [s.clone(), vec![nu]].concat()))
            .collect();
    }
    let mut blocks = Vec::new();
    let mut keys = Vec::new();
    for s in spins {
        let mut ks: Vec<Vec<CoeffKey>> = vec![vec![]];
        for &nu in &s {
            ks = ks
                .into_iter()
                .flat_map(|k| {
                    (0..=nu).flat_map(move |i| {
                        let k = k.clone();
                        (0..=nu).map(move |j| [k.clone(), vec![(nu, i, j)]].concat())
                    })
                })
                .collect();
        }
        blocks.push(BlockLabel { spin: s.iter().sum(), dim: ks.len(), key: s });
        keys.extend(ks);
    }
    (BlockLayout::new(blocks), keys)
}

/// The multiplicative unitary on `L²(K_q) ⊗ L²(K_q)` truncated at spin `n`
/// per leg. Columns of blocks with `ν₁ + ν₂ ≤ n` are exact.
pub fn multiplicative_unitary(d: &DoubleGroup<Numeric>, n: u32) -> Result<BlockOperator> {
    let g = &*d.group;
    if g.max_spin() < 2 * n {
        return Err(Error::TruncationExceeded { needed: 2 * n, available: g.max_spin() });
    }
    let norms: HashMap<CoeffKey, f64> =
        l2_norms(g, n)?.into_iter().map(|(k, v)| (k, v.0.re.sqrt())).collect();
    let (layout, keys) = l2_tensor_layout(n, 2);
    let index: HashMap<&Vec<CoeffKey>, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let dim = keys.len();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, key) in keys.iter().enumerate() {
        let scale = 1.0 / (norms[&key[0]] * norms[&key[1]]);
        let v: TensorVector<QNum> = [(key.clone(), QNum(Complex64::new(scale, 0.0)))].into();
        for (k, c) in apply_multiplicative_unitary(d, &v, 0, 1)? {
            if let Some(&row) = index.get(&k) {
                m[(row, col)] = c.0 * norms[&k[0]] * norms[&k[1]];
            }
        }
    }
    Ok(BlockOperator::new(Arc::new(layout), n, 0, m))
}

/// Largest deviation of `W₁₂W₁₃W₂₃` from `W₂₃W₁₂` on the orthonormal basis
/// vectors of `L²(K_q)^{⊗3}` whose spins satisfy `ν₁ + ν₂ + 2ν₃ ≤ n`, where
/// no intermediate leg exceeds spin `n`.
pub fn pentagon_residual(d: &DoubleGroup<Numeric>, n: u32) -> Result<f64> {
    let g = &*d.group;
    let norms: HashMap<CoeffKey, f64> =
        l2_norms(g, n)?.into_iter().map(|(k, v)| (k, v.0.re.sqrt())).collect();
    let (_, keys) = l2_tensor_layout(n, 3);
    let mut worst = 0.0f64;
    for key in keys {
        if key[0].0 + key[1].0 + 2 * key[2].0 > n {
            continue;
        }
        let scale = 1.0 / key.iter().map(|k| norms[k]).product::<f64>();
        let v: TensorVector<QNum> = [(key.clone(), QNum(Complex64::new(scale, 0.0)))].into();
        let lhs = apply_multiplicative_unitary(d, &v, 1, 2)?;
        let lhs = apply_multiplicative_unitary(d, &lhs, 0, 2)?;
        let lhs = apply_multiplicative_unitary(d, &lhs, 0, 1)?;
        let rhs = apply_multiplicative_unitary(d, &v, 0, 1)?;
        let rhs = apply_multiplicative_unitary(d, &rhs, 1, 2)?;
        let mut diff = lhs;
        for (k, c) in rhs {
            let e = diff.entry(k).or_insert_with(QNum::zero);
            *e = e.sub_ref(&c);
        }
        for (k, c) in diff {
            let w = c.0.norm() * k.iter().map(|x| norms[x]).product::<f64>();
            worst = worst.max(w);
        }
    }
    Ok(worst)
}

/// All basis labels of `𝒟(K_q)` with spin at most `max` (no unit).
pub fn dual_basis(max: u32) -> Vec<DualKey> {
    let mut v = Vec::new();
    for nu in 0..=max {
        for i in 0..=nu {
            for j in 0..=nu {
                v.push(Some((nu, i, j)));
            }
        }
    }
    v
}

/// All matrix-coefficient labels with spin at most `max`.
pub fn coeff_basis(max: u32) -> Vec<CoeffKey> {
    let mut v = Vec::new();
    for nu in 0..=max {
        for i in 0..=nu {
            for j in 0..=nu {
                v.push((nu, i, j));
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::{Exact, Numeric, QExact};

    #[test]
    fn matrix_units() {
        let a = DualElement::<QExact>::basis(1, 0, 1);
        let b = DualElement::<QExact>::basis(1, 1, 0);
        assert_eq!(a.mul(&b), DualElement::basis(1, 0, 0));
        assert!(b.mul(&DualElement::basis(2, 0, 0)).is_zero());
        assert_eq!(DualElement::<QExact>::unit().mul(&a), a);
        let f = CoeffElement::<QExact>::basis(1, 0, 1);
        assert_eq!(pair_dual(&a, &f), QExact::from_i64(1));
        assert!(pair_dual(&b, &f).is_zero());
    }

    #[test]
    fn dual_haar_values() {
        let g = QGroup::new(Numeric::new(0.5), 2);
        let p0 = DualElement::central_projection(0);
        assert!((dual_haar(&g, &p0, Side::Left).unwrap().0.re - 1.0).abs() < 1e-15);
        assert!((quantum_dimension(&g, 1).0.re - 2.5).abs() < 1e-15);
        assert_eq!(dual_haar(&g, &DualElement::basis(1, 0, 1), Side::Left).unwrap().0.norm(), 0.0);
        assert!(dual_haar(&g, &DualElement::unit(), Side::Left).is_err());
    }

    #[test]
    fn trivial_products() {
        let d = DoubleGroup::new(QGroup::new(Exact, 4));
        let x = DualElement::<QExact>::basis(1, 0, 1);
        let y = DualElement::<QExact>::basis(1, 1, 1);
        let lhs = d.multiply(&DoubleElement::from_dual(&x), &DoubleElement::from_dual(&y)).unwrap();
        assert_eq!(lhs, DoubleElement::from_dual(&x.mul(&y)));
        let f = CoeffElement::<QExact>::basis(1, 0, 1);
        let h = CoeffElement::<QExact>::basis(1, 1, 1);
        let lhs = d.multiply(&DoubleElement::from_coeff(&f), &DoubleElement::from_coeff(&h)).unwrap();
        assert_eq!(lhs, DoubleElement::from_coeff(&funalg::multiply(&d.group, &f, &h).unwrap()));
        let lhs = d.multiply(&DoubleElement::from_dual(&x), &DoubleElement::from_coeff(&f)).unwrap();
        assert_eq!(lhs, DoubleElement::tensor(&x, &f));
    }

    #[test]
    fn star_is_involutive() {
        let d = DoubleGroup::new(QGroup::new(Exact, 6));
        let a = DoubleElement::<QExact>::basis(Some((1, 0, 1)), (1, 0, 0));
        let s = d.star(&a).unwrap();
        assert_eq!(d.star(&s).unwrap(), a);
    }

    #[test]
    fn unit_pairs_with_counit() {
        let f = CoeffElement::<QExact>::basis(2, 1, 1).with(2, 0, 1, QExact::from_i64(5));
        assert_eq!(pair_dual(&DualElement::unit(), &f), QExact::from_i64(1));
    }

    #[test]
    fn multiplicative_unitary_on_window() {
        let d = DoubleGroup::new(QGroup::new(Numeric::new(0.5), 6));
        let w0 = multiplicative_unitary(&d, 0).unwrap();
        assert!((w0.matrix[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let w = multiplicative_unitary(&d, 3).unwrap();
        let ww = w.adjoint().mul(&w).unwrap();
        let id = BlockOperator::identity(w.layout.clone(), 3);
        let idx = w.layout.indices_up_to(3);
        let res = (&ww.matrix - &id.matrix).select_rows(&idx).select_columns(&idx);
        assert!(crate::linalg::max_abs(&res) < 1e-12);
        assert!(pentagon_residual(&d, 3).unwrap() < 1e-12);
    }
}
