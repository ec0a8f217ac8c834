//! The Hopf *-algebra of matrix coefficients `u^ν_{ij}` of SU_q(2).
//!
//! The product is dual to the coproduct of U_q with the order of the tensor
//! legs reversed, `(X, fg) = (X_(2), f)(X_(1), g)`, and is computed from
//! Clebsch–Gordan decompositions of `V(n)⊗V(m)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use crate::cartan::{Backend, Field, QExact, QNum};
use crate::error::{Error, Result};
use crate::linalg::{nullspace, Mat};
use crate::qea::QGroup;

/// Basis label `(ν, i, j)` of `u^ν_{ij}`.
pub type CoeffKey = (u32, u32, u32);

/// Finite linear combination of matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffElement<F: Field> {
    terms: BTreeMap<CoeffKey, F>,
}

impl<F: Field> Default for CoeffElement<F> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<F: Field> CoeffElement<F> {
    pub fn zero() -> Self {
        CoeffElement { terms: BTreeMap::new() }
    }

    /// The unit `u^0_{00}`.
    pub fn unit() -> Self {
        Self::basis(0, 0, 0)
    }

    pub fn basis(nu: u32, i: u32, j: u32) -> Self {
        assert!(i <= nu && j <= nu, "index out of range for spin {nu}");
        Self::zero().with(nu, i, j, F::one())
    }

    /// Add `c·u^ν_{ij}`.
    pub fn with(mut self, nu: u32, i: u32, j: u32, c: F) -> Self {
        self.add_term((nu, i, j), c);
        self
    }

    pub fn add_term(&mut self, key: CoeffKey, c: F) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(F::zero);
        *e = e.add_ref(&c);
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CoeffKey, &F)> {
        self.terms.iter()
    }

    pub fn get(&self, key: CoeffKey) -> F {
        self.terms.get(&key).cloned().unwrap_or_else(F::zero)
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

    pub fn max_spin(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
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

    /// Drop coefficients below `tol` in modulus (numeric clean-up).
    pub fn chop(&self, q: f64, tol: f64) -> Self {
        let mut out = self.clone();
        out.terms.retain(|_, c| c.eval(q).norm() > tol);
        out
    }
}

/// Element of the algebraic tensor square, keyed by basis pairs.
pub type TensorCoeff<F> = BTreeMap<(CoeffKey, CoeffKey), F>;

/// One summand `V(p) ⊂ V(m)⊗V(n)`: the intertwiner `ι` (columns are the
/// images of the weight basis of `V(p)`) and its left inverse `P`.
#[derive(Clone, Debug)]
pub struct CgSummand<F> {
    pub p: u32,
    pub iota: Mat<F>,
    pub proj: Mat<F>,
}

/// Decomposition of `V(m)⊗V(n)`, tensor index `a·(n+1) + b`.
#[derive(Clone, Debug)]
pub struct CgEntry<F> {
    pub m: u32,
    pub n: u32,
    pub summands: Vec<CgSummand<F>>,
}

impl<F: Field> CgEntry<F> {
    pub fn summand(&self, p: u32) -> Option<&CgSummand<F>> {
        self.summands.iter().find(|s| s.p == p)
    }
}

/// Cache of Clebsch–Gordan decompositions, filled on first use.
#[derive(Debug, Default)]
pub struct CGTable<F> {
    entries: RwLock<HashMap<(u32, u32), Arc<CgEntry<F>>>>,
}

impl<F: Field> CGTable<F> {
    pub fn new() -> Self {
        CGTable { entries: RwLock::new(HashMap::new()) }
    }

    pub fn get<B: Backend<F = F>>(&self, g: &QGroup<B>, m: u32, n: u32) -> Result<Arc<CgEntry<F>>> {
        if let Some(e) = self.entries.read().unwrap().get(&(m, n)) {
            return Ok(e.clone());
        }
        let e = Arc::new(cg_decompose(g, m, n)?);
        self.entries.write().unwrap().entry((m, n)).or_insert(e.clone());
        Ok(e)
    }
}

/// Decompose `V(m)⊗V(n)` under the coproduct action.
///
/// Highest-weight vectors come from the kernel of `Δ(E)` on each weight
/// space, normalized so the coefficient of `v_0⊗v_j` is 1 (exact) or
/// positive with unit norm (numeric); lower vectors follow by applying `Δ(F)`.
pub fn cg_decompose<B: Backend>(g: &QGroup<B>, m: u32, n: u32) -> Result<CgEntry<B::F>> {
    let vm = g.irrep(m)?;
    let vn = g.irrep(n)?;
    let b = &g.backend;
    let (dm, dn) = (m as usize + 1, n as usize + 1);
    let de = vm.e.kron(&vn.k_power(1)).add(&vm.k_power(-1).kron(&vn.e));
    let df = vm.f.kron(&vn.k_power(1)).add(&vm.k_power(-1).kron(&vn.f));
    let gram: Vec<B::F> = (0..dm * dn).map(|t| vm.gram[t / dn].mul_ref(&vn.gram[t % dn])).collect();
    let level = |j: usize| -> Vec<usize> {
        (j.saturating_sub(n as usize)..=j.min(m as usize)).map(|a| a * dn + (j - a)).collect()
    };
    let mut summands = Vec::new();
    for j in 0..=(m.min(n) as usize) {
        let p = m + n - 2 * j as u32;
        let cols = level(j);
        let top_idx = cols[0];
        let mut w = vec![B::F::zero(); dm * dn];
        if j == 0 {
            w[top_idx] = B::F::one();
        } else {
            let sub = de.select(&level(j - 1), &cols);
            let ker = nullspace(&sub);
            if ker.len() != 1 {
                return Err(Error::SingularSolve(format!("highest-weight space of V({m})⊗V({n}) at level {j}")));
            }
            for (c, x) in cols.iter().zip(&ker[0]) {
                w[*c] = x.clone();
            }
        }
        let top = w[top_idx].clone();
        let norm = if b.unitarized() {
            let mut n2 = B::F::zero();
            for (x, gx) in w.iter().zip(&gram) {
                n2 = n2.add_ref(&x.conj().mul_ref(x).mul_ref(gx));
            }
            let phase = top.div_ref(&top.mul_ref(&top.conj()).sqrt().expect("sqrt"));
            phase.mul_ref(&n2.sqrt().expect("sqrt"))
        } else {
            top
        };
        let inv = norm.try_inv().ok_or_else(|| Error::NotInvertible(format!("{norm:?}")))?;
        w.iter_mut().for_each(|x| *x = x.mul_ref(&inv));
        let pd = p as usize + 1;
        let mut iota = Mat::zeros(dm * dn, pd);
        for (t, x) in w.iter().enumerate() {
            iota.set(t, 0, x.clone());
        }
        for k in 0..p as usize {
            let kk = k as i64;
            let c = if b.unitarized() {
                b.q_int(kk + 1).mul_ref(&b.q_int(p as i64 - kk)).sqrt().expect("sqrt")
            } else {
                b.q_int(kk + 1)
            };
            let cinv = c.try_inv().ok_or_else(|| Error::NotInvertible(format!("{c:?}")))?;
            w = df.apply(&w).into_iter().map(|x| x.mul_ref(&cinv)).collect();
            for (t, x) in w.iter().enumerate() {
                iota.set(t, k + 1, x.clone());
            }
        }
        let gram_p: Vec<B::F> = if b.unitarized() {
            vec![B::F::one(); pd]
        } else {
            (0..pd as i64).map(|k| b.q_binomial(p as i64, k)).collect()
        };
        let sharp = Mat::from_fn(pd, dm * dn, |k, t| iota.get(t, k).conj().mul_ref(&gram[t]).div_ref(&gram_p[k]));
        let c = {
            let mut acc = B::F::zero();
            for t in 0..dm * dn {
                acc = acc.add_ref(&sharp.get(0, t).mul_ref(iota.get(t, 0)));
            }
            acc
        };
        let cinv = c.try_inv().ok_or_else(|| Error::NotInvertible(format!("CG norm {c:?}")))?;
        summands.push(CgSummand { p, iota, proj: sharp.scale(&cinv) });
    }
    Ok(CgEntry { m, n, summands })
}

/// Product of matrix coefficients.
pub fn multiply<B: Backend>(g: &QGroup<B>, f: &CoeffElement<B::F>, h: &CoeffElement<B::F>) -> Result<CoeffElement<B::F>> {
    let mut out = CoeffElement::zero();
    for (&(m, i, j), x) in f.iter() {
        for (&(n, k, l), y) in h.iter() {
            let xy = x.mul_ref(y);
            if m == 0 || n == 0 {
                let key = if m == 0 { (n, k, l) } else { (m, i, j) };
                out.add_term(key, xy);
                continue;
            }
            let cg = g.cg.get(g, n, m)?;
            let row = (k * (m + 1) + i) as usize;
            let col = (l * (m + 1) + j) as usize;
            for s in &cg.summands {
                let shift = (m + n - s.p) / 2;
                let (Some(a), Some(bb)) = ((k + i).checked_sub(shift), (l + j).checked_sub(shift)) else { continue };
                if a > s.p || bb > s.p {
                    continue;
                }
                let c = s.iota.get(row, a as usize).mul_ref(s.proj.get(bb as usize, col));
                if !c.is_zero() {
                    out.add_term((s.p, a, bb), xy.mul_ref(&c));
                }
            }
        }
    }
    Ok(out)
}

/// `Δ(u^ν_{ij}) = Σ_k u^ν_{ik}⊗u^ν_{kj}`.
pub fn coproduct<F: Field>(f: &CoeffElement<F>) -> TensorCoeff<F> {
    let mut out = TensorCoeff::new();
    for (&(nu, i, j), c) in f.iter() {
        for k in 0..=nu {
            out.insert(((nu, i, k), (nu, k, j)), c.clone());
        }
    }
    out
}

/// `ε(u^ν_{ij}) = δ_ij`.
pub fn counit<F: Field>(f: &CoeffElement<F>) -> F {
    let mut acc = F::zero();
    for (&(_, i, j), c) in f.iter() {
        if i == j {
            acc = acc.add_ref(c);
        }
    }
    acc
}

/// The Haar state: the coefficient of the unit.
pub fn haar_state<F: Field>(f: &CoeffElement<F>) -> F {
    f.get((0, 0, 0))
}

/// `S(u_{ij}) = Σ J_{ik} (J^{-1})_{lj} u_{lk}` where `π(Ŝ^{-1}X) = J π(X)^T J^{-1}`.
pub fn antipode<B: Backend>(g: &QGroup<B>, f: &CoeffElement<B::F>) -> Result<CoeffElement<B::F>> {
    let mut out = CoeffElement::zero();
    for (&(nu, i, j), c) in f.iter() {
        let v = g.irrep(nu)?;
        let (jm, jinv) = &v.theta_inv;
        let (k, l) = (nu - i, nu - j);
        let coef = jm.get(i as usize, k as usize).mul_ref(jinv.get(l as usize, j as usize));
        out.add_term((nu, l, k), c.mul_ref(&coef));
    }
    Ok(out)
}

/// `(c u_{ij})* = c̄ (G_jj / G_ii) S(u_{ji})`.
pub fn star<B: Backend>(g: &QGroup<B>, f: &CoeffElement<B::F>) -> Result<CoeffElement<B::F>> {
    let mut out = CoeffElement::zero();
    for (&(nu, i, j), c) in f.iter() {
        let v = g.irrep(nu)?;
        let w = v.gram[j as usize].div_ref(&v.gram[i as usize]);
        let s = antipode(g, &CoeffElement::basis(nu, j, i))?;
        out = out.add(&s.scale(&c.conj().mul_ref(&w)));
    }
    Ok(out)
}

/// Restriction to the torus: `π_T(u^ν_{ij}) = δ_ij z^{ν-2i}`.
pub fn project_torus<F: Field>(f: &CoeffElement<F>) -> BTreeMap<i64, F> {
    let mut out: BTreeMap<i64, F> = BTreeMap::new();
    for (&(nu, i, j), c) in f.iter() {
        if i == j {
            let e = out.entry(nu as i64 - 2 * i as i64).or_insert_with(F::zero);
            *e = e.add_ref(c);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Weight of the `i`-th basis vector of `V(ν)`.
pub fn weight_of(nu: u32, i: u32) -> i64 {
    nu as i64 - 2 * i as i64
}

/// Express an exact element in the orthonormal numeric basis at `q`.
pub fn exact_to_numeric(f: &CoeffElement<QExact>, q: f64) -> CoeffElement<QNum> {
    let b = crate::cartan::Numeric::new(q);
    let mut out = CoeffElement::zero();
    for (&(nu, i, j), c) in f.iter() {
        let ni = b.q_binomial(nu as i64, i as i64).0.re;
        let nj = b.q_binomial(nu as i64, j as i64).0.re;
        out.add_term((nu, i, j), QNum(c.eval(q) * (nj / ni).sqrt()));
    }
    out
}

fn fmt_scalar<F: Field>(x: &F) -> String {
    format!("{x:?}").replace(',', ";")
}

/// Clebsch–Gordan tables for all `m, n ≤ max` as CSV
/// (`m,n,p,row,col,iota,proj`; nonzero entries only).
pub fn cg_csv<B: Backend>(g: &QGroup<B>, max: u32) -> Result<String> {
    let mut s = String::from("m,n,p,tensor_index,summand_index,iota,proj\n");
    for m in 0..=max {
        for n in 0..=max {
            let e = g.cg.get(g, m, n)?;
            for su in &e.summands {
                for t in 0..su.iota.rows {
                    for a in 0..su.iota.cols {
                        let (x, y) = (su.iota.get(t, a), su.proj.get(a, t));
                        if !x.is_zero() || !y.is_zero() {
                            writeln!(s, "{m},{n},{},{t},{a},{},{}", su.p, fmt_scalar(x), fmt_scalar(y)).unwrap();
                        }
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Haar values `φ((u^ν_{ij})* u^ν_{ij})` as CSV.
pub fn haar_csv<B: Backend>(g: &QGroup<B>, max: u32) -> Result<String> {
    let mut s = String::from("nu,i,j,haar_norm_sq\n");
    for nu in 0..=max {
        for i in 0..=nu {
            for j in 0..=nu {
                let u = CoeffElement::basis(nu, i, j);
                let v = haar_state(&multiply(g, &star(g, &u)?, &u)?);
                writeln!(s, "{nu},{i},{j},{}", fmt_scalar(&v)).unwrap();
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::{Exact, Numeric};

    #[test]
    fn cg_shapes() {
        let g = QGroup::new(Exact, 3);
        let e = cg_decompose(&g, 1, 1).unwrap();
        assert_eq!(e.summands.iter().map(|s| s.p).collect::<Vec<_>>(), vec![2, 0]);
        let e = cg_decompose(&g, 3, 0).unwrap();
        assert_eq!(e.summands.len(), 1);
        assert_eq!(e.summands[0].iota, Mat::identity(4));
    }

    fn check_intertwining<B: Backend>(g: &QGroup<B>, m: u32, n: u32) {
        let e = cg_decompose(g, m, n).unwrap();
        let (vm, vn) = (g.irrep(m).unwrap(), g.irrep(n).unwrap());
        let de = vm.e.kron(&vn.k_power(1)).add(&vm.k_power(-1).kron(&vn.e));
        let df = vm.f.kron(&vn.k_power(1)).add(&vm.k_power(-1).kron(&vn.f));
        let dk = vm.k_power(1).kron(&vn.k_power(1));
        let mut total = Mat::zeros(de.rows, de.cols);
        for s in &e.summands {
            let vp = build_irrep_for(g, s.p);
            assert_eq!(de.mul(&s.iota), s.iota.mul(&vp.e));
            assert_eq!(df.mul(&s.iota), s.iota.mul(&vp.f));
            assert_eq!(dk.mul(&s.iota), s.iota.mul(&vp.k_power(1)));
            assert_eq!(s.proj.mul(&s.iota), Mat::identity(s.p as usize + 1));
            total = total.add(&s.iota.mul(&s.proj));
        }
        assert_eq!(total, Mat::identity(de.rows));
    }

    fn build_irrep_for<B: Backend>(g: &QGroup<B>, p: u32) -> crate::qea::IrrepModel<B> {
        crate::qea::build_irrep(p, &g.backend)
    }

    #[test]
    fn exact_cg_intertwines() {
        let g = QGroup::new(Exact, 3);
        for (m, n) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)] {
            check_intertwining(&g, m, n);
        }
    }

    #[test]
    fn singlet_spans_kernel_of_e() {
        // Oracle: on weight 0 of V(1)⊗V(1), Δ(E)(x v0⊗v1 + y v1⊗v0) = (x s^{-1} + y s) v0⊗v0.
        let q = 0.5f64;
        let g = QGroup::new(Numeric::new(q), 1);
        let e = cg_decompose(&g, 1, 1).unwrap();
        let s0 = e.summand(0).unwrap();
        let (x, y) = (s0.iota.get(1, 0).0, s0.iota.get(2, 0).0);
        let s = q.sqrt();
        assert!((x / s + y * s).norm() < 1e-14);
        assert!(x.re > 0.0 && (x.norm_sqr() + y.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unit_and_haar() {
        let g = QGroup::new(Exact, 2);
        let f = CoeffElement::basis(2, 0, 1).with(1, 1, 0, QExact::s_pow(3));
        assert_eq!(multiply(&g, &CoeffElement::unit(), &f).unwrap(), f);
        assert_eq!(haar_state(&CoeffElement::<QExact>::unit()), QExact::from_i64(1));
        assert!(haar_state(&CoeffElement::<QExact>::basis(2, 0, 1)).is_zero());
        assert_eq!(antipode(&g, &CoeffElement::<QExact>::unit()).unwrap(), CoeffElement::unit());
    }

    #[test]
    fn torus_projection_of_coproduct() {
        let f = CoeffElement::<QExact>::basis(3, 1, 2);
        let mut legs: BTreeMap<(CoeffKey, i64), QExact> = BTreeMap::new();
        for ((a, b), c) in coproduct(&f) {
            for (w, x) in project_torus(&CoeffElement::zero().with(b.0, b.1, b.2, c)) {
                legs.insert((a, w), x);
            }
        }
        assert_eq!(legs.len(), 1);
        assert_eq!(legs.keys().next().unwrap(), &((3, 1, 2), weight_of(3, 2)));
    }

    fn numeric_element(c: &[f64]) -> CoeffElement<QNum> {
        let keys = [(0, 0, 0), (1, 0, 1), (1, 1, 1), (2, 1, 0)];
        let mut f = CoeffElement::zero();
        for (k, &x) in keys.iter().zip(c) {
            f.add_term(*k, QNum(num_complex::Complex64::new(x, 0.5 * x)));
        }
        f
    }

    fn close(a: &CoeffElement<QNum>, b: &CoeffElement<QNum>) -> bool {
        a.sub(b).iter().all(|(_, c)| c.0.norm() < 1e-10)
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn numeric_hopf_identities(c in proptest::collection::vec(-1.0f64..1.0, 12), q in 0.2f64..0.95) {
            let g = QGroup::new(Numeric::new(q), 6);
            let (f, h, k) = (numeric_element(&c[0..4]), numeric_element(&c[4..8]), numeric_element(&c[8..12]));
            let fh = multiply(&g, &f, &h).unwrap();
            proptest::prop_assert!(close(&multiply(&g, &fh, &k).unwrap(), &multiply(&g, &f, &multiply(&g, &h, &k).unwrap()).unwrap()));
            let s = antipode(&g, &fh).unwrap();
            let t = multiply(&g, &antipode(&g, &h).unwrap(), &antipode(&g, &f).unwrap()).unwrap();
            proptest::prop_assert!(close(&s, &t));
            let st = star(&g, &fh).unwrap();
            let ts = multiply(&g, &star(&g, &h).unwrap(), &star(&g, &f).unwrap()).unwrap();
            proptest::prop_assert!(close(&st, &ts));
            proptest::prop_assert!((counit(&fh).0 - counit(&f).0 * counit(&h).0).norm() < 1e-12);
        }
    }
}
