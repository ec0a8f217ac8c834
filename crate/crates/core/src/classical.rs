//! The classical side for `K = SU(2) ⊂ G = SL(2,ℂ)`.
//!
//! Coordinates: `Z = (t, x, y) ∈ 𝔞𝔫` is the matrix `[[t, x+iy], [0, −t]]`,
//! `X ∈ 𝔱` is `diag(iX, −iX)`, and `𝔨` pairs with `𝔞𝔫` by
//! `⟨Y, Z⟩ = Im tr(YZ)`. Functions on `K` are expanded in Wigner matrices
//! `D^ν` taken in the orthonormal weight basis of `Sym^ν ℂ²`, which is the
//! basis in which the quantum matrix coefficients `u^ν_{ij}` specialize at
//! `q = 1`.
//!
//! The principal series of `G` is realized on `L²(E_μ)` by
//! `π(g)ξ(r) = e^{(−2 + 2iX) t'} ξ(k')` where `g⁻¹r = k'b'` and
//! `t' = log b'₁₁`; the real part of the exponent is the modular factor of
//! `KAN`, so the representation is unitary.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use gauss_quad::{GaussHermite, GaussLegendre};
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockLayout, BlockOperator};
use crate::error::{Error, Result};
use crate::funalg::CoeffKey;
use crate::linalg::max_abs;
use crate::pseries::{SectionSpaceModel, PERIOD};

pub type M2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `g = k b` with `k ∈ SU(2)` and `b ∈ AN`.
#[derive(Clone, Debug, PartialEq)]
pub struct IwasawaFactors {
    pub k: M2,
    pub b: M2,
}

impl IwasawaFactors {
    pub fn product(&self) -> M2 {
        self.k * self.b
    }
}

/// Iwasawa decomposition of a determinant-one matrix, from a QR
/// factorization with the phases of `R`'s diagonal moved into `Q`.
pub fn iwasawa(g: &M2) -> Result<IwasawaFactors> {
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotInvertibleMatrix);
    }
    let scale = g.iter().map(|z| z.norm_sqr()).sum::<f64>().max(1.0);
    let det = g.determinant();
    if det.norm() <= 1e-14 * scale {
        return Err(Error::NotInvertibleMatrix);
    }
    if (det - ONE).norm() > 1e-12 * scale {
        return Err(Error::NotUnimodular(format!("{det}")));
    }
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut d = M2::identity();
    for i in 0..2 {
        let n = r[(i, i)].norm();
        if n == 0.0 {
            return Err(Error::NotInvertibleMatrix);
        }
        d[(i, i)] = r[(i, i)] / n;
    }
    Ok(IwasawaFactors { k: q * d, b: d.adjoint() * r })
}

/// Dressing actions: `b k = (b ⇀ k)(b ↼ k)`. Returns `(b ⇀ k, b ↼ k)`.
pub fn dressing(b: &M2, k: &M2) -> Result<(M2, M2)> {
    let f = iwasawa(&(b * k))?;
    Ok((f.k, f.b))
}

/// `exp(a) exp(n)` for `Z = a + n`.
pub fn an_exp(z: [f64; 3]) -> M2 {
    let e = z[0].exp();
    M2::new(re(e), Complex64::new(z[1], z[2]) * e, ZERO, re(1.0 / e))
}

/// The matrix of `Z ∈ 𝔞𝔫`.
pub fn an_matrix(z: [f64; 3]) -> M2 {
    M2::new(re(z[0]), Complex64::new(z[1], z[2]), ZERO, re(-z[0]))
}

/// `X ∈ 𝔱` as `diag(iX, −iX)`.
pub fn torus_lie(x: f64) -> M2 {
    M2::new(I * x, ZERO, ZERO, -I * x)
}

/// `⟨Y, Z⟩ = Im tr(YZ)` for `Y ∈ 𝔨`, `Z ∈ 𝔞𝔫`.
pub fn pair_k_an(y: &M2, z: [f64; 3]) -> f64 {
    (y * an_matrix(z)).trace().im
}

/// `⟨Ad(s)X, Z⟩`, the exponent of the motion-group character.
pub fn coadjoint_phase(s: &M2, x: f64, z: [f64; 3]) -> f64 {
    pair_k_an(&(s * torus_lie(x) * s.adjoint()), z)
}

/// `R(α) U(β) R(γ)` with `R(φ) = diag(e^{−iφ/2}, e^{iφ/2})` and `U(β)` the
/// real rotation by `β/2`.
pub fn euler(alpha: f64, beta: f64, gamma: f64) -> M2 {
    let r = |p: f64| M2::new(Complex64::from_polar(1.0, -p / 2.0), ZERO, ZERO, Complex64::from_polar(1.0, p / 2.0));
    let (s, c) = (beta / 2.0).sin_cos();
    r(alpha) * M2::new(re(c), re(-s), re(s), re(c)) * r(gamma)
}

/// The Weyl element `[[0, −1], [1, 0]]`.
pub fn weyl_element() -> M2 {
    M2::new(ZERO, -ONE, ONE, ZERO)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of `y^m` in `(u x + v y)^n`.
fn binomial_expand(u: Complex64, v: Complex64, n: u32) -> Vec<Complex64> {
    (0..=n).map(|m| u.powu(n - m) * v.powu(m) * binomial(n, m)).collect()
}

/// Column `j` of `D^ν(g)`; `g` may be any 2×2 matrix.
pub fn wigner_column(nu: u32, j: u32, g: &M2) -> Vec<Complex64> {
    let p1 = binomial_expand(g[(0, 0)], g[(1, 0)], nu - j);
    let p2 = binomial_expand(g[(0, 1)], g[(1, 1)], j);
    let mut out = vec![ZERO; nu as usize + 1];
    for (m1, a) in p1.iter().enumerate() {
        for (m2, b) in p2.iter().enumerate() {
            out[m1 + m2] += a * b;
        }
    }
    let bj = binomial(nu, j);
    for (i, z) in out.iter_mut().enumerate() {
        *z *= (bj / binomial(nu, i as u32)).sqrt();
    }
    out
}

/// `D^ν(g)` on the orthonormal basis `√C(ν,i) x^{ν−i} y^i` of `Sym^ν ℂ²`.
pub fn wigner(nu: u32, g: &M2) -> DMatrix<Complex64> {
    let n = nu as usize + 1;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..=nu {
        for (i, z) in wigner_column(nu, j, g).into_iter().enumerate() {
            m[(i, j as usize)] = z;
        }
    }
    m
}

/// Quadrature orders: Euler angles on `SU(2)` and Gauss–Hermite per axis on
/// `𝔞𝔫`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureOrders {
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    pub an: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        QuadratureOrders { alpha: 16, beta: 16, gamma: 16, an: 8 }
    }
}

impl QuadratureOrders {
    pub fn uniform(n: usize, an: usize) -> Self {
        QuadratureOrders { alpha: n, beta: n, gamma: n, an }
    }
}

/// Normalized Haar quadrature on `SU(2)`: equispaced in the periodic Euler
/// angles over `[0, 4π)` and Gauss–Legendre in `cos β`.
pub fn su2_nodes(orders: &QuadratureOrders) -> Result<Vec<(M2, f64)>> {
    let gl = GaussLegendre::new(orders.beta).map_err(|e| Error::Config(e.to_string()))?;
    if orders.alpha == 0 || orders.gamma == 0 {
        return Err(Error::Config("quadrature orders must be positive".into()));
    }
    let mut nodes = Vec::with_capacity(orders.alpha * orders.beta * orders.gamma);
    let norm = 2.0 * (orders.alpha * orders.gamma) as f64;
    for a in 0..orders.alpha {
        let alpha = 4.0 * PI * a as f64 / orders.alpha as f64;
        for &(x, w) in gl.as_node_weight_pairs() {
            let beta = x.clamp(-1.0, 1.0).acos();
            for g in 0..orders.gamma {
                let gamma = 4.0 * PI * g as f64 / orders.gamma as f64;
                nodes.push((euler(alpha, beta, gamma), w / norm));
            }
        }
    }
    Ok(nodes)
}

/// A smooth function on `K × 𝔞𝔫` of the form
/// `f(k, Z) = c · g(k) · exp(−|Z − Z₀|² / 2w²)` with
/// `g = Σ c_{ab} D^β_{ab}` and `|Z|² = 4t² + x² + y²`, the norm dual to the
/// invariant norm on `𝔨`, so that centred bumps are `K`-invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub g: Vec<(CoeffKey, Complex64)>,
    pub width: f64,
    pub center: [f64; 3],
    pub scale: Complex64,
}

impl TestFunction {
    pub fn gaussian(g: Vec<(CoeffKey, Complex64)>, width: f64) -> Self {
        TestFunction { g, width, center: [0.0; 3], scale: ONE }
    }

    /// `Σ_{ν ≤ l} (ν+1) χ_ν` times a unit-mass bump: an approximate unit on
    /// blocks up to `l`.
    pub fn approximate_unit(l: u32, width: f64) -> Self {
        let mut g = Vec::new();
        for nu in 0..=l {
            for i in 0..=nu {
                g.push(((nu, i, i), re((nu + 1) as f64)));
            }
        }
        let mut f = Self::gaussian(g, width);
        f.scale = re(1.0 / f.bump_mass());
        f
    }

    /// `∫_{𝔞𝔫} exp(−|Z|²/2w²) dZ`.
    pub fn bump_mass(&self) -> f64 {
        0.5 * (2.0 * PI * self.width * self.width).powf(1.5)
    }

    pub fn max_spin(&self) -> u32 {
        self.g.iter().map(|((b, _, _), _)| *b).max().unwrap_or(0)
    }

    /// `g(k)`.
    pub fn k_part(&self, k: &M2) -> Complex64 {
        let mut acc = ZERO;
        for &((beta, a, b), c) in &self.g {
            acc += c * wigner_column(beta, b, k)[a as usize];
        }
        acc
    }

    /// The bump part at `Z`, including `scale`.
    pub fn an_part(&self, z: [f64; 3]) -> Complex64 {
        let d = [z[0] - self.center[0], z[1] - self.center[1], z[2] - self.center[2]];
        let r2 = 4.0 * d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        self.scale * (-r2 / (2.0 * self.width * self.width)).exp()
    }

    pub fn value(&self, k: &M2, z: [f64; 3]) -> Complex64 {
        self.k_part(k) * self.an_part(z)
    }

    /// Closed-form Fourier transform of the bump part at `Y ∈ 𝔨`:
    /// `∫ e^{−i⟨Y, Z⟩} h(Z) dZ`.
    pub fn fourier_an(&self, y: &M2) -> Complex64 {
        let (y1, y2, y3) = (y[(0, 0)].im, y[(0, 1)].re, y[(0, 1)].im);
        let r2 = y1 * y1 + y2 * y2 + y3 * y3;
        let phase = pair_k_an(y, self.center);
        self.scale * self.bump_mass() * (-self.width * self.width * r2 / 2.0).exp() * Complex64::from_polar(1.0, -phase)
    }

    /// Gauss–Hermite nodes on `𝔞𝔫` whose weights include the bump, so
    /// `∫ h(Z) F(Z) dZ ≈ Σ w F(Z)`.
    pub fn an_nodes(&self, order: usize) -> Result<Vec<([f64; 3], Complex64)>> {
        let gh = GaussHermite::new(order).map_err(|e| Error::Config(e.to_string()))?;
        let pts = gh.as_node_weight_pairs();
        let w = self.width;
        let jac = SQRT_2 * w * w * w;
        let mut out = Vec::with_capacity(order * order * order);
        for &(u, wu) in pts {
            for &(v, wv) in pts {
                for &(s, ws) in pts {
                    let z = [
                        self.center[0] + w / SQRT_2 * u,
                        self.center[1] + SQRT_2 * w * v,
                        self.center[2] + SQRT_2 * w * s,
                    ];
                    out.push((z, self.scale * (jac * wu * wv * ws)));
                }
            }
        }
        Ok(out)
    }

    /// The convolution-algebra adjoint; requires a centred bump.
    pub fn star(&self) -> Result<Self> {
        if self.center != [0.0; 3] {
            return Err(Error::Config("adjoint is only closed for centred bumps".into()));
        }
        Ok(TestFunction {
            g: self.g.iter().map(|&((beta, a, b), c)| ((beta, b, a), c.conj())).collect(),
            width: self.width,
            center: self.center,
            scale: self.scale.conj(),
        })
    }

    /// Convolution on `K ⋉ 𝔞𝔫`; requires centred bumps.
    pub fn convolve(&self, o: &Self) -> Result<Self> {
        if self.center != [0.0; 3] || o.center != [0.0; 3] {
            return Err(Error::Config("convolution is only closed for centred bumps".into()));
        }
        let mut g: Vec<(CoeffKey, Complex64)> = Vec::new();
        for &((b1, a, b), c1) in &self.g {
            for &((b2, c, d), c2) in &o.g {
                if b1 == b2 && b == c {
                    let coef = c1 * c2 / (b1 + 1) as f64;
                    match g.iter_mut().find(|(k, _)| *k == (b1, a, d)) {
                        Some((_, v)) => *v += coef,
                        None => g.push(((b1, a, d), coef)),
                    }
                }
            }
        }
        let (w1, w2) = (self.width * self.width, o.width * o.width);
        let w = (w1 + w2).sqrt();
        let mass = 0.5 * (2.0 * PI * w1 * w2 / (w1 + w2)).powf(1.5);
        Ok(TestFunction { g, width: w, center: [0.0; 3], scale: self.scale * o.scale * mass })
    }
}

/// A point `(μ, X)` of the motion-group parameter space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionParam {
    pub mu: i64,
    pub x: f64,
}

impl MotionParam {
    pub fn new(mu: i64, x: f64) -> Self {
        MotionParam { mu, x }
    }

    pub fn weyl(&self) -> Self {
        MotionParam { mu: -self.mu, x: -self.x }
    }

    /// `K_X = T` for `X ≠ 0` and `K_0 = K`.
    pub fn stabilizer_is_full(&self) -> bool {
        self.x == 0.0
    }
}

/// `L²(E_μ)` truncated at spin `N`, with orthonormal basis
/// `ξ_{ν,i} = √(ν+1) D^ν_{i, j(ν)}` and a Haar quadrature on `SU(2)`.
#[derive(Clone, Debug)]
pub struct InducedSpaceModel {
    pub mu: i64,
    pub truncation: u32,
    pub orders: QuadratureOrders,
    pub space: SectionSpaceModel,
    /// Largest `|G − 1|` of the quadrature Gram matrix.
    pub gram_drift: f64,
    nodes: Arc<Vec<(M2, f64)>>,
    values: Arc<Vec<Vec<Complex64>>>,
}

impl InducedSpaceModel {
    pub fn new(mu: i64, truncation: u32, orders: QuadratureOrders, gram_tol: f64) -> Result<Self> {
        let space = SectionSpaceModel::new(mu, truncation);
        let nodes = su2_nodes(&orders)?;
        let mut m = InducedSpaceModel {
            mu,
            truncation,
            orders,
            space,
            gram_drift: 0.0,
            nodes: Arc::new(Vec::new()),
            values: Arc::new(Vec::new()),
        };
        let values: Vec<Vec<Complex64>> = nodes.iter().map(|(k, _)| m.evaluate(k)).collect();
        m.nodes = Arc::new(nodes);
        m.values = Arc::new(values);
        let g = m.multiplier(|_| ONE);
        m.gram_drift = max_abs(&(g - DMatrix::identity(m.dim(), m.dim())));
        if m.gram_drift > gram_tol {
            return Err(Error::QuadratureUnderResolved { drift: m.gram_drift, tol: gram_tol });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn layout(&self) -> Arc<BlockLayout> {
        self.space.layout.clone()
    }

    /// All basis functions at `k`.
    pub fn evaluate(&self, k: &M2) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.dim());
        for nu in self.space.spins() {
            let j = ((nu as i64 - self.mu) / 2) as u32;
            let s = ((nu + 1) as f64).sqrt();
            out.extend(wigner_column(nu, j, k).into_iter().map(|z| z * s));
        }
        out
    }

    pub fn nodes(&self) -> &[(M2, f64)] {
        &self.nodes
    }

    /// `⟨ξ_r, φ ξ_c⟩` by quadrature.
    pub fn multiplier(&self, phi: impl Fn(&M2) -> Complex64 + Sync) -> DMatrix<Complex64> {
        let vals = (*self.values).clone();
        self.integrate(|n| {
            let p = phi(&self.nodes[n].0);
            vals[n].iter().map(|v| v * p).collect()
        })
    }

    /// `⟨ξ_r, Ψ_c⟩` where `Ψ_c(s)` is supplied per node index.
    fn integrate(&self, psi: impl Fn(usize) -> Vec<Complex64> + Sync) -> DMatrix<Complex64> {
        let d = self.dim();
        let parts: Vec<DMatrix<Complex64>> = (0..self.nodes.len())
            .into_par_iter()
            .map(|n| {
                let w = self.nodes[n].1;
                let p = psi(n);
                DMatrix::from_fn(d, d, |r, c| self.values[n][r].conj() * p[c] * w)
            })
            .collect();
        // fixed summation order
        parts.into_iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m)
    }

    fn operator(&self, m: DMatrix<Complex64>) -> BlockOperator {
        BlockOperator::new(self.layout(), self.truncation, 0, m)
    }

    /// Left factor `C[(β,a),(β,b)] = c_{ab}/(β+1)` implementing
    /// convolution by `g` on the output side.
    fn k_factor(&self, f: &TestFunction) -> Result<DMatrix<Complex64>> {
        let d = self.dim();
        let mut c = DMatrix::zeros(d, d);
        for &((beta, a, b), coef) in &f.g {
            if (beta as i64 - self.mu).rem_euclid(2) != 0 || (beta as i64) < self.mu.abs() {
                continue;
            }
            if beta > self.truncation {
                return Err(Error::TruncationExceeded { needed: beta, available: self.truncation });
            }
            let j = ((beta as i64 - self.mu) / 2) as u32;
            let r = self.space.index_of((beta, a, j)).expect("block present");
            let s = self.space.index_of((beta, b, j)).expect("block present");
            c[(r, s)] += coef / (beta + 1) as f64;
        }
        Ok(c)
    }
}

/// `π_{μ,X}(f)` for the Cartan motion group:
/// `π(f)ξ(r) = ∫_K 𝓕(f)(k, Ad(k⁻¹r)X) ξ(k⁻¹r) dk`, with the Fourier
/// transform along `𝔞𝔫` evaluated by Gauss–Hermite quadrature.
pub fn motion_rep(param: MotionParam, f: &TestFunction, model: &InducedSpaceModel) -> Result<BlockOperator> {
    check_param(param, model)?;
    let an = f.an_nodes(model.orders.an)?;
    let phi = |s: &M2| {
        let y = s * torus_lie(param.x) * s.adjoint();
        an.iter().map(|(z, w)| w * Complex64::from_polar(1.0, -pair_k_an(&y, *z))).sum::<Complex64>()
    };
    let p = model.multiplier(phi);
    Ok(model.operator(model.k_factor(f)? * p))
}

/// `π_{μ,X}(f_σ)` in the principal series of `SL(2,ℂ)`, with `f_σ` the
/// `σ`-rescaled function on `KAN`:
/// `∫ f(k, Z) ξ(b⁻¹ ⇀ s) χ(b⁻¹ ↼ s) e^{4σt} dk dZ`, `s = k⁻¹r`,
/// `b = exp(σa) exp(σn)`, `χ(b') = e^{(−2 + 2iX/σ) log b'₁₁}`.
pub fn deformed_rep(param: MotionParam, f: &TestFunction, sigma: f64, model: &InducedSpaceModel) -> Result<BlockOperator> {
    check_param(param, model)?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Config(format!("σ = {sigma} is outside (0, 1]")));
    }
    let an: Vec<(M2, Complex64)> = f
        .an_nodes(model.orders.an)?
        .into_iter()
        .map(|(z, w)| {
            let b = an_exp([sigma * z[0], sigma * z[1], sigma * z[2]]);
            let binv = M2::new(b[(1, 1)], -b[(0, 1)], ZERO, b[(0, 0)]);
            (binv, w * (4.0 * sigma * z[0]).exp())
        })
        .collect();
    let expo = Complex64::new(-2.0, 2.0 * param.x / sigma);
    let d = model.dim();
    let err = std::sync::Mutex::new(None);
    let p = model.integrate(|n| {
        let s = model.nodes[n].0;
        let mut acc = vec![ZERO; d];
        for (binv, w) in &an {
            match iwasawa(&(binv * s)) {
                Ok(fac) => {
                    let t = fac.b[(0, 0)].re.ln();
                    let c = w * (expo * t).exp();
                    for (a, v) in acc.iter_mut().zip(model.evaluate(&fac.k)) {
                        *a += c * v;
                    }
                }
                Err(e) => *err.lock().unwrap() = Some(e),
            }
        }
        acc
    });
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    Ok(model.operator(model.k_factor(f)? * p))
}

fn check_param(param: MotionParam, model: &InducedSpaceModel) -> Result<()> {
    if param.mu != model.mu {
        return Err(Error::WindowMismatch(format!("parameter μ = {} on a model for μ = {}", param.mu, model.mu)));
    }
    Ok(())
}

/// The `q = 1` model `V_{μ,t}`: `u^β_{ab}` acts by multiplication with
/// `k ↦ D^β_{ab}(k t k⁻¹)`, `t = diag(e^{iθ}, e^{−iθ})`.
pub fn quantum_motion_rep(theta: f64, f: &[(CoeffKey, Complex64)], model: &InducedSpaceModel) -> BlockOperator {
    let t = M2::new(Complex64::from_polar(1.0, theta), ZERO, ZERO, Complex64::from_polar(1.0, -theta));
    let phi = |s: &M2| {
        let g = s * t * s.adjoint();
        f.iter().map(|&((beta, a, b), c)| c * wigner_column(beta, b, &g)[a as usize]).sum::<Complex64>()
    };
    model.operator(model.multiplier(phi))
}

/// Left translation by the dual element `Σ c ω^ν_{ab}`, where `ω^ν_{ab}`
/// is the measure `(ν+1) conj(D^ν_{ab}(g)) dg`:
/// `(ω·ξ)(r) = ∫ ω(g) ξ(g⁻¹r) dg`. The unit key `None` acts as the identity.
pub fn dual_action(x: &[(Option<(u32, u32, u32)>, Complex64)], model: &InducedSpaceModel) -> BlockOperator {
    let d = model.dim();
    let mut m = DMatrix::zeros(d, d);
    for &(key, coef) in x {
        let Some((nu, a, b)) = key else {
            m += DMatrix::identity(d, d) * coef;
            continue;
        };
        for (blk, label) in model.space.layout.blocks().iter().enumerate() {
            let nv = label.spin;
            let off = model.space.layout.range(blk).start;
            // coefficient of D_{ej} in ω·D_{ij}: ∫ ω(g) D^{nv}_{ie}(g⁻¹) dg
            let mut acc = DMatrix::<Complex64>::zeros(nv as usize + 1, nv as usize + 1);
            for (g, w) in model.nodes() {
                let om = re((nu + 1) as f64) * wigner_column(nu, b, g)[a as usize].conj() * *w;
                acc += wigner(nv, &g.adjoint()) * om;
            }
            for i in 0..=nv as usize {
                for e in 0..=nv as usize {
                    m[(off + e, off + i)] += coef * acc[(i, e)];
                }
            }
        }
    }
    model.operator(m)
}

/// `U_w ξ(k) = ξ(kw)`, mapping `L²(E_μ)` to `L²(E_{−μ})`; diagonal in the
/// bases `ξ_{ν,i}`.
pub fn weyl_unitary(mu: i64, truncation: u32) -> DMatrix<Complex64> {
    let space = SectionSpaceModel::new(mu, truncation);
    let w = weyl_element();
    let mut diag = Vec::with_capacity(space.dim());
    for nu in space.spins() {
        let j = ((nu as i64 - mu) / 2) as u32;
        let col = wigner_column(nu, j, &w);
        for _ in 0..=nu {
            diag.push(col[(nu - j) as usize]);
        }
    }
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// One fibre sample of a section over weights × parameter grid.
#[derive(Clone, Debug)]
pub struct FibreSample {
    pub mu: i64,
    /// `X` on the motion-group side, `θ` on the `K ⋉ C(K)` side.
    pub param: f64,
    pub op: BlockOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub checked: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        self.violations.is_empty()
    }
}

fn off_block_norm(op: &BlockOperator) -> f64 {
    let idx = op.window_indices();
    let l = &op.layout;
    let mut worst = 0.0f64;
    for (br, _) in l.blocks().iter().enumerate() {
        for (bc, _) in l.blocks().iter().enumerate() {
            if br == bc {
                continue;
            }
            for r in l.range(br) {
                for c in l.range(bc) {
                    if idx.contains(&c) {
                        worst = worst.max(op.matrix[(r, c)].norm());
                    }
                }
            }
        }
    }
    worst
}

fn membership(
    samples: &[FibreSample],
    tol: f64,
    partner: impl Fn(f64) -> f64,
    same: impl Fn(f64, f64) -> bool,
    fixed: impl Fn(f64) -> bool,
    label: &str,
) -> MembershipReport {
    let mut rep = MembershipReport { checked: 0, max_residual: 0.0, tolerance: tol, violations: Vec::new() };
    for s in samples {
        if fixed(s.param) {
            rep.checked += 1;
            let r = off_block_norm(&s.op);
            rep.max_residual = rep.max_residual.max(r);
            if r > tol {
                rep.violations.push(format!(
                    "({}, {label} = {}) mixes isotypic blocks: off-block entry {r:.3e}",
                    s.mu, s.param
                ));
            }
        }
        let target = partner(s.param);
        if let Some(o) = samples.iter().find(|o| o.mu == -s.mu && same(o.param, target)) {
            rep.checked += 1;
            let u = weyl_unitary(s.mu, s.op.truncation);
            let conj = &u * &s.op.matrix * u.adjoint();
            let idx = s.op.window_indices();
            let mut r = 0.0f64;
            for &c in &idx {
                for row in 0..conj.nrows() {
                    r = r.max((conj[(row, c)] - o.op.matrix[(row, c)]).norm());
                }
            }
            rep.max_residual = rep.max_residual.max(r);
            if r > tol {
                rep.violations.push(format!(
                    "Weyl equivariance fails between ({}, {}) and ({}, {}): {r:.3e}",
                    s.mu, s.param, o.mu, o.param
                ));
            }
        }
    }
    rep
}

/// Membership in the motion-group fibre algebra: Weyl equivariance
/// `F(−μ, −X) = U_w F(μ, X) U_w*`, and no mixing of `V(ν)`-blocks at `X = 0`.
pub fn motion_group_membership(samples: &[FibreSample], tol: f64) -> MembershipReport {
    membership(samples, tol, |x| -x, |a, b| (a - b).abs() < 1e-12, |x| x == 0.0, "X")
}

/// Membership in the `K ⋉ C(K)` fibre algebra: Weyl equivariance
/// `F(−μ, −θ) = U_w F(μ, θ) U_w*`, and no mixing of `V(ν)`-blocks at
/// `t = ±1` (`θ ∈ {0, π}`).
pub fn quantum_motion_membership(samples: &[FibreSample], tol: f64) -> MembershipReport {
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(PERIOD);
        d.min(PERIOD - d) < 1e-12
    };
    let fixed = move |t: f64| circ(t, 0.0) || circ(t, PI);
    membership(samples, tol, |t| -t, circ, fixed, "θ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sl2(rng: &mut ChaCha8Rng) -> M2 {
        let mut g = M2::from_fn(|_, _| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)));
        let d = g.determinant();
        let s = d.sqrt();
        g /= s;
        g
    }

    fn random_su2(rng: &mut ChaCha8Rng) -> M2 {
        euler(rng.gen_range(0.0..4.0 * PI), rng.gen_range(0.0..PI), rng.gen_range(0.0..4.0 * PI))
    }

    fn close(a: &M2, b: &M2) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn iwasawa_trivial_cases() {
        let f = iwasawa(&M2::identity()).unwrap();
        assert!(close(&f.k, &M2::identity()) < 1e-15 && close(&f.b, &M2::identity()) < 1e-15);
        let k = euler(0.3, 1.1, 2.0);
        let f = iwasawa(&k).unwrap();
        assert!(close(&f.k, &k) < 1e-14 && close(&f.b, &M2::identity()) < 1e-14);
        assert_eq!(iwasawa(&M2::zeros()), Err(Error::NotInvertibleMatrix));
    }

    #[test]
    fn iwasawa_against_gram_schmidt() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let g = random_sl2(&mut rng);
            let f = iwasawa(&g).unwrap();
            // Gram–Schmidt on the columns of g
            let c0 = g.column(0).into_owned();
            let e0 = &c0 / re(c0.norm());
            let c1 = g.column(1).into_owned();
            let mut v = &c1 - &e0 * e0.dotc(&c1);
            v /= re(v.norm());
            let k = M2::from_columns(&[e0, v]);
            assert!(close(&f.k, &k) < 1e-12, "{} vs {}", f.k, k);
            assert!(close(&f.product(), &g) < 1e-12);
            assert!(f.b[(1, 0)].norm() < 1e-14 && f.b[(0, 0)].im.abs() < 1e-14 && f.b[(0, 0)].re > 0.0);
        }
    }

    #[test]
    fn dressing_trivial_cases() {
        let b = an_exp([0.4, -0.2, 0.7]);
        let k = euler(1.0, 0.5, 0.2);
        let (k1, b1) = dressing(&M2::identity(), &k).unwrap();
        assert!(close(&k1, &k) < 1e-14 && close(&b1, &M2::identity()) < 1e-14);
        let (k2, b2) = dressing(&b, &M2::identity()).unwrap();
        assert!(close(&k2, &M2::identity()) < 1e-14 && close(&b2, &b) < 1e-14);
    }

    #[test]
    fn right_dressing_linearizes_to_coadjoint_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_su2(&mut rng);
            let z = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x = 0.8;
            let sigma = 1e-6;
            let b = an_exp([sigma * z[0], sigma * z[1], sigma * z[2]]);
            let (_, bp) = dressing(&b.try_inverse().unwrap(), &s).unwrap();
            let lin = 2.0 * x * bp[(0, 0)].re.ln() / sigma;
            assert!((lin + coadjoint_phase(&s, x, z)).abs() < 1e-5);
        }
    }

    #[test]
    fn wigner_is_a_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, b) = (random_sl2(&mut rng), random_sl2(&mut rng));
        assert!(close(&M2::from_fn(|i, j| wigner(1, &a)[(i, j)]), &a) < 1e-15);
        for nu in 0..5 {
            let d = wigner(nu, &(a * b)) - wigner(nu, &a) * wigner(nu, &b);
            assert!(max_abs(&d) < 1e-11);
            let k = random_su2(&mut rng);
            let u = wigner(nu, &k);
            assert!(max_abs(&(u.adjoint() * &u - DMatrix::identity(nu as usize + 1, nu as usize + 1))) < 1e-13);
        }
    }

    #[test]
    fn wigner_generators_match_ladder_matrices() {
        // d/dε D^ν(1 + εE) at ε = 0 is the ladder operator E e_i = √(i(ν−i+1)) e_{i−1}
        let eps = 1e-7;
        for nu in 1..5u32 {
            let e = M2::new(ONE, re(eps), ZERO, ONE);
            let d = (wigner(nu, &e) - DMatrix::identity(nu as usize + 1, nu as usize + 1)) / re(eps);
            for i in 1..=nu as usize {
                let expect = ((i * (nu as usize - i + 1)) as f64).sqrt();
                assert!((d[(i - 1, i)].re - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn quadrature_gram_and_fourier() {
        let m = InducedSpaceModel::new(1, 3, QuadratureOrders::uniform(8, 8), 1e-12).unwrap();
        assert!(m.gram_drift < 1e-12);
        assert!(matches!(
            InducedSpaceModel::new(0, 6, QuadratureOrders::uniform(3, 4), 1e-10),
            Err(Error::QuadratureUnderResolved { .. })
        ));
        let f = TestFunction { g: vec![], width: 0.7, center: [0.2, -0.1, 0.3], scale: ONE };
        let y = euler(0.3, 0.9, 1.4) * torus_lie(1.3) * euler(0.3, 0.9, 1.4).adjoint();
        let quad: Complex64 =
            f.an_nodes(12).unwrap().iter().map(|(z, w)| w * Complex64::from_polar(1.0, -pair_k_an(&y, *z))).sum();
        assert!((quad - f.fourier_an(&y)).norm() < 1e-10);
    }

    #[test]
    fn motion_rep_at_zero_is_block_diagonal_and_selfadjoint() {
        let m = InducedSpaceModel::new(0, 4, QuadratureOrders::uniform(10, 6), 1e-10).unwrap();
        let f = TestFunction {
            g: vec![((2, 0, 1), Complex64::new(0.5, 0.5)), ((2, 1, 0), Complex64::new(0.5, -0.5)), ((0, 0, 0), re(1.0))],
            width: 0.6,
            center: [0.0; 3],
            scale: ONE,
        };
        let a = motion_rep(MotionParam::new(0, 0.0), &f, &m).unwrap();
        assert!(off_block_norm(&a) < 1e-12);
        let b = motion_rep(MotionParam::new(0, 0.9), &f, &m).unwrap();
        let r = max_abs(&(&b.matrix - b.matrix.adjoint()));
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn motion_rep_is_multiplicative() {
        let m = InducedSpaceModel::new(1, 3, QuadratureOrders::uniform(8, 6), 1e-10).unwrap();
        let f1 = TestFunction::gaussian(vec![((1, 0, 1), re(1.0)), ((3, 2, 1), re(0.5))], 0.5);
        let f2 = TestFunction::gaussian(vec![((1, 1, 0), re(2.0)), ((3, 1, 3), Complex64::new(0.0, 1.0))], 0.8);
        let p = MotionParam::new(1, 0.7);
        let lhs = motion_rep(p, &f1.convolve(&f2).unwrap(), &m).unwrap();
        let rhs = motion_rep(p, &f1, &m).unwrap().mul(&motion_rep(p, &f2, &m).unwrap()).unwrap();
        let r = max_abs(&(lhs.matrix - rhs.matrix));
        assert!(r < 1e-7, "{r}");
        let st = motion_rep(p, &f1.star().unwrap(), &m).unwrap();
        assert!(max_abs(&(st.matrix - motion_rep(p, &f1, &m).unwrap().matrix.adjoint())) < 1e-7);
    }

    #[test]
    fn approximate_unit_converges() {
        let m = InducedSpaceModel::new(0, 2, QuadratureOrders::uniform(8, 6), 1e-10).unwrap();
        let mut last = f64::INFINITY;
        for w in [0.8, 0.4, 0.2, 0.1] {
            let a = motion_rep(MotionParam::new(0, 1.0), &TestFunction::approximate_unit(2, w), &m).unwrap();
            let d = max_abs(&(a.matrix - DMatrix::identity(m.dim(), m.dim())));
            assert!(d < last);
            last = d;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn weyl_covariance_of_motion_rep() {
        let orders = QuadratureOrders::uniform(16, 8);
        let m1 = InducedSpaceModel::new(1, 3, orders, 1e-10).unwrap();
        let m2 = InducedSpaceModel::new(-1, 3, orders, 1e-10).unwrap();
        let f = TestFunction { g: vec![((1, 0, 1), re(1.0)), ((3, 1, 2), re(-0.4))], width: 0.5, center: [0.3, 0.2, -0.1], scale: ONE };
        let p = MotionParam::new(1, 0.8);
        let a = motion_rep(p, &f, &m1).unwrap();
        let b = motion_rep(p.weyl(), &f, &m2).unwrap();
        let u = weyl_unitary(1, 3);
        let r = max_abs(&(&u * &a.matrix * u.adjoint() - &b.matrix));
        assert!(r < 1e-6, "{r}");
        let samples = vec![
            FibreSample { mu: 1, param: 0.8, op: a },
            FibreSample { mu: -1, param: -0.8, op: b },
        ];
        assert!(motion_group_membership(&samples, 1e-6).is_member());
    }

    #[test]
    fn membership_flags_off_block_entries() {
        let m = InducedSpaceModel::new(0, 2, QuadratureOrders::uniform(6, 4), 1e-10).unwrap();
        let z = BlockOperator::zeros(m.layout(), 2);
        let zero = vec![FibreSample { mu: 0, param: 0.0, op: z.clone() }];
        assert!(motion_group_membership(&zero, 1e-12).is_member());
        assert!(quantum_motion_membership(&zero, 1e-12).is_member());
        let mut bad = z;
        bad.matrix[(0, 2)] = re(0.1);
        let s = vec![FibreSample { mu: 0, param: 0.0, op: bad.clone() }];
        assert!(!motion_group_membership(&s, 1e-12).is_member());
        let s = vec![FibreSample { mu: 0, param: PI, op: bad }];
        assert!(!quantum_motion_membership(&s, 1e-12).is_member());
    }

    #[test]
    fn principal_series_is_unitary() {
        // ‖π(g)ξ‖ = ‖ξ‖ with π(g)ξ(r) = χ(b') ξ(k'), g⁻¹r = k'b'
        let m = InducedSpaceModel::new(1, 5, QuadratureOrders::uniform(24, 4), 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = 0.7;
        for _ in 0..3 {
            let g = an_exp([0.3, 0.2, -0.25]) * random_su2(&mut rng);
            let ginv = g.try_inverse().unwrap();
            let coeffs: Vec<Complex64> = (0..m.dim()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let mut n0 = 0.0;
            let mut n1 = 0.0;
            for (r, w) in m.nodes() {
                let xi = |k: &M2| m.evaluate(k).iter().zip(&coeffs).map(|(a, b)| a * b).sum::<Complex64>();
                let f = iwasawa(&(ginv * r)).unwrap();
                let t = f.b[(0, 0)].re.ln();
                n0 += w * xi(r).norm_sqr();
                n1 += w * (xi(&f.k) * (Complex64::new(-2.0, 2.0 * x) * t).exp()).norm_sqr();
            }
            assert!((n0 - n1).abs() < 1e-3 * n0, "{n0} {n1}");
        }
    }

    #[test]
    fn deformed_rep_matches_direct_group_quadrature() {
        // σ = 1: ∫_G f(g) π(g) dg with dg = e^{4t} dk dZ, evaluated directly
        let orders = QuadratureOrders::uniform(8, 4);
        let m = InducedSpaceModel::new(0, 2, orders, 1e-10).unwrap();
        let f = TestFunction::gaussian(vec![((0, 0, 0), re(1.0)), ((2, 1, 1), re(0.5))], 0.15);
        let x = 0.6;
        let op = deformed_rep(MotionParam::new(0, x), &f, 1.0, &m).unwrap();
        let d = m.dim();
        let mut direct = DMatrix::<Complex64>::zeros(d, d);
        let an = f.an_nodes(4).unwrap();
        for (k, wk) in m.nodes() {
            let gk = f.k_part(k);
            for (z, wz) in &an {
                let g = k * an_exp(*z);
                let ginv = g.try_inverse().unwrap();
                for (r, wr) in m.nodes() {
                    let fac = iwasawa(&(ginv * r)).unwrap();
                    let chi = (Complex64::new(-2.0, 2.0 * x) * fac.b[(0, 0)].re.ln()).exp();
                    let out = m.evaluate(r);
                    let inp = m.evaluate(&fac.k);
                    let c = gk * wz * (4.0 * z[0]).exp() * chi * (wk * wr);
                    for i in 0..d {
                        for j in 0..d {
                            direct[(i, j)] += out[i].conj() * inp[j] * c;
                        }
                    }
                }
            }
        }
        let r = max_abs(&(direct - op.matrix));
        assert!(r < 1e-5, "{r}");
    }

    #[test]
    fn deformed_rep_approaches_motion_rep() {
        let m = InducedSpaceModel::new(0, 2, QuadratureOrders::uniform(10, 6), 1e-10).unwrap();
        let f = TestFunction::gaussian(vec![((0, 0, 0), re(1.0)), ((2, 0, 0), re(0.5))], 0.5);
        let p = MotionParam::new(0, 0.8);
        let base = motion_rep(p, &f, &m).unwrap();
        let mut last = f64::INFINITY;
        for s in [0.4, 0.2, 0.1, 0.05] {
            let d = deformed_rep(p, &f, s, &m).unwrap().window_residual(&base).unwrap();
            assert!(d < last, "σ = {s}: {d} ≥ {last}");
            last = d;
        }
    }

    fn sl2_from(v: &[f64]) -> Option<M2> {
        let g = M2::new(
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
            Complex64::new(v[6], v[7]),
        );
        let d = g.determinant();
        (d.norm() > 1e-2).then(|| g / d.sqrt())
    }

    proptest::proptest! {
        #[test]
        fn iwasawa_factors_are_unique(v in proptest::collection::vec(-2.0f64..2.0, 8)) {
            if let Some(g) = sl2_from(&v) {
                let f = iwasawa(&g).unwrap();
                let again = iwasawa(&f.product()).unwrap();
                let scale = g.iter().map(|z| z.norm()).fold(1.0, f64::max);
                proptest::prop_assert!(close(&f.product(), &g) < 1e-12 * scale);
                proptest::prop_assert!(close(&again.k, &f.k) < 1e-10 && close(&again.b, &f.b) < 1e-10 * scale);
                proptest::prop_assert!((f.k.adjoint() * f.k - M2::identity()).iter().all(|z| z.norm() < 1e-12));
            }
        }

        #[test]
        fn dressing_is_an_action(z in proptest::collection::vec(-1.0f64..1.0, 6), e in proptest::collection::vec(0.0f64..3.0, 3)) {
            let (b1, b2) = (an_exp([z[0], z[1], z[2]]), an_exp([z[3], z[4], z[5]]));
            let k = euler(e[0], e[1], e[2]);
            let (k12, _) = dressing(&(b1 * b2), &k).unwrap();
            let (k2, _) = dressing(&b2, &k).unwrap();
            let (k1, _) = dressing(&b1, &k2).unwrap();
            proptest::prop_assert!(close(&k12, &k1) < 1e-10);
        }

        #[test]
        fn wigner_is_multiplicative(a in proptest::collection::vec(0.0f64..3.0, 6), nu in 0u32..4) {
            let (g, h) = (euler(a[0], a[1], a[2]), euler(a[3], a[4], a[5]));
            let lhs = wigner(nu, &(g * h));
            let rhs = wigner(nu, &g) * wigner(nu, &h);
            proptest::prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }
}
