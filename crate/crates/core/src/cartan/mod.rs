//! Cartan data, Weyl groups, q-numbers and the scalar backends.

pub mod exact;
pub mod zi;
pub mod field;

use num_rational::Ratio;

pub use exact::{Laurent, QExact};
pub use field::{Backend, BackendKind, Exact, Field, IntoScalar, Numeric, QNum, Scalar};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Weights are integer vectors in the fundamental-weight basis.
pub type Weight = Vec<i64>;

/// Root datum of a simply connected semisimple Lie algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanData {
    pub rank: usize,
    pub cartan_matrix: Vec<Vec<i64>>,
    /// Symmetrizing integers with `(α_i, α_j) = d_i a_ij`.
    pub d: Vec<i64>,
    pub fundamental_weights: Vec<Weight>,
    /// Simple roots in the fundamental-weight basis (rows of the Cartan matrix).
    pub simple_roots: Vec<Weight>,
    /// Coroots as linear functionals on the weight lattice.
    pub coroots: Vec<Weight>,
    pub rho: Weight,
    /// Gram matrix `(ϖ_i, ϖ_j)`.
    pub bilinear_form: Vec<Vec<Rational>>,
}

impl CartanData {
    pub fn new(cartan_matrix: Vec<Vec<i64>>, d: Vec<i64>) -> Result<Self> {
        let rank = cartan_matrix.len();
        if d.len() != rank || cartan_matrix.iter().any(|r| r.len() != rank) {
            return Err(Error::DimensionMismatch("Cartan matrix and d must be square of equal rank".into()));
        }
        let unit = |i: usize| (0..rank).map(|j| i64::from(i == j)).collect::<Weight>();
        // (ϖ_i, α_j) = δ_ij d_j with α_j = Σ_k a_jk ϖ_k gives B·Aᵀ = D.
        let at: Vec<Vec<Rational>> = (0..rank)
            .map(|i| (0..rank).map(|j| Rational::from_integer(cartan_matrix[j][i])).collect())
            .collect();
        let at_inv = invert_rational(&at)?;
        let bilinear_form = (0..rank)
            .map(|i| (0..rank).map(|k| at_inv[i][k] * d[i]).collect())
            .collect();
        Ok(CartanData {
            rank,
            simple_roots: cartan_matrix.clone(),
            cartan_matrix,
            d,
            fundamental_weights: (0..rank).map(unit).collect(),
            coroots: (0..rank).map(unit).collect(),
            rho: vec![1; rank],
            bilinear_form,
        })
    }

    /// Type A1.
    pub fn sl2() -> Self {
        Self::new(vec![vec![2]], vec![1]).expect("valid data")
    }

    /// Type A2.
    pub fn sl3() -> Self {
        Self::new(vec![vec![2, -1], vec![-1, 2]], vec![1, 1]).expect("valid data")
    }

    /// Is the weight dominant (in `P^+`)?
    pub fn is_dominant(&self, w: &[i64]) -> bool {
        w.iter().all(|&x| x >= 0)
    }

    /// Simple reflection `s_i(λ) = λ - ⟨λ, α_i^∨⟩ α_i`.
    pub fn reflect(&self, i: usize, w: &[i64]) -> Weight {
        let c = w[i];
        w.iter().zip(&self.simple_roots[i]).map(|(x, a)| x - c * a).collect()
    }
}

fn invert_rational(m: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| Rational::from_integer(i64::from(i == j))));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| a[r][col] != Rational::from_integer(0))
            .ok_or(Error::SingularSolve("Cartan matrix is singular".into()))?;
        a.swap(col, piv);
        let p = a[col][col];
        for x in a[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != Rational::from_integer(0) {
                    for c in 0..2 * n {
                        let v = a[col][c];
                        a[r][c] -= f * v;
                    }
                }
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `(a, b)` for weights in the fundamental-weight basis.
pub fn pair_weights(data: &CartanData, a: &[i64], b: &[i64]) -> Result<Rational> {
    if a.len() != data.rank || b.len() != data.rank {
        return Err(Error::DimensionMismatch(format!(
            "weights of length {} and {} for rank {}",
            a.len(),
            b.len(),
            data.rank
        )));
    }
    let mut acc = Rational::from_integer(0);
    for i in 0..data.rank {
        for j in 0..data.rank {
            acc += data.bilinear_form[i][j] * a[i] * b[j];
        }
    }
    Ok(acc)
}

/// Integer matrix acting on weight coordinates.
pub type LatticeMap = Vec<Vec<i64>>;

fn apply(m: &LatticeMap, w: &[i64]) -> Weight {
    m.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}

fn apply_real(m: &LatticeMap, w: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(w).map(|(&a, b)| a as f64 * b).sum()).collect()
}

fn compose(a: &LatticeMap, b: &LatticeMap) -> LatticeMap {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Weyl group as a list of lattice automorphisms, identity first.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylGroup {
    pub elements: Vec<LatticeMap>,
}

impl WeylGroup {
    /// Generate the group from the simple reflections.
    pub fn new(data: &CartanData) -> Self {
        let n = data.rank;
        let identity: LatticeMap = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        let gens: Vec<LatticeMap> = (0..n)
            .map(|i| {
                // column j of s_i is s_i(ϖ_j)
                let cols: Vec<Weight> = (0..n).map(|j| data.reflect(i, &identity[j])).collect();
                (0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect()
            })
            .collect();
        let mut elements = vec![identity];
        let mut frontier = 0;
        while frontier < elements.len() {
            let w = elements[frontier].clone();
            for g in &gens {
                let x = compose(g, &w);
                if !elements.contains(&x) {
                    elements.push(x);
                }
            }
            frontier += 1;
        }
        WeylGroup { elements }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn act(&self, w: usize, mu: &[i64], lambda: &[f64]) -> (Weight, Vec<f64>) {
        (apply(&self.elements[w], mu), apply_real(&self.elements[w], lambda))
    }

    /// Indices of the elements fixing `mu`.
    pub fn stabilizer(&self, mu: &[i64]) -> Vec<usize> {
        (0..self.order()).filter(|&w| apply(&self.elements[w], mu) == mu).collect()
    }
}

/// Distinct points `w·(μ, λ)` for `w` in the Weyl group.
pub fn weyl_orbit(group: &WeylGroup, mu: &[i64], lambda: &[f64]) -> Vec<(Weight, Vec<f64>)> {
    let mut out: Vec<(Weight, Vec<f64>)> = Vec::new();
    for w in 0..group.order() {
        let p = group.act(w, mu, lambda);
        let seen = out.iter().any(|(m, l)| {
            *m == p.0 && l.iter().zip(&p.1).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
        });
        if !seen {
            out.push(p);
        }
    }
    out
}

/// `[n]_q` in the requested backend.
pub fn q_integer(n: i64, backend: BackendKind) -> Scalar {
    match backend {
        BackendKind::Exact => Scalar::Exact(Exact.q_int(n)),
        BackendKind::Numeric(q) => Scalar::Numeric { value: Numeric::new(q).q_int(n).0, q },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sl2_form() {
        let d = CartanData::sl2();
        assert_eq!(pair_weights(&d, &[2], &[2]).unwrap(), Rational::from_integer(2));
        assert_eq!(pair_weights(&d, &[1], &[2]).unwrap(), Rational::from_integer(1));
        assert_eq!(pair_weights(&d, &[1], &[1]).unwrap(), Rational::new(1, 2));
        assert!(pair_weights(&d, &[1, 0], &[1]).is_err());
    }

    #[test]
    fn sl3_invariants() {
        let d = CartanData::sl3();
        for i in 0..2 {
            for j in 0..2 {
                let aa = pair_weights(&d, &d.simple_roots[i], &d.simple_roots[j]).unwrap();
                assert_eq!(aa, Rational::from_integer(d.d[i] * d.cartan_matrix[i][j]));
                let wa = pair_weights(&d, &d.fundamental_weights[i], &d.simple_roots[j]).unwrap();
                assert_eq!(wa, Rational::from_integer(if i == j { d.d[j] } else { 0 }));
            }
        }
        assert_eq!(WeylGroup::new(&d).order(), 6);
    }

    #[test]
    fn sl2_weyl_orbits() {
        let w = WeylGroup::new(&CartanData::sl2());
        assert_eq!(w.order(), 2);
        assert_eq!(weyl_orbit(&w, &[0], &[0.0]), vec![(vec![0], vec![0.0])]);
        let o = weyl_orbit(&w, &[1], &[0.3]);
        assert_eq!(o, vec![(vec![1], vec![0.3]), (vec![-1], vec![-0.3])]);
        assert_eq!(w.stabilizer(&[0]).len(), 2);
        assert_eq!(w.stabilizer(&[3]).len(), 1);
    }

    #[test]
    fn q_integer_values() {
        assert_eq!(q_integer(1, BackendKind::Exact), Scalar::Exact(QExact::from_i64(1)));
        assert_eq!(q_integer(0, BackendKind::Exact), Scalar::Exact(QExact::zero()));
        let two = q_integer(2, BackendKind::Numeric(0.5)).evaluate(0.5);
        assert!((two.re - 2.5).abs() < 1e-15);
        let e = Exact;
        assert_eq!(e.q_int(-3), e.q_int(3).neg_ref());
    }
}
