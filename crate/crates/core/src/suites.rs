//! Verification suites and their JSON reports.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cartan::{Exact, Field, Numeric, QExact, QNum};
use crate::classical::{
    an_exp, dressing, euler, iwasawa, motion_group_membership, motion_rep, deformed_rep, FibreSample,
    InducedSpaceModel, MotionParam, QuadratureOrders, TestFunction, M2,
};
use crate::double::{associativity_check, coeff_basis, dual_basis, pentagon_residual, DoubleElement, DoubleGroup};
use crate::error::{Error, Result};
use crate::fields::{
    continuity_modulus, generator_sections, graded_grid, ktheory_ranks, lift_projection, refinement_moduli,
    sl2c_deformation_square, square_check, AssemblyField, KTypeFiltrationLedger,
};
use crate::funalg::{self, CoeffElement};
use crate::linalg::op_norm;
use crate::pseries::{
    corner_function, minimal_ktype, minimal_ktype_projection, probe_set, weyl_equivalence, ParamPoint, ReprHandle,
};
use crate::qea::{pair, pair_tensor, Gen, QGroup, UqElement};

pub const SCHEMA: u32 = 1;

pub const SUITES: [&str; 7] = ["hopf", "double", "pseries", "assembly-field", "classical", "ktheory", "corners"];

/// Parameters shared by all suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub q: f64,
    /// Spin bound of the exact Hopf checks and of the pentagon window.
    pub max_spin: u32,
    /// Spin bound of the exact associativity check.
    pub double_spin: u32,
    /// Truncation `N` of the principal-series, K-theory and corner suites.
    pub truncation: u32,
    /// Largest spin of the elements fed to the principal series.
    pub budget: u32,
    /// Truncation of the quantum assembly field.
    pub assembly_truncation: u32,
    /// The σ-grid has `2^grid_level + 1` points.
    pub grid_level: u32,
    pub grading: f64,
    pub sigmas: Vec<f64>,
    pub quadrature: QuadratureOrders,
    pub iwasawa_trials: usize,
    pub dressing_trials: usize,
    pub seed: u64,
    /// Replaces the default tolerance of every numerical check.
    pub tol: Option<f64>,
    pub suites: Vec<String>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            q: 0.5,
            max_spin: 3,
            double_spin: 2,
            truncation: 5,
            budget: 2,
            assembly_truncation: 4,
            grid_level: 6,
            grading: 4.0,
            sigmas: vec![0.4, 0.2, 0.1, 0.05],
            quadrature: QuadratureOrders::default(),
            iwasawa_trials: 10_000,
            dressing_trials: 1_000,
            seed: 0,
            tol: None,
            suites: Vec::new(),
            out: PathBuf::from("reports"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config(format!("q = {} is not in (0, 1)", self.q)));
        }
        if self.truncation < self.budget {
            return Err(Error::Config(format!("truncation {} below budget {}", self.truncation, self.budget)));
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.grid_level == 0 || self.grid_level > 12 {
            return Err(Error::Config(format!("grid level {} outside 1..=12", self.grid_level)));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(Error::Config("σ values must lie in (0, 1]".into()));
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown suite {s}")));
            }
        }
        Ok(())
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub residual: f64,
    pub tolerance: f64,
    /// The statement the check instantiates.
    pub paper_anchor: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: String,
    pub parameters: Value,
    pub checks: Vec<Check>,
    /// CSV tables written next to the report.
    #[serde(skip)]
    pub tables: BTreeMap<String, String>,
}

impl SuiteReport {
    fn new(suite: &str, parameters: Value) -> Self {
        SuiteReport { schema: SCHEMA, suite: suite.into(), parameters, checks: Vec::new(), tables: BTreeMap::new() }
    }

    fn check(&mut self, name: impl Into<String>, residual: f64, tolerance: f64, anchor: &str) {
        let status = if residual <= tolerance { Status::Pass } else { Status::Fail };
        self.checks.push(Check { name: name.into(), status, residual, tolerance, paper_anchor: anchor.into() });
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool, anchor: &str) {
        self.check(name, if ok { 0.0 } else { 1.0 }, 0.0, anchor);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    match name {
        "hopf" => hopf_suite(cfg),
        "double" => double_suite(cfg),
        "pseries" => pseries_suite(cfg),
        "assembly-field" => assembly_suite(cfg),
        "classical" => classical_suite(cfg),
        "ktheory" => ktheory_suite(cfg),
        "corners" => corners_suite(cfg),
        other => Err(Error::Config(format!("unknown suite {other}"))),
    }
}

/// Exact difference measured at `q`: 0 iff the two sides agree exactly.
fn exact_gap(a: &QExact, b: &QExact, q: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a.eval(q) - b.eval(q)).norm().max(f64::MIN_POSITIVE)
    }
}

fn coeff_gap(a: &CoeffElement<QExact>, b: &CoeffElement<QExact>, q: f64) -> f64 {
    let d = a.sub(b);
    d.iter().map(|(_, c)| c.eval(q).norm().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

fn hopf_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let n = cfg.max_spin;
    let q = cfg.q;
    let mut rep = SuiteReport::new("hopf", json!({ "backend": "exact", "max_spin": n, "evaluated_at_q": q }));
    let g = QGroup::new(Exact, n);
    let basis = coeff_basis(n);
    let gens = [Gen::E, Gen::F, Gen::K(1), Gen::K(-1)];
    let one = CoeffElement::<QExact>::unit();

    // algebra side
    let (mut counit, mut antipode_l, mut antipode_r, mut star_inv, mut star_s) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(nu, i, j) in &basis {
        let f = CoeffElement::basis(nu, i, j);
        let mut left = CoeffElement::zero();
        let mut right = CoeffElement::zero();
        let mut eps_left = CoeffElement::zero();
        for ((a, b), c) in funalg::coproduct(&f) {
            let fa = CoeffElement::basis(a.0, a.1, a.2);
            let fb = CoeffElement::basis(b.0, b.1, b.2);
            left = left.add(&funalg::multiply(&g, &funalg::antipode(&g, &fa)?, &fb)?.scale(&c));
            right = right.add(&funalg::multiply(&g, &fa, &funalg::antipode(&g, &fb)?)?.scale(&c));
            eps_left = eps_left.add(&fb.scale(&c.mul_ref(&funalg::counit(&fa))));
        }
        let eps = one.scale(&funalg::counit(&f));
        antipode_l = antipode_l.max(coeff_gap(&left, &eps, q));
        antipode_r = antipode_r.max(coeff_gap(&right, &eps, q));
        counit = counit.max(coeff_gap(&eps_left, &f, q));
        let fs = funalg::star(&g, &f)?;
        star_inv = star_inv.max(coeff_gap(&funalg::star(&g, &fs)?, &f, q));
        let s = funalg::antipode(&g, &funalg::star(&g, &funalg::antipode(&g, &fs)?)?)?;
        star_s = star_s.max(coeff_gap(&s, &f, q));
    }
    rep.check("counit", counit, 0.0, "(ε ⊗ id)Δ = id");
    rep.check("antipode-left", antipode_l, 0.0, "m(S ⊗ id)Δ = ε");
    rep.check("antipode-right", antipode_r, 0.0, "m(id ⊗ S)Δ = ε");
    rep.check("star-involution", star_inv, 0.0, "f** = f");
    rep.check("star-antipode", star_s, 0.0, "S(S(f*)*) = f");

    let (mut star_anti, mut counit_mult, mut pair_prod) = (0.0f64, 0.0f64, 0.0f64);
    for &(nu, i, j) in &basis {
        for &(mu, k, l) in &basis {
            if nu + mu > n {
                continue;
            }
            let f = CoeffElement::basis(nu, i, j);
            let h = CoeffElement::basis(mu, k, l);
            let fh = funalg::multiply(&g, &f, &h)?;
            let lhs = funalg::star(&g, &fh)?;
            let rhs = funalg::multiply(&g, &funalg::star(&g, &h)?, &funalg::star(&g, &f)?)?;
            star_anti = star_anti.max(coeff_gap(&lhs, &rhs, q));
            let e = funalg::counit(&f).mul_ref(&funalg::counit(&h));
            counit_mult = counit_mult.max(exact_gap(&funalg::counit(&fh), &e, q));
            for &x in &gens {
                let x = UqElement::gen(x);
                // products of functions pair with the opposite coproduct
                let lhs = pair(&g, &x, &fh)?;
                let rhs = pair_tensor(&g, &x.coproduct(), &h, &f)?;
                pair_prod = pair_prod.max(exact_gap(&lhs, &rhs, q));
            }
        }
    }
    rep.check("star-antimultiplicative", star_anti, 0.0, "(fg)* = g* f*");
    rep.check("counit-multiplicative", counit_mult, 0.0, "ε(fg) = ε(f)ε(g)");
    rep.check("pairing-product", pair_prod, 0.0, "(X, fg) = (X_(2), f)(X_(1), g)");

    let (mut pair_co, mut pair_s, mut pair_star) = (0.0f64, 0.0f64, 0.0f64);
    for &(nu, i, j) in &basis {
        let f = CoeffElement::basis(nu, i, j);
        let cop = funalg::coproduct(&f);
        let sf = funalg::antipode(&g, &f)?;
        let fs = funalg::star(&g, &f)?;
        for &a in &gens {
            let x = UqElement::gen(a);
            for &b in &gens {
                let y = UqElement::gen(b);
                let lhs = pair(&g, &x.mul(&y), &f)?;
                let mut rhs = QExact::zero();
                for ((p, r), c) in &cop {
                    let fp = CoeffElement::basis(p.0, p.1, p.2);
                    let fr = CoeffElement::basis(r.0, r.1, r.2);
                    rhs = rhs.add_ref(&c.mul_ref(&pair(&g, &x, &fp)?.mul_ref(&pair(&g, &y, &fr)?)));
                }
                pair_co = pair_co.max(exact_gap(&lhs, &rhs, q));
            }
            let sinv = x.antipode(&Exact, true);
            pair_s = pair_s.max(exact_gap(&pair(&g, &x, &sf)?, &pair(&g, &sinv, &f)?, q));
            pair_star = pair_star.max(exact_gap(&pair(&g, &x, &fs)?, &pair(&g, &sinv.star(), &f)?.conj(), q));
        }
    }
    rep.check("pairing-coproduct", pair_co, 0.0, "(XY, f) = (X, f_(1))(Y, f_(2))");
    rep.check("pairing-antipode", pair_s, 0.0, "(X, S(f)) = (Ŝ⁻¹(X), f)");
    rep.check("pairing-star", pair_star, 0.0, "(X, f*) = conj((Ŝ⁻¹(X))*, f)");
    Ok(rep)
}

fn double_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(
        "double",
        json!({ "associativity_spin": cfg.double_spin, "pentagon_q": cfg.q, "pentagon_spin": cfg.max_spin }),
    );
    let d = DoubleGroup::new(QGroup::new(Exact, 5 * cfg.double_spin));
    let a = associativity_check(&d, cfg.double_spin, cfg.q)?;
    rep.check(
        format!("associativity ({} quadruples)", a.checked),
        if a.failures.is_empty() { 0.0 } else { a.max_residual.max(f64::MIN_POSITIVE) },
        0.0,
        "multiplication of the Drinfeld double is associative",
    );
    let dn = DoubleGroup::new(QGroup::new(Numeric::new(cfg.q), 2 * cfg.max_spin + 2));
    let p = pentagon_residual(&dn, cfg.max_spin)?;
    rep.check("pentagon", p, cfg.tol(1e-12), "W₁₂W₁₃W₂₃ = W₂₃W₁₂");
    Ok(rep)
}

fn numeric_double(q: f64, spin: u32) -> Arc<DoubleGroup<Numeric>> {
    Arc::new(DoubleGroup::new(QGroup::new(Numeric::new(q), spin)))
}

fn lambda_points() -> Vec<ParamPoint> {
    let mut v = Vec::new();
    for mu in [-1i64, 0, 1, 2] {
        for th in [0.4, 2.3] {
            v.push(ParamPoint::new(mu, th));
        }
    }
    v
}

fn sorted_eigs(m: &DMatrix<Complex64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut e: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

fn pseries_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let n = cfg.truncation;
    let b = cfg.budget;
    let points = lambda_points();
    let mut rep = SuiteReport::new(
        "pseries",
        json!({
            "q": cfg.q, "truncation": n, "element_spin": b, "seed": cfg.seed,
            "points": points.iter().map(|p| json!([p.mu, p.theta])).collect::<Vec<_>>(),
        }),
    );
    let d = numeric_double(cfg.q, n + 2 * b + 2);
    let mut elems: Vec<DoubleElement<QNum>> = Vec::new();
    for x in std::iter::once(None).chain(dual_basis(b).into_iter()) {
        for f in coeff_basis(b) {
            elems.push(DoubleElement::basis(x, f));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let partners: Vec<usize> = (0..4).map(|_| rng.gen_range(0..elems.len())).collect();
    let (mut mult, mut star, mut norm) = (0.0f64, 0.0f64, 0.0f64);
    for p in &points {
        let h = ReprHandle::new(d.clone(), *p, n)?;
        let ops: Vec<_> = elems.iter().map(|a| h.represent(a)).collect::<Result<_>>()?;
        for (a, pa) in elems.iter().zip(&ops) {
            for &k in &partners {
                let ab = d.multiply(a, &elems[k])?;
                let direct = h.represent(&ab)?;
                let prod = pa.mul(&ops[k])?;
                if prod.window_spin() >= 0 {
                    mult = mult.max(direct.window_residual(&prod)?);
                }
            }
            let s = h.represent(&d.star(a)?)?;
            star = star.max(s.window_residual(&pa.adjoint())?);
        }
        for (_, a) in generator_sections() {
            norm = norm.max(op_norm(&h.represent(&a)?.window_columns()));
        }
    }
    let tol = cfg.tol(1e-10);
    rep.check("multiplicative on the window", mult, tol, "π(ab) = π(a)π(b)");
    rep.check("star-compatible on the window", star, tol, "π(a*) = π(a)*");
    rep.check("generator norms", (norm - 1.0).max(0.0), cfg.tol(1e-10), "generator sections are uniformly bounded by 1");

    // Weyl orbits: compressions to the window are unitarily equivalent
    let mut spec = 0.0f64;
    for p in &points {
        let h1 = ReprHandle::new(d.clone(), *p, n)?;
        let h2 = ReprHandle::new(d.clone(), p.weyl(), n)?;
        for (_, a) in generator_sections() {
            let (x, y) = (h1.represent(&a)?, h2.represent(&a)?);
            let (e1, e2) = (sorted_eigs(&x.window()), sorted_eigs(&y.window()));
            spec = spec.max(e1.iter().zip(&e2).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max));
        }
    }
    rep.check("Weyl-orbit spectra", spec, cfg.tol(1e-8), "π_{μ,λ} ≅ π_{w(μ,λ)}");
    let mut inter = 0.0f64;
    let mut window = i64::MAX;
    for p in [ParamPoint::new(1, 0.9), ParamPoint::new(0, 1.3), ParamPoint::new(2, 2.2)] {
        let h1 = ReprHandle::new(d.clone(), p, n)?;
        let h2 = ReprHandle::new(d.clone(), p.weyl(), n)?;
        let r = weyl_equivalence(&h1, &h2, &probe_set())?;
        inter = inter.max(r.residual);
        window = window.min(r.window_spin);
    }
    rep.check(format!("Weyl intertwiner on blocks up to {window}"), inter, cfg.tol(1e-6), "π_{μ,λ} ≅ π_{w(μ,λ)}");
    Ok(rep)
}

/// Weyl-closed handles for the assembly field, including the fixed points
/// `θ ∈ {0, π}` of the Weyl action at `μ = 0`.
pub fn assembly_handles() -> Vec<ParamPoint> {
    let mut v = Vec::new();
    for (mu, th) in [(0i64, 0.0), (0, PI), (0, 0.7), (1, 0.0), (1, PI), (1, 1.9)] {
        let p = ParamPoint::new(mu, th);
        v.push(p);
        let w = p.weyl();
        if w != p {
            v.push(w);
        }
    }
    v
}

/// Refinement moduli of every generator section over the nested sub-grids.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssemblyModuli {
    pub section: String,
    pub moduli: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Sections whose largest gap stays below this are treated as constant.
pub const CONSTANT_SECTION: f64 = 1e-12;

impl AssemblyModuli {
    pub fn is_constant(&self) -> bool {
        self.moduli.iter().all(|&m| m <= CONSTANT_SECTION)
    }

    pub fn min_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn assembly_moduli(cfg: &RunConfig) -> Result<(AssemblyField, Vec<AssemblyModuli>)> {
    let grid = graded_grid(cfg.grid_level, cfg.grading);
    let gens = generator_sections();
    let f = AssemblyField::new(cfg.q, cfg.assembly_truncation, grid, assembly_handles(), &gens, cfg.tol(1e-10))?;
    let mut out = Vec::new();
    for (name, _) in &gens {
        let moduli = refinement_moduli(&f.field, name)?;
        let ratios = moduli.windows(2).map(|w| w[0] / w[1]).collect();
        out.push(AssemblyModuli { section: name.clone(), moduli, ratios });
    }
    Ok((f, out))
}

fn assembly_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(
        "assembly-field",
        json!({
            "q": cfg.q, "truncation": cfg.assembly_truncation, "grid_points": (1u32 << cfg.grid_level) + 1,
            "grading": cfg.grading,
            "handles": assembly_handles().iter().map(|p| json!([p.mu, p.theta])).collect::<Vec<_>>(),
        }),
    );
    // the fibre at σ = 0 was checked against the K ⋉ C(K) predicate on insertion
    let (f, moduli) = assembly_moduli(cfg)?;
    let names: Vec<String> = f.field.section_names().map(String::from).collect();
    let mut member = 0.0f64;
    for name in &names {
        if f.field.membership(name)?[0].is_err() {
            member = 1.0;
        }
    }
    rep.check("σ = 0 fibre in K ⋉ C(K)", member, 0.0, "f_t ∈ K(L²(K))^{K_t} for all t");
    let mut csv = String::from("section,level,modulus,ratio\n");
    for m in &moduli {
        for (l, v) in m.moduli.iter().enumerate() {
            let r = if l == 0 { String::new() } else { format!("{:e}", m.ratios[l - 1]) };
            writeln!(csv, "{},{},{:e},{r}", m.section, l + 1, v).unwrap();
        }
        if m.is_constant() {
            rep.flag(format!("modulus halving {} (constant section)", m.section), true, "generator sections depend continuously on σ");
            continue;
        }
        let worst = m.min_ratio();
        rep.check(
            format!("modulus halving {}", m.section),
            (2.0 - worst).max(0.0),
            0.0,
            "generator sections depend continuously on σ",
        );
    }
    rep.tables.insert("moduli".into(), csv);
    let first = &names[0];
    rep.tables.insert(format!("gaps-{first}"), continuity_modulus(&f.field, first)?.to_csv());
    Ok(rep)
}

fn random_sl2(rng: &mut ChaCha8Rng) -> M2 {
    let g = M2::from_fn(|_, _| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)));
    let s = g.determinant().sqrt();
    g / s
}

fn random_su2(rng: &mut ChaCha8Rng) -> M2 {
    euler(rng.gen_range(0.0..4.0 * PI), rng.gen_range(0.0..PI), rng.gen_range(0.0..4.0 * PI))
}

fn random_an(rng: &mut ChaCha8Rng) -> M2 {
    an_exp([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
}

fn dist(a: &M2, b: &M2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖deformed_rep(σ) − motion_rep‖` on the window, one entry per σ.
pub fn classical_convergence(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let m = InducedSpaceModel::new(0, 2, cfg.quadrature, 1e-10)?;
    let f = TestFunction::gaussian(
        vec![((0, 0, 0), Complex64::new(1.0, 0.0)), ((2, 0, 0), Complex64::new(0.5, 0.0))],
        0.5,
    );
    let p = MotionParam::new(0, 0.8);
    let base = motion_rep(p, &f, &m)?;
    cfg.sigmas
        .iter()
        .map(|&s| Ok((s, deformed_rep(p, &f, s, &m)?.window_residual(&base)?)))
        .collect()
}

/// Iwasawa uniqueness and the dressing action law over random trials.
pub fn iwasawa_dressing_trials(cfg: &RunConfig) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1a5a);
    let mut iw = 0.0f64;
    for _ in 0..cfg.iwasawa_trials {
        let g = random_sl2(&mut rng);
        let f = iwasawa(&g)?;
        let again = iwasawa(&f.product())?;
        iw = iw.max(dist(&f.product(), &g)).max(dist(&again.k, &f.k)).max(dist(&again.b, &f.b));
    }
    let mut dr = 0.0f64;
    for _ in 0..cfg.dressing_trials {
        let (b1, b2, k) = (random_an(&mut rng), random_an(&mut rng), random_su2(&mut rng));
        let (k12, _) = dressing(&(b1 * b2), &k)?;
        let (k2, _) = dressing(&b2, &k)?;
        let (k1, _) = dressing(&b1, &k2)?;
        dr = dr.max(dist(&k12, &k1));
    }
    Ok((iw, dr))
}

fn classical_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(
        "classical",
        json!({
            "quadrature": cfg.quadrature, "sigmas": cfg.sigmas, "seed": cfg.seed,
            "iwasawa_trials": cfg.iwasawa_trials, "dressing_trials": cfg.dressing_trials,
        }),
    );
    let (iw, dr) = iwasawa_dressing_trials(cfg)?;
    rep.check(format!("Iwasawa uniqueness ({} trials)", cfg.iwasawa_trials), iw, cfg.tol(1e-10), "G = KAN uniquely");
    rep.check(format!("dressing action ({} trials)", cfg.dressing_trials), dr, cfg.tol(1e-10), "(b₁b₂) ⇀ k = b₁ ⇀ (b₂ ⇀ k)");
    let conv = classical_convergence(cfg)?;
    let mut csv = String::from("sigma,distance\n");
    let mut worst = 0.0f64;
    for (i, &(s, d)) in conv.iter().enumerate() {
        writeln!(csv, "{s},{d:e}").unwrap();
        if i > 0 {
            worst = worst.max(d - conv[i - 1].1);
        }
    }
    rep.tables.insert("convergence".into(), csv);
    rep.check("σ → 0 monotone", worst.max(0.0), 0.0, "π(f_σ) → π_{μ,X}(f₀) as σ → 0");

    // motion-group membership of π_{μ,X}(f) over a weight × 𝔱 grid
    let f = TestFunction::gaussian(
        vec![((0, 0, 0), Complex64::new(1.0, 0.0)), ((2, 1, 1), Complex64::new(-0.3, 0.0))],
        0.5,
    );
    let mut samples = Vec::new();
    for mu in [-1i64, 0, 1] {
        let m = InducedSpaceModel::new(mu, 2, cfg.quadrature, 1e-10)?;
        for x in [-0.8, 0.0, 0.8] {
            let op = motion_rep(MotionParam::new(mu, x), &f, &m)?;
            samples.push(FibreSample { mu, param: x, op });
        }
    }
    let r = motion_group_membership(&samples, cfg.tol(1e-6));
    rep.check(
        format!("motion-group membership ({} conditions)", r.checked),
        r.max_residual,
        r.tolerance,
        "image of K ⋉ C₀(𝔨) lies in A^L_0",
    );
    Ok(rep)
}

/// Constant rank of the lifted `p_n` along the assembly field and agreement
/// of the two boundary paths of the deformation square, per `n`.
pub fn ktheory_lifts(cfg: &RunConfig, max_n: usize) -> Result<Vec<(usize, bool, f64, bool, f64)>> {
    let handles = assembly_handles();
    let level = cfg.grid_level.min(4);
    let mut out = Vec::new();
    for n in 1..=max_n {
        let name = format!("p{n}");
        let p = vec![(name.clone(), minimal_ktype_projection::<QNum>(n))];
        let f = AssemblyField::new(cfg.q, cfg.assembly_truncation, graded_grid(level, cfg.grading), handles.clone(), &p, cfg.tol(1e-10))?;
        let p0 = f.field.section(&name)?[0].clone();
        let l = lift_projection(&f.field, &p0, Some(&name))?;
        let g = graded_grid(2, cfg.grading);
        let sq = sl2c_deformation_square(cfg.q, cfg.assembly_truncation, &handles, n, g.clone(), g)?;
        let s = square_check(&sq, &p0, cfg.tol(1e-10))?;
        out.push((n, l.rank_is_constant(), l.max_defect, s.corners_agree, s.conjugacy_residual));
    }
    Ok(out)
}

fn ktheory_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(
        "ktheory",
        json!({ "q": cfg.q, "truncation": cfg.assembly_truncation, "grid_level": cfg.grid_level.min(4), "grading": cfg.grading }),
    );
    for (n, constant, defect, agree, resid) in ktheory_lifts(cfg, 3)? {
        rep.flag(format!("p{n} lift has constant rank"), constant, "functional calculus lifts projections");
        rep.check(format!("p{n} lift is a projection"), defect, cfg.tol(1e-10), "p(τ)² = p(τ) = p(τ)*");
        rep.flag(format!("p{n} square corners agree"), agree, "commuting diagram of the deformation square");
        rep.check(format!("p{n} square conjugacy"), resid, cfg.tol(1e-10), "commuting diagram of the deformation square");
    }
    let levels = 7;
    let dbl = ktheory_ranks(&KTypeFiltrationLedger::su2_double(levels as u32 - 1), levels);
    let mot = ktheory_ranks(&KTypeFiltrationLedger::su2_motion(levels as u32 - 1), levels);
    rep.flag("double side ranks (1, 1)", (dbl.k0, dbl.k1) == (1, 1), "K₀ = R(K), K₁ = R(K)");
    rep.flag("motion side ranks (0, 1)", (mot.k0, mot.k1) == (0, 1), "K_{dim K} = R(K), other degree 0");
    rep.parameters["rank_assumption"] = json!(dbl.assumption);
    Ok(rep)
}

/// Ranks of `π(p_n)` over handles with `|μ| ≤ 3` and the largest odd part
/// of the `μ = 0` corner functions.
pub fn corner_data(cfg: &RunConfig) -> Result<(Vec<usize>, f64)> {
    let n = cfg.truncation;
    let d = numeric_double(cfg.q, n + 4);
    let thetas = [0.0, 0.5, 1.3, 2.1, PI];
    let mut ranks = Vec::new();
    for k in 1..=4 {
        let p = minimal_ktype_projection::<QNum>(k);
        for mu in -3i64..=3 {
            for &t in &thetas {
                let h = ReprHandle::new(d.clone(), ParamPoint::new(mu, t), n)?;
                ranks.push(crate::linalg::numeric_rank(&h.represent(&p)?.matrix, 1e-10));
            }
        }
    }
    let ts: Vec<f64> = (0..12).map(|j| TAU * j as f64 / 12.0).collect();
    let neg: Vec<f64> = ts.iter().map(|t| -t).collect();
    let mut odd = 0.0f64;
    for f in coeff_basis(2) {
        let a = DoubleElement::basis(None, f);
        let x = corner_function(&d, 1, &a, &ts, n)?;
        let y = corner_function(&d, 1, &a, &neg, n)?;
        odd = odd.max(x.iter().zip(&y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max));
    }
    Ok((ranks, odd))
}

fn corners_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(
        "corners",
        json!({ "q": cfg.q, "truncation": cfg.truncation, "minimal_ktypes": (1..=4).map(minimal_ktype).collect::<Vec<_>>() }),
    );
    let (ranks, odd) = corner_data(cfg)?;
    let worst = ranks.iter().copied().max().unwrap_or(0);
    rep.check("rank of π(p_n) at most one", worst.saturating_sub(1) as f64, 0.0, "p_n acts as a rank one projection");
    rep.check("μ = 0 corner functions even", odd, cfg.tol(1e-10), "p_n Q_n p_n ≅ C([0,1], C(T)^{W_{μ_n}})");
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.q = 1.0;
        assert!(c.validate().is_err());
        let c = RunConfig { suites: vec!["nope".into()], ..RunConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c: RunConfig = serde_json::from_str(r#"{"q": 0.3, "max_spin": 2}"#).unwrap();
        assert_eq!((c.q, c.max_spin, c.truncation), (0.3, 2, 5));
        assert!(serde_json::from_str::<RunConfig>(r#"{"qq": 0.3}"#).is_err());
    }

    #[test]
    fn hopf_suite_small_spin_is_exact() {
        let c = RunConfig { max_spin: 2, ..RunConfig::default() };
        let r = hopf_suite(&c).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
        assert!(r.checks.iter().all(|c| c.residual == 0.0));
    }

    #[test]
    fn corner_suite_passes() {
        let c = RunConfig { truncation: 4, ..RunConfig::default() };
        let r = corners_suite(&c).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
    }

    #[test]
    fn reports_serialize_with_schema() {
        let mut r = SuiteReport::new("x", json!({}));
        r.check("a", 0.5, 1.0, "anchor");
        r.check("b", f64::INFINITY, 1.0, "anchor");
        let s = r.to_json();
        assert!(s.contains("\"schema\": 1") && s.contains("\"status\": \"fail\"") && s.contains("\"residual\": null"));
        assert!(!r.passed());
    }
}
