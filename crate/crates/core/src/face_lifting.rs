//! Face ideals of `R⟨θ₁..θ_n⟩` on degree-truncated slices, the modular law and exactness
//! checks, norm-controlled lifting of compatible face values, and the constrained
//! approximation of tuples over a tower of subrings.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::implicit_solver::{prepare_at, Homotopy, PolySystem, SolverError};
use crate::linalg::{primitive_integer, Mat, Rat};
use crate::report::Check;
use crate::tate_series::{Exps, SeriesError, SeriesParams, TateSeries};
use crate::valued_field::{fmt_q, parse_q, FieldElement, FieldError, Valuation, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FaceError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("face values disagree on the join of {0} and {1}")]
    Constraint(String, String),
    #[error("face values have no lift within the degree cap")]
    Headroom,
    #[error("malformed input: {0}")]
    Input(String),
}

impl From<FieldError> for FaceError {
    fn from(e: FieldError) -> Self {
        FaceError::Series(SeriesError::Field(e))
    }
}

/// `σ: T → {0, 1}` with `T ⊆ {1..n}` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceMap {
    pub vals: BTreeMap<usize, u8>,
}

impl FaceMap {
    pub fn new(pairs: &[(usize, u8)]) -> Self {
        FaceMap { vals: pairs.iter().copied().collect() }
    }

    pub fn compatible(&self, other: &Self) -> bool {
        self.vals.iter().all(|(k, v)| other.vals.get(k).is_none_or(|w| w == v))
    }

    pub fn join(&self, other: &Self) -> Option<Self> {
        if !self.compatible(other) {
            return None;
        }
        let mut vals = self.vals.clone();
        vals.extend(other.vals.iter().map(|(k, v)| (*k, *v)));
        Some(FaceMap { vals })
    }

    pub fn to_json(&self) -> Value {
        json!({"T": self.vals.keys().collect::<Vec<_>>(), "vals": self.vals.values().collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value, n: usize) -> Result<Self, FaceError> {
        let bad = |m: &str| FaceError::Input(m.to_string());
        let t: Vec<usize> = serde_json::from_value(v.get("T").cloned().ok_or_else(|| bad("missing T"))?).map_err(|e| bad(&e.to_string()))?;
        let vals: Vec<u8> = serde_json::from_value(v.get("vals").cloned().ok_or_else(|| bad("missing vals"))?).map_err(|e| bad(&e.to_string()))?;
        if t.len() != vals.len() || t.iter().any(|&i| i == 0 || i > n) || vals.iter().any(|&x| x > 1) {
            return Err(bad("face map out of range"));
        }
        let map = FaceMap { vals: t.into_iter().zip(vals).collect() };
        if map.vals.len() != vals_len(v) {
            return Err(bad("repeated index in T"));
        }
        Ok(map)
    }
}

fn vals_len(v: &Value) -> usize {
    v.get("T").and_then(Value::as_array).map_or(0, Vec::len)
}

impl std::fmt::Display for FaceMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.vals.iter().map(|(k, v)| format!("θ{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// All partial faces with nonempty domain, ordered by domain size.
pub fn all_faces(n: usize) -> Vec<FaceMap> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        for bits in 0u32..(1 << idx.len()) {
            out.push(FaceMap { vals: idx.iter().enumerate().map(|(j, &i)| (i + 1, ((bits >> j) & 1) as u8)).collect() });
        }
    }
    out.sort_by_key(|f| (f.vals.len(), f.vals.clone()));
    out
}

/// Monomials of `Q[θ₁..θ_n]` of total degree `≤ d`, ascending in grevlex.
#[derive(Debug, Clone)]
pub struct Slice {
    pub n: usize,
    pub d: u32,
    pub monos: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

fn grevlex_key(m: &[u32]) -> (u32, Vec<i64>) {
    (m.iter().sum(), m.iter().rev().map(|&e| -(e as i64)).collect())
}

impl Slice {
    pub fn new(n: usize, d: u32) -> Self {
        let mut monos = vec![vec![]];
        for _ in 0..n {
            monos = monos.into_iter().flat_map(|m: Vec<u32>| (0..=d).map(move |e| [m.clone(), vec![e]].concat())).collect();
        }
        monos.retain(|m| m.iter().sum::<u32>() <= d);
        monos.sort_by_key(|m| grevlex_key(m));
        let index = monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Slice { n, d, monos, index }
    }

    pub fn dim(&self) -> usize {
        self.monos.len()
    }

    pub fn position(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Restriction to the face `σ`, as an endomorphism of the slice.
    pub fn eval_matrix(&self, sigma: &FaceMap) -> Mat {
        let mut m = Mat::zeros(self.dim(), self.dim());
        for (j, mono) in self.monos.iter().enumerate() {
            let mut out = mono.clone();
            let mut zero = false;
            for (&i, &v) in &sigma.vals {
                if v == 0 && out[i - 1] > 0 {
                    zero = true;
                }
                out[i - 1] = 0;
            }
            if !zero {
                m[(self.index[&out], j)] += Rat::one();
            }
        }
        m
    }

    /// Multiplication by a monomial, as a partial map on the slice.
    fn shift(&self, v: &[Rat], by: &[u32]) -> Option<Vec<Rat>> {
        let mut out = vec![Rat::zero(); self.dim()];
        for (j, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let m: Vec<u32> = self.monos[j].iter().zip(by).map(|(a, b)| a + b).collect();
            out[self.position(&m)?] = x.clone();
        }
        Some(out)
    }

    pub fn format(&self, coeffs: &[BigInt]) -> String {
        let mut terms = Vec::new();
        for (j, c) in coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mono: Vec<String> = self.monos[j]
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0)
                .map(|(i, e)| if *e == 1 { format!("theta{}", i + 1) } else { format!("theta{}^{}", i + 1, e) })
                .collect();
            let body = if mono.is_empty() { String::new() } else { mono.join("*") };
            let mag = c.abs();
            let coef = match (mag.is_one(), body.is_empty()) {
                (true, false) => body,
                (_, true) => mag.to_string(),
                (false, false) => format!("{mag}*{body}"),
            };
            let sign = if c.is_negative() { "-" } else { "+" };
            terms.push((sign, coef));
        }
        if terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (sign, t)) in terms.iter().enumerate() {
            if i == 0 {
                if *sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            s.push_str(t);
        }
        s
    }
}

/// Degree-`≤D` slice of `∩_{σ∈Σ} I_σ` with integer ring generators.
#[derive(Debug, Clone)]
pub struct IdealSlice {
    pub slice: Slice,
    pub basis: Mat,
    pub generators: Vec<Vec<BigInt>>,
}

impl IdealSlice {
    pub fn generator_strings(&self) -> Vec<String> {
        self.generators.iter().map(|g| self.slice.format(g)).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.slice.n,
            "degree": self.slice.d,
            "dimension": self.basis.cols(),
            "generators": self.generator_strings(),
        })
    }
}

thread_local! {
    static IDEAL_CACHE: std::cell::RefCell<HashMap<(usize, u32, Vec<FaceMap>), Mat>> = std::cell::RefCell::new(HashMap::new());
}

/// Basis of `∩_{σ∈Σ} I_σ` on the slice (the whole slice for `Σ = ∅`), memoized per thread.
fn ideal_basis(slice: &Slice, sigmas: &[FaceMap]) -> Mat {
    let mut key: Vec<FaceMap> = sigmas.to_vec();
    key.sort();
    key.dedup();
    let key = (slice.n, slice.d, key);
    if let Some(m) = IDEAL_CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return m;
    }
    let m = if key.2.is_empty() { Mat::identity(slice.dim()) } else { stacked_evals(slice, &key.2).kernel() };
    IDEAL_CACHE.with(|c| c.borrow_mut().insert(key, m.clone()));
    m
}

fn stacked_evals(slice: &Slice, sigmas: &[FaceMap]) -> Mat {
    let mut m = Mat::zeros(0, slice.dim());
    for s in sigmas {
        m = m.vstack(&slice.eval_matrix(s));
    }
    m
}

/// Span of `{m·g : g ∈ gens, deg(m·g) ≤ D}`.
fn ideal_span(slice: &Slice, gens: &[Vec<Rat>]) -> Mat {
    let mut cols = Vec::new();
    let all = Slice::new(slice.n, slice.d);
    for g in gens {
        for m in &all.monos {
            if let Some(v) = slice.shift(g, m) {
                cols.push(v);
            }
        }
    }
    if cols.is_empty() {
        return Mat::zeros(slice.dim(), 0);
    }
    Mat::from_columns(&cols, slice.dim()).column_basis()
}

pub fn intersect(sigmas: &[FaceMap], n: usize, d: u32) -> IdealSlice {
    let slice = Slice::new(n, d);
    let basis = ideal_basis(&slice, sigmas);
    // Echelon form with columns in descending grevlex gives distinct leading monomials.
    let dim = slice.dim();
    let rev: Vec<usize> = (0..dim).rev().collect();
    let mut rows = Mat::zeros(basis.cols(), dim);
    for j in 0..basis.cols() {
        for (k, &i) in rev.iter().enumerate() {
            rows[(j, k)] = basis[(i, j)].clone();
        }
    }
    let (ech, pivots) = rows.rref();
    let mut candidates: Vec<(usize, Vec<Rat>)> = (0..pivots.len())
        .map(|r| {
            let mut v = vec![Rat::zero(); dim];
            for (k, &i) in rev.iter().enumerate() {
                v[i] = ech[(r, k)].clone();
            }
            (rev[pivots[r]], v)
        })
        .collect();
    candidates.sort_by_key(|(lead, _)| *lead);
    let mut gens: Vec<Vec<Rat>> = Vec::new();
    let mut span = Mat::zeros(dim, 0);
    for (_, v) in candidates {
        let col = Mat::from_columns(std::slice::from_ref(&v), dim);
        if span.cols() > 0 && span.solve(&col).is_some() {
            continue;
        }
        gens.push(v);
        span = ideal_span(&slice, &gens);
        if span.cols() == basis.cols() {
            break;
        }
    }
    let generators = gens
        .iter()
        .map(|g| {
            let v = primitive_integer(g);
            match v.iter().rev().find(|x| !x.is_zero()) {
                Some(lead) if lead.is_negative() => v.into_iter().map(|x| -x).collect(),
                _ => v,
            }
        })
        .collect();
    IdealSlice { slice, basis, generators }
}

/// The span generated by the integer generators equals the computed slice.
pub fn generators_reproduce(ideal: &IdealSlice) -> bool {
    let gens: Vec<Vec<Rat>> = ideal.generators.iter().map(|g| g.iter().map(|x| Rat::from_integer(x.clone())).collect()).collect();
    let span = ideal_span(&ideal.slice, &gens);
    span.cols() == ideal.basis.cols() && ideal.basis.hstack(&span).rank() == span.cols()
}

fn modular_sides(slice: &Slice, sigmas: &[FaceMap], eta: &FaceMap) -> (Mat, Mat) {
    let i_eta = ideal_basis(slice, std::slice::from_ref(eta));
    let inter = ideal_basis(slice, sigmas);
    let joins: Vec<FaceMap> = sigmas.iter().filter_map(|s| s.join(eta)).collect();
    let rhs = ideal_basis(slice, &joins);
    (inter.hstack(&i_eta), rhs)
}

fn contained(a: &Mat, b: &Mat) -> bool {
    a.cols() == 0 || b.hstack(a).rank() == b.rank()
}

/// `(∩ I_σ) + I_η = ∩ (I_σ + I_η)`, with `I_σ + I_η = (1)` for incompatible pairs.
/// The right side is taken in degree `≤ D` and the left side in degree `≤ D + n`, since a
/// decomposition of a degree-`D` element can pass through higher degrees.
pub fn modular_law_check(sigmas: &[FaceMap], eta: &FaceMap, n: usize, d: u32) -> bool {
    let small = Slice::new(n, d);
    let big = Slice::new(n, d + n as u32);
    let (_, rhs_small) = modular_sides(&small, sigmas, eta);
    let (lhs_big, rhs_big) = modular_sides(&big, sigmas, eta);
    let mut rhs = Mat::zeros(big.dim(), rhs_small.cols());
    for (i, m) in small.monos.iter().enumerate() {
        let bi = big.position(m).expect("sub-slice");
        for j in 0..rhs_small.cols() {
            rhs[(bi, j)] = rhs_small[(i, j)].clone();
        }
    }
    contained(&rhs, &lhs_big) && contained(&lhs_big, &rhs_big)
}

/// Rank checks for `0 → A/∩I_σ → Π A/I_σ → Π A/(I_σ + I_σ′)` on the degree-`≤D` slice.
/// Compatible face data of degree `≤ D` is lifted inside the slice of degree `≤ D + n`:
/// a lift can need one extra degree per cube variable.
pub fn exactness_check(sigmas: &[FaceMap], n: usize, d: u32) -> Vec<Check> {
    let slice = Slice::new(n, d);
    let big = Slice::new(n, d + n as u32);
    let (dim, bdim, k) = (slice.dim(), big.dim(), sigmas.len());
    let alpha = if sigmas.is_empty() { Mat::zeros(0, dim) } else { stacked_evals(&slice, sigmas) };
    let inter = intersect(sigmas, n, d).basis.cols();
    let injective = alpha.rank() == dim - inter;
    let embed: Vec<usize> = slice.monos.iter().map(|m| big.position(m).expect("sub-slice")).collect();
    // Domain of β: ⊕ im(ev_σ) of the small slice, written in big-slice coordinates.
    let mut cols: Vec<Vec<Rat>> = Vec::new();
    for (a, s) in sigmas.iter().enumerate() {
        let im = slice.eval_matrix(s).column_basis();
        for j in 0..im.cols() {
            let mut v = vec![Rat::zero(); bdim * k];
            for i in 0..dim {
                v[a * bdim + embed[i]] = im[(i, j)].clone();
            }
            cols.push(v);
        }
    }
    let domain = if cols.is_empty() { Mat::zeros(bdim * k, 0) } else { Mat::from_columns(&cols, bdim * k) };
    let mut beta = Mat::zeros(0, bdim * k);
    for a in 0..k {
        for b in a + 1..k {
            let Some(j) = sigmas[a].join(&sigmas[b]) else { continue };
            let ev = big.eval_matrix(&j);
            let mut row = Mat::zeros(bdim, bdim * k);
            for i in 0..bdim {
                for c in 0..bdim {
                    row[(i, a * bdim + c)] = ev[(i, c)].clone();
                    row[(i, b * bdim + c)] = -ev[(i, c)].clone();
                }
            }
            beta = beta.vstack(&row);
        }
    }
    let alpha_big = if sigmas.is_empty() { Mat::zeros(0, bdim) } else { stacked_evals(&big, sigmas) };
    let composite_zero = beta.rows() == 0 || beta.mul(&alpha_big).is_zero();
    let kernel = if beta.rows() == 0 { domain.clone() } else { domain.mul(&beta.mul(&domain).kernel()) };
    let ra = alpha_big.rank();
    let lifted = ra + kernel.cols() - alpha_big.hstack(&kernel).rank();
    vec![
        Check::new("injective", injective, (dim - inter) as u64, alpha.rank() as u64),
        Check::new("composite_zero", composite_zero, true, composite_zero),
        Check::new("exact_in_middle", lifted == kernel.cols(), kernel.cols() as u64, lifted as u64),
    ]
}

fn vp(x: &Rat, p: u32) -> i64 {
    if x.is_zero() {
        return i64::MAX;
    }
    let p = BigInt::from(p);
    let count = |mut n: BigInt| {
        let mut k = 0;
        while (&n % &p).is_zero() {
            n /= &p;
            k += 1;
        }
        k
    };
    count(x.numer().abs()) - count(x.denom().abs())
}

/// A linear section of `f ↦ (f|_σ)_σ` chosen by echelon pivots, with free variables 0.
#[derive(Debug, Clone)]
pub struct Section {
    pub slice: Slice,
    pub faces: Vec<FaceMap>,
    pub rho: Mat,
    pub matrix: Mat,
    /// `max(0, −min v_p(S_ij))`: the valuation lost by the section.
    pub loss: i64,
}

thread_local! {
    static SECTION_CACHE: std::cell::RefCell<HashMap<(Vec<FaceMap>, usize, u32, u32), Arc<Section>>> = std::cell::RefCell::new(HashMap::new());
}

/// Memoized per thread; the section depends only on `(Σ, n, D, p)`.
pub fn section(sigmas: &[FaceMap], n: usize, d: u32, p: u32) -> Arc<Section> {
    let key = (sigmas.to_vec(), n, d, p);
    if let Some(s) = SECTION_CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return s;
    }
    let s = Arc::new(compute_section(sigmas, n, d, p));
    SECTION_CACHE.with(|c| c.borrow_mut().insert(key, s.clone()));
    s
}

fn compute_section(sigmas: &[FaceMap], n: usize, d: u32, p: u32) -> Section {
    let slice = Slice::new(n, d);
    let rho = stacked_evals(&slice, sigmas);
    let (_, cols) = rho.rref();
    let (_, rows) = rho.transpose().rref();
    let mut m = Mat::zeros(rows.len(), cols.len());
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            m[(a, b)] = rho[(r, c)].clone();
        }
    }
    let inv = m.inverse().expect("pivot minor is invertible");
    let mut s = Mat::zeros(slice.dim(), rho.rows());
    for (a, &c) in cols.iter().enumerate() {
        for (b, &r) in rows.iter().enumerate() {
            s[(c, r)] = inv[(a, b)].clone();
        }
    }
    let mut loss = 0;
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            let v = vp(&s[(i, j)], p);
            if v != i64::MAX {
                loss = loss.max(-v);
            }
        }
    }
    Section { slice, faces: sigmas.to_vec(), rho, matrix: s, loss }
}

/// `C = p^{loss}` in norm form together with the valuation loss.
pub fn lift_constant(sigmas: &[FaceMap], n: usize, d: u32, p: u32) -> (Q, i64) {
    let loss = section(sigmas, n, d, p).loss;
    (Q::from_integer((p as i64).pow(loss as u32)), loss)
}

/// Positions of the cube variables `theta1..thetan` and of the remaining base variables.
#[derive(Debug, Clone)]
pub struct Layout {
    pub theta: Vec<usize>,
    pub base: Vec<usize>,
}

impl Layout {
    pub fn of(params: &SeriesParams) -> Result<Self, FaceError> {
        let mut theta = Vec::new();
        for (i, name) in params.vars().iter().enumerate() {
            if let Some(k) = name.strip_prefix("theta").and_then(|s| s.parse::<usize>().ok()) {
                theta.push((k, i));
            }
        }
        theta.sort();
        if theta.iter().enumerate().any(|(j, (k, _))| *k != j + 1) {
            return Err(FaceError::Input("cube variables must be theta1..thetan".into()));
        }
        let theta: Vec<usize> = theta.into_iter().map(|(_, i)| i).collect();
        let base = (0..params.nvars()).filter(|i| !theta.contains(i)).collect();
        Ok(Layout { theta, base })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }
}

/// `f|_σ`, keeping all variables.
pub fn restrict(f: &TateSeries, layout: &Layout, sigma: &FaceMap) -> TateSeries {
    sigma.vals.iter().fold(f.clone(), |acc, (&i, &v)| acc.set_var(layout.theta[i - 1], v))
}

/// Splits by base monomial into θ-coefficient vectors over the slice of remaining degree.
fn split_base(f: &TateSeries, layout: &Layout) -> Result<BTreeMap<Exps, Vec<(Vec<u32>, FieldElement)>>, FaceError> {
    let mut out: BTreeMap<Exps, Vec<(Vec<u32>, FieldElement)>> = BTreeMap::new();
    for (e, c) in f.terms() {
        let mut th = Vec::with_capacity(layout.n());
        for &i in &layout.theta {
            if !e[i].is_integer() {
                return Err(FaceError::Input("cube variables need integer exponents".into()));
            }
            th.push(e[i].to_integer() as u32);
        }
        let base: Exps = layout.base.iter().map(|&i| e[i]).collect();
        out.entry(base).or_default().push((th, c.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LiftResult {
    pub f: TateSeries,
    pub constant: Q,
    pub loss: i64,
    /// `min_σ v(f̄_σ − g|_σ)`.
    pub input_gap: Valuation,
    /// `v(f − g)`.
    pub achieved: Valuation,
    pub level: Option<u32>,
    pub checks: Vec<Check>,
}

/// Lifts compatible face values `f̄_σ` to `f` with `f|_σ = f̄_σ` and `v(f − g) ≥ gap − loss`.
/// With `level = Some(h)` the lift starts from `T_h(g)` and stays in `R_h`.
pub fn lift(faces: &[(FaceMap, TateSeries)], g: &TateSeries, level: Option<u32>) -> Result<LiftResult, FaceError> {
    let params = g.params().clone();
    let layout = Layout::of(&params)?;
    let field = *params.field();
    let sigmas: Vec<FaceMap> = faces.iter().map(|(s, _)| s.clone()).collect();
    let values: Vec<TateSeries> = faces.iter().map(|(s, v)| restrict(v, &layout, s)).collect();
    for (a, (sa, va)) in sigmas.iter().zip(&values).enumerate() {
        if va.params() != &params {
            return Err(FaceError::Series(SeriesError::ParamsMismatch));
        }
        for (sb, vb) in sigmas.iter().zip(&values).skip(a + 1) {
            if let Some(j) = sa.join(sb) {
                if restrict(va, &layout, &j) != restrict(vb, &layout, &j) {
                    return Err(FaceError::Constraint(sa.to_string(), sb.to_string()));
                }
            }
        }
    }
    let input_gap = sigmas.iter().zip(&values).map(|(s, v)| (v - &restrict(g, &layout, s)).gauss_norm()).min().unwrap_or(Valuation::Infinite);
    let start = match level {
        Some(h) => g.level_truncate(h),
        None => g.clone(),
    };
    let mut loss = 0;
    let mut f = start.clone();
    if !sigmas.is_empty() {
        // Work with guard digits so the truncated result keeps exact faces.
        let p = field.p();
        let d = params.deg_cap().max(0) as u32;
        let full = section(&sigmas, layout.n(), d, p);
        loss = full.loss;
        let guard = field.cap() + Q::from_integer(loss + 1);
        let wide = start.with_field_cap(guard)?;
        let wparams = wide.params().clone();
        let wfield = *wparams.field();
        let diffs: Vec<BTreeMap<Exps, Vec<(Vec<u32>, FieldElement)>>> = sigmas
            .iter()
            .zip(&values)
            .map(|(s, v)| split_base(&(&v.with_field_cap(guard)? - &restrict(&wide, &layout, s)), &layout))
            .collect::<Result<_, _>>()?;
        let mut keys: Vec<Exps> = diffs.iter().flat_map(|m| m.keys().cloned()).collect();
        keys.sort();
        keys.dedup();
        let mut sections: HashMap<u32, Arc<Section>> = HashMap::new();
        let mut correction = TateSeries::zero(&wparams);
        for base in keys {
            let bdeg = base.iter().fold(Q::zero(), |a, b| a + b);
            let budget = (Q::from_integer(params.deg_cap()) - bdeg).floor().to_integer().max(0) as u32;
            let sec = sections.entry(budget).or_insert_with(|| section(&sigmas, layout.n(), budget, p));
            let dim = sec.slice.dim();
            let mut y = vec![FieldElement::zero(wfield); dim * sigmas.len()];
            for (k, m) in diffs.iter().enumerate() {
                for (th, c) in m.get(&base).into_iter().flatten() {
                    let pos = sec.slice.position(th).ok_or_else(|| FaceError::Input("face value exceeds the degree cap".into()))?;
                    y[k * dim + pos] = &y[k * dim + pos] + c;
                }
            }
            for j in 0..dim {
                let mut x = FieldElement::zero(wfield);
                for (i, yi) in y.iter().enumerate() {
                    let s = &sec.matrix[(j, i)];
                    if s.is_zero() || yi.is_zero() {
                        continue;
                    }
                    x = &x + &(&FieldElement::from_rational(wfield, s)? * yi);
                }
                if x.is_zero() {
                    continue;
                }
                let mut e = vec![Q::zero(); params.nvars()];
                for (bi, &i) in layout.base.iter().enumerate() {
                    e[i] = base[bi];
                }
                for (ti, &i) in layout.theta.iter().enumerate() {
                    e[i] = Q::from_integer(sec.slice.monos[j][ti] as i64);
                }
                correction = &correction + &TateSeries::monomial(&wparams, e, x)?;
            }
        }
        f = (&wide + &correction).with_field_cap(field.cap())?;
    }
    let achieved = (&f - g).gauss_norm();
    let faces_ok = sigmas.iter().zip(&values).all(|(s, v)| restrict(&f, &layout, s) == *v);
    if !faces_ok {
        return Err(FaceError::Headroom);
    }
    let bound = match input_gap.min((g - &start).gauss_norm()) {
        Valuation::Finite(v) => Valuation::Finite(v - Q::from_integer(loss)),
        Valuation::Infinite => Valuation::Infinite,
    };
    let level_ok = level.is_none_or(|h| f.support_level() <= h);
    let checks = vec![
        Check::new("faces_exact", faces_ok, true, faces_ok),
        Check::new("distance_bound", achieved >= bound, format!(">= {bound}"), achieved.to_string()),
        Check::new("level", level_ok, level.map_or(Value::Null, |h| json!(h)), f.support_level()),
    ];
    Ok(LiftResult { f, constant: Q::from_integer((field.p() as i64).pow(loss as u32)), loss, input_gap, achieved, level, checks })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coincidences {
    Auto,
    /// `(α, β, σ)` with 0-based `α ≠ β`.
    Explicit(Vec<(usize, usize, FaceMap)>),
}

#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub s_tilde: Vec<TateSeries>,
    pub h: u32,
    /// Faces imposed on each element during the induction.
    pub constraints: Vec<Vec<FaceMap>>,
    pub checks: Vec<Check>,
}

fn coincidence_list(s: &[TateSeries], layout: &Layout, mode: &Coincidences) -> Vec<(usize, usize, FaceMap)> {
    match mode {
        Coincidences::Explicit(list) => list.iter().map(|(a, b, f)| if a < b { (*a, *b, f.clone()) } else { (*b, *a, f.clone()) }).collect(),
        Coincidences::Auto => {
            let faces = all_faces(layout.n());
            let mut out = Vec::new();
            for b in 0..s.len() {
                for a in 0..b {
                    for f in &faces {
                        if restrict(&s[a], layout, f) == restrict(&s[b], layout, f) {
                            out.push((a, b, f.clone()));
                        }
                    }
                }
            }
            out
        }
    }
}

fn finite_faces(s: &TateSeries, layout: &Layout, ambient: u32) -> Vec<FaceMap> {
    all_faces(layout.n()).into_iter().filter(|f| f.vals.contains_key(&1) && restrict(s, layout, f).support_level() < ambient).collect()
}

fn smallest_level(s: &TateSeries, above: Q, from: u32, top: u32) -> u32 {
    (from..=top).find(|&h| (&s.level_truncate(h) - s).gauss_norm() > Valuation::Finite(above)).unwrap_or(top)
}

/// `s̃_α ∈ R_h` with `v(s_α − s̃_α) > e`, preserving face coincidences and the faces with
/// `1 ∈ T` that already lie below the ambient level. Elements are handled in input order;
/// the accuracy for earlier elements is tightened by the section losses of later ones.
pub fn approximate_tuple(s: &[TateSeries], e: Q, mode: &Coincidences) -> Result<ApproxResult, FaceError> {
    if s.is_empty() {
        return Ok(ApproxResult { s_tilde: vec![], h: 0, constraints: vec![], checks: vec![] });
    }
    let params = s[0].params().clone();
    if s.iter().any(|x| x.params() != &params) {
        return Err(FaceError::Series(SeriesError::ParamsMismatch));
    }
    let layout = Layout::of(&params)?;
    let ambient = params.field().level().max(params.levels().iter().copied().max().unwrap_or(0));
    let p = params.field().p();
    let d = params.deg_cap().max(0) as u32;
    let coincide = coincidence_list(s, &layout, mode);
    let mut constraints: Vec<Vec<FaceMap>> = vec![Vec::new(); s.len()];
    for (_, b, f) in &coincide {
        if !constraints[*b].contains(f) {
            constraints[*b].push(f.clone());
        }
    }
    let finite: Vec<Vec<FaceMap>> = s.iter().map(|x| finite_faces(x, &layout, ambient)).collect();
    for (a, fs) in finite.iter().enumerate() {
        for f in fs {
            if !constraints[a].contains(f) {
                constraints[a].push(f.clone());
            }
        }
    }
    let losses: Vec<i64> = constraints.iter().map(|c| if c.is_empty() { 0 } else { section(c, layout.n(), d, p).loss }).collect();
    let mut s_tilde: Vec<TateSeries> = Vec::with_capacity(s.len());
    let mut h_all = 0;
    for a in 0..s.len() {
        let e_a = e + Q::from_integer(losses[a + 1..].iter().sum::<i64>());
        let mut faces: Vec<(FaceMap, TateSeries)> = Vec::new();
        for f in &constraints[a] {
            let from_pair = coincide.iter().find(|(_, y, g)| *y == a && g == f).map(|(x, _, _)| *x);
            let value = match from_pair {
                Some(b) => restrict(&s_tilde[b], &layout, f),
                None => restrict(&s[a], &layout, f),
            };
            faces.push((f.clone(), value));
        }
        let need_level = faces.iter().map(|(_, v)| v.support_level()).max().unwrap_or(0);
        let h = smallest_level(&s[a], e_a + Q::from_integer(losses[a]), need_level, ambient);
        let out = if faces.is_empty() { s[a].level_truncate(h) } else { lift(&faces, &s[a], Some(h))?.f };
        h_all = h_all.max(h);
        s_tilde.push(out);
    }
    let checks = verify_tuple(s, &s_tilde, e, h_all, &coincide, &finite, &layout);
    Ok(ApproxResult { s_tilde, h: h_all, constraints, checks })
}

fn verify_tuple(
    s: &[TateSeries],
    st: &[TateSeries],
    e: Q,
    h: u32,
    coincide: &[(usize, usize, FaceMap)],
    finite: &[Vec<FaceMap>],
    layout: &Layout,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let worst = s.iter().zip(st).map(|(a, b)| (a - b).gauss_norm()).min().unwrap_or(Valuation::Infinite);
    checks.push(Check::new("distance", worst > Valuation::Finite(e), format!("> {}", fmt_q(e)), worst.to_string()));
    let broken = coincide.iter().find(|(a, b, f)| restrict(&st[*a], layout, f) != restrict(&st[*b], layout, f));
    let mut c = Check::new("face_coincidences", broken.is_none(), coincide.len() as u64, (coincide.len() - broken.iter().count()) as u64);
    if let Some((a, b, f)) = broken {
        c = c.with_witness(json!({"alpha": a + 1, "beta": b + 1, "face": f.to_json()}));
    }
    checks.push(c);
    let mut lost = None;
    for (a, fs) in finite.iter().enumerate() {
        for f in fs {
            if lost.is_none() && restrict(&st[a], layout, f) != restrict(&s[a], layout, f) {
                lost = Some((a, f.clone()));
            }
        }
    }
    let mut c = Check::new("finite_faces_preserved", lost.is_none(), true, lost.is_none());
    if let Some((a, f)) = lost {
        c = c.with_witness(json!({"alpha": a + 1, "face": f.to_json()}));
    }
    checks.push(c);
    let top = st.iter().map(TateSeries::support_level).max().unwrap_or(0);
    checks.push(Check::new("level", top <= h, h, top));
    checks
}

/// Parses `{"elements":[…],"epsilon":"a/b","coincidences":"auto"|[…]}`.
pub fn parse_tuple_job(v: &Value) -> Result<(Vec<TateSeries>, Q, Coincidences), FaceError> {
    let bad = |m: &str| FaceError::Input(m.to_string());
    let obj = v.as_object().ok_or_else(|| bad("job must be an object"))?;
    if obj.keys().any(|k| !["elements", "epsilon", "coincidences"].contains(&k.as_str())) {
        return Err(bad("unknown key"));
    }
    let elems = obj.get("elements").and_then(Value::as_array).ok_or_else(|| bad("elements"))?;
    let s: Vec<TateSeries> = elems.iter().map(TateSeries::from_json).collect::<Result<_, _>>()?;
    let e = parse_q(obj.get("epsilon").and_then(Value::as_str).ok_or_else(|| bad("epsilon"))?)?;
    let n = match s.first() {
        Some(x) => Layout::of(x.params())?.n(),
        None => 0,
    };
    let mode = match obj.get("coincidences") {
        None => Coincidences::Auto,
        Some(Value::String(t)) if t == "auto" => Coincidences::Auto,
        Some(Value::Array(list)) => {
            let mut out = Vec::new();
            for item in list {
                let a = item.get("alpha").and_then(Value::as_u64).ok_or_else(|| bad("alpha"))? as usize;
                let b = item.get("beta").and_then(Value::as_u64).ok_or_else(|| bad("beta"))? as usize;
                if a == 0 || b == 0 || a > s.len() || b > s.len() || a == b {
                    return Err(bad("coincidence indices are 1-based and distinct"));
                }
                out.push((a - 1, b - 1, FaceMap::from_json(item, n)?));
            }
            Coincidences::Explicit(out)
        }
        _ => return Err(bad("coincidences must be \"auto\" or a list")),
    };
    Ok((s, e, mode))
}

/// Parses `{"n":int,"maps":[{"T":[…],"vals":[…]}…]}`.
pub fn parse_constraints(v: &Value) -> Result<(usize, Vec<FaceMap>), FaceError> {
    let bad = |m: &str| FaceError::Input(m.to_string());
    let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as usize;
    let maps = v.get("maps").and_then(Value::as_array).ok_or_else(|| bad("maps"))?;
    Ok((n, maps.iter().map(|m| FaceMap::from_json(m, n)).collect::<Result<_, _>>()?))
}

/// A map `X × □^n → Y` given by series `(s, t)` over `X ++ θ`.
#[derive(Debug, Clone)]
pub struct MapData {
    pub s: Vec<TateSeries>,
    pub t: Vec<TateSeries>,
}

#[derive(Debug, Clone)]
pub struct HomotopyTuple {
    pub homotopies: Vec<Homotopy>,
    pub h_bar: u32,
    pub epsilon: Q,
    pub checks: Vec<Check>,
}

fn restrict_homotopy(hm: &Homotopy, layout: &Layout, f: &FaceMap) -> Vec<TateSeries> {
    hm.sigma.iter().chain(&hm.tau).map(|x| restrict(x, layout, f)).collect()
}

/// Approximates all `s_k` jointly at one ε below every certified radius, then builds each
/// `H_k` from `s̃_k`; checks `i₀*H_k = f_k`, agreement on shared `d_{r,ε}` faces, and
/// constancy in χ on `d_{1,1}` faces that are already below the ambient level.
pub fn homotopy_tuple(sys: &PolySystem, maps: &[MapData], epsilon: Q) -> Result<HomotopyTuple, FaceError> {
    if maps.is_empty() {
        return Ok(HomotopyTuple { homotopies: vec![], h_bar: 0, epsilon, checks: vec![] });
    }
    let points: Vec<_> = maps.iter().map(|m| prepare_at(sys, &m.s, &m.t)).collect::<Result<_, _>>()?;
    let shared = points.iter().map(|p| p.radius_valuation()).fold(epsilon, Q::max);
    let flat: Vec<TateSeries> = maps.iter().flat_map(|m| m.s.iter().cloned()).collect();
    let approx = approximate_tuple(&flat, shared, &Coincidences::Auto)?;
    let space = points[0].space.clone();
    let layout = Layout::of(&space)?;
    let ambient = space.field().level();
    let mut homotopies = Vec::new();
    let mut off = 0;
    for (m, pt) in maps.iter().zip(&points) {
        let st = &approx.s_tilde[off..off + m.s.len()];
        off += m.s.len();
        homotopies.push(pt.homotopy(st)?);
    }
    let mut checks = approx.checks.clone();
    let mut start_ok = true;
    let mut end_level = 0;
    let mut bounded = true;
    for (m, hm) in maps.iter().zip(&homotopies) {
        let zero = hm.face(0, &space)?;
        start_ok &= zero.iter().zip(m.s.iter().chain(&m.t)).all(|(a, b)| a == b);
        let one = hm.face(1, &space)?;
        end_level = end_level.max(one.iter().map(TateSeries::support_level).max().unwrap_or(0));
        bounded &= one[m.s.len()..].iter().all(|f| f.gauss_norm() >= Valuation::Finite(Q::zero()));
    }
    checks.push(Check::new("start_face_is_f", start_ok, true, start_ok));
    checks.push(Check::new("end_face_level", end_level <= approx.h && bounded, approx.h, end_level));
    let hl = Layout::of(&homotopies[0].params)?;
    let mut shared_ok = true;
    let mut witness = Value::Null;
    for a in 0..maps.len() {
        for b in a + 1..maps.len() {
            for r in 1..=layout.n() {
                for eps in 0..2u8 {
                    let f = FaceMap::new(&[(r, eps)]);
                    let fa: Vec<TateSeries> = maps[a].s.iter().chain(&maps[a].t).map(|x| restrict(x, &layout, &f)).collect();
                    let fb: Vec<TateSeries> = maps[b].s.iter().chain(&maps[b].t).map(|x| restrict(x, &layout, &f)).collect();
                    if fa == fb && restrict_homotopy(&homotopies[a], &hl, &f) != restrict_homotopy(&homotopies[b], &hl, &f) {
                        shared_ok = false;
                        witness = json!({"k": a + 1, "k_prime": b + 1, "face": f.to_json()});
                    }
                }
            }
        }
    }
    checks.push(Check::new("shared_faces", shared_ok, true, shared_ok).with_witness(witness));
    let chi = homotopies[0].params.nvars() - 1;
    let mut constant_ok = true;
    if layout.n() > 0 {
        let f11 = FaceMap::new(&[(1, 1)]);
        for (m, hm) in maps.iter().zip(&homotopies) {
            let finite = m.s.iter().chain(&m.t).all(|x| restrict(x, &layout, &f11).support_level() < ambient);
            if finite {
                let face = restrict_homotopy(hm, &hl, &f11);
                constant_ok &= face.iter().all(|x| x.terms().all(|(e, _)| e[chi].is_zero()));
            }
        }
    }
    checks.push(Check::new("constant_on_finite_d11", constant_ok, true, constant_ok));
    Ok(HomotopyTuple { homotopies, h_bar: approx.h, epsilon: shared, checks })
}

/// Rebuilds series over `params` from JSON maps `{"s":[…],"t":[…]}`.
pub fn parse_maps(v: &Value) -> Result<Vec<MapData>, FaceError> {
    let arr = v.as_array().ok_or_else(|| FaceError::Input("maps must be a list".into()))?;
    arr.iter()
        .map(|m| {
            let read = |k: &str| -> Result<Vec<TateSeries>, FaceError> {
                m.get(k)
                    .and_then(Value::as_array)
                    .ok_or_else(|| FaceError::Input(format!("missing {k}")))?
                    .iter()
                    .map(|x| Ok(TateSeries::from_json(x)?))
                    .collect()
            };
            Ok(MapData { s: read("s")?, t: read("t")? })
        })
        .collect()
}

pub fn space_with_cube(base: &Arc<SeriesParams>, n: usize) -> Result<Arc<SeriesParams>, FaceError> {
    let names: Vec<String> = (1..=n).map(|i| format!("theta{i}")).collect();
    Ok(base.extended(&names)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valued_field::FieldParams;
    use proptest::prelude::*;

    fn f(pairs: &[(usize, u8)]) -> FaceMap {
        FaceMap::new(pairs)
    }

    #[test]
    fn face_map_basics() {
        let a = f(&[(1, 0)]);
        let b = f(&[(2, 1)]);
        assert_eq!(a.join(&b), Some(f(&[(1, 0), (2, 1)])));
        assert_eq!(a.join(&f(&[(1, 1)])), None);
        assert_eq!(all_faces(2).len(), 8);
        let back = FaceMap::from_json(&b.to_json(), 2).unwrap();
        assert_eq!(back, b);
        assert!(FaceMap::from_json(&json!({"T":[3],"vals":[0]}), 2).is_err());
    }

    #[test]
    fn grevlex_order() {
        let s = Slice::new(2, 2);
        let want: Vec<Vec<u32>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]];
        assert_eq!(s.monos, want);
    }

    #[test]
    fn intersection_examples() {
        let i = intersect(&[f(&[(1, 0)]), f(&[(1, 1)])], 1, 4);
        assert_eq!(i.generator_strings(), vec!["theta1^2 - theta1"]);
        assert!(generators_reproduce(&i));
        let i = intersect(&[f(&[(1, 0)]), f(&[(2, 1)])], 2, 3);
        assert_eq!(i.generator_strings(), vec!["theta1*theta2 - theta1"]);
        assert!(generators_reproduce(&i));
        let whole = intersect(&[], 2, 2);
        assert_eq!(whole.basis.cols(), 6);
        assert_eq!(whole.generator_strings(), vec!["1"]);
    }

    /// Brute force: a polynomial lies in every `I_σ` iff it vanishes at all 0/1 points of
    /// every face, tested on integer points `θ ∈ {0..=D}^n` extending the face.
    fn brute_dimension(sigmas: &[FaceMap], n: usize, d: u32) -> usize {
        let slice = Slice::new(n, d);
        let mut rows = Vec::new();
        let pts: Vec<Vec<i64>> = (0..(d as i64 + 1).pow(n as u32))
            .map(|mut k| {
                (0..n)
                    .map(|_| {
                        let x = k % (d as i64 + 1);
                        k /= d as i64 + 1;
                        x
                    })
                    .collect()
            })
            .collect();
        for s in sigmas {
            for pt in &pts {
                if s.vals.iter().any(|(i, v)| pt[i - 1] != *v as i64) {
                    continue;
                }
                rows.push(slice.monos.iter().map(|m| Rat::from_integer(m.iter().zip(pt).map(|(e, x)| BigInt::from(*x).pow(*e)).product())).collect());
            }
        }
        if rows.is_empty() {
            return slice.dim();
        }
        slice.dim() - Mat::from_rows(rows, slice.dim()).rank()
    }

    #[test]
    fn intersections_match_brute_force() {
        let faces = all_faces(2);
        for mask in 0u32..(1 << faces.len()) {
            let sig: Vec<FaceMap> = (0..faces.len()).filter(|i| mask & (1 << i) != 0).map(|i| faces[i].clone()).collect();
            if sig.len() > 3 {
                continue;
            }
            let i = intersect(&sig, 2, 3);
            assert_eq!(i.basis.cols(), brute_dimension(&sig, 2, 3), "{sig:?}");
        }
    }

    #[test]
    fn modular_law_examples() {
        assert!(modular_law_check(&[f(&[(1, 0)])], &f(&[(1, 1)]), 1, 3));
        assert!(modular_law_check(&[], &f(&[(1, 1)]), 1, 3));
    }

    #[test]
    fn exactness_examples() {
        let four = [f(&[(1, 0)]), f(&[(1, 1)]), f(&[(2, 0)]), f(&[(2, 1)])];
        assert!(exactness_check(&four, 2, 4).iter().all(|c| c.passed));
        assert!(exactness_check(&[f(&[(1, 0)])], 2, 3).iter().all(|c| c.passed));
    }

    #[test]
    fn lift_constants() {
        assert_eq!(lift_constant(&[f(&[(1, 0)])], 1, 3, 2).1, 0);
        assert_eq!(lift_constant(&[f(&[(1, 0)]), f(&[(1, 1)])], 1, 3, 2).1, 0);
    }

    fn space(n: usize, p: u32, level: u32, cap: i64, d: i64) -> Arc<SeriesParams> {
        let field = FieldParams::char0(p, level, cap).unwrap();
        let base = SeriesParams::new(field, &["u"], d, None).unwrap();
        space_with_cube(&base, n).unwrap()
    }

    #[test]
    fn interpolation_lift() {
        let sp = space(1, 3, 1, 8, 4);
        let field = *sp.field();
        let a = TateSeries::from_int(&sp, 2);
        let b = &TateSeries::var(&sp, 0) + &TateSeries::from_int(&sp, 5);
        let g = TateSeries::zero(&sp);
        let r = lift(&[(f(&[(1, 0)]), a.clone()), (f(&[(1, 1)]), b.clone())], &g, None).unwrap();
        let want = &a + &(&(&b - &a) * &TateSeries::var(&sp, 1));
        assert_eq!(r.f, want);
        assert_eq!(r.constant, Q::one());
        assert!(r.checks.iter().all(|c| c.passed));
        let _ = field;
    }

    #[test]
    fn lift_of_own_faces_is_identity() {
        let sp = space(2, 2, 1, 8, 4);
        let (t1, t2) = (TateSeries::var(&sp, 1), TateSeries::var(&sp, 2));
        let g = &(&t1 * &t2) + &TateSeries::var(&sp, 0);
        let faces: Vec<(FaceMap, TateSeries)> = all_faces(2).into_iter().filter(|x| x.vals.len() == 1).map(|x| {
            let lay = Layout::of(&sp).unwrap();
            let v = restrict(&g, &lay, &x);
            (x, v)
        }).collect();
        let r = lift(&faces, &g, None).unwrap();
        assert_eq!(r.f, g);
    }

    #[test]
    fn incompatible_faces_are_reported() {
        let sp = space(2, 2, 0, 8, 3);
        let faces = vec![(f(&[(1, 0)]), TateSeries::from_int(&sp, 1)), (f(&[(2, 0)]), TateSeries::from_int(&sp, 2))];
        assert!(matches!(lift(&faces, &TateSeries::zero(&sp), None), Err(FaceError::Constraint(_, _))));
    }

    #[test]
    fn lift_preserves_level() {
        let sp = space(1, 2, 2, 10, 3);
        let field = *sp.field();
        let deep = TateSeries::monomial(&sp, vec![Q::new(1, 4), Q::zero()], FieldElement::pi_pow(field, Q::from_integer(6)).unwrap()).unwrap();
        let g = &(&TateSeries::var(&sp, 0) + &deep) + &TateSeries::var(&sp, 1);
        let lay = Layout::of(&sp).unwrap();
        let fv = restrict(&g.level_truncate(1), &lay, &f(&[(1, 0)]));
        let r = lift(&[(f(&[(1, 0)]), fv)], &g, Some(1)).unwrap();
        assert!(r.f.support_level() <= 1);
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    }

    #[test]
    fn approximate_single_element() {
        let sp = space(1, 2, 3, 12, 3);
        let field = *sp.field();
        let mono = |e: Q, v: i64| TateSeries::monomial(&sp, vec![e, Q::zero()], FieldElement::pi_pow(field, Q::from_integer(v)).unwrap()).unwrap();
        let s = &(&TateSeries::var(&sp, 0) + &mono(Q::new(1, 2), 2)) + &mono(Q::new(1, 8), 7);
        let r = approximate_tuple(&[s.clone()], Q::from_integer(4), &Coincidences::Auto).unwrap();
        assert_eq!(r.h, 1);
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    }

    #[test]
    fn approximate_keeps_shared_face() {
        let sp = space(1, 2, 3, 12, 3);
        let field = *sp.field();
        let mono = |e: Q, v: i64| TateSeries::monomial(&sp, vec![e, Q::zero()], FieldElement::pi_pow(field, Q::from_integer(v)).unwrap()).unwrap();
        let th = TateSeries::var(&sp, 1);
        let common = &TateSeries::var(&sp, 0) + &mono(Q::new(1, 8), 6);
        let s1 = &common + &(&th * &mono(Q::new(1, 4), 5));
        let s2 = &common + &(&th * &mono(Q::new(1, 2), 3));
        let r = approximate_tuple(&[s1, s2], Q::from_integer(2), &Coincidences::Auto).unwrap();
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
        let lay = Layout::of(&sp).unwrap();
        let face = f(&[(1, 0)]);
        assert_eq!(restrict(&r.s_tilde[0], &lay, &face), restrict(&r.s_tilde[1], &lay, &face));
    }

    #[test]
    fn approximate_keeps_finite_face() {
        let sp = space(1, 2, 3, 12, 3);
        let field = *sp.field();
        let mono = |e: Q, v: i64| TateSeries::monomial(&sp, vec![e, Q::zero()], FieldElement::pi_pow(field, Q::from_integer(v)).unwrap()).unwrap();
        let th = TateSeries::var(&sp, 1);
        // s|_{θ₁=1} = u is level 0; the deep term vanishes there.
        let s = &TateSeries::var(&sp, 0) + &(&(&TateSeries::one(&sp) - &th) * &mono(Q::new(1, 8), 6));
        let r = approximate_tuple(&[s.clone()], Q::from_integer(1), &Coincidences::Auto).unwrap();
        let lay = Layout::of(&sp).unwrap();
        let face = f(&[(1, 1)]);
        assert_eq!(restrict(&r.s_tilde[0], &lay, &face), restrict(&s, &lay, &face));
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    }

    fn linear_system(sp: &Arc<SeriesParams>) -> PolySystem {
        let r = SeriesParams::new(*sp.field(), &["s", "t"], sp.deg_cap(), None).unwrap();
        PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::var(&r, 0)]).unwrap()
    }

    #[test]
    fn homotopy_tuple_shares_faces() {
        let sp = space(1, 2, 3, 12, 3);
        let field = *sp.field();
        let mono = |e: Q, v: i64| TateSeries::monomial(&sp, vec![e, Q::zero()], FieldElement::pi_pow(field, Q::from_integer(v)).unwrap()).unwrap();
        let th = TateSeries::var(&sp, 1);
        let common = &TateSeries::var(&sp, 0) + &mono(Q::new(1, 8), 6);
        let s1 = &common + &(&th * &mono(Q::new(1, 4), 5));
        let s2 = &common + &(&th * &mono(Q::new(1, 2), 4));
        let sys = linear_system(&sp);
        let maps = vec![MapData { s: vec![s1.clone()], t: vec![s1] }, MapData { s: vec![s2.clone()], t: vec![s2] }];
        let out = homotopy_tuple(&sys, &maps, Q::from_integer(3)).unwrap();
        assert!(out.checks.iter().all(|c| c.passed), "{:?}", out.checks);
        let single = homotopy_tuple(&sys, &maps[..1], Q::from_integer(3)).unwrap();
        assert_eq!(single.homotopies.len(), 1);
    }

    #[test]
    fn homotopy_tuple_constant_on_finite_face() {
        let sp = space(1, 2, 3, 12, 3);
        let field = *sp.field();
        let mono = |e: Q, v: i64| TateSeries::monomial(&sp, vec![e, Q::zero()], FieldElement::pi_pow(field, Q::from_integer(v)).unwrap()).unwrap();
        let th = TateSeries::var(&sp, 1);
        let s = &TateSeries::var(&sp, 0) + &(&(&TateSeries::one(&sp) - &th) * &mono(Q::new(1, 8), 6));
        let sys = linear_system(&sp);
        let out = homotopy_tuple(&sys, &[MapData { s: vec![s.clone()], t: vec![s] }], Q::from_integer(2)).unwrap();
        assert!(out.checks.iter().all(|c| c.passed), "{:?}", out.checks);
        assert!(!out.homotopies[0].is_constant_in_chi());
    }

    #[test]
    fn tuple_job_parsing() {
        let sp = space(1, 2, 1, 6, 2);
        let s = TateSeries::var(&sp, 0);
        let job = json!({"elements": [s.to_json(), s.to_json()], "epsilon": "1/2", "coincidences": [{"alpha":1,"beta":2,"T":[1],"vals":[0]}]});
        let (el, e, mode) = parse_tuple_job(&job).unwrap();
        assert_eq!(el.len(), 2);
        assert_eq!(e, Q::new(1, 2));
        assert_eq!(mode, Coincidences::Explicit(vec![(0, 1, f(&[(1, 0)]))]));
        assert!(parse_tuple_job(&json!({"elements": [], "epsilon": "x"})).is_err());
    }

    #[test]
    fn random_lifts_respect_constant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sp = space(2, 3, 0, 10, 4);
        let field = *sp.field();
        let lay = Layout::of(&sp).unwrap();
        let sig: Vec<FaceMap> = all_faces(2).into_iter().filter(|x| x.vals.len() == 1).collect();
        let (_, loss) = lift_constant(&sig, 2, 4, 3);
        let random = |rng: &mut rand_chacha::ChaCha8Rng, min_v: i64| {
            let slice = Slice::new(3, 4);
            let mut out = TateSeries::zero(&sp);
            for _ in 0..6 {
                let m = &slice.monos[rng.random_range(0..slice.dim())];
                let c = FieldElement::from_int(field, rng.random_range(1..9));
                let c = &c * &FieldElement::pi_pow(field, Q::from_integer(rng.random_range(min_v..min_v + 3))).unwrap();
                let e = m.iter().map(|&x| Q::from_integer(x as i64)).collect();
                out = &out + &TateSeries::monomial(&sp, e, c).unwrap();
            }
            out
        };
        for _ in 0..100 {
            let g = random(&mut rng, 0);
            let e = rng.random_range(1..5);
            let target = &g + &random(&mut rng, e);
            let faces: Vec<(FaceMap, TateSeries)> = sig.iter().map(|x| (x.clone(), restrict(&target, &lay, x))).collect();
            let r = lift(&faces, &g, None).unwrap();
            assert!(r.achieved >= Valuation::Finite(Q::from_integer(e - loss)));
            assert!(r.checks.iter().all(|c| c.passed));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn random_three_variable_exactness(mask in prop::collection::vec(0usize..26, 3)) {
            let faces = all_faces(3);
            let mut sig: Vec<FaceMap> = mask.iter().map(|&i| faces[i].clone()).collect();
            sig.sort();
            sig.dedup();
            prop_assert!(exactness_check(&sig, 3, 3).iter().all(|c| c.passed));
            prop_assert!(modular_law_check(&sig[1..], &sig[0], 3, 3));
            prop_assert!(generators_reproduce(&intersect(&sig, 3, 3)));
        }
    }
}
