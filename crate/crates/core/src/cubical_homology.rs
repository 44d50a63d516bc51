//! Finite cubical Q-modules, the complexes C♯, C and N, their homology, the cylinder
//! chain homotopy, and the linearized unit-group complex.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::linalg::{rat, Mat, Rat};
use crate::report::Check;
use crate::tate_series::{SeriesError, TateSeries};
use crate::valued_field::{Valuation, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CubicalError {
    #[error("cubical identity fails: {0}")]
    Integrity(String),
    #[error("malformed module: {0}")]
    Shape(String),
    #[error("truncation {got} cannot hold the contraction (need {required})")]
    Precision { required: u32, got: u32 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `V_0, …, V_nmax` with faces `d*_{r,ε}: V_n → V_{n−1}` and degeneracies `p*_r: V_{n−1} → V_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicalModule {
    pub nmax: usize,
    pub dims: Vec<usize>,
    faces: BTreeMap<(usize, usize, u8), Mat>,
    degens: BTreeMap<(usize, usize), Mat>,
}

impl CubicalModule {
    pub fn new(
        dims: Vec<usize>,
        faces: BTreeMap<(usize, usize, u8), Mat>,
        degens: BTreeMap<(usize, usize), Mat>,
    ) -> Result<Self, CubicalError> {
        if dims.is_empty() {
            return Err(CubicalError::Shape("no levels".into()));
        }
        let nmax = dims.len() - 1;
        for n in 1..=nmax {
            for r in 1..=n {
                for eps in 0..2u8 {
                    let f = faces.get(&(n, r, eps)).ok_or_else(|| CubicalError::Shape(format!("missing face {n},{r},{eps}")))?;
                    if (f.rows(), f.cols()) != (dims[n - 1], dims[n]) {
                        return Err(CubicalError::Shape(format!("face {n},{r},{eps} has the wrong size")));
                    }
                }
                let p = degens.get(&(n, r)).ok_or_else(|| CubicalError::Shape(format!("missing degeneracy {n},{r}")))?;
                if (p.rows(), p.cols()) != (dims[n], dims[n - 1]) {
                    return Err(CubicalError::Shape(format!("degeneracy {n},{r} has the wrong size")));
                }
            }
        }
        if faces.len() != nmax * (nmax + 1) || degens.len() != nmax * (nmax + 1) / 2 {
            return Err(CubicalError::Shape("unexpected extra maps".into()));
        }
        Ok(CubicalModule { nmax, dims, faces, degens })
    }

    pub fn face(&self, n: usize, r: usize, eps: u8) -> &Mat {
        &self.faces[&(n, r, eps)]
    }

    pub fn degen(&self, n: usize, r: usize) -> &Mat {
        &self.degens[&(n, r)]
    }

    /// The constant module `Q^k` with identity structure maps.
    pub fn constant(k: usize, nmax: usize) -> Self {
        let mut faces = BTreeMap::new();
        let mut degens = BTreeMap::new();
        for n in 1..=nmax {
            for r in 1..=n {
                faces.insert((n, r, 0), Mat::identity(k));
                faces.insert((n, r, 1), Mat::identity(k));
                degens.insert((n, r), Mat::identity(k));
            }
        }
        CubicalModule { nmax, dims: vec![k; nmax + 1], faces, degens }
    }

    /// Checks the face–face and face–degeneracy identities as matrix equations.
    pub fn check_identities(&self) -> Result<(), CubicalError> {
        for n in 2..=self.nmax {
            for r in 1..n {
                for s in r + 1..=n {
                    for (e, e2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        if self.face(n - 1, r, e).mul(self.face(n, s, e2)) != self.face(n - 1, s - 1, e2).mul(self.face(n, r, e)) {
                            return Err(CubicalError::Integrity(format!("d*_{r},{e} d*_{s},{e2} at level {n}")));
                        }
                    }
                }
            }
        }
        for n in 1..=self.nmax {
            for r in 1..=n {
                for e in 0..2u8 {
                    if self.face(n, r, e).mul(self.degen(n, r)) != Mat::identity(self.dims[n - 1]) {
                        return Err(CubicalError::Integrity(format!("d*_{r},{e} p*_{r} at level {n}")));
                    }
                    for s in 1..=n {
                        if s == r || n < 2 {
                            continue;
                        }
                        let lhs = self.face(n, s, e).mul(self.degen(n, r));
                        let rhs = if s < r {
                            self.degen(n - 1, r - 1).mul(self.face(n - 1, s, e))
                        } else {
                            self.degen(n - 1, r).mul(self.face(n - 1, s - 1, e))
                        };
                        if lhs != rhs {
                            return Err(CubicalError::Integrity(format!("d*_{s},{e} p*_{r} at level {n}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        assert_eq!(self.nmax, other.nmax, "direct sum needs equal nmax");
        let block = |a: &Mat, b: &Mat| {
            let mut m = Mat::zeros(a.rows() + b.rows(), a.cols() + b.cols());
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    m[(i, j)] = a[(i, j)].clone();
                }
            }
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    m[(a.rows() + i, a.cols() + j)] = b[(i, j)].clone();
                }
            }
            m
        };
        let faces = self.faces.iter().map(|(k, a)| (*k, block(a, &other.faces[k]))).collect();
        let degens = self.degens.iter().map(|(k, a)| (*k, block(a, &other.degens[k]))).collect();
        let dims = self.dims.iter().zip(&other.dims).map(|(a, b)| a + b).collect();
        CubicalModule { nmax: self.nmax, dims, faces, degens }
    }

    /// Re-expresses `V_n` in the basis given by the columns of `p[n]`.
    pub fn change_basis(&self, p: &[Mat]) -> Self {
        let inv: Vec<Mat> = p.iter().map(|m| m.inverse().expect("basis change must be invertible")).collect();
        let faces = self.faces.iter().map(|(&(n, r, e), a)| ((n, r, e), inv[n - 1].mul(a).mul(&p[n]))).collect();
        let degens = self.degens.iter().map(|(&(n, r), a)| ((n, r), inv[n].mul(a).mul(&p[n - 1]))).collect();
        CubicalModule { nmax: self.nmax, dims: self.dims.clone(), faces, degens }
    }

    pub fn to_json(&self) -> Value {
        let faces: Map<String, Value> =
            self.faces.iter().map(|(&(n, r, e), m)| (format!("{n},{r},{e}"), json!(m.to_strings()))).collect();
        let degens: Map<String, Value> = self.degens.iter().map(|(&(n, r), m)| (format!("{n},{r}"), json!(m.to_strings()))).collect();
        json!({"nmax": self.nmax, "dims": self.dims, "faces": faces, "degens": degens})
    }

    pub fn from_json(v: &Value) -> Result<Self, CubicalError> {
        let bad = |m: &str| CubicalError::Shape(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("module must be an object"))?;
        if obj.keys().any(|k| !["nmax", "dims", "faces", "degens"].contains(&k.as_str())) {
            return Err(bad("unknown key"));
        }
        let nmax = obj.get("nmax").and_then(Value::as_u64).ok_or_else(|| bad("nmax"))? as usize;
        let dims: Vec<usize> = serde_json::from_value(obj.get("dims").cloned().unwrap_or(Value::Null)).map_err(|e| bad(&e.to_string()))?;
        if dims.len() != nmax + 1 {
            return Err(bad("dims must have nmax + 1 entries"));
        }
        let read = |key: &str| -> Result<Vec<(Vec<usize>, Vec<Vec<String>>)>, CubicalError> {
            let m = obj.get(key).and_then(Value::as_object).ok_or_else(|| bad(key))?;
            m.iter()
                .map(|(k, v)| {
                    let idx: Result<Vec<usize>, _> = k.split(',').map(|x| x.trim().parse::<usize>()).collect();
                    let rows: Vec<Vec<String>> = serde_json::from_value(v.clone()).map_err(|e| bad(&e.to_string()))?;
                    Ok((idx.map_err(|_| bad(k))?, rows))
                })
                .collect()
        };
        let mut faces = BTreeMap::new();
        for (idx, rows) in read("faces")? {
            let [n, r, e] = idx[..] else { return Err(bad("face keys are n,r,eps")) };
            if n == 0 || n > nmax || e > 1 || r == 0 || r > n {
                return Err(bad("face index out of range"));
            }
            let m = Mat::from_strings(&rows, dims[n]).ok_or_else(|| bad("face entries"))?;
            faces.insert((n, r, e as u8), m);
        }
        let mut degens = BTreeMap::new();
        for (idx, rows) in read("degens")? {
            let [n, r] = idx[..] else { return Err(bad("degeneracy keys are n,r")) };
            if n == 0 || n > nmax || r == 0 || r > n {
                return Err(bad("degeneracy index out of range"));
            }
            degens.insert((n, r), Mat::from_strings(&rows, dims[n - 1]).ok_or_else(|| bad("degeneracy entries"))?);
        }
        if faces.iter().any(|(&(n, _, _), m)| m.rows() != dims[n - 1]) || degens.iter().any(|(&(n, _), m)| m.rows() != dims[n]) {
            return Err(bad("matrix rows"));
        }
        CubicalModule::new(dims, faces, degens)
    }
}

/// Exponent vectors of a monomial basis, in lexicographic order.
#[derive(Debug, Clone)]
pub struct MonomialSpace {
    pub monos: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, usize>,
}

impl MonomialSpace {
    pub fn new(nvars: usize, bound: u32, keep: &dyn Fn(&[u32]) -> bool) -> Self {
        let mut monos = vec![vec![]];
        for _ in 0..nvars {
            monos = monos.into_iter().flat_map(|m: Vec<u32>| (0..=bound).map(move |e| [m.clone(), vec![e]].concat())).collect();
        }
        monos.retain(|m| keep(m));
        monos.sort();
        let index = monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        MonomialSpace { monos, index }
    }

    pub fn dim(&self) -> usize {
        self.monos.len()
    }

    pub fn position(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Matrix of a map sending each basis monomial to at most one target monomial.
    pub fn map_to(&self, target: &MonomialSpace, f: &dyn Fn(&[u32]) -> Option<(Vec<u32>, Rat)>) -> Mat {
        let mut m = Mat::zeros(target.dim(), self.dim());
        for (j, mono) in self.monos.iter().enumerate() {
            if let Some((t, c)) = f(mono) {
                let i = target.position(&t).expect("map leaves the truncation");
                m[(i, j)] += c;
            }
        }
        m
    }
}

/// `θ_r ↦ ε` followed by renumbering the later variables.
fn face_mono(r: usize, eps: u8) -> impl Fn(&[u32]) -> Option<(Vec<u32>, Rat)> {
    move |m: &[u32]| {
        if eps == 0 && m[r - 1] > 0 {
            return None;
        }
        let mut out = m.to_vec();
        out.remove(r - 1);
        Some((out, Rat::one()))
    }
}

fn degen_mono(r: usize) -> impl Fn(&[u32]) -> Option<(Vec<u32>, Rat)> {
    move |m: &[u32]| {
        let mut out = m.to_vec();
        out.insert(r - 1, 0);
        Some((out, Rat::one()))
    }
}

/// `n ↦ span of admissible monomials in θ₁..θ_n` with substitution faces.
pub fn monomial_module(nmax: usize, bound: u32, keep: &dyn Fn(&[u32]) -> bool) -> (CubicalModule, Vec<MonomialSpace>) {
    let spaces: Vec<MonomialSpace> = (0..=nmax).map(|n| MonomialSpace::new(n, bound, keep)).collect();
    let mut faces = BTreeMap::new();
    let mut degens = BTreeMap::new();
    for n in 1..=nmax {
        for r in 1..=n {
            for eps in 0..2u8 {
                faces.insert((n, r, eps), spaces[n].map_to(&spaces[n - 1], &face_mono(r, eps)));
            }
            degens.insert((n, r), spaces[n - 1].map_to(&spaces[n], &degen_mono(r)));
        }
    }
    let dims = spaces.iter().map(MonomialSpace::dim).collect();
    (CubicalModule { nmax, dims, faces, degens }, spaces)
}

/// `Q[θ₁..θ_n]` of total degree `≤ d`.
pub fn polynomial_module(nmax: usize, d: u32) -> CubicalModule {
    monomial_module(nmax, d, &|m: &[u32]| m.iter().sum::<u32>() <= d).0
}

/// `Q[θ₁..θ_n]` of degree `≤ d` in each variable separately.
pub fn per_variable_module(nmax: usize, d: u32) -> CubicalModule {
    monomial_module(nmax, d, &|_: &[u32]| true).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Full,
    Simple,
    Normalized,
}

/// Per-degree subspace bases (columns in `V_n` coordinates) and differentials in those bases.
#[derive(Debug, Clone)]
pub struct ChainComplexView {
    pub kind: ViewKind,
    pub bases: Vec<Mat>,
    /// `diffs[n]: view_n → view_{n−1}`; `diffs[0]` has no rows.
    pub diffs: Vec<Mat>,
}

/// `Σ_r (−1)^r (d*_{r,1} − d*_{r,0})`.
pub fn full_differential(m: &CubicalModule, n: usize) -> Mat {
    let mut d = Mat::zeros(m.dims[n - 1], m.dims[n]);
    for r in 1..=n {
        let sign = rat(if r % 2 == 0 { 1 } else { -1 });
        d = d.add(&m.face(n, r, 1).sub(m.face(n, r, 0)).scale(&sign));
    }
    d
}

fn raw_differential(m: &CubicalModule, kind: ViewKind, n: usize) -> Mat {
    match kind {
        ViewKind::Full => full_differential(m, n),
        ViewKind::Simple => {
            let mut d = Mat::zeros(m.dims[n - 1], m.dims[n]);
            for r in 1..=n {
                d = d.add(&m.face(n, r, 1).scale(&rat(if r % 2 == 0 { 1 } else { -1 })));
            }
            d
        }
        ViewKind::Normalized => m.face(n, 1, 1).scale(&rat(-1)),
    }
}

fn subspace_basis(m: &CubicalModule, kind: ViewKind, n: usize) -> Mat {
    let mut constraints = Mat::zeros(0, m.dims[n]);
    for r in 1..=n {
        if kind != ViewKind::Full {
            constraints = constraints.vstack(m.face(n, r, 0));
        }
        if kind == ViewKind::Normalized && r >= 2 {
            constraints = constraints.vstack(m.face(n, r, 1));
        }
    }
    constraints.kernel()
}

pub fn build_complex(m: &CubicalModule, kind: ViewKind) -> Result<ChainComplexView, CubicalError> {
    m.check_identities()?;
    let bases: Vec<Mat> = (0..=m.nmax).map(|n| subspace_basis(m, kind, n)).collect();
    let mut diffs = vec![Mat::zeros(0, bases[0].cols())];
    for n in 1..=m.nmax {
        let image = raw_differential(m, kind, n).mul(&bases[n]);
        let d = bases[n - 1].solve(&image).ok_or_else(|| CubicalError::Integrity(format!("differential leaves the subcomplex at {n}")))?;
        diffs.push(d);
    }
    for n in 2..=m.nmax {
        if !diffs[n - 1].mul(&diffs[n]).is_zero() {
            return Err(CubicalError::Integrity(format!("∂∂ ≠ 0 at degree {n}")));
        }
    }
    Ok(ChainComplexView { kind, bases, diffs })
}

impl ChainComplexView {
    pub fn nmax(&self) -> usize {
        self.bases.len() - 1
    }

    pub fn dim(&self, n: usize) -> usize {
        self.bases[n].cols()
    }

    /// `dim ker ∂_n − dim im ∂_{n+1}`; at the top degree there is no incoming boundary.
    pub fn homology(&self, n: usize) -> usize {
        let ker = self.dim(n) - if n == 0 { 0 } else { self.diffs[n].rank() };
        let im = if n < self.nmax() { self.diffs[n + 1].rank() } else { 0 };
        ker - im
    }

    /// Cycles of degree `n` as vectors of `V_n`.
    pub fn cycles(&self, n: usize) -> Mat {
        if n == 0 {
            return self.bases[0].clone();
        }
        self.bases[n].mul(&self.diffs[n].kernel())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcReport {
    pub simple: Vec<usize>,
    pub normalized: Vec<usize>,
    /// Agreement in degrees `< nmax`, where both homologies are untruncated.
    pub equal: bool,
    pub equal_at_top: bool,
}

pub fn compare_n_c(m: &CubicalModule) -> Result<NcReport, CubicalError> {
    let c = build_complex(m, ViewKind::Simple)?;
    let nv = build_complex(m, ViewKind::Normalized)?;
    let simple: Vec<usize> = (0..=m.nmax).map(|n| c.homology(n)).collect();
    let normalized: Vec<usize> = (0..=m.nmax).map(|n| nv.homology(n)).collect();
    let equal = simple[..m.nmax] == normalized[..m.nmax];
    let equal_at_top = simple[m.nmax] == normalized[m.nmax];
    Ok(NcReport { simple, normalized, equal, equal_at_top })
}

fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> Mat {
    loop {
        let rows: Vec<Vec<Rat>> = (0..n).map(|_| (0..n).map(|_| rat(rng.random_range(-2..=2))).collect()).collect();
        let m = Mat::from_rows(rows, n);
        if m.rank() == n {
            return m;
        }
    }
}

/// Direct sum of constant, polynomial and multilinear summands with a random basis
/// change at every level; top dimension stays within `max_dim` where the summands allow.
pub fn random_module<R: Rng>(rng: &mut R, nmax: usize, max_dim: usize) -> CubicalModule {
    let mut parts: Vec<CubicalModule> = Vec::new();
    let mut used = 0;
    let count = rng.random_range(1..=3);
    for _ in 0..count {
        let choice = rng.random_range(0..4);
        let part = match choice {
            0 => CubicalModule::constant(rng.random_range(1..=2), nmax),
            1 => polynomial_module(nmax, 1),
            2 if nmax <= 2 => polynomial_module(nmax, 2),
            3 if nmax <= 2 => per_variable_module(nmax, 1),
            _ => CubicalModule::constant(1, nmax),
        };
        if !parts.is_empty() && used + part.dims[nmax] > max_dim {
            continue;
        }
        used += part.dims[nmax];
        parts.push(part);
    }
    let mut m = parts[0].clone();
    for p in &parts[1..] {
        m = m.direct_sum(p);
    }
    let basis: Vec<Mat> = m.dims.iter().map(|&d| random_invertible(rng, d)).collect();
    m.change_basis(&basis)
}

/// A module `V` and its cylinder `V′_n = F(□^n × B¹)` with `s*_n: V′_n → V_{n+1}` and
/// `i*_ε: V′_n → V_n`.
#[derive(Debug, Clone)]
pub struct CylinderData {
    pub base: CubicalModule,
    pub cylinder: CubicalModule,
    pub s: Vec<Mat>,
    pub i0: Vec<Mat>,
    pub i1: Vec<Mat>,
}

/// `V_n = Q[θ₁..θ_n]_{≤d}`, `V′_n = Q[θ₁..θ_n, χ]_{≤d}`, `s*: χ ↦ θ_{n+1}`, `i*_ε: χ ↦ ε`.
pub fn polynomial_cylinder(nmax: usize, d: u32) -> CylinderData {
    let keep = move |m: &[u32]| m.iter().sum::<u32>() <= d;
    let (base, spaces) = monomial_module(nmax, d, &keep);
    // χ is the last variable, so V′_n has the monomials of V_{n+1} with χ kept out of the faces.
    let cyl_spaces: Vec<MonomialSpace> = (0..nmax).map(|n| MonomialSpace::new(n + 1, d, &keep)).collect();
    let mut faces = BTreeMap::new();
    let mut degens = BTreeMap::new();
    for n in 1..nmax {
        for r in 1..=n {
            for eps in 0..2u8 {
                faces.insert((n, r, eps), cyl_spaces[n].map_to(&cyl_spaces[n - 1], &face_mono(r, eps)));
            }
            degens.insert((n, r), cyl_spaces[n - 1].map_to(&cyl_spaces[n], &degen_mono(r)));
        }
    }
    let cylinder = CubicalModule { nmax: nmax - 1, dims: cyl_spaces.iter().map(MonomialSpace::dim).collect(), faces, degens };
    let s = (0..nmax).map(|n| cyl_spaces[n].map_to(&spaces[n + 1], &|m: &[u32]| Some((m.to_vec(), Rat::one())))).collect();
    let i0 = (0..nmax).map(|n| cyl_spaces[n].map_to(&spaces[n], &face_mono(n + 1, 0))).collect();
    let i1 = (0..nmax).map(|n| cyl_spaces[n].map_to(&spaces[n], &face_mono(n + 1, 1))).collect();
    CylinderData { base, cylinder, s, i0, i1 }
}

/// The constant module with a cylinder on which χ acts trivially.
pub fn constant_cylinder(k: usize, nmax: usize) -> CylinderData {
    let id = |n: usize| (0..n).map(|_| Mat::identity(k)).collect::<Vec<_>>();
    CylinderData {
        base: CubicalModule::constant(k, nmax),
        cylinder: CubicalModule::constant(k, nmax - 1),
        s: id(nmax),
        i0: id(nmax),
        i1: id(nmax),
    }
}

/// Verifies `s*_{n−1}∂♯′_n − ∂♯_{n+1}s*_n = (−1)^n(i*₁ − i*₀)` for every `n < nmax`.
pub fn cylinder_homotopy_check(data: &CylinderData) -> Result<Vec<Check>, CubicalError> {
    let base = &data.base;
    let cyl = &data.cylinder;
    for n in 1..base.nmax {
        for r in 1..=n {
            for e in 0..2u8 {
                if data.s[n - 1].mul(cyl.face(n, r, e)) != base.face(n + 1, r, e).mul(&data.s[n]) {
                    return Err(CubicalError::Integrity(format!("s* does not commute with d*_{r},{e} at {n}")));
                }
            }
        }
    }
    let mut checks = Vec::new();
    for n in 0..base.nmax {
        let mut lhs = full_differential(base, n + 1).mul(&data.s[n]).scale(&rat(-1));
        if n > 0 {
            lhs = lhs.add(&data.s[n - 1].mul(&full_differential(cyl, n)));
        }
        let sign = rat(if n % 2 == 0 { 1 } else { -1 });
        let rhs = data.i1[n].sub(&data.i0[n]).scale(&sign);
        let ok = lhs == rhs;
        let mut c = Check::new(&format!("cylinder_identity_degree_{n}"), ok, true, ok);
        if !ok {
            c = c.with_witness(json!({"lhs": lhs.to_strings(), "rhs": rhs.to_strings()}));
        }
        checks.push(c);
    }
    Ok(checks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitComplexReport {
    pub p: u32,
    pub homology: Vec<usize>,
    pub cycles_checked: usize,
    pub contraction_ok: bool,
}

/// The linearized unit complex: the residue classes of units (`Q^{p−1}`, faces identity)
/// plus one per-variable-degree-`≤d` polynomial module for each graded piece of `1 + m`.
/// Every normalized cycle `g` of degree `1 ≤ n ≤ nmax` is shown to be the boundary of
/// `−θ₁·g(θ₂, …, θ_{n+1})`, the linear form of `H = f + θ_{n+1}(1 − f)`.
pub fn unit_complex(p: u32, nmax: usize, d: u32, pieces: usize) -> Result<(CubicalModule, UnitComplexReport), CubicalError> {
    if d < 1 {
        return Err(CubicalError::Precision { required: 1, got: d });
    }
    let top = nmax + 1;
    let (poly, spaces) = monomial_module(top, d, &|_: &[u32]| true);
    let units = CubicalModule::constant(p as usize - 1, top);
    let mut m = units.clone();
    for _ in 0..pieces {
        m = m.direct_sum(&poly);
    }
    // Cone on one polynomial block: g(θ₁..θ_n) ↦ −θ₁·g(θ₂..θ_{n+1}).
    let cone_block = |n: usize| {
        spaces[n].map_to(&spaces[n + 1], &|mono: &[u32]| {
            let mut out = vec![1];
            out.extend_from_slice(mono);
            Some((out, rat(-1)))
        })
    };
    let view = build_complex(&m, ViewKind::Normalized)?;
    let homology: Vec<usize> = (0..=nmax).map(|n| view.homology(n)).collect();
    let mut checked = 0;
    let mut ok = true;
    for n in 1..=nmax {
        let block = cone_block(n);
        let cycles = view.cycles(n);
        for j in 0..cycles.cols() {
            let g = cycles.column(j);
            let mut cone = vec![Rat::zero(); m.dims[n + 1]];
            let (u_in, u_out) = (units.dims[n], units.dims[n + 1]);
            if g[..u_in].iter().any(|x| !x.is_zero()) {
                ok = false;
            }
            for b in 0..pieces {
                let (src, dst) = (u_in + b * spaces[n].dim(), u_out + b * spaces[n + 1].dim());
                let part = block.apply(&g[src..src + spaces[n].dim()]);
                cone[dst..dst + part.len()].clone_from_slice(&part);
            }
            let mut in_n = true;
            for r in 1..=n + 1 {
                in_n &= m.face(n + 1, r, 0).apply(&cone).iter().all(Zero::is_zero);
                if r >= 2 {
                    in_n &= m.face(n + 1, r, 1).apply(&cone).iter().all(Zero::is_zero);
                }
            }
            let boundary: Vec<Rat> = m.face(n + 1, 1, 1).apply(&cone).into_iter().map(|x| -x).collect();
            ok &= in_n && boundary == g;
            checked += 1;
        }
    }
    Ok((m, UnitComplexReport { p, homology, cycles_checked: checked, contraction_ok: ok }))
}

/// `H = f + τ(1 − f)` over one extra variable `τ`, with its two faces and nilpotence checked.
pub fn unit_contraction(f: &TateSeries, name: &str) -> Result<(TateSeries, Vec<Check>), CubicalError> {
    let params = f.params();
    let one = TateSeries::one(params);
    let gap = (f - &one).gauss_norm();
    if gap <= Valuation::Finite(Q::zero()) {
        return Err(CubicalError::Shape("f − 1 is not topologically nilpotent".into()));
    }
    let ext = params.extended(&[name.to_string()])?;
    let k = params.nvars();
    let lift: Vec<usize> = (0..k).collect();
    let fx = f.relabel(&ext, &lift)?;
    let h = &fx + &(&TateSeries::var(&ext, k) * &(&TateSeries::one(&ext) - &fx));
    let face0 = h.face_restrict(k, 0)?.relabel(params, &lift)?;
    let face1 = h.face_restrict(k, 1)?.relabel(params, &lift)?;
    let nil = (&h - &TateSeries::one(&ext)).gauss_norm();
    let checks = vec![
        Check::new("face_0_is_f", face0 == *f, true, face0 == *f),
        Check::new("face_1_is_one", face1 == one, true, face1 == one),
        Check::new("h_minus_one_nilpotent", nil > Valuation::Finite(Q::zero()), "> 0", nil.to_string()),
    ];
    Ok((h, checks))
}
