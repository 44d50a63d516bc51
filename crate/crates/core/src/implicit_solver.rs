//! Formal implicit function theorem with coefficient bounds, tower pullbacks and the
//! homotopy `H = (s + (s̃−s)χ, F(s + (s̃−s)χ))` between a map and a finite-level one.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::tate_series::{Exps, SeriesError, SeriesParams, TateSeries};
use crate::valued_field::{fmt_q, FieldElement, FieldError, FieldParams, Valuation, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("Jacobian is not invertible below precision")]
    Singular,
    #[error("the center does not lie on the system (residual valuation {0})")]
    NotOnVariety(Valuation),
    #[error("unsupported system: {0}")]
    Unsupported(String),
    #[error("no truncation level reaches the radius threshold {0}")]
    Approximation(Q),
}

impl From<FieldError> for SolverError {
    fn from(e: FieldError) -> Self {
        SolverError::Series(SeriesError::Field(e))
    }
}

/// `P(σ, τ) = 0` with a center `(σ̄, τ̄)`; the polynomials live over variables `σ ++ τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    pub params: Arc<SeriesParams>,
    pub n: usize,
    pub m: usize,
    pub polys: Vec<TateSeries>,
    pub center_sigma: Vec<FieldElement>,
    pub center_tau: Vec<FieldElement>,
}

impl PolySystem {
    /// A system centered at the origin.
    pub fn at_origin(params: Arc<SeriesParams>, n: usize, polys: Vec<TateSeries>) -> Result<Self, SolverError> {
        let m = polys.len();
        if params.nvars() != n + m {
            return Err(SolverError::Unsupported("variable count must be n + m".into()));
        }
        let z = FieldElement::zero(*params.field());
        Ok(PolySystem { n, m, polys, center_sigma: vec![z.clone(); n], center_tau: vec![z; m], params })
    }

    pub fn with_center(mut self, sigma: Vec<FieldElement>, tau: Vec<FieldElement>) -> Self {
        self.center_sigma = sigma;
        self.center_tau = tau;
        self
    }

    pub fn sigma_names(&self) -> Vec<String> {
        self.params.vars()[..self.n].to_vec()
    }

    pub fn tau_names(&self) -> Vec<String> {
        self.params.vars()[self.n..].to_vec()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "sigma": self.sigma_names(),
            "tau": self.tau_names(),
            "polys": self.polys.iter().map(TateSeries::to_json).collect::<Vec<_>>(),
            "center": {
                "sigma": self.center_sigma.iter().map(|x| serde_json::to_value(x).unwrap()).collect::<Vec<_>>(),
                "tau": self.center_tau.iter().map(|x| serde_json::to_value(x).unwrap()).collect::<Vec<_>>(),
            }
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, SolverError> {
        let bad = |m: &str| SolverError::Series(SeriesError::Parse(m.to_string()));
        let obj = v.as_object().ok_or_else(|| bad("system must be an object"))?;
        for k in obj.keys() {
            if !["sigma", "tau", "polys", "center"].contains(&k.as_str()) {
                return Err(bad(&format!("unknown key {k}")));
            }
        }
        let names = |k: &str| -> Result<Vec<String>, SolverError> {
            serde_json::from_value(obj.get(k).cloned().ok_or_else(|| bad(&format!("missing {k}")))?).map_err(|e| bad(&e.to_string()))
        };
        let sigma = names("sigma")?;
        let tau = names("tau")?;
        let polys_json = obj.get("polys").and_then(Value::as_array).ok_or_else(|| bad("missing polys"))?;
        if polys_json.len() != tau.len() {
            return Err(bad("need one polynomial per tau variable"));
        }
        let mut vars = sigma.clone();
        vars.extend(tau.iter().cloned());
        let mut polys = Vec::new();
        for pj in polys_json {
            polys.push(TateSeries::from_json(pj)?);
        }
        let first = polys.first().ok_or_else(|| bad("empty system"))?;
        if first.params().vars() != vars.as_slice() {
            return Err(bad("polynomial variables must be sigma followed by tau"));
        }
        let params = first.params().clone();
        if polys.iter().any(|p| p.params() != &params) {
            return Err(bad("polynomials must share parameters"));
        }
        let mut sys = PolySystem::at_origin(params.clone(), sigma.len(), polys)?;
        if let Some(c) = obj.get("center") {
            let read = |k: &str, len: usize| -> Result<Vec<FieldElement>, SolverError> {
                match c.get(k) {
                    None => Ok(vec![FieldElement::zero(*params.field()); len]),
                    Some(a) => {
                        let xs: Vec<FieldElement> = serde_json::from_value(a.clone()).map_err(|e| bad(&e.to_string()))?;
                        if xs.len() != len || xs.iter().any(|x| x.params() != params.field()) {
                            return Err(bad("center shape or field mismatch"));
                        }
                        Ok(xs)
                    }
                }
            };
            sys.center_sigma = read("sigma", sys.n)?;
            sys.center_tau = read("tau", sys.m)?;
        }
        Ok(sys)
    }
}

/// `P_i = τ_i − G_i(σ, τ)` where `G_i` has no constant and no pure linear `τ` part.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSystem {
    pub params: Arc<SeriesParams>,
    pub n: usize,
    pub m: usize,
    pub g: Vec<TateSeries>,
    /// `v(π_B) = max(0, −min v(c_{iJH}))`.
    pub bound_valuation: Q,
}

impl NormalizedSystem {
    pub fn polys(&self) -> Vec<TateSeries> {
        (0..self.m).map(|i| &TateSeries::var(&self.params, self.n + i) - &self.g[i]).collect()
    }

    /// Jacobian `∂P_i/∂τ_j` at the origin.
    pub fn jacobian(&self) -> Vec<Vec<FieldElement>> {
        jacobian_at_origin(&self.polys(), self.n, self.m)
    }
}

fn unit_exps(len: usize, i: usize) -> Exps {
    let mut e = vec![Q::zero(); len];
    e[i] = Q::one();
    e
}

fn jacobian_at_origin(polys: &[TateSeries], n: usize, m: usize) -> Vec<Vec<FieldElement>> {
    polys.iter().map(|p| (0..m).map(|j| p.coefficient(&unit_exps(n + m, n + j))).collect()).collect()
}

/// Inverse of a square matrix over K by Gauss–Jordan elimination with minimal-valuation pivots.
pub fn invert_matrix(a: &[Vec<FieldElement>], field: FieldParams) -> Result<Vec<Vec<FieldElement>>, SolverError> {
    let m = a.len();
    let mut a: Vec<Vec<FieldElement>> = a.to_vec();
    let mut inv: Vec<Vec<FieldElement>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { FieldElement::one(field) } else { FieldElement::zero(field) }).collect())
        .collect();
    for col in 0..m {
        let piv = (col..m).filter(|&r| !a[r][col].is_zero()).min_by_key(|&r| a[r][col].valuation()).ok_or(SolverError::Singular)?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let pinv = a[col][col].invert()?;
        for j in 0..m {
            a[col][j] = &a[col][j] * &pinv;
            inv[col][j] = &inv[col][j] * &pinv;
        }
        for r in 0..m {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..m {
                    a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                    inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
                }
            }
        }
    }
    Ok(inv)
}

/// Translates the center to the origin and multiplies by the inverse Jacobian there.
pub fn normalize_system(sys: &PolySystem) -> Result<NormalizedSystem, SolverError> {
    let params = &sys.params;
    let (n, m) = (sys.n, sys.m);
    let field = *params.field();
    let mut assign = Vec::with_capacity(n + m);
    for (i, c) in sys.center_sigma.iter().chain(sys.center_tau.iter()).enumerate() {
        assign.push(&TateSeries::constant(params, c.clone())? + &TateSeries::var(params, i));
    }
    let translated: Vec<TateSeries> = sys.polys.iter().map(|p| p.substitute(params, &assign, true)).collect::<Result<_, _>>()?;
    let residual = translated.iter().map(|p| p.constant_term().valuation()).min().unwrap_or(Valuation::Infinite);
    if !residual.is_infinite() {
        return Err(SolverError::NotOnVariety(residual));
    }
    let jac = jacobian_at_origin(&translated, n, m);
    let jinv = invert_matrix(&jac, field)?;
    let mut g = Vec::with_capacity(m);
    let mut minval = Valuation::Infinite;
    for i in 0..m {
        let mut pi = TateSeries::zero(params);
        for (k, t) in translated.iter().enumerate() {
            pi = &pi + &t.scalar_mul(&jinv[i][k])?;
        }
        // The linear τ part is the identity by construction; drop rounding residue there.
        let gi = TateSeries::from_terms(
            params,
            pi.terms()
                .filter(|(e, _)| !(e[..n].iter().all(Q::is_zero) && e[n..].iter().fold(Q::zero(), |a, b| a + b).is_one()))
                .map(|(e, c)| (e.clone(), -c)),
        )?;
        minval = minval.min(gi.gauss_norm());
        g.push(gi);
    }
    let bound_valuation = match minval {
        Valuation::Finite(v) if v < Q::zero() => -v,
        _ => Q::zero(),
    };
    Ok(NormalizedSystem { params: params.clone(), n, m, g, bound_valuation })
}

/// Solution series `F` in the shifted variables `σ − σ̄` (named like `σ`), constant term `τ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitSeries {
    pub sigma_params: Arc<SeriesParams>,
    pub center_sigma: Vec<FieldElement>,
    pub series: Vec<TateSeries>,
    /// `r` with the certified bound `v(d_{iI}) ≥ −r·|I|`.
    pub bound_exponent: Q,
    /// Arguments of valuation above this are inside the certified disk.
    pub radius_valuation: Q,
}

impl ImplicitSeries {
    pub fn degree(&self) -> i64 {
        self.sigma_params.deg_cap()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "center_sigma": self.center_sigma.iter().map(|x| serde_json::to_value(x).unwrap()).collect::<Vec<_>>(),
            "series": self.series.iter().map(TateSeries::to_json).collect::<Vec<_>>(),
            "bound_exponent": fmt_q(self.bound_exponent),
            "radius_valuation": fmt_q(self.radius_valuation),
        })
    }
}

/// Positive compositions of `total` into `parts` ordered parts.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    if total < parts {
        return vec![];
    }
    let mut out = Vec::new();
    for first in 1..=total - (parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct SupportTerm {
    sigma: Exps,
    sigma_deg: usize,
    slots: Vec<usize>,
    coeff: FieldElement,
}

fn support_terms(sys: &NormalizedSystem, i: usize) -> Result<Vec<SupportTerm>, SolverError> {
    let n = sys.n;
    let mut out = Vec::new();
    for (e, c) in sys.g[i].terms() {
        if e.iter().any(|x| !x.is_integer()) {
            return Err(SolverError::Unsupported("fractional exponents in the implicit system".into()));
        }
        let sigma_deg = e[..n].iter().fold(Q::zero(), |a, b| a + b).to_integer() as usize;
        let mut slots = Vec::new();
        for (r, h) in e[n..].iter().enumerate() {
            for _ in 0..h.to_integer() {
                slots.push(r);
            }
        }
        out.push(SupportTerm { sigma: e[..n].to_vec(), sigma_deg, slots, coeff: c.clone() });
    }
    Ok(out)
}

/// Degree-by-degree solution of the normalized system through degree `d`:
/// `F_{iq} = Σ c_{iJH} σ^J Π_{(r,s)} F_{r,Φ(r,s)}` over `J`, `H` in the support and positive
/// compositions `Φ` of `q − |J|` into the `|H|` slots.
pub fn solve_formal(sys: &NormalizedSystem, d: i64) -> Result<ImplicitSeries, SolverError> {
    let (n, m) = (sys.n, sys.m);
    let field = *sys.params.field();
    let names: Vec<String> = sys.params.vars()[..n].to_vec();
    let sp = SeriesParams::from_names(field, names, d, Some(sys.params.levels()[..n].to_vec()))?;
    let supports: Vec<Vec<SupportTerm>> = (0..m).map(|i| support_terms(sys, i)).collect::<Result<_, _>>()?;
    // parts[r][q] is the homogeneous degree-q part of F_r.
    let mut parts: Vec<Vec<TateSeries>> = vec![vec![TateSeries::zero(&sp)]; m];
    for q in 1..=d.max(0) as usize {
        let mut layer = Vec::with_capacity(m);
        for terms in &supports {
            let mut fq = TateSeries::zero(&sp);
            for t in terms {
                if t.sigma_deg > q {
                    continue;
                }
                let need = q - t.sigma_deg;
                let mono = TateSeries::monomial(&sp, t.sigma.clone(), t.coeff.clone())?;
                if t.slots.is_empty() {
                    if need == 0 {
                        fq = &fq + &mono;
                    }
                    continue;
                }
                for phi in compositions(need, t.slots.len()) {
                    assert!(phi.iter().all(|&a| a < q), "a composition part reached the current degree");
                    let mut prod = mono.clone();
                    for (&r, &a) in t.slots.iter().zip(&phi) {
                        prod = &prod * &parts[r][a];
                        if prod.is_zero() {
                            break;
                        }
                    }
                    fq = &fq + &prod;
                }
            }
            layer.push(fq);
        }
        for (r, fq) in layer.into_iter().enumerate() {
            parts[r].push(fq);
        }
    }
    let series: Vec<TateSeries> = parts.iter().map(|ps| ps.iter().fold(TateSeries::zero(&sp), |a, b| &a + b)).collect();
    Ok(ImplicitSeries {
        sigma_params: sp,
        center_sigma: vec![FieldElement::zero(field); n],
        series,
        bound_exponent: sys.bound_valuation,
        radius_valuation: sys.bound_valuation * 2,
    })
}

/// Translate, normalize, solve and translate back: `F(σ̄) = τ̄`.
pub fn solve_at_point(sys: &PolySystem, d: i64) -> Result<ImplicitSeries, SolverError> {
    let norm = normalize_system(sys)?;
    let mut f = solve_formal(&norm, d)?;
    for (s, c) in f.series.iter_mut().zip(&sys.center_tau) {
        *s = &*s + &TateSeries::constant(&f.sigma_params, c.clone())?;
    }
    f.center_sigma = sys.center_sigma.clone();
    Ok(f)
}

/// `P(σ̄ + η, F(η))` through the series degree; every coefficient should vanish.
pub fn residual(sys: &PolySystem, f: &ImplicitSeries) -> Result<Vec<TateSeries>, SolverError> {
    let sp = &f.sigma_params;
    let mut assign = Vec::with_capacity(sys.n + sys.m);
    for (i, c) in sys.center_sigma.iter().enumerate() {
        assign.push(&TateSeries::constant(sp, c.clone())? + &TateSeries::var(sp, i));
    }
    assign.extend(f.series.iter().cloned());
    Ok(sys.polys.iter().map(|p| p.substitute(sp, &assign, true)).collect::<Result<_, _>>()?)
}

/// Minimal valuation over all residual coefficients.
pub fn residual_valuation(sys: &PolySystem, f: &ImplicitSeries) -> Result<Valuation, SolverError> {
    Ok(residual(sys, f)?.iter().map(TateSeries::gauss_norm).min().unwrap_or(Valuation::Infinite))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub bound_ok: bool,
    /// First violating `(i, I, v(d_{iI}))`.
    pub witness: Option<(usize, Exps, Valuation)>,
    pub radius_valuation: Q,
    pub bound_valuation: Q,
    pub coefficients_checked: usize,
    /// Violations of the weaker bound `v(d_{iI}) ≥ −(2|I|−1)·v(π_B)`.
    pub tree_bound_violations: usize,
}

impl Certification {
    pub fn to_json(&self, vars: &[String]) -> Value {
        let witness = match &self.witness {
            None => Value::Null,
            Some((i, e, v)) => json!({
                "component": i,
                "exps": vars.iter().zip(e).map(|(n, x)| (n.clone(), Value::String(fmt_q(*x)))).collect::<serde_json::Map<_, _>>(),
                "valuation": v.to_string(),
            }),
        };
        json!({
            "bound_ok": self.bound_ok,
            "witness": witness,
            "radius_valuation": fmt_q(self.radius_valuation),
            "bound_valuation": fmt_q(self.bound_valuation),
            "coefficients_checked": self.coefficients_checked,
            "tree_bound_violations": self.tree_bound_violations,
            "note": "finite-prefix check of the stored coefficients",
        })
    }
}

/// Scans every stored non-constant coefficient against `v(d_{iI}) ≥ −|I|·v(π_B)`.
pub fn certify_bounds(f: &ImplicitSeries, sys: &NormalizedSystem) -> Certification {
    let beta = sys.bound_valuation;
    let mut witness = None;
    let mut checked = 0;
    let mut tree = 0;
    for (i, s) in f.series.iter().enumerate() {
        for (e, c) in s.terms() {
            let deg = e.iter().fold(Q::zero(), |a, b| a + b);
            if deg.is_zero() {
                continue;
            }
            checked += 1;
            let v = c.valuation();
            if witness.is_none() && v < Valuation::Finite(-deg * beta) {
                witness = Some((i, e.clone(), v));
            }
            if v < Valuation::Finite(-(deg * 2 - Q::one()) * beta) {
                tree += 1;
            }
        }
    }
    Certification {
        bound_ok: witness.is_none(),
        witness,
        radius_valuation: beta * 2,
        bound_valuation: beta,
        coefficients_checked: checked,
        tree_bound_violations: tree,
    }
}

/// The level-`h` system `P(σ^{p^h}, τ)`, with the degree cap scaled by `p^h`.
pub fn tower_system(sys: &PolySystem, h: u32) -> Result<PolySystem, SolverError> {
    let p = sys.params.field().p() as i64;
    let k = p.pow(h);
    let params = sys.params.with_deg_cap(sys.params.deg_cap() * k);
    let assign: Vec<TateSeries> = (0..sys.n + sys.m)
        .map(|i| {
            let v = TateSeries::var(&params, i);
            if i < sys.n {
                v.pow(k as u64)
            } else {
                v
            }
        })
        .collect();
    let polys = sys
        .polys
        .iter()
        .map(|f| f.relabel(&params, &(0..sys.n + sys.m).collect::<Vec<_>>())?.substitute(&params, &assign, false))
        .collect::<Result<Vec<_>, _>>()?;
    let z = FieldElement::zero(*params.field());
    if sys.center_sigma.iter().any(|c| !c.is_zero()) {
        return Err(SolverError::Unsupported("tower systems are centered at σ = 0".into()));
    }
    Ok(PolySystem { params, n: sys.n, m: sys.m, polys, center_sigma: vec![z; sys.n], center_tau: sys.center_tau.clone() })
}

/// True iff `F_{h+1}(σ) = F_h(σ^p)` through the common degree.
pub fn pullback_check(f_h: &ImplicitSeries, f_h1: &ImplicitSeries) -> bool {
    if f_h.series.len() != f_h1.series.len() || f_h.sigma_params.vars() != f_h1.sigma_params.vars() {
        return false;
    }
    let d = f_h.degree().min(f_h1.degree());
    let p = f_h.sigma_params.field().p() as i64;
    let vars: Vec<usize> = (0..f_h.sigma_params.nvars()).collect();
    let target = f_h1.sigma_params.with_deg_cap(d);
    f_h.series.iter().zip(&f_h1.series).all(|(a, b)| {
        let low = a.truncate_degree(Q::new(d, p)).relabel(&target, &vars);
        let lhs = b.truncate_degree(Q::from_integer(d)).relabel(&target, &vars);
        match (low.and_then(|l| l.frobenius_pullback(&vars)), lhs) {
            (Ok(rhs), Ok(lhs)) => lhs == rhs,
            _ => false,
        }
    })
}

/// One tower step on the radius valuation: `max(ρ − 1, 0)`.
pub fn radius_growth_step(rho: Q) -> Q {
    (rho - Q::one()).max(Q::zero())
}

/// Number of steps until the radius valuation drops below `1/p`.
pub fn steps_below(rho: Q, p: u32) -> usize {
    let target = Q::new(1, p as i64);
    let mut r = rho;
    let mut steps = 0;
    while r >= target {
        r = radius_growth_step(r);
        steps += 1;
    }
    steps
}

/// Splits a series over `X ++ tail` into tail monomials with coefficients over `X`.
fn split_tail(f: &TateSeries, x: &Arc<SeriesParams>) -> Result<BTreeMap<Exps, TateSeries>, SolverError> {
    let k = x.nvars();
    let mut out: BTreeMap<Exps, TateSeries> = BTreeMap::new();
    for (e, c) in f.terms() {
        let mono = TateSeries::monomial(x, e[..k].to_vec(), c.clone())?;
        let slot = out.entry(e[k..].to_vec()).or_insert_with(|| TateSeries::zero(x));
        *slot = &*slot + &mono;
    }
    Ok(out)
}

/// The system re-centered at a point `(s, t)` of series over a space `X`, normalized over
/// the coefficient ring of `X`: `ϑ = G(η, ϑ)` with `σ = s + η`, `τ = t + ϑ`.
#[derive(Debug, Clone)]
pub struct PointSystem {
    pub space: Arc<SeriesParams>,
    pub combined: Arc<SeriesParams>,
    pub n: usize,
    pub m: usize,
    pub g: Vec<TateSeries>,
    pub s: Vec<TateSeries>,
    pub t: Vec<TateSeries>,
    pub bound_valuation: Q,
}

/// Homotopy data over `X ++ [χ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homotopy {
    pub params: Arc<SeriesParams>,
    pub sigma: Vec<TateSeries>,
    pub tau: Vec<TateSeries>,
}

impl Homotopy {
    fn chi(&self) -> usize {
        self.params.nvars() - 1
    }

    /// The `χ = ε` face as series over `space`.
    pub fn face(&self, eps: u8, space: &Arc<SeriesParams>) -> Result<Vec<TateSeries>, SolverError> {
        let map: Vec<usize> = (0..space.nvars()).collect();
        self.sigma
            .iter()
            .chain(&self.tau)
            .map(|f| Ok(f.face_restrict(self.chi(), eps)?.relabel(space, &map)?))
            .collect()
    }

    /// True when no component depends on `χ`.
    pub fn is_constant_in_chi(&self) -> bool {
        let c = self.chi();
        self.sigma.iter().chain(&self.tau).all(|f| f.terms().all(|(e, _)| e[c].is_zero()))
    }
}

fn matrix_inverse_series(a: Vec<Vec<TateSeries>>) -> Result<Vec<Vec<TateSeries>>, SolverError> {
    let m = a.len();
    let mut a = a;
    let x = a[0][0].params().clone();
    let mut inv: Vec<Vec<TateSeries>> =
        (0..m).map(|i| (0..m).map(|j| if i == j { TateSeries::one(&x) } else { TateSeries::zero(&x) }).collect()).collect();
    for col in 0..m {
        let piv = (col..m)
            .filter(|&r| !a[r][col].constant_term().is_zero())
            .min_by_key(|&r| a[r][col].constant_term().valuation())
            .ok_or(SolverError::Singular)?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let pinv = a[col][col].formal_inverse()?;
        for j in 0..m {
            a[col][j] = &a[col][j] * &pinv;
            inv[col][j] = &inv[col][j] * &pinv;
        }
        for r in 0..m {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..m {
                    a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                    inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
                }
            }
        }
    }
    Ok(inv)
}

/// Re-centers `sys` at the point `(s, t)`; requires `P(s, t) = 0` below precision.
pub fn prepare_at(sys: &PolySystem, s: &[TateSeries], t: &[TateSeries]) -> Result<PointSystem, SolverError> {
    let (n, m) = (sys.n, sys.m);
    if s.len() != n || t.len() != m || s.is_empty() && n > 0 {
        return Err(SolverError::Unsupported("point has the wrong shape".into()));
    }
    let space = s.first().or(t.first()).ok_or_else(|| SolverError::Unsupported("empty point".into()))?.params().clone();
    if space.field() != sys.params.field() {
        return Err(SolverError::Series(SeriesError::Field(FieldError::ParamsMismatch)));
    }
    let point: Vec<TateSeries> = s.iter().chain(t).cloned().collect();
    let res = sys.polys.iter().map(|p| p.substitute(&space, &point, true)).collect::<Result<Vec<_>, _>>()?;
    let rv = res.iter().map(TateSeries::gauss_norm).min().unwrap_or(Valuation::Infinite);
    if !rv.is_infinite() {
        return Err(SolverError::NotOnVariety(rv));
    }
    let mut extra: Vec<String> = (0..n).map(|i| format!("__eta{i}")).collect();
    extra.extend((0..m).map(|j| format!("__vartheta{j}")));
    let combined = space.extended(&extra)?;
    let k = space.nvars();
    let lift: Vec<usize> = (0..k).collect();
    let mut assign = Vec::with_capacity(n + m);
    for (i, base) in point.iter().enumerate() {
        assign.push(&base.relabel(&combined, &lift)? + &TateSeries::var(&combined, k + i));
    }
    let translated: Vec<TateSeries> = sys.polys.iter().map(|p| p.substitute(&combined, &assign, true)).collect::<Result<_, _>>()?;
    let split: Vec<BTreeMap<Exps, TateSeries>> = translated.iter().map(|p| split_tail(p, &space)).collect::<Result<_, _>>()?;
    let jac: Vec<Vec<TateSeries>> = split
        .iter()
        .map(|parts| (0..m).map(|j| parts.get(&unit_exps(n + m, n + j)).cloned().unwrap_or_else(|| TateSeries::zero(&space))).collect())
        .collect();
    let jinv = matrix_inverse_series(jac)?;
    let mut g = Vec::with_capacity(m);
    let mut minval = Valuation::Infinite;
    for i in 0..m {
        let mut pi = TateSeries::zero(&combined);
        for (kk, tr) in translated.iter().enumerate() {
            pi = &pi + &(&jinv[i][kk].relabel(&combined, &lift)? * tr);
        }
        let mut gi = TateSeries::zero(&combined);
        for (tail, coeff) in split_tail(&pi, &space)? {
            let linear_tau = tail[..n].iter().all(Q::is_zero) && tail[n..].iter().fold(Q::zero(), |a, b| a + b).is_one();
            if linear_tau || tail.iter().all(Q::is_zero) {
                continue;
            }
            minval = minval.min(coeff.gauss_norm());
            let mut full = vec![Q::zero(); k];
            full.extend(tail);
            let mono = TateSeries::monomial(&combined, full, FieldElement::one(*space.field()))?;
            gi = &gi - &(&coeff.relabel(&combined, &lift)? * &mono);
        }
        g.push(gi);
    }
    let bound_valuation = match minval {
        Valuation::Finite(v) if v < Q::zero() => -v,
        _ => Q::zero(),
    };
    Ok(PointSystem { space, combined, n, m, g, s: s.to_vec(), t: t.to_vec(), bound_valuation })
}

impl PointSystem {
    pub fn radius_valuation(&self) -> Q {
        self.bound_valuation * 2
    }

    /// `H = (s + (s̃−s)χ, t + ϑ(χ))` where `ϑ` solves `ϑ = G((s̃−s)χ, ϑ)`.
    pub fn homotopy(&self, s_tilde: &[TateSeries]) -> Result<Homotopy, SolverError> {
        let x = &self.space;
        let k = x.nvars();
        let d = x.deg_cap();
        let gaps: Vec<TateSeries> = s_tilde.iter().zip(&self.s).map(|(a, b)| a - b).collect();
        // χ-degree needed: beyond it every term has X-degree above D or sits above the cap.
        let mut chi_deg: i64 = 0;
        for gp in &gaps {
            if gp.is_zero() {
                continue;
            }
            let by_degree = match gp.min_degree() {
                Some(md) if md > Q::zero() => (Q::from_integer(d) / md).floor().to_integer() + 1,
                _ => d + 1,
            };
            let by_value = match gp.gauss_norm() {
                Valuation::Finite(v) if v > Q::zero() => (x.field().cap() / v).ceil().to_integer() + 1,
                _ => by_degree,
            };
            chi_deg = chi_deg.max(by_degree.min(by_value));
        }
        let mut names = x.vars().to_vec();
        names.push("chi".to_string());
        let mut levels = x.levels().to_vec();
        levels.push(0);
        let y = SeriesParams::from_names(*x.field(), names, d + chi_deg, Some(levels))?;
        let lift: Vec<usize> = (0..k).collect();
        let chi = TateSeries::var(&y, k);
        let delta: Vec<TateSeries> = gaps.iter().map(|gp| Ok(&gp.relabel(&y, &lift)? * &chi)).collect::<Result<_, SolverError>>()?;
        let x_only = |f: &TateSeries| -> TateSeries {
            TateSeries::from_terms(
                &y,
                f.terms().filter(|(e, _)| e[..k].iter().fold(Q::zero(), |a, b| a + b) <= Q::from_integer(d)).map(|(e, c)| (e.clone(), c.clone())),
            )
            .unwrap()
        };
        let mut vartheta: Vec<TateSeries> = vec![TateSeries::zero(&y); self.m];
        let base: Vec<TateSeries> = (0..k).map(|i| TateSeries::var(&y, i)).collect();
        for _ in 0..(d + chi_deg + 2) * (x.field().denom()) + 2 {
            let mut assign = base.clone();
            assign.extend(delta.iter().cloned());
            assign.extend(vartheta.iter().cloned());
            let next: Vec<TateSeries> =
                self.g.iter().map(|gi| gi.substitute(&y, &assign, true).map(|v| x_only(&v))).collect::<Result<_, _>>()?;
            if next == vartheta {
                break;
            }
            vartheta = next;
        }
        let sigma = self.s.iter().zip(&delta).map(|(a, dl)| Ok(&a.relabel(&y, &lift)? + dl)).collect::<Result<Vec<_>, SolverError>>()?;
        let tau = self.t.iter().zip(&vartheta).map(|(a, v)| Ok(&a.relabel(&y, &lift)? + v)).collect::<Result<Vec<_>, SolverError>>()?;
        let sigma = sigma.iter().map(x_only).collect();
        let tau = tau.iter().map(x_only).collect();
        Ok(Homotopy { params: y, sigma, tau })
    }
}

#[derive(Debug, Clone)]
pub struct HomotopyFactor {
    pub h_bar: u32,
    pub s_tilde: Vec<TateSeries>,
    pub homotopy: Homotopy,
    pub radius_valuation: Q,
    pub threshold: Q,
}

/// Searches the smallest level `h̄` whose truncation `s̃ = T_h̄(s)` is within the radius
/// threshold `max(ρ, ε)` and gives a power-bounded `F(s̃)` of support level `≤ h̄`.
pub fn homotopy_factor(sys: &PolySystem, s: &[TateSeries], t: &[TateSeries], epsilon: Q) -> Result<HomotopyFactor, SolverError> {
    let ps = prepare_at(sys, s, t)?;
    let threshold = ps.radius_valuation().max(epsilon);
    let top = ps.space.levels().iter().copied().max().unwrap_or(0);
    for h in 0..=top {
        let s_tilde: Vec<TateSeries> = s.iter().map(|x| x.level_truncate(h)).collect();
        let close = s_tilde.iter().zip(s).all(|(a, b)| (a - b).gauss_norm() > Valuation::Finite(threshold));
        if !close {
            continue;
        }
        let hom = ps.homotopy(&s_tilde)?;
        let one = hom.face(1, &ps.space)?;
        let bounded = one[ps.n..].iter().all(|f| f.gauss_norm() >= Valuation::Finite(Q::zero()));
        let descended = one.iter().all(|f| f.support_level() <= h);
        if bounded && descended {
            return Ok(HomotopyFactor { h_bar: h, s_tilde, homotopy: hom, radius_valuation: ps.radius_valuation(), threshold });
        }
    }
    Err(SolverError::Approximation(threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a, b)
    }

    fn st(p: u32, cap: i64, d: i64) -> (FieldParams, Arc<SeriesParams>) {
        let f = FieldParams::char0(p, 0, cap).unwrap();
        (f, SeriesParams::new(f, &["s", "t"], d, None).unwrap())
    }

    fn catalan_system(p: u32, d: i64) -> PolySystem {
        let (_, r) = st(p, 20, d);
        let (s, t) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1));
        PolySystem::at_origin(r.clone(), 1, vec![&(&t - &s) - &(&t * &t)]).unwrap()
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 2).len(), 3);
        assert_eq!(compositions(0, 0), vec![Vec::<usize>::new()]);
        assert!(compositions(1, 2).is_empty());
    }

    #[test]
    fn identity_system() {
        let (_, r) = st(3, 10, 6);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::var(&r, 0)]).unwrap();
        let norm = normalize_system(&sys).unwrap();
        assert_eq!(norm.polys(), sys.polys);
        let f = solve_formal(&norm, 6).unwrap();
        assert_eq!(f.series[0], TateSeries::var(&f.sigma_params, 0));
        assert!(certify_bounds(&f, &norm).bound_ok);
    }

    #[test]
    fn normalization_divides_by_two() {
        let (field, r) = st(3, 10, 4);
        let p = &(&TateSeries::from_int(&r, 2) * &TateSeries::var(&r, 1)) - &TateSeries::var(&r, 0);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![p]).unwrap();
        let norm = normalize_system(&sys).unwrap();
        let half = FieldElement::from_int(field, 2).invert().unwrap();
        let want = &TateSeries::var(&r, 1) - &TateSeries::var(&r, 0).scalar_mul(&half).unwrap();
        assert_eq!(norm.polys()[0], want);
    }

    #[test]
    fn triangular_jacobian() {
        let f = FieldParams::char0(2, 0, 12).unwrap();
        let r = SeriesParams::new(f, &["s", "a", "b"], 4, None).unwrap();
        let (s, a, b) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1), TateSeries::var(&r, 2));
        let pi = TateSeries::from_int(&r, 2);
        let p1 = &(&(&a + &(&pi * &b)) - &s) - &(&a * &b);
        let p2 = &(&b - &(&s * &s)) - &(&a * &a);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![p1, p2]).unwrap();
        let norm = normalize_system(&sys).unwrap();
        let j = norm.jacobian();
        for (i, row) in j.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                assert_eq!(*x, if i == k { FieldElement::one(f) } else { FieldElement::zero(f) });
            }
        }
        let sol = solve_formal(&norm, 4).unwrap();
        assert!(residual_valuation(&sys, &sol).unwrap().is_infinite());
    }

    #[test]
    fn catalan_numbers() {
        let sys = catalan_system(5, 8);
        let f = solve_at_point(&sys, 8).unwrap();
        let want = [1, 1, 2, 5, 14, 42, 132, 429];
        for (k, w) in want.iter().enumerate() {
            let c = f.series[0].coefficient(&[Q::from_integer(k as i64 + 1)]);
            assert_eq!(c, FieldElement::from_int(*c.params(), *w), "degree {}", k + 1);
        }
        let cert = certify_bounds(&f, &normalize_system(&sys).unwrap());
        assert!(cert.bound_ok);
        assert_eq!(cert.radius_valuation, Q::zero());
    }

    #[test]
    fn square_root_at_one() {
        // τ² − σ at (1, 1) over Q₃: F = 1 + η/2 − η²/8 + η³/16 − …
        let (field, r) = st(3, 12, 4);
        let p = &(&TateSeries::var(&r, 1) * &TateSeries::var(&r, 1)) - &TateSeries::var(&r, 0);
        let one = FieldElement::one(field);
        let sys = PolySystem::at_origin(r, 1, vec![p]).unwrap().with_center(vec![one.clone()], vec![one]);
        let f = solve_at_point(&sys, 4).unwrap();
        let c = |k: i64| f.series[0].coefficient(&[Q::from_integer(k)]);
        let rat = |a: i64, b: i64| FieldElement::from_rational(field, &num_rational::BigRational::new(a.into(), b.into())).unwrap();
        assert_eq!(c(0), rat(1, 1));
        assert_eq!(c(1), rat(1, 2));
        assert_eq!(c(2), rat(-1, 8));
        assert_eq!(c(3), rat(1, 16));
        assert!(residual_valuation(&sys, &f).unwrap().is_infinite());
    }

    #[test]
    fn linear_system_translation_invariance() {
        let (field, r) = st(2, 10, 5);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::var(&r, 0)]).unwrap();
        let c = FieldElement::from_int(field, 5);
        let moved = sys.clone().with_center(vec![c.clone()], vec![c.clone()]);
        let f = solve_at_point(&moved, 5).unwrap();
        let sp = &f.sigma_params;
        assert_eq!(f.series[0], &TateSeries::constant(sp, c).unwrap() + &TateSeries::var(sp, 0));
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let (_, r) = st(2, 10, 4);
        let t = TateSeries::var(&r, 1);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&(&t * &t) - &TateSeries::var(&r, 0)]).unwrap();
        assert_eq!(normalize_system(&sys), Err(SolverError::Singular));
    }

    #[test]
    fn off_center_is_reported() {
        let (_, r) = st(2, 10, 4);
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::one(&r)]).unwrap();
        assert!(matches!(normalize_system(&sys), Err(SolverError::NotOnVariety(_))));
    }

    #[test]
    fn catalan_tower_pullback() {
        let sys = catalan_system(2, 8);
        let f0 = solve_at_point(&tower_system(&sys, 0).unwrap(), 8).unwrap();
        let f1 = solve_at_point(&tower_system(&sys, 1).unwrap(), 8).unwrap();
        assert!(pullback_check(&f0, &f1));
        let mut bad = f1.clone();
        let sp = bad.sigma_params.clone();
        bad.series[0] = &bad.series[0] + &TateSeries::var(&sp, 0).pow(6);
        assert!(!pullback_check(&f0, &bad));
    }

    #[test]
    fn radius_steps() {
        assert_eq!(radius_growth_step(q(3, 1)), q(2, 1));
        assert_eq!(radius_growth_step(q(1, 2)), q(0, 1));
        assert_eq!(steps_below(q(5, 1), 2), 5);
    }

    #[test]
    fn negative_coefficient_bound() {
        // τ = π^{-1}σ + τ²: d_k = C_k π^{-k}, so the bound −|I| holds with equality.
        let (field, r) = st(3, 20, 6);
        let c = TateSeries::constant(&r, FieldElement::pi_pow(field, q(-1, 1)).unwrap()).unwrap();
        let (s, t) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1));
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&(&t - &(&c * &s)) - &(&t * &t)]).unwrap();
        let norm = normalize_system(&sys).unwrap();
        assert_eq!(norm.bound_valuation, Q::one());
        let f = solve_formal(&norm, 6).unwrap();
        let cert = certify_bounds(&f, &norm);
        assert!(cert.bound_ok, "{cert:?}");
        assert_eq!(cert.radius_valuation, q(2, 1));
    }

    #[test]
    fn both_negative_breaks_linear_bound() {
        // τ = π^{-1}σ + π^{-1}τ²: d_2 = π^{-3}, below −2·v(π_B).
        let (field, r) = st(3, 20, 4);
        let c = TateSeries::constant(&r, FieldElement::pi_pow(field, q(-1, 1)).unwrap()).unwrap();
        let (s, t) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1));
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&(&t - &(&c * &s)) - &(&c * &(&t * &t))]).unwrap();
        let norm = normalize_system(&sys).unwrap();
        let f = solve_formal(&norm, 4).unwrap();
        let cert = certify_bounds(&f, &norm);
        assert!(!cert.bound_ok);
        assert_eq!(cert.witness.as_ref().unwrap().1, vec![Q::from_integer(2)]);
        assert_eq!(cert.tree_bound_violations, 0);
    }

    fn space(p: u32, level: u32, cap: i64, d: i64) -> Arc<SeriesParams> {
        SeriesParams::new(FieldParams::char0(p, level, cap).unwrap(), &["u"], d, None).unwrap()
    }

    #[test]
    fn homotopy_constant_at_level_zero() {
        let x = space(2, 3, 10, 4);
        let (_, r) = st(2, 10, 4);
        let r = r.with_field(*x.field()).unwrap();
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::var(&r, 0)]).unwrap();
        let s = &TateSeries::var(&x, 0) + &TateSeries::from_int(&x, 3);
        let hf = homotopy_factor(&sys, &[s.clone()], &[s.clone()], Q::one()).unwrap();
        assert_eq!(hf.h_bar, 0);
        assert!(hf.homotopy.is_constant_in_chi());
        assert_eq!(hf.homotopy.face(0, &x).unwrap(), vec![s.clone(), s]);
    }

    #[test]
    fn homotopy_drops_a_deep_term() {
        let x = space(2, 3, 12, 4);
        let f = *x.field();
        let r = SeriesParams::new(f, &["s", "t"], 4, None).unwrap();
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&TateSeries::var(&r, 1) - &TateSeries::var(&r, 0)]).unwrap();
        let mono = |e: Q, v: Q| TateSeries::monomial(&x, vec![e], FieldElement::pi_pow(f, v).unwrap()).unwrap();
        let s = &(&TateSeries::var(&x, 0) + &mono(q(1, 4), q(3, 1))) + &mono(q(1, 8), q(9, 1));
        let hf = homotopy_factor(&sys, &[s.clone()], &[s.clone()], q(4, 1)).unwrap();
        assert_eq!(hf.h_bar, 2);
        assert!(!hf.homotopy.is_constant_in_chi());
        let zero = hf.homotopy.face(0, &x).unwrap();
        assert_eq!(zero, vec![s.clone(), s.clone()]);
        let one = hf.homotopy.face(1, &x).unwrap();
        assert!(one.iter().all(|g| g.support_level() <= 2));
        assert_eq!(one[0], s.level_truncate(2));
        assert_eq!(one[1], one[0]);
    }

    #[test]
    fn homotopy_of_a_root() {
        // F(s̃) must land at the level of s̃.
        let x = space(3, 2, 10, 4);
        let f = *x.field();
        let r = SeriesParams::new(f, &["s", "t"], 6, None).unwrap();
        let (sv, tv) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1));
        let three = TateSeries::from_int(&r, 3);
        // P = τ² − τ − 3σ: at σ = 0 the root τ = 1 is simple (P_τ = 1).
        let sys = PolySystem::at_origin(r.clone(), 1, vec![&(&(&tv * &tv) - &tv) - &(&three * &sv)]).unwrap();
        let mono = |e: Q, v: Q| TateSeries::monomial(&x, vec![e], FieldElement::pi_pow(f, v).unwrap()).unwrap();
        let s = &TateSeries::var(&x, 0) + &mono(q(1, 9), q(5, 1));
        // t solves t² − t = 3s near 1, found by the point solver at σ̄ = 0, τ̄ = 1.
        let one = FieldElement::one(f);
        let at1 = PolySystem { center_tau: vec![one], ..sys.clone() };
        let sp = SeriesParams::new(f, &["s"], 4, None).unwrap();
        let fser = solve_at_point(&at1, 4).unwrap();
        let fser = fser.series[0].relabel(&sp, &[0]).unwrap();
        let t = fser.substitute(&x, &[s.clone()], false).unwrap();
        let hf = homotopy_factor(&at1, &[s.clone()], &[t.clone()], q(2, 1)).unwrap();
        assert_eq!(hf.h_bar, 0);
        let one = hf.homotopy.face(1, &x).unwrap();
        assert_eq!(one[0], TateSeries::var(&x, 0));
        assert_eq!(one[1].support_level(), 0);
        assert_eq!(hf.homotopy.face(0, &x).unwrap(), vec![s, t]);
    }

    #[test]
    fn system_json_round_trip() {
        let sys = catalan_system(3, 6);
        let s = serde_json::to_string(&sys.to_json()).unwrap();
        let back = PolySystem::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, sys);
        assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), s);
    }
}
