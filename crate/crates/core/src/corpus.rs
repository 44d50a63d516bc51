//! Seeded generators for the acceptance runs and the CLI.

use std::sync::Arc;

use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::face_lifting::{lift, restrict, space_with_cube, FaceMap, Layout};
use crate::implicit_solver::PolySystem;
use crate::tate_series::{SeriesParams, TateSeries};
use crate::valued_field::{FieldElement, FieldParams, Valuation, Q};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Precision below which residuals must vanish.
pub const RESIDUAL_PRECISION: i64 = 16;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Working cap that keeps the residual exact below `RESIDUAL_PRECISION` when
/// coefficients have valuation `≥ −beta` and the solve runs to degree `d`.
pub fn working_cap(d: i64, beta: i64) -> i64 {
    RESIDUAL_PRECISION + 4 * d * beta + 4
}

/// `τ = σ + τ²` over `Q_p`, centered at the origin.
pub fn catalan_system(p: u32, d: i64) -> PolySystem {
    let field = FieldParams::char0(p, 0, working_cap(d, 0)).expect("valid field");
    let sp = SeriesParams::new(field, &["sigma", "tau"], d.max(2), None).expect("valid params");
    let (s, t) = (TateSeries::var(&sp, 0), TateSeries::var(&sp, 1));
    PolySystem::at_origin(sp, 1, vec![&(&t - &s) - &t.pow(2)]).expect("square system")
}

fn random_unit_coefficient(rng: &mut ChaCha8Rng, field: FieldParams, lo: i64, hi: i64) -> FieldElement {
    let v = rng.random_range(lo..=hi);
    let c = FieldElement::from_int(field, rng.random_range(1..field.p() as i64));
    &c * &FieldElement::pi_pow(field, Q::from_integer(v)).expect("integral exponent")
}

/// `τ_i = G_i(σ, τ)` with `n, m ≤ 2`, `p ∈ {2, 3, 5}`, monomials of degree 1..3 (no pure
/// linear `τ` part) and coefficient valuations in `{−1, 0, 1, 2}`.
pub fn random_system(rng: &mut ChaCha8Rng, d: i64) -> PolySystem {
    let p = [2u32, 3, 5][rng.random_range(0..3)];
    let n = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=2usize);
    let field = FieldParams::char0(p, 0, working_cap(d, 1)).expect("valid field");
    let mut names: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    names.extend((1..=m).map(|i| format!("t{i}")));
    let sp = SeriesParams::from_names(field, names, d.max(3), None).expect("valid params");
    let mut polys = Vec::with_capacity(m);
    for i in 0..m {
        let mut g = TateSeries::zero(&sp);
        // One pure σ term so that the solution is not identically zero.
        let mut e = vec![Q::zero(); n + m];
        e[rng.random_range(0..n)] = Q::from_integer(rng.random_range(1..=2));
        g = &g + &TateSeries::monomial(&sp, e, random_unit_coefficient(rng, field, -1, 2)).expect("in cap");
        for _ in 0..rng.random_range(1..=3) {
            let deg = rng.random_range(1..=3);
            let mut e = vec![Q::zero(); n + m];
            for _ in 0..deg {
                e[rng.random_range(0..n + m)] += Q::from_integer(1);
            }
            let linear_tau = deg == 1 && e[..n].iter().all(Q::is_zero);
            if linear_tau {
                continue;
            }
            g = &g + &TateSeries::monomial(&sp, e, random_unit_coefficient(rng, field, -1, 2)).expect("in cap");
        }
        polys.push(&TateSeries::var(&sp, n + i) - &g);
    }
    PolySystem::at_origin(sp, n, polys).expect("square system")
}

/// Series over `sp` with `terms` monomials, exponents of the base variables at level
/// `≤ level`, integer cube exponents and coefficient valuations in `[min_v, max_v]`.
pub fn random_series(rng: &mut ChaCha8Rng, sp: &Arc<SeriesParams>, terms: usize, level: u32, min_v: i64, max_v: i64) -> TateSeries {
    let field = *sp.field();
    let layout = Layout::of(sp).expect("cube layout");
    let step = Q::new(1, (field.p() as i64).pow(level));
    let cap = Q::from_integer(sp.deg_cap());
    let mut out = TateSeries::zero(sp);
    for _ in 0..terms {
        let mut e = vec![Q::zero(); sp.nvars()];
        let mut deg = Q::zero();
        for &i in &layout.base {
            let room = ((cap - deg) / step).floor().to_integer();
            let k = rng.random_range(0..=room.clamp(0, 2 * (field.p() as i64).pow(level)));
            e[i] = step * k;
            deg += e[i];
        }
        for &i in &layout.theta {
            let room = (cap - deg).floor().to_integer();
            let k = rng.random_range(0..=room.clamp(0, 2));
            e[i] = Q::from_integer(k);
            deg += e[i];
        }
        let c = random_unit_coefficient(rng, field, min_v, max_v);
        out = &out + &TateSeries::monomial(sp, e, c).expect("within cap");
    }
    out
}

/// Tower space `u, theta1..thetan` over `Q_2` at level 3, field cap 12, degree cap 3.
pub fn tower_space(n: usize) -> Arc<SeriesParams> {
    let field = FieldParams::char0(2, 3, 12).expect("valid field");
    let base = SeriesParams::new(field, &["u"], 3, None).expect("valid params");
    space_with_cube(&base, n).expect("fresh names")
}

/// A tuple `s_1..s_N` (`N ≤ 4`, `n ≤ 3`) mixing a shared part, a part vanishing on
/// `θ₁ = 1`, and per-element `θ_k`-multiples, plus a target accuracy.
pub fn random_tuple(rng: &mut ChaCha8Rng) -> (Vec<TateSeries>, Q) {
    let n = rng.random_range(1..=3usize);
    let count = rng.random_range(1..=4usize);
    let sp = tower_space(n);
    let one = TateSeries::one(&sp);
    let theta = |k: usize| TateSeries::var(&sp, k);
    let shared = random_series(rng, &sp, 3, 1, 0, 3);
    let deep = random_series(rng, &sp, 3, 3, 1, 8);
    let vanishing = &(&one - &theta(1)) * &deep;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.random_range(1..=n);
        let lvl = if rng.random_bool(0.5) { 1 } else { 3 };
        let extra = random_series(rng, &sp, 2, lvl, 1, 8);
        let mult = &theta(k) * &extra.truncate_degree(Q::from_integer(sp.deg_cap() - 1));
        out.push(&(&shared + &vanishing) + &mult);
    }
    (out, Q::from_integer(rng.random_range(1..=4)))
}

/// Lifts `trials` random perturbations of face values on `sigmas` and returns the largest
/// observed valuation loss `max(gap − v(f − g))` and whether every lift was exact on faces.
pub fn lift_trials(rng: &mut ChaCha8Rng, sp: &Arc<SeriesParams>, sigmas: &[FaceMap], trials: usize) -> (i64, bool) {
    let layout = Layout::of(sp).expect("cube layout");
    let mut worst = i64::MIN;
    let mut exact = true;
    for _ in 0..trials {
        let g = random_series(rng, sp, 5, 1, 0, 3);
        let gap = rng.random_range(1..=5);
        let target = &g + &random_series(rng, sp, 5, 1, gap, gap + 3);
        let faces: Vec<(FaceMap, TateSeries)> = sigmas.iter().map(|s| (s.clone(), restrict(&target, &layout, s))).collect();
        match lift(&faces, &g, None) {
            Ok(r) => {
                exact &= r.checks[0].passed;
                if let (Valuation::Finite(a), Valuation::Finite(b)) = (r.input_gap, r.achieved) {
                    worst = worst.max((a - b).ceil().to_integer());
                }
            }
            Err(_) => exact = false,
        }
    }
    (worst, exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit_solver::{residual_valuation, solve_at_point};

    #[test]
    fn random_systems_solve() {
        let mut r = rng(1);
        for _ in 0..3 {
            let sys = random_system(&mut r, 6);
            let f = solve_at_point(&sys, 6).unwrap();
            assert!(residual_valuation(&sys, &f).unwrap() >= Valuation::Finite(Q::from_integer(RESIDUAL_PRECISION)));
        }
    }

    #[test]
    fn tuples_are_well_formed() {
        let mut r = rng(2);
        for _ in 0..5 {
            let (s, e) = random_tuple(&mut r);
            assert!(!s.is_empty() && e > Q::zero());
            assert!(s.iter().all(|x| x.support_level() <= 3));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = random_system(&mut rng(9), 4);
        let b = random_system(&mut rng(9), 4);
        assert_eq!(a, b);
    }
}
