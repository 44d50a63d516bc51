//! Acceptance run: one line per criterion with its pinned tolerance and time limit.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nonarch::cli::{execute, Cli};
use nonarch::corpus::{self, catalan_system, lift_trials, random_series, random_system, random_tuple, tower_space, DEFAULT_SEED};
use nonarch::cubical_homology::{
    compare_n_c, full_differential, polynomial_cylinder, random_module, unit_complex, CubicalModule,
};
use nonarch::face_lifting::{
    all_faces, approximate_tuple, exactness_check, intersect, modular_law_check, parse_constraints, Coincidences, FaceMap, Slice,
};
use nonarch::implicit_solver::{
    certify_bounds, normalize_system, pullback_check, residual_valuation, solve_at_point, solve_formal, tower_system, PolySystem,
};
use nonarch::linalg::{Mat, Rat};
use nonarch::report::all_passed;
use nonarch::tate_series::TateSeries;
use nonarch::tilt_engine::{
    additive_congruence_check, b1perf_maps, flat_of_monomial, from_flat, max_depth, tilt_field, unit_transfer, verify_b1perf,
    TiltElement,
};
use nonarch::valued_field::{FieldElement, FieldParams, Valuation, Q};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn solver_corpus() -> Vec<PolySystem> {
    let mut rng = corpus::rng(DEFAULT_SEED);
    (0..50).map(|_| random_system(&mut rng, 8)).collect()
}

fn criterion_1(systems: &[PolySystem]) -> Outcome {
    let mut worst = Valuation::Infinite;
    let mut bad = 0;
    for sys in systems {
        let v = match solve_at_point(sys, 8).and_then(|f| residual_valuation(sys, &f)) {
            Ok(v) => v,
            Err(_) => Valuation::Finite(Q::from_integer(i64::MIN / 2)),
        };
        if v < Valuation::Finite(Q::from_integer(16)) {
            bad += 1;
        }
        worst = worst.min(v);
    }
    outcome(bad == 0, format!("{} systems, residual vanishes below π^16 in all but {bad} (min valuation {worst})", systems.len()))
}

fn criterion_2(systems: &[PolySystem]) -> Outcome {
    let (mut stated, mut corrected, mut checked) = (0usize, 0usize, 0usize);
    let mut first = None;
    for sys in systems {
        let norm = normalize_system(sys).expect("corpus systems are normalized");
        let f = solve_formal(&norm, 8).expect("solvable");
        let c = certify_bounds(&f, &norm);
        checked += c.coefficients_checked;
        corrected += c.tree_bound_violations;
        if !c.bound_ok {
            stated += 1;
            if first.is_none() {
                first = c.witness.map(|(i, e, v)| format!("component {i}, exps {e:?}, v = {v}, beta = {}", norm.bound_valuation));
            }
        }
    }
    let (w, tree) = linear_bound_counterexample();
    let detail = format!(
        "{checked} coefficients; v >= -|I|β violated in {stated} systems (first: {}); v >= -(2|I|-1)β violated {corrected} times; \
         outside the corpus τ = π⁻¹σ + π⁻¹τ² gives {w} with {tree} violations of the weaker bound",
        first.unwrap_or_else(|| "none".into())
    );
    outcome(stated == 0, detail)
}

/// The system `τ = π⁻¹σ + π⁻¹τ²` over `Q_3`, where `d₂ = π⁻³` breaks `v ≥ −2β`.
fn linear_bound_counterexample() -> (String, usize) {
    let field = FieldParams::char0(3, 0, 20).unwrap();
    let r = nonarch::tate_series::SeriesParams::new(field, &["s", "t"], 4, None).unwrap();
    let c = TateSeries::constant(&r, FieldElement::pi_pow(field, Q::from_integer(-1)).unwrap()).unwrap();
    let (s, t) = (TateSeries::var(&r, 0), TateSeries::var(&r, 1));
    let sys = PolySystem::at_origin(r.clone(), 1, vec![&(&t - &(&c * &s)) - &(&c * &(&t * &t))]).unwrap();
    let norm = normalize_system(&sys).unwrap();
    let cert = certify_bounds(&solve_formal(&norm, 4).unwrap(), &norm);
    let w = match cert.witness {
        Some((_, e, v)) => format!("v(d_{}) = {v}", e[0]),
        None => "no violation".into(),
    };
    (w, cert.tree_bound_violations)
}

/// Newton iteration for `T = σ + T²` on integer series modulo `σ^{d+1}`.
fn catalan_newton(d: usize) -> Vec<BigInt> {
    let mul = |a: &[BigInt], b: &[BigInt]| {
        let mut out = vec![BigInt::zero(); d + 1];
        for i in 0..=d {
            for j in 0..=d - i {
                out[i + j] += &a[i] * &b[j];
            }
        }
        out
    };
    let inverse = |a: &[BigInt]| {
        let mut inv = vec![BigInt::zero(); d + 1];
        inv[0] = BigInt::one();
        for k in 1..=d {
            let mut s = BigInt::zero();
            for j in 1..=k {
                s += &a[j] * &inv[k - j];
            }
            inv[k] = -s;
        }
        inv
    };
    let mut t = vec![BigInt::zero(); d + 1];
    for _ in 0..6 {
        let t2 = mul(&t, &t);
        let mut f: Vec<BigInt> = t.iter().zip(&t2).map(|(a, b)| a - b).collect();
        f[1] -= 1;
        let mut df: Vec<BigInt> = t.iter().map(|a| -(a * BigInt::from(2))).collect();
        df[0] += 1;
        let step = mul(&f, &inverse(&df));
        t = t.iter().zip(&step).map(|(a, b)| a - b).collect();
    }
    t
}

fn criterion_3() -> Outcome {
    let oracle = catalan_newton(8);
    let f = solve_at_point(&catalan_system(2, 8), 8).expect("catalan solves");
    let got: Vec<BigInt> = (1..=8)
        .map(|k| {
            let r = f.series[0].coefficient(&[Q::from_integer(k)]).to_rational().expect("integral");
            r.to_integer()
        })
        .collect();
    let want = &oracle[1..];
    let listed: Vec<i64> = vec![1, 1, 2, 5, 14, 42, 132, 429];
    let ok = got == want && want.iter().zip(&listed).all(|(a, b)| *a == BigInt::from(*b));
    outcome(ok, format!("coefficients {:?}", got.iter().map(ToString::to_string).collect::<Vec<_>>()))
}

fn criterion_4() -> Outcome {
    let mut fails = Vec::new();
    for p in [2u32, 3] {
        for h in [1u32, 2] {
            let ok = b1perf_maps(p, h, 12).and_then(|d| verify_b1perf(&d)).map(|c| c.len() == 3 && all_passed(&c)).unwrap_or(false);
            if !ok {
                fails.push(format!("(p={p}, h={h})"));
            }
        }
    }
    outcome(fails.is_empty(), format!("4 (p, h) pairs at k = 12, failures: {fails:?}"))
}

fn flat_unit(rng: &mut ChaCha8Rng, k: FieldParams) -> FieldElement {
    let den = (k.p() as i64).pow(k.level().min(2));
    let mut digits = vec![(Q::zero(), 1u32)];
    for _ in 0..rng.random_range(0..6) {
        let n = rng.random_range(1..3 * den);
        digits.push((Q::new(n, den), rng.random_range(0..k.p())));
    }
    digits.sort();
    digits.dedup_by(|a, b| a.0 == b.0);
    FieldElement::make(tilt_field(k), &digits).expect("valid digits")
}

fn criterion_5() -> Outcome {
    let mut rng = corpus::rng(DEFAULT_SEED + 5);
    let mut fails = [0usize; 3];
    let k5 = FieldParams::char0(5, 2, 8).unwrap();
    for _ in 0..100 {
        let (c1, c2) = (rng.random_range(1..5), rng.random_range(1..5));
        let (e1, e2) = (Q::new(rng.random_range(0..20), 5), Q::new(rng.random_range(0..20), 5));
        let a = flat_of_monomial(k5, c1, e1, 1).unwrap();
        let b = flat_of_monomial(k5, c2, e2, 1).unwrap();
        let ab = from_flat(&a.flat.try_mul(&b.flat).unwrap(), k5, 1).unwrap();
        if ab.sharp().unwrap() != &a.sharp().unwrap() * &b.sharp().unwrap() {
            fails[0] += 1;
        }
    }
    let k2 = FieldParams::char0(2, 4, 8).unwrap();
    for _ in 0..100 {
        let a = flat_unit(&mut rng, k2);
        let depth = rng.random_range(0..3u32).min(max_depth(&a, k2));
        let t = from_flat(&a, k2, depth).unwrap();
        if !additive_congruence_check(&t).unwrap_or(false) {
            fails[1] += 1;
        }
    }
    let k3 = FieldParams::char0(3, 2, 6).unwrap();
    for _ in 0..100 {
        let b = flat_unit(&mut rng, k3);
        let unit = from_flat(&b, k3, max_depth(&b, k3)).unwrap().sharp().unwrap();
        let ok = unit_transfer(&unit).map(|t| t.certificate >= Valuation::Finite(Q::one())).unwrap_or(false);
        if !ok {
            fails[2] += 1;
        }
    }
    outcome(fails == [0; 3], format!("failures: multiplicativity {}, additive congruence {}, unit transfer {} (of 100 each)", fails[0], fails[1], fails[2]))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    Mat::from_columns(&[(0..n).map(|_| Rat::from_integer(BigInt::from(rng.random_range(-5..=5)))).collect()], n)
}

fn criterion_6() -> Outcome {
    let mut rng = corpus::rng(DEFAULT_SEED + 6);
    let mut bad_modules = 0;
    for _ in 0..20 {
        let nmax = rng.random_range(1..=3);
        let m: CubicalModule = random_module(&mut rng, nmax, 6);
        let squared = (2..=m.nmax).all(|n| full_differential(&m, n - 1).mul(&full_differential(&m, n)).is_zero());
        let equal = compare_n_c(&m).map(|r| r.equal).unwrap_or(false);
        if !(squared && equal && m.check_identities().is_ok()) {
            bad_modules += 1;
        }
    }
    let cyl = polynomial_cylinder(4, 3);
    let mut bad_vectors = 0;
    for _ in 0..100 {
        let n = rng.random_range(0..=3usize);
        let x = random_vector(&mut rng, cyl.cylinder.dims[n]);
        let mut lhs = full_differential(&cyl.base, n + 1).mul(&cyl.s[n]).mul(&x).scale(&Rat::from_integer((-1).into()));
        if n > 0 {
            lhs = lhs.add(&cyl.s[n - 1].mul(&full_differential(&cyl.cylinder, n)).mul(&x));
        }
        let sign = Rat::from_integer(if n % 2 == 0 { 1.into() } else { (-1).into() });
        let rhs = cyl.i1[n].sub(&cyl.i0[n]).mul(&x).scale(&sign);
        if lhs != rhs {
            bad_vectors += 1;
        }
    }
    let unit_ok = unit_complex(3, 3, 2, 2).map(|(_, r)| r.contraction_ok && r.homology[1] == 0 && r.homology[2] == 0).unwrap_or(false);
    outcome(
        bad_modules == 0 && bad_vectors == 0 && unit_ok,
        format!("20 modules: {bad_modules} bad; 100 cylinder vectors: {bad_vectors} bad; unit complex H_1 = H_2 = 0: {unit_ok}"),
    )
}

/// Dimension of the degree-`≤ d` polynomials vanishing on every face, by evaluation on
/// the integer grid `{0..d}` of each face.
fn brute_intersection_dim(sigmas: &[FaceMap], n: usize, d: u32) -> usize {
    let slice = Slice::new(n, d);
    let side = d as i64 + 1;
    let mut rows = Vec::new();
    for s in sigmas {
        for k in 0..side.pow(n as u32) {
            let pt: Vec<i64> = (0..n).map(|i| (k / side.pow(i as u32)) % side).collect();
            if s.vals.iter().any(|(i, v)| pt[i - 1] != *v as i64) {
                continue;
            }
            rows.push(slice.monos.iter().map(|m| Rat::from_integer(m.iter().zip(&pt).map(|(e, x)| BigInt::from(*x).pow(*e)).product())).collect());
        }
    }
    if rows.is_empty() {
        return slice.dim();
    }
    slice.dim() - Mat::from_rows(rows, slice.dim()).rank()
}

fn criterion_7() -> Outcome {
    let mut instances = 0;
    let mut bad = Vec::new();
    for n in 1..=2usize {
        let faces = all_faces(n);
        for mask in 0u32..(1 << faces.len()) {
            let sig: Vec<FaceMap> = (0..faces.len()).filter(|i| mask & (1 << i) != 0).map(|i| faces[i].clone()).collect();
            instances += 1;
            if !all_passed(&exactness_check(&sig, n, 4)) {
                bad.push(format!("exactness n={n} mask={mask}"));
            }
            if intersect(&sig, n, 4).basis.cols() != brute_intersection_dim(&sig, n, 4) {
                bad.push(format!("intersect n={n} mask={mask}"));
            }
            for eta in &faces {
                if !modular_law_check(&sig, eta, n, 4) {
                    bad.push(format!("modular n={n} mask={mask} eta={eta}"));
                }
            }
        }
    }
    let mut rng = corpus::rng(DEFAULT_SEED + 7);
    let faces = all_faces(3);
    for t in 0..20 {
        let mut sig: Vec<FaceMap> = (0..3).map(|_| faces[rng.random_range(0..faces.len())].clone()).collect();
        sig.sort();
        sig.dedup();
        let eta = faces[rng.random_range(0..faces.len())].clone();
        instances += 1;
        if !all_passed(&exactness_check(&sig, 3, 3)) || !modular_law_check(&sig, &eta, 3, 3) {
            bad.push(format!("n=3 trial {t}"));
        }
        if intersect(&sig, 3, 3).basis.cols() != brute_intersection_dim(&sig, 3, 3) {
            bad.push(format!("intersect n=3 trial {t}"));
        }
    }
    outcome(bad.is_empty(), format!("{instances} instances, failures: {:?}", bad.iter().take(3).collect::<Vec<_>>()))
}

fn criterion_8() -> Outcome {
    let mut rng = corpus::rng(DEFAULT_SEED + 8);
    let mut bad_jobs = 0;
    let mut sigmas: BTreeSet<(usize, Vec<FaceMap>)> = BTreeSet::new();
    let mut max_h = 0;
    for _ in 0..20 {
        let (s, e) = random_tuple(&mut rng);
        let n = s[0].params().nvars() - 1;
        match approximate_tuple(&s, e, &Coincidences::Auto) {
            Ok(r) => {
                if !all_passed(&r.checks) {
                    bad_jobs += 1;
                }
                max_h = max_h.max(r.h);
                for c in r.constraints.into_iter().filter(|c| !c.is_empty()) {
                    let mut c = c;
                    c.sort();
                    sigmas.insert((n, c));
                }
            }
            Err(_) => bad_jobs += 1,
        }
    }
    let mut bad_lifts = Vec::new();
    for (n, sig) in &sigmas {
        let sp = tower_space(*n);
        let (_, loss) = nonarch::face_lifting::lift_constant(sig, *n, sp.deg_cap() as u32, 2);
        let (worst, exact) = lift_trials(&mut rng, &sp, sig, 100);
        if !exact || worst > loss {
            bad_lifts.push(format!("n={n} |Σ|={} worst loss {worst} > {loss}", sig.len()));
        }
    }
    outcome(
        bad_jobs == 0 && bad_lifts.is_empty(),
        format!("20 jobs ({bad_jobs} bad, max h {max_h}); {} face sets x 100 lifts, bad: {bad_lifts:?}", sigmas.len()),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = corpus::rng(DEFAULT_SEED + 9);
    let mut bad = 0;
    for _ in 0..10 {
        let sys = random_system(&mut rng, 8);
        let fs: Vec<_> = (0..=2).map(|h| tower_system(&sys, h).and_then(|t| solve_at_point(&t, 8))).collect();
        let ok = match (&fs[0], &fs[1], &fs[2]) {
            (Ok(a), Ok(b), Ok(c)) => pullback_check(a, b) && pullback_check(b, c),
            _ => false,
        };
        if !ok {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("10 systems, h = 0 -> 1 -> 2 through degree 8, {bad} failures"))
}

fn scratch(name: &str, v: &Value) -> String {
    let dir = std::env::temp_dir().join(format!("nonarch-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn cli_bytes(args: &[&str]) -> Option<String> {
    let mut full = vec!["nonarch"];
    full.extend_from_slice(args);
    execute(&<Cli as clap::Parser>::try_parse_from(full).ok()?).report
}

/// `to_json ∘ from_json ∘ to_json = to_json`, compared as strings.
fn stable<T>(v: Value, parse: impl Fn(&Value) -> Option<T>, emit: impl Fn(&T) -> Value) -> bool {
    let text = serde_json::to_string(&v).unwrap();
    let reparsed: Value = serde_json::from_str(&text).unwrap();
    match parse(&reparsed) {
        Some(x) => serde_json::to_string(&emit(&x)).unwrap() == text,
        None => false,
    }
}

fn criterion_10() -> Outcome {
    let mut rng = corpus::rng(DEFAULT_SEED + 10);
    let sys = random_system(&mut rng, 6);
    let sys_path = scratch("system.json", &sys.to_json());
    let sigma_path = scratch("sigma.json", &json!({"n": 2, "maps": [{"T": [1], "vals": [0]}, {"T": [1, 2], "vals": [1, 1]}]}));
    let (tuple, e) = random_tuple(&mut rng);
    let job_path = scratch(
        "tuple.json",
        &json!({"elements": tuple.iter().map(TateSeries::to_json).collect::<Vec<_>>(), "epsilon": nonarch::valued_field::fmt_q(e), "coincidences": "auto"}),
    );
    let jobs: Vec<Vec<&str>> = vec![
        vec!["solve-implicit", "--deg-cap", "8"],
        vec!["certify", "--in", &sys_path, "--deg-cap", "6"],
        vec!["pullback-check", "--in", &sys_path, "--deg-cap", "6"],
        vec!["b1perf-verify", "--p", "3", "--h", "1", "--prec", "12"],
        vec!["cubical-homology", "--example", "random", "--seed", "11"],
        vec!["cylinder-check", "--nmax", "3"],
        vec!["face-intersect", "--in", &sigma_path],
        vec!["exactness-check", "--in", &sigma_path],
        vec!["approximate-tuple", "--in", &job_path],
    ];
    let mut nondeterministic = Vec::new();
    for j in &jobs {
        let (a, b) = (cli_bytes(j), cli_bytes(j));
        if a.is_none() || a != b {
            nondeterministic.push(j[0]);
        }
    }
    let mut round_trip_fail = 0;
    for i in 0..200 {
        let ok = match i % 7 {
            0 => {
                let k = FieldParams::char0([2, 3, 5][i % 3], (i % 3) as u32, 10).unwrap();
                let x = &FieldElement::from_int(k, rng.random_range(-50..50)) * &FieldElement::pi_pow(k, Q::new(rng.random_range(-3..9), (k.p() as i64).pow(k.level()))).unwrap();
                stable(serde_json::to_value(&x).unwrap(), |v| serde_json::from_value::<FieldElement>(v.clone()).ok().filter(|y| *y == x), |y| serde_json::to_value(y).unwrap())
            }
            1 => {
                let sp = tower_space(rng.random_range(1..=3));
                let x = random_series(&mut rng, &sp, 4, 3, -2, 6);
                stable(x.to_json(), |v| TateSeries::from_json(v).ok().filter(|y| *y == x), TateSeries::to_json)
            }
            2 => {
                let x = random_system(&mut rng, 4);
                stable(x.to_json(), |v| PolySystem::from_json(v).ok().filter(|y| *y == x), PolySystem::to_json)
            }
            3 => {
                let k = FieldParams::char0(2, 3, 8).unwrap();
                let a = flat_unit(&mut rng, k);
                let x = from_flat(&a, k, max_depth(&a, k)).unwrap();
                stable(x.to_json(), |v| TiltElement::from_json(v).ok().filter(|y| *y == x), TiltElement::to_json)
            }
            4 => {
                let nmax = rng.random_range(1..=3);
                let x = random_module(&mut rng, nmax, 6);
                stable(x.to_json(), |v| CubicalModule::from_json(v).ok().filter(|y| *y == x), CubicalModule::to_json)
            }
            5 => {
                let faces = all_faces(3);
                let x = faces[rng.random_range(0..faces.len())].clone();
                stable(x.to_json(), |v| FaceMap::from_json(v, 3).ok().filter(|y| *y == x), FaceMap::to_json)
            }
            _ => {
                let faces = all_faces(2);
                let maps: Vec<Value> = (0..rng.random_range(0..4)).map(|_| faces[rng.random_range(0..faces.len())].to_json()).collect();
                stable(
                    json!({"maps": maps, "n": 2}),
                    |v| parse_constraints(v).ok(),
                    |(n, m)| json!({"maps": m.iter().map(FaceMap::to_json).collect::<Vec<_>>(), "n": n}),
                )
            }
        };
        if !ok {
            round_trip_fail += 1;
        }
    }
    outcome(
        nondeterministic.is_empty() && round_trip_fail == 0,
        format!("{} jobs run twice, differing: {nondeterministic:?}; 200 round trips, {round_trip_fail} failures", jobs.len()),
    )
}

fn main() -> ExitCode {
    let systems = solver_corpus();
    let criteria: Vec<(usize, &str, u64, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "implicit-solver residual", 30, Box::new(|| criterion_1(&systems))),
        (2, "coefficient bound", 30, Box::new(|| criterion_2(&systems))),
        (3, "catalan oracle", 1, Box::new(criterion_3)),
        (4, "b1perf", 10, Box::new(criterion_4)),
        (5, "tilting", 10, Box::new(criterion_5)),
        (6, "cubical suite", 30, Box::new(criterion_6)),
        (7, "face-ideal suite", 60, Box::new(criterion_7)),
        (8, "constrained approximation", 30, Box::new(criterion_8)),
        (9, "pullback functional equation", 10, Box::new(criterion_9)),
        (10, "determinism and round-trip", 60, Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in &criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let passed = o.passed && elapsed <= Duration::from_secs(*limit);
        println!(
            "[{}] {id:>2} {name}: {} ({:.2}s, limit {limit}s)",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        if !passed {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria pass", criteria.len(), criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
