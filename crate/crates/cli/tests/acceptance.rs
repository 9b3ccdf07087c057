//! Benchmark acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any failed. Set `TTQST_ACCEPTANCE` to a
//! comma-separated list of criterion numbers to run a subset.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use rand::Rng;
use ttqst_cli::commands::{cmd_sweep, reconstruct_once, refine_once, StateMeta, Target, TargetInfo};
use ttqst_cli::{RunConfig, RunRecord, TargetSpec};
use ttqst_core::cross::{cur_approximate, maxvol, maxvol_cross, ttcross_dmrg, CrossConfig, FnOracle};
use ttqst_core::measure::{required_copies_for, NoiseModel};
use ttqst_core::metrics::{fidelity_with, FidelityConvention};
use ttqst_core::refine::{gradient_l, TrainConfig};
use ttqst_core::rng::seeded;
use ttqst_core::states::{random_lptn_pauli, thermal_ising, LptnSpec, ThermalSpec};
use ttqst_core::RealTT;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Results shared between criteria so the expensive runs happen once.
#[derive(Default)]
struct Shared {
    thermal_exact: Vec<RunRecord>,
    lptn_exact: BTreeMap<usize, RunRecord>,
    lptn_states: BTreeMap<usize, RealTT>,
}

fn exact_config(max_rank: usize) -> RunConfig {
    RunConfig {
        cross: CrossConfig { max_rank, ..CrossConfig::default() },
        noise: NoiseModel::exact(),
        fidelity_max_n: 0,
        ..RunConfig::default()
    }
}

fn target_of(spec: &TargetSpec, tt: RealTT, tt_tol: f64) -> Target {
    let meta = StateMeta::describe(spec, &tt, tt_tol);
    Target::new(tt, TargetInfo::from(&meta))
}

fn lptn_state(shared: &mut Shared, n: usize) -> RealTT {
    shared.lptn_states.entry(n).or_insert_with(|| random_lptn_pauli(&LptnSpec::new(n, 4, n as u64)).unwrap()).clone()
}

fn budget(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs_f64() <= limit_s as f64, format!("{:.1} s (budget {limit_s} s)", elapsed.as_secs_f64()))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

/// Least-squares line `y = a + b x`; returns `(b, R^2)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

fn criterion1(shared: &mut Shared) -> Verdict {
    let start = Instant::now();
    let cfg = exact_config(10);
    let mut ds = Vec::new();
    for n in 4..=10 {
        let spec = TargetSpec::Thermal(ThermalSpec::new(n, 2.0));
        let tt = thermal_ising(&ThermalSpec::new(n, 2.0), 1e-12).unwrap();
        let mut target = target_of(&spec, tt, 1e-12);
        let r = reconstruct_once(&mut target, &cfg, 0, spec.stem()).unwrap().record;
        ds.push(r.d.unwrap());
        shared.thermal_exact.push(r);
    }
    let (in_time, t) = budget(start.elapsed(), 120);
    let max = ds.iter().cloned().fold(0.0, f64::max);
    verdict(
        max < 1e-6 && in_time,
        format!("noiseless thermal T=2, N=4..10, rank 10: max D {max:.2e} < 1e-6 [D: {}]; {t}", fmt_list(&ds)),
    )
}

fn criterion2(shared: &mut Shared) -> Verdict {
    let start = Instant::now();
    let cfg = exact_config(10);
    let mut ds = Vec::new();
    let mut unconverged = Vec::new();
    for n in 4..=12 {
        let tt = lptn_state(shared, n);
        let spec = TargetSpec::Lptn(LptnSpec::new(n, 4, n as u64));
        let mut target = target_of(&spec, tt, 0.0);
        let r = reconstruct_once(&mut target, &cfg, 0, spec.stem()).unwrap().record;
        if !r.converged() {
            unconverged.push(n);
        }
        ds.push(r.d.unwrap());
        shared.lptn_exact.insert(n, r);
    }
    let ns: Vec<f64> = (4..=12).map(|n| n as f64).collect();
    let logs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let (slope, _) = linear_fit(&ns, &logs);
    let max = ds.iter().cloned().fold(0.0, f64::max);
    let (in_time, t) = budget(start.elapsed(), 300);
    verdict(
        max < 1e-2 && slope <= 0.35 && in_time,
        format!(
            "noiseless LPTN chi=16, N=4..12, rank 10: max D {max:.2e} < 1e-2, slope of ln D vs N {slope:.3} <= 0.35 \
             [D: {}; hit max_sweeps at N={unconverged:?}]; {t}",
            fmt_list(&ds)
        ),
    )
}

fn criterion3(shared: &mut Shared) -> Verdict {
    let runs: Vec<&RunRecord> = shared.thermal_exact.iter().chain(shared.lptn_exact.values()).collect();
    if runs.is_empty() {
        return verdict(false, "needs criteria 1 and 2".into());
    }
    let ok = runs.iter().filter(|r| r.ds.unwrap() <= r.d.unwrap()).count();
    let frac = ok as f64 / runs.len() as f64;
    verdict(frac >= 0.9, format!("D_s <= D in {ok}/{} runs of criteria 1-2 ({:.0}% >= 90%)", runs.len(), 100.0 * frac))
}

fn criterion4(_: &mut Shared) -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        target: TargetSpec::Lptn(LptnSpec::new(4, 2, 1)),
        n_min: 4,
        n_max: 12,
        ..exact_config(10)
    };
    let summary = cmd_sweep(&cfg, dir.path()).unwrap();
    let rows = RunRecord::read_csv(&summary.csv).unwrap();
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let nb: Vec<f64> = rows.iter().map(|r| r.n_b as f64).collect();
    let (slope, r2) = linear_fit(&ns, &nb);
    let below = rows.iter().filter(|r| r.n >= 9).all(|r| (r.n_b as f64) < 3f64.powi(r.n as i32));
    let (in_time, t) = budget(start.elapsed(), 300);
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{}", r.n, r.n_b)).collect();
    verdict(
        rows.len() == 9 && r2 >= 0.95 && slope > 0.0 && below && in_time,
        format!(
            "N_b vs N, exact LPTN chi=4, rank 10: slope {slope:.1}, R^2 {r2:.4} >= 0.95, N_b < 3^N for N >= 9: {below} \
             [N:N_b {}]; {t}",
            table.join(" ")
        ),
    )
}

fn criterion5(shared: &mut Shared) -> Verdict {
    let start = Instant::now();
    let reps = 80;
    let noisy = RunConfig {
        noise: NoiseModel::gaussian(0.01, 0),
        repetitions: reps,
        ..exact_config(6)
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for family in ["lptn", "thermal"] {
        let mut means = Vec::new();
        let mut refs = Vec::new();
        for n in 4..=12 {
            let (spec, tt, tol) = if family == "lptn" {
                (TargetSpec::Lptn(LptnSpec::new(n, 4, n as u64)), lptn_state(shared, n), 0.0)
            } else {
                let s = ThermalSpec::new(n, 0.2);
                (TargetSpec::Thermal(s.clone()), thermal_ising(&s, 1e-10).unwrap(), 1e-10)
            };
            let mut target = target_of(&spec, tt, tol);
            let noiseless = match (family, shared.lptn_exact.get(&n)) {
                ("lptn", Some(r)) => r.d.unwrap(),
                _ => reconstruct_once(&mut target, &exact_config(6), 0, spec.stem()).unwrap().record.d.unwrap(),
            };
            let ds: Vec<f64> = (0..reps)
                .map(|rep| reconstruct_once(&mut target, &noisy, rep, spec.stem()).unwrap().record.d.unwrap())
                .collect();
            let mean = ds.iter().sum::<f64>() / reps as f64;
            pass &= mean.is_finite() && mean > noiseless;
            if n == 12 {
                pass &= mean < 1.0;
            }
            means.push(mean);
            refs.push(noiseless);
        }
        lines.push(format!("{family} mean D [{}] vs noiseless [{}]", fmt_list(&means), fmt_list(&refs)));
    }
    let (in_time, t) = budget(start.elapsed(), 1800);
    verdict(
        pass && in_time,
        format!(
            "gaussian eps=0.01, rank 6, {reps} reps, N=4..12: mean D finite, above noiseless, < 1 at N=12; {}; {t}",
            lines.join("; ")
        ),
    )
}

fn criterion6(_: &mut Shared) -> Verdict {
    let start = Instant::now();
    let seeds = 0..4u64;
    let mut lptn_factors = Vec::new();
    let mut thermal_f = Vec::new();
    let mut negative_initial = 0;
    let mut notes = Vec::new();
    for (family, kind) in [("lptn", 0), ("thermal", 1)] {
        for seed in seeds.clone() {
            let (spec, tt, tol) = if kind == 0 {
                let s = LptnSpec::new(8, 4, seed);
                (TargetSpec::Lptn(s.clone()), random_lptn_pauli(&s).unwrap(), 0.0)
            } else {
                let s = ThermalSpec::new(8, 1.0);
                (TargetSpec::Thermal(s.clone()), thermal_ising(&s, 1e-12).unwrap(), 1e-12)
            };
            let cfg = RunConfig {
                noise: NoiseModel::shots(1_000_000, 0),
                seed,
                train: TrainConfig { learning_rate: 1e-4, batch_size: 256, epochs: 500, patience: 10, seed, ..TrainConfig::default() },
                ..exact_config(10)
            };
            let mut target = target_of(&spec, tt, tol);
            let rec = reconstruct_once(&mut target, &cfg, 0, format!("{family}-{seed}")).unwrap();
            let refined = refine_once(&mut target, &rec.outcome.tt, &rec.oracle, &cfg, format!("{family}-{seed}")).unwrap();
            let r = &refined.record;
            let f = |tt: &RealTT, c| fidelity_with(&target.tt.to_dense_operator().unwrap(), &tt.to_dense_operator().unwrap(), c).unwrap();
            let f0 = f(&rec.outcome.tt, FidelityConvention::PrincipalReal);
            let f1 = f(&refined.outcome.tt, FidelityConvention::PrincipalReal);
            let s0 = f(&rec.outcome.tt, FidelityConvention::SignedSqrt);
            let s1 = f(&refined.outcome.tt, FidelityConvention::SignedSqrt);
            notes.push(format!(
                "{family} seed {seed}: N_b {} settings {} D {:.2e}->{:.2e} (x{:.1}) 1-F {:.1e}->{:.1e} (signed-sqrt {:.1e}->{:.1e})",
                r.n_b,
                r.settings,
                r.d_before,
                r.d_after,
                r.d_before / r.d_after,
                1.0 - f0,
                1.0 - f1,
                1.0 - s0,
                1.0 - s1
            ));
            if kind == 0 {
                lptn_factors.push(r.d_before / r.d_after);
            } else {
                thermal_f.push(f1);
                negative_initial += usize::from(1.0 - f0 < 0.0);
            }
        }
    }
    let (in_time, t) = budget(start.elapsed(), 1200);
    let min_factor = lptn_factors.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_f = thermal_f.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        min_factor >= 10.0 && min_f >= 0.99 && negative_initial >= 1 && in_time,
        format!(
            "refinement N=8, M=1e6, rank 10, lr 1e-4: LPTN min D drop x{min_factor:.1} >= 10, thermal T=1 min final F \
             {min_f:.4} >= 0.99, initial 1-F < 0 in {negative_initial}/{} seeds; {t}\n      {}",
            thermal_f.len(),
            notes.join("\n      ")
        ),
    )
}

fn det3(m: &Array2<f64>, r: &[usize]) -> f64 {
    let e = |i: usize, j: usize| m[[r[i], j]];
    e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
        + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
}

fn det_small(m: &Array2<f64>, r: &[usize]) -> f64 {
    match r.len() {
        1 => m[[r[0], 0]],
        2 => m[[r[0], 0]] * m[[r[1], 1]] - m[[r[0], 1]] * m[[r[1], 0]],
        3 => det3(m, r),
        _ => unreachable!(),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (k - 1..n).flat_map(|last| subsets(last, k - 1).into_iter().map(move |mut s| {
        s.push(last);
        s
    })).collect()
}

fn criterion7(_: &mut Shared) -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;

    // maxvol against every square subset.
    let tol = 1e-2;
    let (mut cases, mut misses, mut worst) = (0, 0, 1.0f64);
    for (rows, cols) in [(4, 2), (6, 2), (6, 3), (8, 2), (8, 3)] {
        for seed in 0..400 {
            let mut rng = seeded(seed);
            let m = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0));
            let res = maxvol(m.view(), tol).unwrap();
            let vol = det_small(&m, &res.rows).abs();
            let best = subsets(rows, cols).iter().map(|s| det_small(&m, s).abs()).fold(0.0, f64::max);
            cases += 1;
            misses += usize::from(vol * (1.0 + tol).powi(cols as i32) < best);
            worst = worst.max(best / vol);
        }
    }
    pass &= misses == 0;
    parts.push(format!("maxvol within (1+tol)^r of exhaustive in {}/{cases} (worst ratio {worst:.4})", cases - misses));

    // CUR on exactly rank-r matrices.
    let mut cur_err = 0.0f64;
    for (seed, (m, n, r)) in [(30, 20, 4), (25, 25, 7), (40, 12, 1), (16, 50, 10)].into_iter().enumerate() {
        let mut rng = seeded(100 + seed as u64);
        let u = Array2::from_shape_simple_fn((m, r), || rng.random_range(-1.0..1.0));
        let v = Array2::from_shape_simple_fn((r, n), || rng.random_range(-1.0..1.0));
        let a = u.dot(&v);
        let (rows, cols) = maxvol_cross(a.view(), r, tol, 10).unwrap();
        let cur = cur_approximate((m, n), |i, j| a[[i, j]], &rows, &cols, 1e-12).unwrap();
        let diff = &cur.reconstruct() - &a;
        cur_err = cur_err.max(diff.iter().map(|x| x * x).sum::<f64>().sqrt() / a.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    pass &= cur_err <= 1e-10;
    parts.push(format!("CUR max rel error {cur_err:.1e} <= 1e-10"));

    // TT-cross on tensors of known bond dimension.
    let mut cross_err = 0.0f64;
    for n in 3..=8 {
        for chi in [1, 2, 3, 4] {
            let tt = RealTT::random(&vec![4; n], chi, (n * 10 + chi) as u64).unwrap();
            let mut oracle = FnOracle::new(|idx: &[u8]| tt.element(idx));
            let cfg = CrossConfig { max_rank: chi + 2, local_tol: 1e-10, ..CrossConfig::default() };
            let out = ttcross_dmrg(&mut oracle, &tt.phys_dims(), &cfg).unwrap();
            // Direct difference; sqrt(D) bottoms out near 1e-8 from cancellation.
            let (a, b) = (tt.materialize().unwrap(), out.tt.materialize().unwrap());
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            cross_err = cross_err.max(diff / a.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    pass &= cross_err <= 1e-8;
    parts.push(format!("TT-cross exact recovery N<=8 max rel error {cross_err:.1e} <= 1e-8"));

    // Contractions against the materialized tensors.
    let mut contr_err = 0.0f64;
    for n in 2..=6 {
        let a = RealTT::random(&vec![4; n], 3, n as u64).unwrap();
        let b = RealTT::random(&vec![4; n], 2, 50 + n as u64).unwrap();
        let (da, db) = (a.materialize().unwrap(), b.materialize().unwrap());
        let dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
        let nrm: f64 = da.iter().map(|x| x * x).sum();
        contr_err = contr_err.max((a.trace_product(&b).unwrap() - dot).abs() / nrm.sqrt() / db.iter().map(|x| x * x).sum::<f64>().sqrt());
        contr_err = contr_err.max((a.norm_sq() - nrm).abs() / nrm);
        for flat in [0, 7, da.len() / 2, da.len() - 1] {
            let idx = ttqst_core::PauliString::from_flat_index(flat, n);
            contr_err = contr_err.max((a.element(idx.as_slice()).unwrap() - da[flat]).abs() / nrm.sqrt());
        }
    }
    pass &= contr_err <= 1e-10;
    parts.push(format!("TT contractions vs dense max rel error {contr_err:.1e} <= 1e-10"));

    // Analytic gradient of the loss against central differences.
    let mut grad_err = 0.0f64;
    for seed in 0..5u64 {
        let n = 4;
        let tt = RealTT::random(&vec![4; n], 3, 200 + seed).unwrap().scaled(0.1);
        let mut rng = seeded(300 + seed);
        let data: Vec<(Vec<u8>, f64)> =
            (0..30).map(|_| ((0..n).map(|_| rng.random_range(0..4u8)).collect(), rng.random_range(-1.0..1.0))).collect();
        let batch = || data.iter().map(|(i, v)| (i.as_slice(), *v));
        let g = gradient_l(&tt, batch()).unwrap();
        let h = 1e-6;
        for site in 0..n {
            for (pos, &analytic) in g.cores[site].indexed_iter() {
                let shifted = |delta: f64| {
                    let mut cores: Vec<Array3<f64>> = tt.cores().to_vec();
                    cores[site][pos] += delta;
                    gradient_l(&RealTT::new(cores).unwrap(), batch()).unwrap().loss
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let scale = analytic.abs().max(fd.abs()).max(1e-3);
                grad_err = grad_err.max((analytic - fd).abs() / scale);
            }
        }
    }
    pass &= grad_err <= 1e-5;
    parts.push(format!("gradient vs central differences max rel error {grad_err:.1e} <= 1e-5"));

    let (in_time, t) = budget(start.elapsed(), 120);
    verdict(pass && in_time, format!("oracle equivalence: {}; {t}", parts.join(", ")))
}

fn criterion8(_: &mut Shared) -> Verdict {
    let mut worst_herm = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut purity_ok = true;
    let mut count = 0;
    let mut states: Vec<(String, RealTT)> = Vec::new();
    for n in 2..=8 {
        for kappa in 1..=4 {
            for seed in 0..2 {
                states.push((format!("lptn n{n} k{kappa} s{seed}"), random_lptn_pauli(&LptnSpec::new(n, kappa, seed)).unwrap()));
            }
        }
        for t in [0.2, 1.0, 2.0, 100.0] {
            states.push((format!("thermal n{n} T{t}"), thermal_ising(&ThermalSpec::new(n, t), 1e-12).unwrap()));
        }
    }
    let mut bad = Vec::new();
    for (name, tt) in &states {
        let n = tt.len();
        let rho = tt.to_dense_operator().unwrap();
        let herm = rho.hermitian_residual();
        let tr = (rho.trace() - ttqst_core::c64::new(1.0, 0.0)).norm();
        let eig = rho.eigenvalues().unwrap()[0];
        let p = rho.purity();
        let p_ok = p >= 2f64.powi(-(n as i32)) * (1.0 - 1e-12) && p <= 1.0 + 1e-9;
        if herm > 1e-10 || tr > 1e-9 || eig < -1e-9 || !p_ok {
            bad.push(name.clone());
        }
        worst_herm = worst_herm.max(herm);
        worst_trace = worst_trace.max(tr);
        min_eig = min_eig.min(eig);
        purity_ok &= p_ok;
        count += 1;
    }
    let copies = [
        ((1, 1.0, 0.1), 200u64),
        ((4, 0.25, 0.01), 640_000),
        ((8, 1.0 / 16.0, 0.05), 1_638_400),
    ];
    let copies_ok = copies.iter().all(|&((n, p, e), want)| required_copies_for(n, p, e).unwrap() == want);
    verdict(
        bad.is_empty() && copies_ok,
        format!(
            "physicality of {count} generated states N<=8: max Hermitian residual {worst_herm:.1e} <= 1e-10, max |Tr-1| \
             {worst_trace:.1e} <= 1e-9, min eigenvalue {min_eig:.1e} >= -1e-9, purity in [2^-N, 1+1e-9]: {purity_ok}; \
             copy counts 200, 640000, 1638400 match: {copies_ok}{}",
            if bad.is_empty() { String::new() } else { format!("; failing: {bad:?}") }
        ),
    )
}

fn main() {
    // Quiet numerical warnings unless asked for.
    let _ = env_logger_init();
    let only: Option<Vec<usize>> =
        std::env::var("TTQST_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, fn(&mut Shared) -> Verdict); 8] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
        (8, criterion8),
    ];
    let mut shared = Shared::default();
    let mut failed = Vec::new();
    println!("acceptance criteria");
    for (id, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id) && !(id == 3 && (o.contains(&1) || o.contains(&2)))) {
            continue;
        }
        let v = panic::catch_unwind(AssertUnwindSafe(|| f(&mut shared)))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {}", panic_message(&e))));
        println!("criterion {id}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn env_logger_init() -> Result<(), log::SetLoggerError> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).try_init()
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}
