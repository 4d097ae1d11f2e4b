//! Acceptance suite. Each test prints one `ACCEPTANCE <k> PASS|FAIL` line
//! (written past the harness capture) and fails when its criterion fails.
//! Tests hold a shared lock so wall-clock budgets are measured one at a time.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use gevfit::dqm::COORDINATE_DIRECTIONS;
use gevfit::gev::{self, standardize};
use gevfit::mle::{fit, FitOptions, ParamBox};
use gevfit::sim::SizeSummary;
use gevfit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn verdict(k: u32, title: &str, pass: bool, detail: &str, started: Instant, budget_s: u64) {
    let elapsed = started.elapsed();
    let in_time = elapsed <= Duration::from_secs(budget_s);
    let ok = pass && in_time;
    let line = format!(
        "ACCEPTANCE {k} {} {title}: {detail} [{:.1} s of {budget_s} s{}]\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{}", line.trim_end());
}

fn random_theta(rng: &mut ChaCha20Rng) -> Theta {
    Theta::new(rng.random_range(-0.45..3.0), rng.random_range(-5.0..5.0), rng.random_range(0.1..10.0)).unwrap()
}

/// Five-point central difference of the log-density along coordinate `k`.
fn fd_score(t: &Theta, x: f64, k: usize, h: f64) -> f64 {
    let base = t.to_array();
    let ld = |d: f64| {
        let mut a = base;
        a[k] += d;
        log_density(&Theta::from_array(a).unwrap(), x)
    };
    (8.0 * (ld(h) - ld(-h)) - (ld(2.0 * h) - ld(-2.0 * h))) / (12.0 * h)
}

#[test]
fn c1_score_against_finite_differences() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut points, mut worst, mut bad) = (0, 0.0f64, 0);
    while points < 1000 {
        let t = random_theta(&mut rng);
        let x = quantile(&t, rng.random_range(1e-9..1.0 - 1e-9)).unwrap();
        let opgz = standardize(&t, x).one_plus_gamma_z;
        if !(opgz > 0.01) {
            continue;
        }
        points += 1;
        let s = score(&t, x).unwrap().to_array();
        let scale = [1.0, t.sigma(), t.sigma()];
        let fd: Vec<f64> = (0..3).map(|k| fd_score(&t, x, k, 1e-3 * opgz.min(1.0) * scale[k])).collect();
        let norm = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = (0..3).fold(0.0f64, |m, k| m.max((fd[k] - s[k]).abs()));
        let rel = diff / norm;
        worst = worst.max(rel);
        if !(rel < 1e-6) {
            bad += 1;
        }
    }
    let detail = format!("{points} points, max relative error {worst:.2e} (limit 1e-6), {bad} above limit");
    verdict(1, "score vs finite differences", bad == 0, &detail, start, 5);
}

#[test]
fn c2_score_bound_envelopes() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut checked = std::collections::BTreeMap::<String, (usize, usize)>::new();
    let mut points = 0;
    while points < 10_000 {
        let t = random_theta(&mut rng);
        // half uniform, half pushed into either tail
        let p = match rng.random_range(0..3) {
            0 => rng.random_range(0.0..1.0),
            1 => 10f64.powf(rng.random_range(-12.0..-0.3)),
            _ => 1.0 - 10f64.powf(rng.random_range(-12.0..-0.3)),
        };
        let Ok(x) = quantile(&t, p) else { continue };
        let z = standardize(&t, x);
        if !z.in_support() {
            continue;
        }
        points += 1;
        for e in bound_envelopes(&t, x).unwrap() {
            let c = checked.entry(format!("{:?}", e.lemma_id)).or_default();
            c.0 += 1;
            c.1 += usize::from(!e.holds(1e-12));
        }
        let lower = dlogu(t.gamma(), z.z).unwrap();
        let c = checked.entry("DlogUNonNegative".into()).or_default();
        c.0 += 1;
        c.1 += usize::from(lower < -1e-12);
    }
    let violations: usize = checked.values().map(|c| c.1).sum();
    let per: Vec<String> = checked.iter().map(|(k, (n, v))| format!("{k} {v}/{n}")).collect();
    let detail = format!("{points} points, {violations} violations beyond 1e-12 ({})", per.join(", "));
    verdict(2, "score bound envelopes", violations == 0, &detail, start, 10);
}

#[test]
fn c3_dqm_dichotomy() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [-0.45, -0.4, -0.35, 0.0, 0.5, 1.0] {
        let r = dqm_certify(&Theta::standard(g).unwrap(), &COORDINATE_DIRECTIONS, (4, 14)).unwrap();
        let slopes: Vec<f64> = r.directions.iter().map(|d| d.slope.unwrap_or(f64::NAN)).collect();
        let ok = slopes.iter().all(|&s| s > 2.05);
        pass &= ok;
        parts.push(format!("g={g}: {:.3}/{:.3}/{:.3}{}", slopes[0], slopes[1], slopes[2], if ok { "" } else { " (<= 2.05)" }));
    }
    for g in [-0.5, -0.6, -0.8] {
        let r = dqm_certify(&Theta::standard(g).unwrap(), &[[0.0, 1.0, 0.0]], (4, 14)).unwrap();
        let s = r.directions[0].slope.unwrap_or(f64::NAN);
        let ok = s <= 2.0;
        pass &= ok;
        parts.push(format!("g={g} mu: {s:.3}{}", if ok { "" } else { " (> 2.0)" }));
    }
    let sigma = 1.0;
    let t = 2f64.powi(-14);
    let lim = endpoint_shift_mass(&Theta::new(-0.5, 0.0, sigma).unwrap(), t).unwrap() / (t * t);
    let target = 1.0 / (4.0 * sigma * sigma);
    let ok = ((lim - target) / target).abs() < 0.01;
    pass &= ok;
    parts.push(format!("t^-2 shift mass at t=2^-14: {lim:.6} vs {target}"));
    verdict(3, "DQM dichotomy", pass, &parts.join("; "), start, 120);
}

#[test]
fn c4_support_mass_is_small_o_of_eps_squared() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [-0.45, -0.25, 0.0, 0.5, 2.0] {
        let t0 = Theta::standard(g).unwrap();
        let ratio = |k: i32| {
            let e = 2f64.powi(-k);
            mass_outside(&t0, e).unwrap() / (e * e)
        };
        let r: Vec<f64> = (3..=12).map(ratio).collect();
        let rises = r.windows(2).filter(|w| w[1] > w[0]).count();
        let shrink = r[r.len() - 1] / r[0];
        let ok = shrink < 1e-3 && rises == 0;
        pass &= ok;
        parts.push(format!(
            "g={g}: final/initial {shrink:.3e}{}{}",
            if shrink < 1e-3 { "" } else { " (>= 1e-3)" },
            if rises == 0 { String::new() } else { format!(", rises at {rises} of 9 steps") }
        ));
    }
    verdict(4, "support mass o(eps^2)", pass, &parts.join("; "), start, 10);
}

#[test]
fn c5_fisher_quadrature_against_monte_carlo() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [-0.4, 0.0, 0.5, 2.0] {
        let t = Theta::standard(g).unwrap();
        let q = fisher_information(&t).unwrap();
        let mc = fisher_information_mc(&t, 1_000_000, 1).unwrap();
        let dev = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).fold(0.0f64, |m, (i, j)| {
            m.max((q.entries[i][j] - mc.entries[i][j]).abs())
        });
        let chol = q.is_positive_definite() && mc.is_positive_definite();
        let ok = dev < 0.02 && chol;
        pass &= ok;
        parts.push(format!("g={g}: max |quad - mc| {dev:.4}{}", if chol { "" } else { ", Cholesky failed" }));
        if g == 0.0 {
            let (a, b) = (q.entries[1][1], mc.entries[1][1]);
            let ok = (a - 1.0).abs() <= 0.005 && (b - 1.0).abs() <= 0.005;
            pass &= ok;
            parts.push(format!("Gumbel (mu,mu) quad {a:.6}, mc {b:.6}"));
        }
    }
    verdict(5, "Fisher quadrature vs Monte Carlo", pass, &parts.join("; "), start, 60);
}

fn load_config(name: &str) -> SimConfig {
    serde_json::from_str(&fs::read_to_string(repo("configs").join(name)).unwrap()).unwrap()
}

#[test]
fn c6_asymptotic_normality() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["normality_weibull.json", "normality_gumbel.json", "normality_frechet.json"] {
        let cfg = load_config(name);
        let r = run_simulation(&cfg).unwrap();
        let s: &SizeSummary = &r.sizes[0];
        let frob_ok = s.relative_frobenius_distance < 0.15;
        let cov_ok = s.coverage.iter().all(|c| (0.925..=0.97).contains(c));
        let skew: Vec<f64> = s.normality.as_ref().map_or(vec![f64::NAN; 3], |n| n.iter().map(|c| c.skewness).collect());
        let skew_ok = skew.iter().all(|k| k.abs() < 0.2);
        let ok = r.valid && frob_ok && cov_ok && skew_ok;
        pass &= ok;
        parts.push(format!(
            "g={}: rel Frobenius {:.4}, coverage {:.3}/{:.3}/{:.3}, skewness {:.3}/{:.3}/{:.3}, used {}/{}",
            cfg.theta0.gamma(),
            s.relative_frobenius_distance,
            s.coverage[0],
            s.coverage[1],
            s.coverage[2],
            skew[0],
            skew[1],
            skew[2],
            s.used,
            s.replicates
        ));
    }
    verdict(6, "asymptotic normality", pass, &parts.join("; "), start, 15 * 60);
}

#[test]
fn c7_rate_and_linearization() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = load_config("rate.json");
    let r = run_simulation(&cfg).unwrap();
    let med: Vec<f64> = r.sizes.iter().map(|s| s.median_scaled_error).collect();
    let (lo, hi) = med.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    let spread = (hi - lo) / lo;
    let res: Vec<f64> = r.sizes.iter().map(|s| s.median_residual).collect();
    let shrink = res[res.len() - 1] / res[0];
    let pass = r.valid && spread < 0.25 && shrink < 0.5;
    let detail = format!(
        "median sqrt(n)|err| {:.4}/{:.4}/{:.4} (spread {:.1}%), median residual {:.4} -> {:.4} (ratio {:.3})",
        med[0],
        med[1],
        med[2],
        100.0 * spread,
        res[0],
        res[res.len() - 1],
        shrink
    );
    verdict(7, "rate and linearization", pass, &detail, start, 20 * 60);
}

/// 51^3 grid over the box followed by a shrinking coordinate pattern search.
fn grid_oracle(xs: &[f64], bx: &ParamBox) -> [f64; 3] {
    const K: usize = 51;
    let r = [bx.gamma, bx.mu, bx.sigma];
    let ll = |t: [f64; 3]| -> f64 {
        if (0..3).any(|j| t[j] < r[j][0] || t[j] > r[j][1]) {
            return f64::NEG_INFINITY;
        }
        let th = Theta::from_array(t).unwrap();
        xs.iter().map(|&x| log_density(&th, x)).sum()
    };
    let at = |j: usize, i: usize| r[j][0] + (r[j][1] - r[j][0]) * i as f64 / (K - 1) as f64;
    let mut best = ([0.0; 3], f64::NEG_INFINITY);
    for i in 0..K {
        for j in 0..K {
            for l in 0..K {
                let t = [at(0, i), at(1, j), at(2, l)];
                let v = ll(t);
                if v > best.1 {
                    best = (t, v);
                }
            }
        }
    }
    let mut step = [0, 1, 2].map(|j| (r[j][1] - r[j][0]) / (K - 1) as f64);
    while step.iter().any(|&s| s > 1e-10) {
        let mut moved = false;
        for j in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut t = best.0;
                t[j] += dir * step[j];
                let v = ll(t);
                if v > best.1 {
                    best = (t, v);
                    moved = true;
                }
            }
        }
        if !moved {
            step = step.map(|s| 0.5 * s);
        }
    }
    best.0
}

#[test]
fn c8_fitter_against_grid_oracle() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let t0 = Theta::new(0.2, 0.0, 1.0).unwrap();
    let bx = ParamBox::new([-0.45, 1.05], [-1.5, 1.5], [0.4, 2.4]).unwrap();
    let res = [bx.gamma, bx.mu, bx.sigma].map(|r| (r[1] - r[0]) / 50.0);
    let mut worst = [0.0f64; 3];
    let mut misses = 0;
    for i in 0..20 {
        let s = gev::sample_stream(&t0, 50, 8, i).unwrap();
        let f = fit(&s, &bx, &FitOptions::default()).unwrap().theta_hat.to_array();
        let o = grid_oracle(s.values(), &bx);
        let mut hit = true;
        for j in 0..3 {
            let d = (f[j] - o[j]).abs() / res[j];
            worst[j] = worst[j].max(d);
            hit &= d <= 2.0;
        }
        misses += usize::from(!hit);
    }
    let detail = format!(
        "20 samples of 50, {misses} outside 2x grid resolution; worst |fit - oracle| / resolution {:.3}/{:.3}/{:.3}",
        worst[0], worst[1], worst[2]
    );
    verdict(8, "fitter vs grid oracle", misses == 0, &detail, start, 120);
}

fn simulate(config: &Path, out: &Path, threads: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_gevfit"))
        .args(["simulate", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
        .env("GEVFIT_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "simulate exited with {status}");
}

#[test]
fn c9_simulation_output_is_reproducible() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::TempDir::new().unwrap();
    let config = repo("configs/smoke.json");
    let runs = [("1", "a"), ("1", "b"), ("8", "c")];
    for (threads, sub) in runs {
        simulate(&config, &dir.path().join(sub), threads);
    }
    let mut same = true;
    let mut parts = Vec::new();
    for f in ["report.json", "replicates.csv"] {
        let bytes: Vec<Vec<u8>> = runs.iter().map(|(_, s)| fs::read(dir.path().join(s).join(f)).unwrap()).collect();
        let eq = bytes.windows(2).all(|w| w[0] == w[1]);
        same &= eq;
        parts.push(format!("{f} {} bytes {}", bytes[0].len(), if eq { "identical" } else { "differ" }));
    }
    let detail = format!("two runs at 1 thread and one at 8: {}", parts.join(", "));
    verdict(9, "simulation reproducibility", same, &detail, start, 600);
}
