//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured figures (run with `--nocapture` to see them).
//!
//! Criteria:
//!   C1  kernel identities (gradient, divergence, magnitude law)
//!   C2  kernel-difference bound with constant 2(alpha + 2)
//!   C3  capped-kernel consistency and divergence bound
//!   C4  chi = 0 reductions (heat kernel, Brownian variance, dH/dt = -I)
//!   C5  exact/capped same-noise coupling, bit-identical before the cap radius
//!   C6  no discrete near-collisions across seeds
//!   C7  entropy balance residual, shrinking under refinement
//!   C8  empirical-measure convergence over N with same-law baseline
//!   C9  one-particle marginal entropy vs grid entropy
//!   C10 estimator oracles (entropies, Fisher, M1, exact W1)
//!   C11 W1 stability of the limiting equation under initial perturbation

use std::sync::LazyLock;

use ks_core::diagnostics::{
    chaos_convergence_table, entropy_balance_residual, entropy_grid, entropy_knn, fisher_grid,
    moment_samples, wasserstein1, WeightedPoints,
};
use ks_core::kernel::{div_k, div_k_reg, eval_k, eval_k_reg, eval_potential, lipschitz_rhs};
use ks_core::meanfield::{pde_solve, PdeConfig, PdeSolution};
use ks_core::particle::{sample_cloud, simulate, ForceBackend, InitialCondition};
use ks_core::rng::{domain, CounterRng};
use ks_core::{KernelParams, ParticleState, SimConfig, Vec2};

fn gaussian_init(std: f64) -> InitialCondition {
    InitialCondition::Gaussian {
        mean: Vec2::ZERO,
        std,
    }
}

fn sim_config(n: usize, chi: f64, eps: f64, dt: f64, t_end: f64, seed: u64) -> SimConfig {
    SimConfig {
        n_particles: n,
        params: KernelParams::new(0.5, chi, eps).unwrap(),
        dt,
        t_end,
        seed,
        initial: gaussian_init(1.0),
        record_stride: 1,
        taming: 0.0,
        force_backend: ForceBackend::Direct,
    }
}

/// chi = 1 aggregation run on a 256^2 grid, shared by C7/C8/C9/C11.
static PDE_MAIN: LazyLock<PdeSolution> = LazyLock::new(|| {
    let cfg = PdeConfig::centered(
        KernelParams::new(0.5, 1.0, 0.0).unwrap(),
        256,
        6.0,
        0.5,
        gaussian_init(1.0),
    )
    .with_stride(20);
    pde_solve(&cfg).unwrap()
});

/// Same run at 128^2 for the refinement ratio in C7.
static PDE_COARSE: LazyLock<PdeSolution> = LazyLock::new(|| {
    let cfg = PdeConfig::centered(
        KernelParams::new(0.5, 1.0, 0.0).unwrap(),
        128,
        6.0,
        0.5,
        gaussian_init(1.0),
    )
    .with_stride(5);
    pde_solve(&cfg).unwrap()
});

/// chi = 0 heat run (sigma = 1) for the de Bruijn residual in C4c.
static PDE_HEAT: LazyLock<PdeSolution> = LazyLock::new(|| {
    let cfg = PdeConfig::centered(
        KernelParams::new(0.5, 0.0, 0.0).unwrap(),
        256,
        6.0,
        0.5,
        gaussian_init(1.0),
    )
    .with_stride(20);
    pde_solve(&cfg).unwrap()
});

/// High-resolution run backing the C8 reference samples. The convergence gap
/// tested there is a few 1e-3 in W1, the same order as the upwind scheme's
/// numerical-diffusion bias on a 256^2 grid, so the reference density needs
/// the finer grid. Only the final frame is consumed.
static PDE_CHAOS_REF: LazyLock<PdeSolution> = LazyLock::new(|| {
    let cfg = PdeConfig::centered(
        KernelParams::new(0.5, 1.0, 0.0).unwrap(),
        512,
        6.0,
        0.5,
        gaussian_init(1.0),
    );
    let steps = cfg.n_steps();
    pde_solve(&cfg.with_stride(steps)).unwrap()
});

/// Log-uniform radius in [lo, hi], uniform angle.
fn random_point(rng: &mut CounterRng, lo: f64, hi: f64) -> Vec2 {
    let r = lo * (hi / lo).powf(rng.next_f64());
    let th = rng.next_f64() * std::f64::consts::TAU;
    Vec2::new(r * th.cos(), r * th.sin())
}

#[test]
fn c01_kernel_identities() {
    let mut max_grad = 0.0f64;
    let mut max_div = 0.0f64;
    let mut max_mag = 0.0f64;
    for (ai, alpha) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let p = KernelParams::new(alpha, 1.0, 0.0).unwrap();
        let mut rng = CounterRng::with_item(1001, domain::TEST, ai as u64);
        for _ in 0..1000 {
            let x = random_point(&mut rng, 1e-2, 1e2);
            let h = 1e-6 * x.norm();
            let k = eval_k(x, &p).unwrap();

            // K = -grad Phi by central differences.
            let gx = (eval_potential(x + Vec2::new(h, 0.0), &p).unwrap()
                - eval_potential(x - Vec2::new(h, 0.0), &p).unwrap())
                / (2.0 * h);
            let gy = (eval_potential(x + Vec2::new(0.0, h), &p).unwrap()
                - eval_potential(x - Vec2::new(0.0, h), &p).unwrap())
                / (2.0 * h);
            let grad_err = (k + Vec2::new(gx, gy)).norm() / k.norm();
            max_grad = max_grad.max(grad_err);

            // div K = (1 - alpha) |x|^{-alpha-1} by central differences.
            let dkx = (eval_k(x + Vec2::new(h, 0.0), &p).unwrap().x
                - eval_k(x - Vec2::new(h, 0.0), &p).unwrap().x)
                / (2.0 * h);
            let dky = (eval_k(x + Vec2::new(0.0, h), &p).unwrap().y
                - eval_k(x - Vec2::new(0.0, h), &p).unwrap().y)
                / (2.0 * h);
            let dv = div_k(x, &p).unwrap();
            max_div = max_div.max(((dkx + dky) - dv).abs() / dv);
        }
        // |K(x)| = |x|^{-alpha} across twelve decades.
        let mut rng = CounterRng::with_item(1002, domain::TEST, ai as u64);
        for _ in 0..1000 {
            let x = random_point(&mut rng, 1e-6, 1e6);
            let mag = eval_k(x, &p).unwrap().norm();
            let expect = x.norm_sq().powf(-0.5 * alpha);
            max_mag = max_mag.max((mag - expect).abs() / expect);
        }
    }
    assert!(max_grad < 1e-6, "gradient identity rel err = {max_grad}");
    assert!(max_div < 1e-6, "divergence identity rel err = {max_div}");
    assert!(max_mag < 1e-12, "magnitude law rel err = {max_mag}");
    println!(
        "ACCEPTANCE C1 kernel identities: PASS (grad {max_grad:.2e}, div {max_div:.2e}, |K| {max_mag:.2e})"
    );
}

#[test]
fn c02_kernel_difference_bound() {
    let mut worst_ratio = 0.0f64;
    for (ai, alpha) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let p = KernelParams::new(alpha, 1.0, 0.0).unwrap();
        let mut rng = CounterRng::with_item(1003, domain::TEST, ai as u64);
        let mut violations = 0usize;
        for _ in 0..100_000 {
            let x = random_point(&mut rng, 1e-4, 1e3);
            let y = random_point(&mut rng, 1e-4, 1e3);
            let diff = (eval_k(x, &p).unwrap() - eval_k(y, &p).unwrap()).norm();
            let bound = lipschitz_rhs(x, y, &p).unwrap();
            if diff > bound {
                violations += 1;
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(diff / bound);
            }
        }
        assert_eq!(violations, 0, "alpha = {alpha}: {violations} violations");
    }
    println!("ACCEPTANCE C2 difference bound 2(alpha+2): PASS (0 violations, worst ratio {worst_ratio:.3})");
}

#[test]
fn c03_capped_kernel_bounds() {
    let mut checked_eq = 0usize;
    for eps in [1e-3, 1e-1] {
        let p = KernelParams::new(0.5, 1.0, eps).unwrap();
        let mut rng = CounterRng::with_item(1004, domain::TEST, (eps * 1e6) as u64);
        for _ in 0..10_000 {
            let x = random_point(&mut rng, 1e-3, 10.0);
            // Divergence bound from the capped-kernel formula.
            let dv = div_k_reg(x, &p).unwrap();
            let bound = 2.0 * x.norm_sq().powf(-0.75);
            assert!(
                dv <= bound * (1.0 + 1e-12),
                "div K_eps = {dv} > bound {bound} at |x| = {}",
                x.norm()
            );
            // Bit-exact agreement with the exact kernel outside the cap.
            if x.norm_sq() >= eps * eps {
                let a = eval_k_reg(x, &p).unwrap();
                let b = eval_k(x, &p).unwrap();
                assert_eq!(a.x.to_bits(), b.x.to_bits());
                assert_eq!(a.y.to_bits(), b.y.to_bits());
                checked_eq += 1;
            }
        }
    }
    println!("ACCEPTANCE C3 capped-kernel bounds: PASS (div bound on 2x10^4 points, {checked_eq} bit-exact matches)");
}

#[test]
fn c04_chi_zero_reductions() {
    // (a) 256^2 heat run vs the analytic Gaussian at t = 0.25, half-width 4.
    let cfg = PdeConfig::centered(
        KernelParams::new(0.5, 0.0, 0.0).unwrap(),
        256,
        4.0,
        0.25,
        gaussian_init(0.5),
    )
    .with_stride(20);
    let sol = pde_solve(&cfg).unwrap();
    let last = sol.frames.last().unwrap();
    let var = 0.25 + 2.0 * 0.25;
    let mut l1 = 0.0;
    for iy in 0..last.ny {
        for ix in 0..last.nx {
            let x = last.cell_center(ix, iy);
            let exact = (-0.5 * x.norm_sq() / var).exp() / (std::f64::consts::TAU * var);
            l1 += (last.values[last.idx(ix, iy)] - exact).abs();
        }
    }
    l1 *= last.h * last.h;
    assert!(l1 < 1e-3, "(a) L1 vs heat kernel = {l1}");

    // (b) particle terminal variance per coordinate = sigma^2 + 2T at N = 4096.
    let cfg = sim_config(4096, 0.0, 0.0, 1e-3, 1.0, 42);
    let mut cfg = cfg;
    cfg.record_stride = 1000;
    let traj = simulate(&cfg).unwrap();
    let last_state = traj.states.last().unwrap();
    let expected = 1.0 + 2.0 * 1.0;
    let n = last_state.n() as f64;
    let mut worst_rel = 0.0f64;
    for axis in 0..2 {
        let vals: Vec<f64> = last_state
            .positions
            .iter()
            .map(|p| if axis == 0 { p.x } else { p.y })
            .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        worst_rel = worst_rel.max(((var - expected) / expected).abs());
    }
    assert!(worst_rel < 0.1, "(b) variance rel err = {worst_rel}");

    // (c) de Bruijn residual |H(f_t) + int I - H(f_0)| < 1% of |H(f_0)|.
    let h0 = entropy_grid(&PDE_HEAT.frames[0]).abs();
    let residual = entropy_balance_residual(&PDE_HEAT, 0.5).unwrap();
    assert!(
        residual < 0.01 * h0,
        "(c) de Bruijn residual {residual} vs 1% of |H0| = {}",
        0.01 * h0
    );
    println!(
        "ACCEPTANCE C4 chi=0 reductions: PASS (L1 {l1:.2e}, var rel {worst_rel:.3}, de Bruijn {residual:.2e} < {:.2e})",
        0.01 * h0
    );
}

#[test]
fn c05_exact_capped_coupling() {
    let eps = 1e-3;
    let mut couplings = Vec::new();
    for seed in [11u64, 12, 13, 14] {
        let mut exact_cfg = sim_config(64, 1.0, 0.0, 1e-4, 0.5, seed);
        exact_cfg.record_stride = 50;
        let mut capped_cfg = exact_cfg.clone();
        capped_cfg.params = KernelParams::new(0.5, 1.0, eps).unwrap();

        let exact = simulate(&exact_cfg).unwrap();
        let capped = simulate(&capped_cfg).unwrap();

        // First time the minimum pairwise distance drops below eps, read from
        // the capped run's event log (identical to the exact run's crossing,
        // since the trajectories agree up to that state).
        let t_cross = capped
            .events
            .iter()
            .find(|e| {
                matches!(e.kind, ks_core::particle::EventKind::MinDistanceBelow { threshold } if threshold == eps)
            })
            .map(|e| e.time)
            .unwrap_or(f64::INFINITY);

        let mut compared = 0usize;
        for (a, b) in exact.states.iter().zip(&capped.states) {
            if a.time >= t_cross {
                break;
            }
            assert_eq!(a.positions.len(), b.positions.len());
            for (pa, pb) in a.positions.iter().zip(&b.positions) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits(), "seed {seed} diverged at t = {}", a.time);
                assert_eq!(pa.y.to_bits(), pb.y.to_bits(), "seed {seed} diverged at t = {}", a.time);
            }
            compared += 1;
        }
        assert!(compared > 0, "seed {seed}: no records before the crossing");
        couplings.push((seed, t_cross, compared));
    }
    let detail: Vec<String> = couplings
        .iter()
        .map(|(s, t, c)| {
            if t.is_finite() {
                format!("seed {s}: {c} records bit-identical before t_cross = {t:.4}")
            } else {
                format!("seed {s}: all {c} records bit-identical (never crossed eps)")
            }
        })
        .collect();
    println!("ACCEPTANCE C5 exact/capped coupling: PASS ({})", detail.join("; "));
}

#[test]
fn c06_no_discrete_collisions() {
    let mut mins = Vec::new();
    for seed in 0..16u64 {
        let mut cfg = sim_config(64, 1.0, 0.0, 1e-4, 1.0, 1000 + seed);
        cfg.taming = 0.01;
        cfg.record_stride = 1000;
        let traj = simulate(&cfg).unwrap();
        mins.push(traj.overall_min_distance.dist);
    }
    let crossed = mins.iter().filter(|&&d| d < 1e-6).count();
    assert_eq!(crossed, 0, "{crossed} runs reached min distance < 1e-6");
    let mut sorted = mins.clone();
    sorted.sort_by(f64::total_cmp);
    // Caveat: a discrete-time run cannot resolve approaches below the step
    // scale sqrt(4 dt); this reports the observed distribution, it does not
    // prove continuum non-collision.
    println!(
        "ACCEPTANCE C6 no-collision consistency: PASS (min-over-run distribution: min {:.3e}, median {:.3e}, max {:.3e})",
        sorted[0],
        sorted[sorted.len() / 2],
        sorted[sorted.len() - 1]
    );
}

#[test]
fn c07_entropy_balance() {
    let h0 = entropy_grid(&PDE_MAIN.frames[0]).abs();
    let fine = entropy_balance_residual(&PDE_MAIN, 0.5).unwrap();
    let coarse = entropy_balance_residual(&PDE_COARSE, 0.5).unwrap();
    assert!(
        fine < 0.05 * h0,
        "256^2 residual {fine} vs 5% of |H0| = {}",
        0.05 * h0
    );
    let ratio = coarse / fine;
    assert!(
        ratio >= 1.5,
        "refinement ratio {ratio} < 1.5 (coarse {coarse}, fine {fine})"
    );
    println!(
        "ACCEPTANCE C7 entropy balance: PASS (residual {fine:.3e} < {:.3e}, refinement ratio {ratio:.2})",
        0.05 * h0
    );
}

#[test]
fn c08_propagation_of_chaos() {
    let template = sim_config(2, 1.0, 0.0, 1e-3, 0.5, 0);
    let seeds: Vec<u64> = (1..=8).collect();
    let table = chaos_convergence_table(&PDE_CHAOS_REF, &template, &[128, 512, 2048], &seeds, 0.5)
        .expect("chaos table");
    assert_eq!(table.rows.len(), 24);

    let aggs = &table.aggregates;
    assert!(
        aggs[0].mean_w1 > aggs[1].mean_w1 && aggs[1].mean_w1 > aggs[2].mean_w1,
        "mean W1 not strictly decreasing: {:?}",
        aggs.iter().map(|a| a.mean_w1).collect::<Vec<_>>()
    );

    let top = &aggs[2];
    let gap = (top.mean_w1 - top.mean_baseline).abs();
    let band = 2.0 * (top.stderr_w1.powi(2) + top.stderr_baseline.powi(2)).sqrt();
    assert!(
        gap <= band,
        "N = 2048: |mean {} - baseline {}| = {gap} exceeds 2 stderr = {band}",
        top.mean_w1,
        top.mean_baseline
    );
    println!(
        "ACCEPTANCE C8 propagation of chaos: PASS (mean W1 {:.4} > {:.4} > {:.4}; N=2048 gap {gap:.4} <= {band:.4})",
        aggs[0].mean_w1, aggs[1].mean_w1, aggs[2].mean_w1
    );
}

#[test]
fn c09_entropic_chaos_proxy() {
    let mut cfg = sim_config(2048, 1.0, 0.0, 1e-3, 0.5, 77);
    cfg.record_stride = 500;
    let traj = simulate(&cfg).unwrap();
    let cloud = traj.states.last().unwrap();
    let h_particles = entropy_knn(cloud, 4).unwrap();
    let h_grid = entropy_grid(PDE_MAIN.frame_at(0.5).unwrap());
    let gap = (h_particles - h_grid).abs();
    assert!(
        gap < 0.1 * h_grid.abs(),
        "marginal entropy {h_particles} vs grid {h_grid}: gap {gap}"
    );
    println!(
        "ACCEPTANCE C9 entropic-chaos proxy: PASS (knn {h_particles:.4} vs grid {h_grid:.4}, gap {gap:.4} < {:.4})",
        0.1 * h_grid.abs()
    );
}

#[test]
fn c10_estimator_oracles() {
    let minus_one_log_2pi = -(1.0 + (std::f64::consts::TAU).ln()); // -2.837877...

    // k-NN entropy on 10^4 standard Gaussian samples.
    let cloud = sample_cloud(&gaussian_init(1.0), 10_000, 2024).unwrap();
    let h_knn = entropy_knn(
        &ParticleState {
            positions: cloud.clone(),
            time: 0.0,
        },
        4,
    )
    .unwrap();
    assert!(
        (h_knn - minus_one_log_2pi).abs() < 0.05,
        "knn entropy {h_knn}"
    );

    // Grid entropy and Fisher information of the same Gaussian.
    let grid = ks_core::DensityGrid::from_initial_condition(
        &gaussian_init(1.0),
        256,
        256,
        12.0 / 256.0,
        Vec2::new(-0.5 * 255.0 * 12.0 / 256.0, -0.5 * 255.0 * 12.0 / 256.0),
    )
    .unwrap();
    let h_grid = entropy_grid(&grid);
    assert!(
        (h_grid - minus_one_log_2pi).abs() < 0.002,
        "grid entropy {h_grid}"
    );
    let fisher = fisher_grid(&grid);
    assert!((fisher - 2.0).abs() < 0.02, "grid Fisher {fisher}");

    // First moment of the sample cloud: sqrt(pi/2).
    let m1 = moment_samples(&cloud, 1.0);
    let m1_expected = (std::f64::consts::PI / 2.0).sqrt();
    assert!((m1 - m1_expected).abs() < 0.03, "M1 = {m1}");

    // Exact W1 equals exhaustive matching on small uniform sets, and the
    // metric axioms hold.
    let mut rng = CounterRng::new(555, domain::TEST);
    let mut worst = 0.0f64;
    for case in 0..12 {
        let n = 2 + case % 7;
        let a: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.next_f64() * 4.0 - 2.0, rng.next_f64() * 4.0 - 2.0))
            .collect();
        let b: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.next_f64() * 4.0 - 2.0, rng.next_f64() * 4.0 - 2.0))
            .collect();
        let wa = WeightedPoints::from_samples(&a);
        let wb = WeightedPoints::from_samples(&b);
        let exact = wasserstein1(&wa, &wb).unwrap();
        let brute = brute_force_matching(&a, &b);
        worst = worst.max((exact - brute).abs());
        assert!((exact - brute).abs() <= 1e-10 * (1.0 + brute));
        assert_eq!(wasserstein1(&wa, &wa).unwrap(), 0.0);
        let sym = wasserstein1(&wb, &wa).unwrap();
        assert!((exact - sym).abs() < 1e-10);
        let c: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.next_f64() * 4.0 - 2.0, rng.next_f64() * 4.0 - 2.0))
            .collect();
        let wc = WeightedPoints::from_samples(&c);
        let ac = wasserstein1(&wa, &wc).unwrap();
        let cb = wasserstein1(&wc, &wb).unwrap();
        assert!(exact <= ac + cb + 1e-9, "triangle violated");
    }
    println!(
        "ACCEPTANCE C10 estimator oracles: PASS (knn {h_knn:.4}, grid H {h_grid:.5}, I {fisher:.4}, M1 {m1:.4}, W1-vs-brute max diff {worst:.1e})"
    );
}

/// Exhaustive matching oracle for equal-size uniform-weight sets.
fn brute_force_matching(a: &[Vec2], b: &[Vec2]) -> f64 {
    fn heaps(k: usize, perm: &mut Vec<usize>, a: &[Vec2], b: &[Vec2], best: &mut f64) {
        if k <= 1 {
            let cost: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]).norm())
                .sum();
            *best = best.min(cost / perm.len() as f64);
            return;
        }
        for i in 0..k {
            heaps(k - 1, perm, a, b, best);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    let mut perm: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    heaps(a.len(), &mut perm, a, b, &mut best);
    best
}

#[test]
fn c11_w1_stability_probe() {
    let shifted_cfg = PdeConfig::centered(
        KernelParams::new(0.5, 1.0, 0.0).unwrap(),
        256,
        6.0,
        0.5,
        InitialCondition::Gaussian {
            mean: Vec2::new(0.1, 0.0),
            std: 1.0,
        },
    )
    .with_stride(20);
    let shifted = pde_solve(&shifted_cfg).unwrap();

    let w1_at = |t: f64| -> f64 {
        let fa = PDE_MAIN.frame_at(t).unwrap();
        let fb = shifted.frame_at(t).unwrap();
        wasserstein1(
            &WeightedPoints::from_grid_capped(fa, 2048, 900),
            &WeightedPoints::from_grid_capped(fb, 2048, 901),
        )
        .unwrap()
    };
    let w1_0 = w1_at(0.0);
    let w1_t = w1_at(0.5);
    assert!(
        w1_t <= 3.0 * w1_0,
        "W1(f_t, g_t) = {w1_t} exceeds 3 x W1(f_0, g_0) = {}",
        3.0 * w1_0
    );
    let c = (w1_t / w1_0).ln() / 0.5;
    println!(
        "ACCEPTANCE C11 W1 stability: PASS (W1_0 {w1_0:.4}, W1_t {w1_t:.4}, measured growth rate c = {c:.3})"
    );
}
