//! Acceptance suite: every criterion of the build contract, implemented
//! against independent oracles and shared desk-scale artifacts. Both the
//! `acceptance` test target and the CLI `verify` subcommand run these.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use crate::asymptotics::{
    correct_minus, correct_plus, extract_profiles, intensity_matrices, physical_asymptotics,
    reduced_ode_evolve, ModifiedProfile, OscillatoryCoeffs, ProfileHistory,
};
use crate::distorted::{
    build_basis, commensurate_dk, diagonalization_residual, linear_propagate, DistortedBasis,
};
use crate::dynamics::{
    decay_fit, evolve, gaussian_data, EvolveResult, FieldState, RunConfig, Scheme,
};
use crate::grid::{KGrid, XGrid};
use crate::jost::{solve_m, JostField, Side, SolveOptions};
use crate::potential::{catalog, sample_potential, Family, PotentialSpec};
use crate::scattering::{compute_tr, genericity_report, ScatteringData};
use crate::Result;

/// Independent reference computations. None of these share code with the
/// pipeline paths they check.
pub mod oracles {
    use super::*;

    /// Plane-wave matching for the square barrier `V = A` on `|x| <= a`:
    /// transmission and reflection amplitudes of a left-incident wave.
    pub fn square_barrier_tr(amplitude: f64, half_width: f64, k: f64) -> (Complex64, Complex64) {
        let a = half_width;
        let big_a = amplitude;
        let w = Complex64::new(big_a - k * k, 0.0).sqrt();
        let arg = 2.0 * a * w;
        let c = arg.cosh();
        // sinh(2wa)/w, finite at w = 0.
        let s = if w.norm() < 1e-12 {
            Complex64::new(2.0 * a, 0.0)
        } else {
            arg.sinh() / w
        };
        let i = Complex64::new(0.0, 1.0);
        let t = 2.0 * Complex64::from_polar(1.0, -2.0 * k * a)
            / (2.0 * c + i * s * (big_a - 2.0 * k * k) / k);
        let r = -i * s * t * big_a / (2.0 * k);
        (t, r)
    }

    /// Backward RK4 integration of `m'' + 2ik m' = V m` from `x_max` with
    /// `m = 1, m' = 0` there. Integrates each smooth segment of the
    /// potential separately so jump discontinuities stay on panel edges.
    pub fn ode_m_plus(spec: &PotentialSpec, k: f64, grid: &XGrid, substeps: usize) -> Vec<Complex64> {
        let xs = grid.points();
        let h = grid.dx() / substeps as f64;
        let i2k = Complex64::new(0.0, 2.0 * k);
        // Segment-aware potential: inside/outside the square barrier the
        // limit values apply on the closed panel.
        let v_at = |x: f64, inside_hint: f64| -> f64 {
            match spec.family {
                Family::SquareBarrier => {
                    if inside_hint.abs() <= spec.width {
                        spec.amplitude
                    } else {
                        0.0
                    }
                }
                _ => spec.eval(x),
            }
        };
        let mut m = Complex64::new(1.0, 0.0);
        let mut p = Complex64::new(0.0, 0.0);
        let mut out = vec![Complex64::new(1.0, 0.0); grid.n];
        out[grid.n - 1] = m;
        for xi in (0..grid.n - 1).rev() {
            // Step from xs[xi + 1] down to xs[xi].
            let x_hi = xs[xi + 1];
            for s in 0..substeps {
                let x0 = x_hi - s as f64 * h;
                let hint = x0 - 0.5 * h;
                let f = |x: f64, m: Complex64, p: Complex64| -> (Complex64, Complex64) {
                    (p, v_at(x, hint) * m - i2k * p)
                };
                let (k1m, k1p) = f(x0, m, p);
                let (k2m, k2p) = f(x0 - 0.5 * h, m - 0.5 * h * k1m, p - 0.5 * h * k1p);
                let (k3m, k3p) = f(x0 - 0.5 * h, m - 0.5 * h * k2m, p - 0.5 * h * k2p);
                let (k4m, k4p) = f(x0 - h, m - h * k3m, p - h * k3p);
                m -= h / 6.0 * (k1m + 2.0 * (k2m + k3m) + k4m);
                p -= h / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p);
            }
            out[xi] = m;
        }
        out
    }

    /// Exact free evolution of `A e^{-x^2/(2 sigma^2)}` under
    /// `i u_t = u_xx`.
    pub fn free_gaussian(a: f64, sigma: f64, t: f64, x: f64) -> Complex64 {
        let denom = Complex64::new(sigma * sigma, -2.0 * t);
        a * sigma / denom.sqrt() * (-(x * x) / (2.0 * denom)).exp()
    }
}

/// One acceptance criterion outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub slug: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub results: Vec<CriterionResult>,
    pub seed: u64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed_slugs(&self) -> Vec<&'static str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.slug).collect()
    }
}

/// Knobs for induced-failure runs; everything else is pinned.
#[derive(Debug, Clone, Default)]
pub struct VerifyOverrides {
    /// Time step of the conservation run (criterion 9); default 1e-3.
    pub conservation_dt: Option<f64>,
}

const CRITERIA: [(usize, &str, &str); 15] = [
    (1, "flat", "flat-limit equivalence"),
    (2, "unitarity", "unitarity defect on [0.05, 10]"),
    (3, "square", "square-barrier closed-form oracle"),
    (4, "generic", "genericity at small k"),
    (5, "isometry", "isometry and inversion"),
    (6, "diago", "diagonalization residual and order"),
    (7, "jost", "Volterra vs ODE oracle"),
    (8, "decay", "dispersive decay slopes"),
    (9, "conserve", "mass and Hamiltonian drift"),
    (10, "cauchy", "modified profile Cauchy differences"),
    (11, "modulus", "corrected-profile modulus identity"),
    (12, "negstruct", "negative-time correction structure"),
    (13, "ode", "reduced ODE vs PDE trend"),
    (14, "oscb", "oscillatory coefficient limits"),
    (15, "physasym", "physical-space asymptotics"),
];

/// Run the acceptance criteria, optionally filtered by slug substring.
pub fn run_all(filter: Option<&str>, seed: u64, overrides: &VerifyOverrides) -> VerifyReport {
    let mut results = Vec::new();
    for (id, slug, name) in CRITERIA {
        if let Some(f) = filter {
            if !slug.contains(f) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = run_criterion(id, seed, overrides);
        let runtime_s = start.elapsed().as_secs_f64();
        let (passed, details) = match outcome {
            Ok((p, d)) => (p, d),
            Err(e) => (false, format!("error: {e}")),
        };
        results.push(CriterionResult { id, slug, name, passed, details, runtime_s });
    }
    VerifyReport { results, seed }
}

fn run_criterion(id: usize, seed: u64, overrides: &VerifyOverrides) -> Result<(bool, String)> {
    match id {
        1 => c01_flat_limit(seed),
        2 => c02_unitarity(),
        3 => c03_square_oracle(),
        4 => c04_genericity(),
        5 => c05_isometry(seed),
        6 => c06_diagonalization(),
        7 => c07_jost_oracle(),
        8 => c08_decay(),
        9 => c09_conservation(overrides),
        10 => c10_cauchy(),
        11 => c11_modulus(),
        12 => c12_negative_structure(),
        13 => c13_ode_vs_pde(),
        14 => c14_oscillatory(),
        15 => c15_physical(),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Shared artifacts.

fn gauss21(x_min: f64, x_max: f64, n: usize) -> PotentialSpec {
    PotentialSpec::new(Family::GaussianBarrier, 2.0, 1.0, 7.0, XGrid::new(x_min, x_max, n).unwrap())
        .unwrap()
}

/// Fine scattering data for gaussian_barrier(2,1) on the staggered grid
/// dk = 0.1 covering [0.05, 9.95] at n_x = 2^14.
struct FineScatter {
    sd: ScatteringData,
}

fn fine_scatter() -> &'static FineScatter {
    static CELL: OnceLock<FineScatter> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = gauss21(-10.0, 10.0, 1 << 14);
        let kg = KGrid::staggered(0.1, 100).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Both,
            SolveOptions { derivative_order: 0, oversample: 2 },
        )
        .unwrap();
        let sd = compute_tr(&jost, &spec, 1e-6).unwrap();
        FineScatter { sd }
    })
}

/// Small-k scattering run (dk = 0.01) for the genericity criterion.
struct SmallK {
    jost: JostField,
    sd: ScatteringData,
    spec: PotentialSpec,
}

fn small_k() -> &'static SmallK {
    static CELL: OnceLock<SmallK> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = gauss21(-10.0, 10.0, 1 << 14);
        let kg = KGrid::staggered(0.01, 4).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Both,
            SolveOptions { derivative_order: 0, oversample: 2 },
        )
        .unwrap();
        let sd = compute_tr(&jost, &spec, 1e-6).unwrap();
        SmallK { jost, sd, spec }
    })
}

/// The desk-scale nonlinear runs and everything derived from them.
///
/// Run A carries a compact packet at rest (`sigma = 2`, centered at -10; a
/// packet on top of `V` would pick up slowly decaying distorted-spectrum
/// tails through the reflection coupling, and those components would wrap
/// around the periodic grid long before `t_max`). It serves the
/// conservation, reduced-ODE, correction-modulus, and stationary-phase
/// criteria. Run B is prepared directly in the distorted frame as a banded
/// bump at `k0 = -0.9`: its spectrum is compactly supported by
/// construction, so nothing can wrap, every mode with weight has
/// `sqrt(t) k >= 3` from t = 25 on (the convergent regime of the modified
/// profile), and the profile's k-derivative stays small enough for the
/// asymptotic reduction to hold over the desk-scale window.
pub struct NlsArtifacts {
    pub grid: XGrid,
    pub spec: PotentialSpec,
    pub v: Vec<f64>,
    pub basis: DistortedBasis,
    pub sd: ScatteringData,
    pub run: EvolveResult,
    pub profiles: ProfileHistory,
    pub plus: ModifiedProfile,
    pub minus: ModifiedProfile,
    pub run_b: EvolveResult,
    pub profiles_b: ProfileHistory,
    pub plus_b: ModifiedProfile,
    pub coeffs: OscillatoryCoeffs,
    pub eps0: f64,
}

fn snapshot_schedule(dt: f64) -> Vec<f64> {
    let mut times = vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    let mut t = 4.0f64;
    loop {
        t *= 2.0f64.powf(0.25);
        if t > 195.0 {
            break;
        }
        times.push((t / dt).round() * dt);
    }
    for extra in [5.0, 25.0, 50.0, 100.0, 150.0, 200.0] {
        times.push(extra);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    times
}

pub fn nls_artifacts() -> &'static Arc<NlsArtifacts> {
    static CELL: OnceLock<Arc<NlsArtifacts>> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = XGrid::new(-600.0, 600.0, 4096).unwrap();
        let spec = PotentialSpec::new(Family::GaussianBarrier, 2.0, 1.0, 7.0, grid).unwrap();
        let v = sample_potential(&spec).unwrap();
        let dk = commensurate_dk(&grid);
        let kg = KGrid::staggered(dk, (3.0 / dk).floor() as usize).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &grid,
            Side::Both,
            SolveOptions { derivative_order: 0, oversample: 8 },
        )
        .unwrap();
        let sd = compute_tr(&jost, &spec, 1e-5).unwrap();
        let basis = build_basis(&sd, &jost, false, None).unwrap();

        let eps0 = 0.1;
        let dt = 1e-3;
        let times = snapshot_schedule(dt);
        let cfg = RunConfig {
            dt,
            t_max: 200.0,
            scheme: Scheme::FlatStrang,
            epsilon0: eps0,
            snapshot_times: times,
            nonlinearity: true,
        };

        let u0_a = gaussian_data(&grid, eps0, 2.0, -10.0, 0.0);
        let run = evolve(&u0_a, &cfg, None, &v, &grid).unwrap();
        let profiles = extract_profiles(&run.snapshots, &basis).unwrap();
        let plus = correct_plus(&profiles).unwrap();
        // Run A's data is real, so the time-reversed solution is the
        // conjugate of the same trajectory and the forward history doubles
        // as the conjugate run.
        let minus = correct_minus(&profiles, &sd, 0.019).unwrap();

        let u0_b = band_limited_data(&basis, eps0, -0.9, 0.18);
        let run_b = evolve(&u0_b, &cfg, None, &v, &grid).unwrap();
        let profiles_b = extract_profiles(&run_b.snapshots, &basis).unwrap();
        let plus_b = correct_plus(&profiles_b).unwrap();

        let coeffs = OscillatoryCoeffs::build(20.0, 220.0, 7, 50.0, 140, 0.2, 0.019).unwrap();
        Arc::new(NlsArtifacts {
            grid,
            spec,
            v,
            basis,
            sd,
            run,
            profiles,
            plus,
            minus,
            run_b,
            profiles_b,
            plus_b,
            coeffs,
            eps0,
        })
    })
}

/// Flat-limit pipeline artifacts (V = 0).
struct FlatArtifacts {
    basis: DistortedBasis,
    sd: ScatteringData,
    grid: XGrid,
}

fn flat_artifacts() -> &'static FlatArtifacts {
    static CELL: OnceLock<FlatArtifacts> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = XGrid::new(-40.0, 40.0, 1024).unwrap();
        let spec = PotentialSpec::new(Family::GaussianBarrier, 0.0, 1.0, 7.0, grid).unwrap();
        let dk = commensurate_dk(&grid);
        let kg = KGrid::staggered(dk, (4.0 / dk).floor() as usize).unwrap();
        let jost = solve_m(&spec, &kg, &grid, Side::Both, SolveOptions::default()).unwrap();
        let sd = compute_tr(&jost, &spec, 1e-8).unwrap();
        let basis = build_basis(&sd, &jost, false, None).unwrap();
        FlatArtifacts { basis, sd, grid }
    })
}

/// Inverse-transform of a smoothly windowed Gaussian bump centered at `k0`
/// with width `sk` (support `|k - k0| <= 3 sk`), rescaled to sup `eps0`.
pub fn band_limited_data(basis: &DistortedBasis, eps0: f64, k0: f64, sk: f64) -> Vec<Complex64> {
    let smoothstep = |s: f64| -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    };
    let g: Vec<Complex64> = basis
        .k_full
        .iter()
        .map(|&k| {
            let u = (k - k0) / sk;
            if u.abs() >= 3.0 {
                return Complex64::new(0.0, 0.0);
            }
            let window = 1.0 - smoothstep((u.abs() - 2.0).max(0.0));
            Complex64::new((-0.5 * u * u).exp() * window, 0.0)
        })
        .collect();
    let spec = crate::distorted::DistortedSpectrum {
        k: basis.k_full.clone(),
        dk: basis.dk,
        values: g,
    };
    let mut u0 = basis.inverse(&spec).expect("band-limited data");
    let sup = u0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = eps0 / sup;
    for z in u0.iter_mut() {
        *z *= scale;
    }
    u0
}

fn seeded_test_function(rng: &mut ChaCha8Rng, grid: &XGrid) -> Vec<Complex64> {
    let amp = rng.gen_range(0.3..1.2);
    let sigma = rng.gen_range(2.0..4.0);
    let center = rng.gen_range(-5.0..5.0);
    let momentum = rng.gen_range(-1.0..1.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    grid.points()
        .iter()
        .map(|&x| {
            let g = amp * (-((x - center) / sigma).powi(2) / 2.0).exp();
            Complex64::from_polar(g, momentum * x + phase)
        })
        .collect()
}

fn l2(grid: &XGrid, f: &[Complex64]) -> f64 {
    (grid.dx() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

// ---------------------------------------------------------------------------
// Criteria.

fn c01_flat_limit(seed: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let art = flat_artifacts();
    let mut worst_t = 0.0f64;
    for i in 0..art.sd.k.len() {
        worst_t = worst_t
            .max((art.sd.t[i] - 1.0).norm())
            .max(art.sd.r_plus[i].norm())
            .max(art.sd.r_minus[i].norm());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_fwd = 0.0f64;
    let mut worst_rt = 0.0f64;
    let dx = art.grid.dx();
    let xs = art.grid.points();
    for _ in 0..10 {
        let f = seeded_test_function(&mut rng, &art.grid);
        let fw = art.basis.forward(&f)?;
        let norm = l2(&art.grid, &f);
        // Flat Fourier quadrature oracle.
        let mut worst = 0.0f64;
        for (ki, &k) in art.basis.k_full.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (xi, &x) in xs.iter().enumerate() {
                acc += Complex64::from_polar(1.0, -k * x) * f[xi];
            }
            acc *= dx / (std::f64::consts::TAU).sqrt();
            worst = worst.max((acc - fw.values[ki]).norm());
        }
        worst_fwd = worst_fwd.max(worst / norm);
        let back = art.basis.inverse(&fw)?;
        let diff = (dx
            * back.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
        .sqrt();
        worst_rt = worst_rt.max(diff / norm);
    }
    let runtime = start.elapsed().as_secs_f64();
    let pass = worst_t < 1e-10 && worst_fwd < 1e-8 && worst_rt < 1e-8 && runtime < 10.0;
    Ok((
        pass,
        format!(
            "max |T-1|,|R| = {worst_t:.2e}; forward vs flat quadrature {worst_fwd:.2e}; round trip {worst_rt:.2e}; runtime {runtime:.2}s"
        ),
    ))
}

fn c02_unitarity() -> Result<(bool, String)> {
    let sd = &fine_scatter().sd;
    let defect = sd.max_unitarity_defect();
    Ok((defect < 1e-6, format!("max unitarity defect over k in [0.05, 9.95]: {defect:.2e}")))
}

fn c03_square_oracle() -> Result<(bool, String)> {
    let spec = PotentialSpec::new(
        Family::SquareBarrier,
        1.0,
        1.0,
        7.0,
        XGrid::new(-8.0, 8.0, 1 << 14).unwrap(),
    )
    .unwrap();
    let ks = vec![0.5, 1.0, 2.0, 5.0];
    let kg = KGrid::explicit(ks.clone()).unwrap();
    let jost = solve_m(
        &spec,
        &kg,
        &spec.grid,
        Side::Both,
        SolveOptions { derivative_order: 0, oversample: 2 },
    )?;
    let sd = compute_tr(&jost, &spec, 1e-6)?;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let (t_oracle, _) = oracles::square_barrier_tr(1.0, 1.0, k);
        let dev = (sd.t[i].norm_sqr() - t_oracle.norm_sqr()).abs();
        worst = worst.max(dev);
        lines.push(format!("k={k}: |T|^2 {:.8} vs {:.8}", sd.t[i].norm_sqr(), t_oracle.norm_sqr()));
    }
    Ok((worst < 1e-6, format!("max | |T|^2 - oracle | = {worst:.2e}; {}", lines.join("; "))))
}

fn c04_genericity() -> Result<(bool, String)> {
    let art = small_k();
    let rep = genericity_report(&art.jost, &art.sd, &art.spec)?;
    let k_min = art.sd.k[0];
    let t_min = art.sd.t[0].norm();
    let bound = 2.0 * rep.t_slope_at_zero.norm() * k_min;
    let rp = (art.sd.r_plus[0] + 1.0).norm();
    let rm = (art.sd.r_minus[0] + 1.0).norm();
    let pass = rep.is_generic && t_min <= bound && rp < 0.05 && rm < 0.05;
    Ok((
        pass,
        format!(
            "|T(k_min)| = {t_min:.3e} <= 2|T'(0)|k_min = {bound:.3e}; |R+ + 1| = {rp:.3e}, |R- + 1| = {rm:.3e}; generic = {}",
            rep.is_generic
        ),
    ))
}

fn c05_isometry(seed: u64) -> Result<(bool, String)> {
    static CELL: OnceLock<DistortedBasis> = OnceLock::new();
    let basis = CELL.get_or_init(|| {
        let spec = gauss21(-150.0, 150.0, 4096);
        let dk = commensurate_dk(&spec.grid);
        let kg = KGrid::staggered(dk, (8.0 / dk).floor() as usize).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Both,
            SolveOptions { derivative_order: 0, oversample: 4 },
        )
        .unwrap();
        let sd = compute_tr(&jost, &spec, 1e-6).unwrap();
        build_basis(&sd, &jost, false, None).unwrap()
    });
    let grid = basis.x_grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5));
    let mut worst_parseval = 0.0f64;
    let mut worst_rt = 0.0f64;
    for _ in 0..20 {
        let f = seeded_test_function(&mut rng, &grid);
        let norm = l2(&grid, &f);
        let fw = basis.forward(&f)?;
        worst_parseval = worst_parseval.max(((fw.l2_norm() - norm) / norm).abs());
        let back = basis.inverse(&fw)?;
        let diff = (grid.dx()
            * back.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
        .sqrt();
        worst_rt = worst_rt.max(diff / norm);
    }
    let pass = worst_parseval < 1e-6 && worst_rt < 1e-6;
    Ok((
        pass,
        format!("20 seeded functions: Parseval defect {worst_parseval:.2e}, round trip {worst_rt:.2e}"),
    ))
}

fn c06_diagonalization() -> Result<(bool, String)> {
    let residual = |n_x: usize, amplitude: f64| -> Result<f64> {
        let spec = PotentialSpec::new(
            Family::GaussianBarrier,
            amplitude,
            1.0,
            7.0,
            XGrid::new(-30.0, 30.0, n_x).unwrap(),
        )
        .unwrap();
        let dk = commensurate_dk(&spec.grid);
        let kg = KGrid::staggered(dk, (2.0 / dk).floor() as usize).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Both,
            SolveOptions { derivative_order: 0, oversample: 4 },
        )?;
        let sd = compute_tr(&jost, &spec, 1e-6)?;
        let basis = build_basis(&sd, &jost, false, None)?;
        let v: Vec<f64> = spec.grid.points().iter().map(|&x| spec.eval(x)).collect();
        let f: Vec<Complex64> = spec
            .grid
            .points()
            .iter()
            .map(|&x| Complex64::new(x * (-x * x).exp(), 0.0))
            .collect();
        diagonalization_residual(&basis, &f, &v)
    };
    let r1 = residual(256, 2.0)?;
    let r2 = residual(512, 2.0)?;
    let r3 = residual(1024, 2.0)?;
    let flat = residual(1024, 0.0)?;
    let pass = r3 < 1e-3 && r1 / r2 > 8.0 && r2 / r3 > 8.0 && flat < 1e-4;
    Ok((
        pass,
        format!(
            "residuals {r1:.2e} -> {r2:.2e} -> {r3:.2e} (ratios {:.1}, {:.1}); flat {flat:.2e}",
            r1 / r2,
            r2 / r3
        ),
    ))
}

fn c07_jost_oracle() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for spec in catalog() {
        let kg = KGrid::explicit(vec![0.1, 1.0, 5.0]).unwrap();
        let jost = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Plus,
            SolveOptions { derivative_order: 0, oversample: 4 },
        )?;
        let m = jost.m(Side::Plus)?;
        let mut fam_worst = 0.0f64;
        for (ki, &k) in jost.k.iter().enumerate() {
            let oracle = oracles::ode_m_plus(&spec, k, &spec.grid, 8);
            let dev = m
                .row(ki)
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            fam_worst = fam_worst.max(dev);
        }
        lines.push(format!("{:?}: {fam_worst:.2e}", spec.family));
        worst = worst.max(fam_worst);
    }
    Ok((worst < 1e-7, format!("sup |m_volterra - m_ode|: {}", lines.join(", "))))
}

fn c08_decay() -> Result<(bool, String)> {
    let start = Instant::now();
    let art = nls_artifacts();

    // Decay runs use barrier-centered data: a packet standing off the
    // potential first builds up reflection fringes (locally doubling the
    // envelope) and only then settles onto the t^{-1/2} law, which would
    // contaminate the pinned [5, 200] window.
    let u0 = gaussian_data(&art.grid, art.eps0, 2.0, 0.0, 0.0);

    // (a) Linear evolution in the distorted frame, exact in t.
    let f0 = art.basis.forward(&u0)?;
    let mut lin_states = Vec::new();
    let mut t = 5.0f64;
    while t <= 200.0 {
        let ut = art.basis.inverse(&linear_propagate(&f0, t))?;
        lin_states.push(FieldState { t, u: ut });
        t *= 1.4;
    }
    let lin = decay_fit(&lin_states, &art.grid, (4.0, 201.0))?;

    // (b) Full NLS at eps0 = 0.1 on the same data.
    let mut times: Vec<f64> = Vec::new();
    let mut ts = 5.0f64;
    while ts <= 195.0 {
        times.push((ts / 5e-3).round() * 5e-3);
        ts *= 1.3;
    }
    times.push(200.0);
    let cfg = RunConfig {
        dt: 5e-3,
        t_max: 200.0,
        scheme: Scheme::FlatStrang,
        epsilon0: art.eps0,
        snapshot_times: times,
        nonlinearity: true,
    };
    let run_c = evolve(&u0, &cfg, None, &art.v, &art.grid)?;
    let nls = decay_fit(&run_c.snapshots, &art.grid, (5.0, 201.0))?;

    // (c) Closed-form free flat Gaussian.
    let grid = art.grid;
    let flat_states: Vec<FieldState> = (0..14)
        .map(|i| {
            let t = 5.0 * 1.35f64.powi(i);
            let u = grid
                .points()
                .iter()
                .map(|&x| oracles::free_gaussian(0.1, 2.0, t, x))
                .collect();
            FieldState { t, u }
        })
        .collect();
    let flat = decay_fit(&flat_states, &grid, (4.0, 1e9))?;

    let runtime = start.elapsed().as_secs_f64();
    let pass = (lin.slope + 0.5).abs() < 0.05
        && (nls.slope + 0.5).abs() < 0.05
        && (flat.slope + 0.5).abs() < 0.01
        && runtime < 300.0;
    Ok((
        pass,
        format!(
            "slopes: linear {:.4}, NLS {:.4}, flat oracle {:.4} (runtime {runtime:.1}s)",
            lin.slope, nls.slope, flat.slope
        ),
    ))
}

fn c09_conservation(overrides: &VerifyOverrides) -> Result<(bool, String)> {
    let dt = overrides.conservation_dt.unwrap_or(1e-3);
    // The shared run already integrates with dt = 1e-3 and records the
    // conserved table; an override forces a dedicated (usually failing)
    // run without touching the cached artifacts.
    let (m0, h0, m1, h1) = if overrides.conservation_dt.is_none() {
        let art = nls_artifacts();
        let row0 = art.run.conserved.iter().find(|r| r.0 == 0.0).unwrap();
        let row50 = art
            .run
            .conserved
            .iter()
            .find(|r| (r.0 - 50.0).abs() < 1e-9)
            .unwrap();
        (row0.1, row0.2, row50.1, row50.2)
    } else {
        let grid = XGrid::new(-600.0, 600.0, 4096).unwrap();
        let spec = PotentialSpec::new(Family::GaussianBarrier, 2.0, 1.0, 7.0, grid).unwrap();
        let v = sample_potential(&spec)?;
        let u0 = gaussian_data(&grid, 0.1, 2.0, -10.0, 0.0);
        let cfg = RunConfig {
            dt,
            t_max: 50.0,
            scheme: Scheme::FlatStrang,
            epsilon0: 0.1,
            snapshot_times: vec![0.0, 50.0],
            nonlinearity: true,
        };
        let out = evolve(&u0, &cfg, None, &v, &grid)?;
        let (_, m0, h0) = out.conserved[0];
        let (_, m1, h1) = out.conserved[out.conserved.len() - 1];
        (m0, h0, m1, h1)
    };
    let mass_drift = ((m1 - m0) / m0).abs();
    let h_drift = ((h1 - h0) / h0).abs();
    let pass = mass_drift < 1e-8 && h_drift < 1e-5;
    Ok((
        pass,
        format!("over [0, 50] at dt = {dt}: relative mass drift {mass_drift:.2e}, Hamiltonian drift {h_drift:.2e}"),
    ))
}

fn criterion_times() -> [f64; 4] {
    [25.0, 50.0, 100.0, 200.0]
}

fn c10_cauchy() -> Result<(bool, String)> {
    let art = nls_artifacts();
    let mp = &art.plus_b;
    let idx: Vec<usize> = criterion_times()
        .iter()
        .map(|&t| mp.index_of_time(t).ok_or_else(|| crate::Error::Invalid(format!("missing snapshot {t}"))))
        .collect::<Result<_>>()?;
    let d1 = mp.cauchy_difference(idx[0], idx[1]);
    let d2 = mp.cauchy_difference(idx[1], idx[2]);
    let d3 = mp.cauchy_difference(idx[2], idx[3]);

    // Uncorrected vs corrected phase drift at the spectral peak (either
    // pair component).
    let ti50 = idx[1];
    let ti200 = idx[3];
    let peak = |z: &(Complex64, Complex64)| z.0.norm().max(z.1.norm());
    let j_star = (0..mp.k_pos.len())
        .max_by(|&a, &b| peak(&mp.z[ti50][a]).partial_cmp(&peak(&mp.z[ti50][b])).unwrap())
        .unwrap();
    let second = mp.z[ti50][j_star].1.norm() > mp.z[ti50][j_star].0.norm();
    let comp = |p: &(Complex64, Complex64)| if second { p.1 } else { p.0 };
    let wrap = |x: f64| {
        let mut y = x;
        while y > std::f64::consts::PI {
            y -= std::f64::consts::TAU;
        }
        while y < -std::f64::consts::PI {
            y += std::f64::consts::TAU;
        }
        y
    };
    let drift_f = wrap(comp(&mp.z[ti200][j_star]).arg() - comp(&mp.z[ti50][j_star]).arg()).abs();
    let drift_w = wrap(comp(&mp.w[ti200][j_star]).arg() - comp(&mp.w[ti50][j_star]).arg()).abs();
    let pass = d1 > d2 && d2 > d3 && drift_f >= 2.0 * drift_w;
    Ok((
        pass,
        format!(
            "Cauchy sup_k |W(2t)-W(t)|: {d1:.3e} > {d2:.3e} > {d3:.3e}; phase drift f~ {drift_f:.3} rad vs W {drift_w:.3} rad at k* = {}{:.3}",
            if second { "-" } else { "+" },
            mp.k_pos[j_star]
        ),
    ))
}

fn c11_modulus() -> Result<(bool, String)> {
    let art = nls_artifacts();
    let dp = art.plus.modulus_defect();
    let dm = art.minus.modulus_defect();
    Ok((
        dp < 1e-10 && dm < 1e-10,
        format!("modulus defect: plus {dp:.2e}, minus {dm:.2e}"),
    ))
}

fn c12_negative_structure() -> Result<(bool, String)> {
    let flat = flat_artifacts();
    let art = nls_artifacts();
    // V = 0 limit: S = I, so the conjugated intensity matrix collapses onto
    // the diagonal one at every frequency below the threshold (and beyond).
    let t_ref = 100.0f64;
    let threshold = t_ref.powf(-0.019);
    let ti = art
        .profiles
        .times
        .iter()
        .position(|&t| (t - t_ref).abs() < 1e-6)
        .unwrap();
    let mut worst = 0.0f64;
    for (j, &k) in art.profiles.k_pos().iter().enumerate() {
        if k > threshold {
            continue;
        }
        let z = art.profiles.z_pair(ti, j);
        let (s0, s1) = intensity_matrices(&flat.sd, k, z);
        worst = worst.max(s0.dist(s1));
    }
    Ok((
        worst < 1e-8,
        format!("V=0 limit: max |S1 - S0| = {worst:.2e} below k = |t|^-rho = {threshold:.3}"),
    ))
}

fn c13_ode_vs_pde() -> Result<(bool, String)> {
    let art = nls_artifacts();
    let ph = &art.profiles;
    let n_half = ph.n_half();
    let target_idx = ph.times.iter().position(|&t| (t - 200.0).abs() < 1e-6).unwrap();
    let mismatch = |t_seed: f64| -> Result<f64> {
        let si = ph
            .times
            .iter()
            .position(|&t| (t - t_seed).abs() < 1e-6)
            .ok_or_else(|| crate::Error::Invalid(format!("missing snapshot {t_seed}")))?;
        let seed: Vec<(Complex64, Complex64)> = (0..n_half).map(|j| ph.z_pair(si, j)).collect();
        let out = reduced_ode_evolve(
            &seed,
            ph.k_pos(),
            &art.sd,
            &art.coeffs,
            t_seed,
            200.0,
            0.005,
            &[],
        )?;
        let z_end = out.z.last().unwrap();
        let mut worst = 0.0f64;
        for j in 0..n_half {
            let pde = ph.z_pair(target_idx, j);
            let ode = z_end[j];
            worst = worst.max((pde.0 - ode.0).norm()).max((pde.1 - ode.1).norm());
        }
        Ok(worst)
    };
    let m25 = mismatch(25.0)?;
    let m50 = mismatch(50.0)?;
    Ok((
        m50 < m25,
        format!("sup_k |Z_ode(200) - Z_pde(200)|: seeded at 25 -> {m25:.3e}, at 50 -> {m50:.3e}"),
    ))
}

fn c14_oscillatory() -> Result<(bool, String)> {
    static CELL: OnceLock<OscillatoryCoeffs> = OnceLock::new();
    let coeffs = CELL
        .get_or_init(|| OscillatoryCoeffs::build(100.0, 100.0, 1, 110.0, 200, 0.2, 0.019).unwrap());
    // b is tabulated in its customary normalization, plateau 1/(2 sqrt 2pi).
    let coupling = 0.19947114020071635;
    let mut worst = 0.0f64;
    let mut y = 10.0f64;
    while y <= 100.0 {
        let b = coeffs.b_at(100.0, y);
        worst = worst.max((b - Complex64::new(coupling, 0.0)).norm() * y.sqrt());
        y *= 1.07;
    }
    let odd = coeffs.oddness_defect();
    let pass = worst < 0.75 && odd < 1e-8;
    Ok((
        pass,
        format!("max |b - 1/(2 sqrt 2pi)| sqrt(y) over [10, 100] = {worst:.3}; h oddness {odd:.2e}"),
    ))
}

fn c15_physical() -> Result<(bool, String)> {
    let art = nls_artifacts();
    let ph = &art.profiles;
    let mut scaled = Vec::new();
    for &t in &[50.0, 100.0, 200.0] {
        let ti = ph.times.iter().position(|&s| (s - t).abs() < 1e-6).unwrap();
        let pred = physical_asymptotics(ph, ti, &art.sd, &art.grid);
        let u = &art.run.snapshots[ti].u;
        let window = (2.0 * t * 2.7).min(540.0);
        let mut worst = 0.0f64;
        for (i, &x) in art.grid.points().iter().enumerate() {
            if x.abs() > window {
                continue;
            }
            if let Some(p) = pred[i] {
                worst = worst.max((u[i] - p).norm());
            }
        }
        scaled.push(worst * t.powf(0.3));
    }
    let pass = scaled[1] <= scaled[0] && scaled[2] <= scaled[1];
    Ok((
        pass,
        format!(
            "sup_x |u - prediction| t^0.3 at t = 50, 100, 200: {:.3e}, {:.3e}, {:.3e}",
            scaled[0], scaled[1], scaled[2]
        ),
    ))
}
