use fracnls::blocksys::{BlockSystem, DiagonalNonneg};
use fracnls::dense;
use fracnls::fracdiff::coefficients;
use fracnls::nass_iter::{
    d_norm, estimate_contraction, lambda_extents, nass_solve, optimal_omega, sigma_at_optimal, sigma_bound,
    ExtentMethod, InnerSolveConfig, NassIteration, NassParams,
};
use fracnls::structured::ToeplitzSym;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(alpha: f64, m: usize, seed: u64) -> BlockSystem<f64> {
    let h = 40.0 / (m as f64 + 1.0);
    let t = ToeplitzSym::from_coeffs(&coefficients(alpha, m).unwrap(), m, 0.02 / h.powf(alpha)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = DiagonalNonneg::new((0..m).map(|_| rng.gen_range(0.0..0.05)).collect()).unwrap();
    let f = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    BlockSystem::new(t, d, f).unwrap()
}

fn t_eigs(t: &ToeplitzSym<f64>) -> Vec<f64> {
    dense::symmetric_eigenvalues(dense::toeplitz_matrix(t))
}

/// Dense `x' = (ωI+𝒟)^{-1} [(ωI-𝒯)(ωI+𝒯)^{-1} ((ωI-𝒟)x + f) + f]`.
fn dense_sweep(sys: &BlockSystem<f64>, omega: f64, x: &[f64]) -> Vec<f64> {
    let m = sys.m();
    let tm = dense::toeplitz_matrix(sys.toeplitz());
    let dm = DMatrix::from_diagonal(&DVector::from_iterator(m, sys.diagonal().as_slice().iter().copied()));
    let id = DMatrix::<f64>::identity(m, m);
    let assemble = |a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(a);
        out.view_mut((0, m), (m, m)).copy_from(b);
        out.view_mut((m, 0), (m, m)).copy_from(c);
        out.view_mut((m, m), (m, m)).copy_from(d);
        out
    };
    let w = &id * omega;
    let t_plus = assemble(&(&id * (omega + 1.0)), &tm, &(-&tm), &(&id * (omega + 1.0)));
    let t_minus = assemble(&(&id * (omega - 1.0)), &(-&tm), &tm, &(&id * (omega - 1.0)));
    let d_plus = assemble(&w, &(-&dm), &dm, &w);
    let d_minus = assemble(&w, &dm, &(-&dm), &w);
    let f = DVector::from_column_slice(sys.rhs());
    let half = t_plus.lu().solve(&(d_minus * DVector::from_column_slice(x) + &f)).unwrap();
    let full = d_plus.lu().solve(&(t_minus * half + f)).unwrap();
    full.as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn sweep_matches_dense_oracle() {
    let sys = system(1.5, 64, 1);
    let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.21).sin()).collect();
    for omega in [0.3, 1.0, 4.0] {
        let it = NassIteration::new(sys.toeplitz(), sys.diagonal(), omega, &InnerSolveConfig::default()).unwrap();
        let (fast, _) = it.sweep(&x, Some(sys.rhs()), 1e-14).unwrap();
        let slow = dense_sweep(&sys, omega, &x);
        assert!(max_diff(&fast, &slow) < 1e-10, "ω={omega}");
    }
}

#[test]
fn solve_matches_dense_solution() {
    let sys = system(1.7, 64, 2);
    let want = dense::solve(&dense::block_matrix(&sys), sys.rhs()).unwrap();
    let lmax = *t_eigs(sys.toeplitz()).last().unwrap();
    let params = NassParams { omega: optimal_omega(lmax).unwrap(), tol: 1e-11, max_iters: 10_000 };
    let (x, rep) = nass_solve(&sys, &InnerSolveConfig::default(), &params, &[0.0; 128]).unwrap();
    assert!(rep.converged);
    assert!(max_diff(&x, &want) < 1e-9);
}

#[test]
fn converges_for_random_shifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for alpha in [1.1, 1.5, 1.9] {
        let sys = system(alpha, 128, 3);
        for _ in 0..20 {
            let omega = 100.0 * (1.0 - rng.gen::<f64>());
            let params = NassParams { omega, tol: 1e-8, max_iters: 100_000 };
            let (_, rep) = nass_solve(&sys, &InnerSolveConfig::default(), &params, &[0.0; 256]).unwrap();
            assert!(rep.converged, "α={alpha} ω={omega}");
        }
    }
}

#[test]
fn errors_contract_in_the_d_norm() {
    let sys = system(1.5, 128, 4);
    let exact = dense::solve(&dense::block_matrix(&sys), sys.rhs()).unwrap();
    let eigs = t_eigs(sys.toeplitz());
    for omega in [0.2, 1.0, 7.0] {
        let sigma = sigma_bound(omega, &eigs).unwrap();
        let it = NassIteration::new(sys.toeplitz(), sys.diagonal(), omega, &InnerSolveConfig::default()).unwrap();
        let mut x = vec![0.0; 256];
        let err = |x: &[f64]| -> Vec<f64> { x.iter().zip(&exact).map(|(a, b)| a - b).collect() };
        let mut prev = d_norm(omega, sys.diagonal().as_slice(), &err(&x));
        for _ in 0..30 {
            x = it.sweep(&x, Some(sys.rhs()), 1e-14).unwrap().0;
            let now = d_norm(omega, sys.diagonal().as_slice(), &err(&x));
            if prev < 1e-10 {
                break;
            }
            assert!(now <= sigma * prev * (1.0 + 1e-9), "ω={omega}: {now} > {sigma} * {prev}");
            prev = now;
        }
    }
}

#[test]
fn contraction_estimate_below_bound() {
    for alpha in [1.1, 1.5, 1.9] {
        for m in [64, 256] {
            let sys = system(alpha, m, 5);
            let eigs = t_eigs(sys.toeplitz());
            let star = optimal_omega(*eigs.last().unwrap()).unwrap();
            for omega in [0.5, 1.0, star, 10.0] {
                let it = NassIteration::new(sys.toeplitz(), sys.diagonal(), omega, &InnerSolveConfig::default())
                    .unwrap();
                let rho = estimate_contraction(&it, 60, 2, 7).unwrap();
                let sigma = sigma_bound(omega, &eigs).unwrap();
                assert!(rho <= sigma + 1e-6, "α={alpha} M={m} ω={omega}: {rho} > {sigma}");
            }
        }
    }
}

#[test]
fn commuting_case_attains_the_bound() {
    // D = δI commutes with every block, so L_ω is normal with spectral radius σ(ω)
    let m = 32;
    let t = ToeplitzSym::from_coeffs(&coefficients(1.5, m).unwrap(), m, 0.5).unwrap();
    let d = DiagonalNonneg::new(vec![0.3; m]).unwrap();
    let eigs = t_eigs(&t);
    for omega in [0.5, 2.0] {
        let it = NassIteration::new(&t, &d, omega, &InnerSolveConfig::default()).unwrap();
        let rho = estimate_contraction(&it, 4000, 1, 3).unwrap();
        let sigma = sigma_bound(omega, &eigs).unwrap();
        assert!((rho - sigma).abs() <= 1e-6, "ω={omega}: {rho} vs {sigma}");
    }
}

#[test]
fn power_extents_match_dense() {
    let sys = system(1.5, 64, 6);
    let (lo_d, hi_d) = lambda_extents(sys.toeplitz(), ExtentMethod::Dense).unwrap();
    let (lo_p, hi_p) = lambda_extents(sys.toeplitz(), ExtentMethod::power()).unwrap();
    assert!(((lo_p - lo_d) / lo_d).abs() <= 1e-5, "{lo_p} vs {lo_d}");
    assert!(((hi_p - hi_d) / hi_d).abs() <= 1e-5, "{hi_p} vs {hi_d}");
    let (lo_g, hi_g) =
        lambda_extents(sys.toeplitz(), ExtentMethod::GershgorinBound { lower_fallback: Some(1e-9) }).unwrap();
    assert!(lo_g <= lo_d && hi_g >= hi_d);
}

proptest! {
    #[test]
    fn optimal_shift_minimizes_extreme_factor(lmax in 0.01f64..200.0, scale in 0.05f64..20.0) {
        let star = optimal_omega(lmax).unwrap();
        let best = sigma_at_optimal(lmax).unwrap();
        let at = sigma_bound(star, &[lmax]).unwrap();
        prop_assert!((at - best).abs() < 1e-12);
        let other = sigma_bound(star * scale, &[lmax]).unwrap();
        prop_assert!(other >= best - 1e-12);
    }

    #[test]
    fn sigma_below_one_and_attained_at_largest(omega in 1e-3f64..1e3, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let s = sigma_bound(omega, &[lo, hi]).unwrap();
        prop_assert!(s < 1.0);
        prop_assert_eq!(s, sigma_bound(omega, &[hi]).unwrap());
    }
}
