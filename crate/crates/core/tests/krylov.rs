use fracnls::blocksys::{BlockSystem, DiagonalNonneg};
use fracnls::dense;
use fracnls::fracdiff::coefficients;
use fracnls::krylov::{arnoldi_ritz, gmres, operator, pcg, GmresOptions, LinearOperator, Preconditioner};
use fracnls::precond::build_cnas;
use fracnls::structured::{CirculantKind, ToeplitzSym};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_op(a: DMatrix<f64>) -> impl LinearOperator<f64> {
    let n = a.nrows();
    operator(n, move |x: &[f64], y: &mut [f64]| {
        let v = &a * nalgebra::DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
        Ok(())
    })
}

fn random_matrix(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) / (n as f64).sqrt() + if i == j { shift } else { 0.0 })
}

fn benchmark_system(alpha: f64, m: usize) -> BlockSystem<f64> {
    let h = 40.0 / (m as f64 + 1.0);
    let mu = 0.02 / h.powf(alpha);
    let t = ToeplitzSym::from_coeffs(&coefficients(alpha, m).unwrap(), m, mu).unwrap();
    let d = DiagonalNonneg::new((0..m).map(|j| 0.02 * (-((j as f64 - m as f64 / 2.0) * h / 3.0).powi(2)).exp()).collect())
        .unwrap();
    let f: Vec<f64> = (0..2 * m).map(|j| ((j as f64) * 0.37).sin()).collect();
    BlockSystem::new(t, d, f).unwrap()
}

#[test]
fn gmres_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_matrix(50, 3.0, &mut rng);
    let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let want = dense::solve(&a, &b).unwrap();
    let (x, rep) = gmres(&dense_op(a), None, &b, &GmresOptions::new(1e-13, 100)).unwrap();
    assert!(rep.converged);
    let err = x.iter().zip(&want).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");
}

#[test]
fn basis_stays_orthonormal() {
    let sys = benchmark_system(1.7, 512);
    let a = operator(sys.dim(), |x: &[f64], y: &mut [f64]| sys.apply_r_into(x, y));
    let mut opts = GmresOptions::new(1e-10, 400);
    opts.track_orthogonality = true;
    let (_, rep) = gmres(&a, None, sys.rhs(), &opts).unwrap();
    assert!(rep.iterations > 20);
    let loss = rep.orthogonality_loss.unwrap();
    assert!(loss <= 1e-10, "{loss}");
}

#[test]
fn preconditioning_does_not_change_the_solution() {
    let sys = benchmark_system(1.5, 256);
    let a = operator(sys.dim(), |x: &[f64], y: &mut [f64]| sys.apply_r_into(x, y));
    let opts = GmresOptions::new(1e-12, 2000);
    let (plain, r0) = gmres(&a, None, sys.rhs(), &opts).unwrap();
    let p = build_cnas(sys.toeplitz(), sys.diagonal(), 0.3, CirculantKind::Strang).unwrap();
    let (pre, r1) = gmres(&a, Some(&p as &dyn Preconditioner<f64>), sys.rhs(), &opts).unwrap();
    assert!(r0.converged && r1.converged);
    assert!(r1.iterations < r0.iterations);
    let scale = plain.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = plain.iter().zip(&pre).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-9 * scale, "{err}");
}

#[test]
fn ritz_values_of_block_matrix_lie_on_unit_real_line() {
    let sys = benchmark_system(1.3, 128);
    let a = operator(sys.dim(), |x: &[f64], y: &mut [f64]| sys.apply_r_into(x, y));
    let ritz = arnoldi_ritz(&a, 60, 11).unwrap();
    assert_eq!(ritz.len(), 60);
    for z in ritz {
        assert!((z.re - 1.0).abs() < 1e-8, "{z}");
    }
}

#[test]
fn pcg_matches_dense_on_spd_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_matrix(40, 0.0, &mut rng);
    let a = &g * g.transpose() + DMatrix::identity(40, 40);
    let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let want = dense::solve(&a, &b).unwrap();
    let diag: Vec<f64> = a.diagonal().iter().copied().collect();
    let jacobi = operator(40, move |r: &[f64], z: &mut [f64]| {
        for i in 0..r.len() {
            z[i] = r[i] / diag[i];
        }
        Ok(())
    });
    let op = dense_op(a);
    let out = pcg(&op, &jacobi, &b, 1e-13, 200).unwrap();
    let err = out.x.iter().zip(&want).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_estimates_never_increase(n in 2usize..40, seed in 0u64..10_000, shift in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(n, shift, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, rep) = gmres(&dense_op(a), None, &b, &GmresOptions::new(1e-12, n)).unwrap();
        let h = &rep.residual_history[..=rep.iterations];
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
