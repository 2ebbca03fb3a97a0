use impctl_core::semigroup::{propagate_spectral, spectral_decomposition, Propagator};
use impctl_core::{DegenOperator, Grid, ProblemSpec, Scheme, TimeStepping};

fn operator(n: usize, alpha: f64, beta0: f64, beta1: f64) -> DegenOperator {
    let spec = ProblemSpec::new(alpha, beta0, beta1, 0.3, 0.5, 1.0, 0.1).unwrap();
    DegenOperator::assemble(&Grid::new(n).unwrap(), &spec).unwrap()
}

#[test]
fn eigenfields_are_orthonormal_eigenpairs() {
    for (alpha, b0, b1) in [(0.5, 1.0, 1.0), (0.1, 0.0, 1.0), (0.9, -1.0, -2.0)] {
        let op = operator(150, alpha, b0, b1);
        let g = op.grid();
        let sd = spectral_decomposition(&op).unwrap();
        assert!(sd.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(sd.eigenvalues.iter().all(|&l| l < 0.0));
        let scale = sd.eigenvalues.last().unwrap().abs();
        for j in (0..150).step_by(17) {
            let e = &sd.eigenfields[j];
            let mut r = op.apply(e).unwrap();
            r.axpy(-sd.eigenvalues[j], e);
            assert!(g.norm(&r) <= 1e-9 * scale, "mode {j}: residual {}", g.norm(&r));
            for k in (0..150).step_by(23) {
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((g.inner(e, &sd.eigenfields[k]) - expected).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn leading_eigenvalue_converges_under_refinement() {
    let lambda = |n| spectral_decomposition(&operator(n, 0.5, 1.0, 1.0)).unwrap().eigenvalues[0];
    let (a, b, c) = (lambda(100), lambda(200), lambda(400));
    assert!((c - b).abs() < (b - a).abs());
    assert!((c - b).abs() / c.abs() < 1e-2, "{a} {b} {c}");
}

#[test]
fn crank_nicolson_tracks_the_modal_solution() {
    let op = operator(200, 0.5, 1.0, 1.0);
    let g = op.grid();
    let sd = spectral_decomposition(&op).unwrap();
    let mut u0 = sd.eigenfields[0].clone();
    u0.axpy(-0.7, &sd.eigenfields[1]);
    u0.axpy(0.2, &sd.eigenfields[4]);
    let exact = propagate_spectral(&sd, &u0, 0.3).unwrap();
    let mut errors = Vec::new();
    for steps in [300.0, 600.0] {
        let prop = Propagator::new(&op, TimeStepping::new(0.3 / steps, Scheme::CrankNicolson).unwrap()).unwrap();
        let cn = prop.advance(&u0, 0.3).unwrap();
        errors.push(g.norm(&cn.sub(&exact)) / g.norm(&exact));
    }
    assert!(errors[0] < 1e-4);
    let order = (errors[0] / errors[1]).log2();
    assert!((order - 2.0).abs() < 0.2, "observed order {order}");
}
