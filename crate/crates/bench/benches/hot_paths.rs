use criterion::{criterion_group, criterion_main, Criterion};

use rtf_core::arith::{rat, rat_i};
use rtf_core::cones::{sigma, tau_hat, ParabolicLabel};
use rtf_core::heights::{psi_t_weight_quadrature, AdelicPoint};
use rtf_core::integrals::orbital::orbital_local;
use rtf_core::integrals::zeta::zeta_local_exact;
use rtf_core::integrals::{FiniteLineFn, FinitePlaceFn};
use rtf_core::mat::{torus_diag, Mat2};
use rtf_core::arith::QuadraticCharacter;
use rtf_core::XPoint;

fn bench_cone_grid(c: &mut Criterion) {
    use ParabolicLabel::{B, G};
    let sbg = sigma(B, G).unwrap();
    let th = tau_hat(B, G).unwrap();
    c.bench_function("cone_grid_200", |bench| {
        bench.iter(|| {
            let mut acc = 0i64;
            for i in 0..200 {
                let h = rat(i - 100, 10);
                acc += sbg.at(&h) + th.at(&h);
            }
            acc
        })
    });
}

fn bench_orbital_tree(c: &mut Criterion) {
    let eta = XPoint::new(-1, rat_i(3), rat_i(0), rat_i(1), rat_i(-8)).unwrap();
    c.bench_function("orbital_tree_p2_depth6", |bench| {
        bench.iter(|| orbital_local(&FinitePlaceFn::Basic, 2, &eta, 6).unwrap().value)
    });
}

fn bench_local_zeta(c: &mut Criterion) {
    let g = FiniteLineFn {
        p: 3,
        cosets: vec![(rat(1, 3), 2, rat_i(2)), (rat_i(0), 2, rat_i(1)), (rat_i(5), 2, rat(1, 2))],
    };
    let kappa = QuadraticCharacter::new(-3).unwrap();
    c.bench_function("zeta_local_exact_level2", |bench| {
        bench.iter(|| zeta_local_exact(&g, &kappa, 1).unwrap())
    });
}

fn bench_truncation_weight(c: &mut Criterion) {
    let g = Mat2::new(1.0, 0.7, 0.0, 1.0).mul(&torus_diag(1.9));
    let x = AdelicPoint::with_real(g);
    c.bench_function("psi_weight_quadrature", |bench| {
        bench.iter(|| psi_t_weight_quadrature(&x, 4.0))
    });
}

criterion_group!(
    benches,
    bench_cone_grid,
    bench_orbital_tree,
    bench_local_zeta,
    bench_truncation_weight
);
criterion_main!(benches);
