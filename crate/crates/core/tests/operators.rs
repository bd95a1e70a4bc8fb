use bilevel_core::inversion::add_noise;
use bilevel_core::skyline::{factorizations_on_this_thread, relative_residual};
use bilevel_core::verify::smooth_source;
use bilevel_core::{
    estimate_operator_norm, generate_mesh, run_direct, solve, transfer, Complex, FemSpace, FemSpace64, Field64,
    GeometrySpec64, InverseProblem, InversionConfig64, Mesh64, OperatorPair64, RobinSign, SourceMap, Support,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(h: f64) -> (Mesh64, OperatorPair64) {
    let g = GeometrySpec64::default();
    let m = generate_mesh(&g, h).unwrap();
    let op = OperatorPair64::new(&m, g.wave_number).unwrap();
    (m, op)
}

fn random_source(m: &Mesh64, seed: u64) -> Field64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..m.num_vertices()).map(|_| Complex::new(rng.random_range(-1.0..1.0), 0.0)).collect();
    Field64::new(m, values, Support::Source).unwrap()
}

fn random_observation(m: &Mesh64, seed: u64) -> Field64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values =
        (0..m.num_vertices()).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    Field64::new(m, values, Support::Measurement).unwrap()
}

/// Scales another map by a constant; used to check the norm estimate.
struct Scaled<'a> {
    inner: &'a OperatorPair64,
    c: f64,
}

impl SourceMap<f64> for Scaled<'_> {
    fn space(&self) -> &FemSpace64 {
        self.inner.space()
    }

    fn forward(&self, phi: &Field64) -> bilevel_core::Result<Field64> {
        Ok(self.inner.forward(phi)?.scaled(self.c))
    }

    fn adjoint(&self, v: &Field64) -> bilevel_core::Result<Field64> {
        Ok(self.inner.adjoint(v)?.scaled(self.c))
    }
}

fn dense(m: &bilevel_core::CsrMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for (i, j, v) in m.triplets() {
        d[(i, j)] += v;
    }
    d
}

#[test]
fn forward_solution_converges_on_smooth_source() {
    let g = GeometrySpec64::default();
    let fine = generate_mesh(&g, 0.046).unwrap().with_id(9);
    let op_f = OperatorPair64::new(&fine, g.wave_number).unwrap();
    let phi = |m: &Mesh64| Field64::from_fn(m, Support::Source, |x, y| Complex::new(smooth_source(x, y), 0.0));
    let oracle = op_f.forward(&phi(&fine)).unwrap();

    let (m, op) = setup(0.135);
    let u = op.forward(&phi(&m)).unwrap();
    let reference = transfer(&oracle, &fine, &m).unwrap();
    let rel =
        op.observation_norm(&u.axpy(-1.0, &reference).unwrap()).unwrap() / op.observation_norm(&reference).unwrap();
    assert!(rel < 0.05, "relative deviation {rel}");
}

#[test]
fn factorization_solves_to_tolerance() {
    let g = GeometrySpec64::default();
    let m = generate_mesh(&g, 0.27).unwrap();
    let space = FemSpace::new(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sign in [RobinSign::Forward, RobinSign::Adjoint] {
        let a = space.helmholtz(g.wave_number, sign);
        let b: Vec<_> = (0..m.num_vertices())
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let x = solve(&a, &b).unwrap();
        assert!(relative_residual(&a, &x, &b).unwrap() <= 1e-9);
    }
}

#[test]
fn adjoint_matrix_is_conjugate_of_forward() {
    let g = GeometrySpec64::default();
    let m = generate_mesh(&g, 0.27).unwrap();
    let space = FemSpace::new(&m);
    let a = space.helmholtz(g.wave_number, RobinSign::Forward);
    let b = space.helmholtz(g.wave_number, RobinSign::Adjoint);
    for ((i, j, x), (_, _, y)) in a.triplets().zip(b.triplets()) {
        assert_eq!(x.conj(), y);
        // complex symmetric
        assert_eq!(a.get(j, i), x);
    }
}

#[test]
fn at_most_two_factorizations_per_level() {
    let g = GeometrySpec64::default();
    let data_mesh = generate_mesh(&g, 0.2).unwrap().with_id(50);
    let op = OperatorPair64::new(&data_mesh, g.wave_number).unwrap();
    let truth = Field64::from_fn(&data_mesh, Support::Source, |x, y| Complex::new(smooth_source(x, y), 0.0));
    let (data, delta) = add_noise(op.space(), &op.forward(&truth).unwrap(), 0.1, 1).unwrap();
    let problem = InverseProblem { wave_number: g.wave_number, data_mesh, data, delta, truth: None };
    let cfg = InversionConfig64 { j_max: 25, tau: 1e-3 + 1.0, ..InversionConfig64::default() };
    let before = factorizations_on_this_thread();
    let rec = run_direct(&problem, &cfg, generate_mesh(&g, 0.531).unwrap()).unwrap();
    assert!(rec.history.iterations() >= 1);
    assert_eq!(factorizations_on_this_thread() - before, 2);
}

#[test]
fn noise_realizations_are_nearly_orthogonal() {
    let (m, op) = setup(0.27);
    let y = op.forward(&random_source(&m, 1)).unwrap();
    let (a, delta) = add_noise(op.space(), &y, 0.05, 1).unwrap();
    let (b, _) = add_noise(op.space(), &y, 0.05, 2).unwrap();
    let na = a.axpy(-1.0, &y).unwrap();
    let nb = b.axpy(-1.0, &y).unwrap();
    let inner = op.observation_inner(&na, &nb).unwrap();
    assert!(inner.abs() <= 0.2 * delta * delta, "{inner} vs {}", delta * delta);
}

#[test]
fn rayleigh_quotients_increase() {
    let (_, op) = setup(0.27);
    let est = estimate_operator_norm(&op, 100, 5).unwrap();
    assert!(est.rayleigh.len() >= 2);
    for w in est.rayleigh.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12), "{:?}", est.rayleigh);
    }
    let last = *est.rayleigh.last().unwrap();
    assert!((est.norm * est.norm - last).abs() <= 1e-12 * last);
}

/// Dense oracle: the Gram matrix of `F` in the region-weighted inner
/// products, built with a dense LU solve, gives the singular values of `F`
/// through a generalized symmetric eigenproblem.
#[test]
fn dense_singular_values_match_norm_estimate() {
    let g = GeometrySpec64::default();
    let m = generate_mesh(&g, 0.135).unwrap();
    let space = FemSpace::new(&m);
    let n = m.num_vertices();
    let a = space.helmholtz(g.wave_number, RobinSign::Forward);
    let mut ad = DMatrix::<Complex<f64>>::zeros(n, n);
    for (i, j, v) in a.triplets() {
        ad[(i, j)] += v;
    }
    let m0 = dense(space.mass(Support::Source), n);
    let m1 = dense(space.mass(Support::Measurement), n);
    let src: Vec<usize> = (0..n).filter(|&i| space.mask(Support::Source).unwrap()[i]).collect();
    let obs = space.mask(Support::Measurement).unwrap();
    let s = src.len();
    assert!(s >= 40, "only {s} source dofs");

    let lu = ad.lu();
    let mut cols = DMatrix::<Complex<f64>>::zeros(n, s);
    for (c, &i) in src.iter().enumerate() {
        let rhs = DVector::from_iterator(n, (0..n).map(|p| Complex::new(m0[(p, i)], 0.0)));
        let u = lu.solve(&rhs).unwrap();
        for p in 0..n {
            cols[(p, c)] = if obs[p] { u[p] } else { Complex::new(0.0, 0.0) };
        }
    }
    let m1c = m1.map(|x| Complex::new(x, 0.0));
    let gram = (cols.adjoint() * &m1c * &cols).map(|z| z.re);
    let gram = (&gram + gram.transpose()) * 0.5;
    let m0s = DMatrix::from_fn(s, s, |r, c| m0[(src[r], src[c])]);
    let l = m0s.cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let sym = &linv * gram * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma: Vec<f64> = eig.iter().map(|e| e.max(0.0).sqrt()).collect();

    let op = OperatorPair64::new(&m, g.wave_number).unwrap();
    let est = estimate_operator_norm(&op, 200, 3).unwrap().norm;
    assert!((est - sigma[0]).abs() <= 1e-2 * sigma[0], "estimate {est}, dense {}", sigma[0]);
    assert!(est <= sigma[0] * (1.0 + 1e-9));
    // severely ill-posed: rapid singular value decay
    assert!(sigma[19] < 1e-2 * sigma[0], "sigma_20 / sigma_1 = {}", sigma[19] / sigma[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_is_linear(s1 in 0u64..500, s2 in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (m, op) = setup(0.531);
        let p1 = random_source(&m, s1);
        let p2 = random_source(&m, s2);
        let combo = p1.scaled(a).axpy(b, &p2).unwrap();
        let lhs = op.forward(&combo).unwrap();
        let rhs = op.forward(&p1).unwrap().scaled(a).axpy(b, &op.forward(&p2).unwrap()).unwrap();
        let scale = op.observation_norm(&lhs).unwrap().max(1e-300);
        prop_assert!(op.observation_norm(&lhs.axpy(-1.0, &rhs).unwrap()).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn adjoint_identity_holds(s1 in 0u64..1000, s2 in 0u64..1000, h in 0.2f64..0.6) {
        let (m, op) = setup(h);
        let phi = random_source(&m, s1);
        let v = random_observation(&m, s2 + 7919);
        let lhs = op.observation_inner(&op.forward(&phi).unwrap(), &v).unwrap();
        let rhs = op.source_inner(&phi, &op.adjoint(&v).unwrap()).unwrap();
        let scale = op.source_norm(&phi).unwrap() * op.observation_norm(&v).unwrap();
        let norm = estimate_operator_norm(&op, 30, 1).unwrap().norm;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale * norm, "{lhs} vs {rhs}");
    }

    #[test]
    fn norm_estimate_scales_with_operator(c in -20.0f64..20.0, seed in 0u64..100) {
        prop_assume!(c.abs() > 1e-3);
        let (_, op) = setup(0.531);
        let base = estimate_operator_norm(&op, 40, seed).unwrap().norm;
        let scaled = estimate_operator_norm(&Scaled { inner: &op, c }, 40, seed).unwrap().norm;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * c.abs() * base);
    }
}
