use copula_indep::checkerboard::copula_box_volume;
use copula_indep::metrics::{hellinger_to_uniform, kl_to_uniform, sup_to_independence, tv_to_uniform};
use copula_indep::samplers::sample_null;
use copula_indep::{
    box_index, checkerboard, eta_statistic, frequency_tensor, pseudo_sample, sample_copula_density, subcopula_grid,
    AnalyticCopula, BoxIndex, CopulaSamplerSpec, GridPoint, PseudoSample, RawSample, RngSeed, StatisticKind,
    TiePolicy,
};
use proptest::prelude::*;

fn null_sample(d: usize, n: usize, seed: u64) -> PseudoSample {
    sample_null(d, n, &mut RngSeed::new(seed, 0).rng()).unwrap()
}

/// (d, n, m, seed) with m | n.
fn shapes() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (2usize..=4, 1usize..=12, 2usize..=3, any::<u64>()).prop_map(|(d, k, m, seed)| (d, 6 * k, m, seed))
}

fn raw_data() -> impl Strategy<Value = RawSample> {
    (2usize..=4, 1usize..=8).prop_flat_map(|(d, k)| {
        prop::collection::vec(-50.0f64..50.0, 6 * k * d).prop_map(move |v| RawSample::new(6 * k, d, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volumes_reproduce_counts_exactly((d, n, m, seed) in shapes()) {
        let s = frequency_tensor(&null_sample(d, n, seed), m).unwrap();
        let t = subcopula_grid(&s);
        let mut total = 0.0;
        for b in BoxIndex::all(m, d) {
            let v = t.grid_box_volume(&b).unwrap();
            prop_assert_eq!(v, s.count(&b) as f64 / n as f64);
            total += v;
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_a_subcopula((d, n, m, seed) in shapes()) {
        let t = subcopula_grid(&frequency_tensor(&null_sample(d, n, seed), m).unwrap());
        for g in GridPoint::all(m, d) {
            prop_assert_eq!(t.multilinear_eval(&g.coords()).unwrap(), t.at(&g));
            let idx = g.indices();
            let others_full = |j: usize| idx.iter().enumerate().all(|(i, &k)| i == j || k == m);
            for j in 0..d {
                if others_full(j) {
                    prop_assert_eq!(t.exact_at(&g).unwrap(), (idx[j] as u64 * n as u64 / m as u64, n as u64));
                }
            }
        }
    }

    #[test]
    fn multilinear_eval_is_monotone(
        (d, n, m, seed) in shapes(),
        u in prop::collection::vec(0.0f64..=1.0, 4),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
        axis in 0usize..4,
    ) {
        let t = subcopula_grid(&frequency_tensor(&null_sample(d, n, seed), m).unwrap());
        let axis = axis % d;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut p = u[..d].to_vec();
        p[axis] = lo;
        let v_lo = t.multilinear_eval(&p).unwrap();
        p[axis] = hi;
        let v_hi = t.multilinear_eval(&p).unwrap();
        prop_assert!(v_lo <= v_hi + 1e-15, "{} > {}", v_lo, v_hi);
    }

    #[test]
    fn box_index_partitions_the_cube(u in prop::collection::vec(0.0f64..=1.0, 2..=4), m in 2usize..=3) {
        let b = box_index(&u, m).unwrap();
        for (&x, &i) in u.iter().zip(b.indices()) {
            let lower = (i - 1) as f64 / m as f64;
            let upper = i as f64 / m as f64;
            prop_assert!((x > lower || (i == 1 && x == 0.0)) && x <= upper, "{} not in box {}", x, i);
        }
    }

    #[test]
    fn cube_transform_leaves_ranks_and_eta_unchanged(raw in raw_data()) {
        let cubed = raw.map_values(|x| x * x * x).unwrap();
        let (p, q) = match (pseudo_sample(&raw, TiePolicy::Error), pseudo_sample(&cubed, TiePolicy::Error)) {
            (Ok(p), Ok(q)) => (p, q),
            _ => return Ok(()),
        };
        prop_assert_eq!(&p, &q);
        for kind in StatisticKind::ALL {
            prop_assert_eq!(eta_statistic(&p, kind).unwrap().value, eta_statistic(&q, kind).unwrap().value);
        }
    }

    #[test]
    fn eta_is_axis_symmetric((d, n, _m, seed) in shapes(), shift in 1usize..4) {
        let ps = null_sample(d, n, seed);
        let perm: Vec<usize> = (0..d).map(|j| (j + shift) % d).collect();
        let ranks: Vec<u32> = (0..n).flat_map(|i| perm.iter().map(move |&j| (i, j))).map(|(i, j)| ps.rank(i, j)).collect();
        let permuted = PseudoSample::from_ranks(n, d, ranks).unwrap();
        for kind in StatisticKind::ALL {
            let a = eta_statistic(&ps, kind).unwrap().value;
            let b = eta_statistic(&permuted, kind).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12, "{}: {} vs {}", kind, a, b);
        }
    }

    #[test]
    fn discrepancy_ranges((d, n, m, seed) in shapes()) {
        let s = frequency_tensor(&null_sample(d, n, seed), m).unwrap();
        let f = sample_copula_density(&s);
        let tv = tv_to_uniform(&f);
        let h = hellinger_to_uniform(&f);
        let kl = kl_to_uniform(&f);
        let sup = sup_to_independence(&subcopula_grid(&s));
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((0.0..=1.0).contains(&sup));
        prop_assert!(kl >= 0.0 && kl <= d as f64 * (m as f64).ln() + 1e-12);
    }

    #[test]
    fn spec_text_roundtrip(theta in 1.0f64..20.0, p in 0.0f64..=1.0, d in 2usize..6, rho in -0.2f64..0.95) {
        let specs = [
            CopulaSamplerSpec::archimedean(copula_indep::samplers::ArchimedeanFamily::Gumbel, theta, d).unwrap(),
            CopulaSamplerSpec::frechet_mardia(p).unwrap(),
            CopulaSamplerSpec::gumbel_id_mixture(p, theta).unwrap(),
            CopulaSamplerSpec::student_t_equicorr(d, rho, theta).unwrap(),
        ];
        for spec in specs {
            let text = spec.to_string();
            prop_assert_eq!(text.parse::<CopulaSamplerSpec>().unwrap(), spec.clone());
            let json = serde_json::to_string(&spec).unwrap();
            prop_assert_eq!(serde_json::from_str::<CopulaSamplerSpec>(&json).unwrap(), spec);
        }
    }
}

#[test]
fn uniform_inputs_give_unbiased_box_frequencies() {
    let (d, m, n, reps) = (3, 3, 12, 10_000u64);
    let spec = CopulaSamplerSpec::independence(d).unwrap();
    let target = BoxIndex::new(vec![1, 2, 3], m).unwrap();
    let draws: Vec<f64> = (0..reps)
        .map(|r| {
            let raw = spec.sample(n, RngSeed::new(21, r)).unwrap();
            let ps = pseudo_sample(&raw, TiePolicy::Error).unwrap();
            frequency_tensor(&ps, m).unwrap().frequency(&target)
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - 1.0 / 27.0).abs() < 4.0 * se, "mean {mean}, se {se}");
}

fn built_ins() -> Vec<AnalyticCopula> {
    let mut out = Vec::new();
    for d in 2..=4 {
        out.push(AnalyticCopula::product(d).unwrap());
        out.push(AnalyticCopula::upper_bound(d).unwrap());
    }
    out.push(AnalyticCopula::lower_bound().unwrap());
    out.push(AnalyticCopula::clayton(2.0).unwrap());
    out.push(AnalyticCopula::gumbel(3.0).unwrap());
    out.push(AnalyticCopula::frank(-4.0).unwrap());
    out.push(AnalyticCopula::frechet_mardia(0.3).unwrap());
    out.push(copula_indep::checkerboard::closed_form_c2_bivariate(0.4).unwrap());
    out.push(copula_indep::checkerboard::closed_form_c2_trivariate(0.2).unwrap());
    out
}

#[test]
fn box_volumes_of_built_ins_sum_to_one() {
    for c in built_ins() {
        for m in [2, 3] {
            let total: f64 = BoxIndex::all(m, c.dim()).map(|b| copula_box_volume(&c, &b, m).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{} m={m}: {total}", c.name());
        }
    }
}

fn probe_points(d: usize, per_axis: usize) -> impl Iterator<Item = Vec<f64>> {
    let total = per_axis.pow(d as u32);
    (0..total).map(move |mut k| {
        let mut p = vec![0.0; d];
        for x in p.iter_mut().rev() {
            *x = (k % per_axis) as f64 / (per_axis - 1) as f64;
            k /= per_axis;
        }
        p
    })
}

#[test]
fn checkerboard_is_idempotent() {
    for c in built_ins() {
        for m in [2, 3] {
            let cb = checkerboard(&c, m).unwrap();
            let again = checkerboard(&cb.to_analytic().unwrap(), m).unwrap();
            assert_eq!(again.grid().values(), cb.grid().values(), "{} m={m}", c.name());
            for p in probe_points(c.dim(), 11) {
                assert!((again.eval(&p).unwrap() - cb.eval(&p).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn checkerboard_uniform_error_bound() {
    for c in built_ins() {
        let d = c.dim();
        for m in [2, 3] {
            let cb = checkerboard(&c, m).unwrap();
            let worst = probe_points(d, 51)
                .map(|p| (cb.eval(&p).unwrap() - c.eval(&p).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(worst <= d as f64 / (2 * m) as f64, "{} m={m}: {worst}", c.name());
        }
    }
}
