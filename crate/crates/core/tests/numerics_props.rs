#![allow(clippy::needless_range_loop)]

use longseq_core::numerics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;
const SEEDS: u64 = 100;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.5..1.5)).collect()
}

fn random_mask(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mask {
    let mut allowed: Vec<bool> = (0..r * c).map(|_| rng.gen_bool(0.6)).collect();
    for i in 0..r {
        let j = rng.gen_range(0..c);
        allowed[i * c + j] = true;
    }
    Mask::new(r, c, allowed).unwrap()
}

/// Runs the weighted check for one op over `SEEDS` seeds; `build` draws the
/// inputs and the op from the seed's rng.
fn sweep<B>(name: &str, build: B)
where
    B: Fn(
        &mut ChaCha8Rng,
    ) -> (
        Vec<NamedParam>,
        usize,
        Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>>,
    ),
{
    let mut failures = vec![];
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, out_len, f) = build(&mut rng);
        let w = weights(&mut rng, out_len);
        let report = finite_difference_check_weighted(f, &w, &params, H, TOL).unwrap();
        if !report.passed {
            failures.push((seed, report.worst));
        }
    }
    assert!(failures.is_empty(), "{name}: {failures:?}");
}

#[test]
fn matmul_gradients() {
    sweep("matmul", |rng| {
        let (m, k, n) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..6));
        let params = vec![
            NamedParam::new("a", random(rng, m, k)),
            NamedParam::new("b", random(rng, k, n)),
        ];
        (params, m * n, Box::new(|g: &mut Graph, v: &[Var]| g.matmul(v[0], v[1])))
    });
}

#[test]
fn transpose_scale_add_gradients() {
    sweep("transpose/scale/add", |rng| {
        let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let s = rng.gen_range(-2.0..2.0);
        let params = vec![
            NamedParam::new("a", random(rng, m, n)),
            NamedParam::new("b", random(rng, n, m)),
        ];
        (
            params,
            n * m,
            Box::new(move |g: &mut Graph, v: &[Var]| {
                let t = g.transpose(v[0])?;
                let t = g.scale(t, s);
                g.add(t, v[1])
            }),
        )
    });
}

#[test]
fn masked_softmax_gradients() {
    sweep("masked_softmax", |rng| {
        let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..8));
        let mask = random_mask(rng, m, n);
        let params = vec![NamedParam::new("scores", random(rng, m, n))];
        (
            params,
            m * n,
            Box::new(move |g: &mut Graph, v: &[Var]| g.masked_softmax(v[0], &mask)),
        )
    });
}

#[test]
fn avg_pool_rows_gradients() {
    sweep("avg_pool_rows", |rng| {
        let (l, h) = (rng.gen_range(1..12), rng.gen_range(1..4));
        let (kernel, stride) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let out = pooled_len(l, stride) * h;
        let params = vec![NamedParam::new("x", random(rng, l, h))];
        (
            params,
            out,
            Box::new(move |g: &mut Graph, v: &[Var]| g.avg_pool_rows(v[0], kernel, stride)),
        )
    });
}

#[test]
fn select_and_scatter_gradients() {
    sweep("select/scatter", |rng| {
        let (l, h) = (rng.gen_range(2..8), rng.gen_range(1..4));
        let rows: Vec<usize> = (0..rng.gen_range(1..10)).map(|_| rng.gen_range(0..l)).collect();
        let split = rng.gen_range(1..=l);
        let mut order: Vec<usize> = (0..l).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        let (first, second) = (order[..split].to_vec(), order[split..].to_vec());
        let n_rows = rows.len();
        let params = vec![
            NamedParam::new("x", random(rng, l, h)),
            NamedParam::new("y", random(rng, l, h)),
        ];
        (
            params,
            n_rows * h + l * h,
            Box::new(move |g: &mut Graph, v: &[Var]| {
                let picked = g.select_rows(v[0], &rows)?;
                let a = g.select_rows(v[1], &(0..first.len()).collect::<Vec<_>>())?;
                let mut parts = vec![(a, first.clone())];
                if !second.is_empty() {
                    let b = g.select_rows(v[0], &(0..second.len()).collect::<Vec<_>>())?;
                    parts.push((b, second.clone()));
                }
                let scattered = g.scatter_rows(first.len() + second.len(), parts)?;
                // stack both results so one weighted check covers them
                g.scatter_rows(
                    n_rows + l,
                    vec![
                        (picked, (0..n_rows).collect()),
                        (scattered, (n_rows..n_rows + l).collect()),
                    ],
                )
            }),
        )
    });
}

#[test]
fn sum_and_weighted_sum_gradients() {
    sweep("sum/weighted_sum", |rng| {
        let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let w: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let params = vec![NamedParam::new("x", random(rng, m, n))];
        (
            params,
            1,
            Box::new(move |g: &mut Graph, v: &[Var]| {
                let a = g.sum(v[0]);
                let b = g.weighted_sum(v[0], &w)?;
                g.add(a, b)
            }),
        )
    });
}

proptest! {
    #[test]
    fn masked_softmax_is_shift_invariant(
        seed in any::<u64>(),
        m in 1usize..6,
        n in 1usize..10,
        shifts in prop::collection::vec(-50.0f64..50.0, 6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = random(&mut rng, m, n);
        let mask = random_mask(&mut rng, m, n);
        let mut shifted = scores.clone();
        for i in 0..m {
            for j in 0..n {
                if mask.get(i, j) {
                    shifted.data_mut()[i * n + j] += shifts[i];
                }
            }
        }
        let a = masked_softmax(&scores, &mask).unwrap();
        let b = masked_softmax(&shifted, &mask).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn unit_pooling_is_bitwise_identity(seed in any::<u64>(), l in 1usize..20, h in 1usize..5) {
        let x = random(&mut ChaCha8Rng::seed_from_u64(seed), l, h);
        let pooled = avg_pool_rows(&x, 1, 1).unwrap();
        prop_assert_eq!(pooled.data(), x.data());
    }

    #[test]
    fn ops_are_deterministic(seed in any::<u64>(), m in 1usize..6, k in 1usize..6, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, m, k);
        let b = random(&mut rng, k, n);
        let p = matmul(&a, &b).unwrap();
        let p2 = matmul(&a, &b).unwrap();
        prop_assert_eq!(p.data(), p2.data());
        let s = masked_softmax(&p, &Mask::ones(m, n)).unwrap();
        let s2 = masked_softmax(&p, &Mask::ones(m, n)).unwrap();
        prop_assert_eq!(s.data(), s2.data());
    }
}
