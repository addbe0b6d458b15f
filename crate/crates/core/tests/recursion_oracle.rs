//! Brute-force check of `extend_h`: expand `HG - G gamma(H)` with plain integer
//! polynomials mod `p^cap` and confirm it vanishes below `x^k`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wach_core::deform::{alpha, extend_h};
use wach_core::padics::{PadicElt, PadicParams};
use wach_core::series::{Actions, Mat2, MatrixSeries};

type M = [[BigInt; 2]; 2];
type Poly = Vec<M>;

fn zero() -> M {
    Default::default()
}

fn mmul(a: &M, b: &M) -> M {
    let mut c = zero();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
        }
    }
    c
}

fn madd(a: &M, b: &M) -> M {
    let mut c = zero();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = &a[i][j] + &b[i][j];
        }
    }
    c
}

fn pmul(a: &Poly, b: &Poly, k: usize) -> Poly {
    let mut c = vec![zero(); k];
    for (i, x) in a.iter().enumerate().take(k) {
        for (j, y) in b.iter().enumerate() {
            if i + j < k {
                c[i + j] = madd(&c[i + j], &mmul(x, y));
            }
        }
    }
    c
}

/// Scalar polynomial `((1+x)^chi - 1)^n` truncated at `x^k`.
fn gamma_monomial(chi: u32, n: usize, k: usize) -> Vec<BigInt> {
    let mut base = vec![BigInt::one()];
    for _ in 0..chi {
        let mut next = vec![BigInt::zero(); base.len() + 1];
        for (i, c) in base.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c;
        }
        base = next;
    }
    base[0] = BigInt::zero();
    let mut out = vec![BigInt::zero(); k];
    out[0] = BigInt::one();
    for _ in 0..n {
        let mut next = vec![BigInt::zero(); k];
        for (i, a) in out.iter().enumerate() {
            for (j, b) in base.iter().enumerate() {
                if i + j < k {
                    next[i + j] += a * b;
                }
            }
        }
        out = next;
    }
    out
}

fn gamma_of(h: &Poly, chi: u32, k: usize) -> Poly {
    let mut out = vec![zero(); k];
    for (n, hn) in h.iter().enumerate().take(k) {
        let g = gamma_monomial(chi, n, k);
        for (j, c) in g.iter().enumerate() {
            let mut t = zero();
            for a in 0..2 {
                for b in 0..2 {
                    t[a][b] = c * &hn[a][b];
                }
            }
            out[j] = madd(&out[j], &t);
        }
    }
    out
}

fn vp(x: &BigInt, p: &BigInt, cap: i64) -> i64 {
    if x.is_zero() {
        return cap;
    }
    let mut v = 0;
    let mut y = x.clone();
    while (&y % p).is_zero() && v < cap {
        y /= p;
        v += 1;
    }
    v
}

fn floor_sum(p: i64, r: i64) -> i64 {
    let mut d = p - 1;
    let mut s = 0;
    while d <= r {
        s += r / d;
        d *= p;
    }
    s
}

fn to_int(m: &Mat2) -> M {
    std::array::from_fn(|i| std::array::from_fn(|j| m.get(i, j).residue().clone()))
}

#[test]
fn recursion_matches_brute_force() {
    let p = 3i64;
    let pb = BigInt::from(p);
    let chi = 2u32;
    let mut rng = ChaCha8Rng::seed_from_u64(20240531);
    let params = PadicParams::new(3, 1, 40).unwrap();
    let mut checked = 0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=8usize);
        let m = rng.gen_range(1..=2i64);
        let n = k + 2;
        let floor0 = floor_sum(p, k as i64 - 1) + m;
        let mut rand_mat = |scale: i64| {
            let v: [i64; 4] = [0; 4].map(|_| rng.gen_range(-40..40));
            let s = num_traits::pow(BigInt::from(p), scale as usize);
            Mat2::from_ints(&params, [[v[0], v[1]], [v[2], v[3]]]).scale(&PadicElt::from_int(&params, s))
        };
        let h0 = rand_mat(floor0);
        let mut g = MatrixSeries::identity(&params, n);
        for j in 1..n {
            g.set_coeff(j, &rand_mat(0));
        }
        let table = alpha(&pb, k as i64, &BigInt::from(chi)).unwrap();
        let actions = Actions::new(&params, n, &BigInt::from(chi)).unwrap();
        let (h, _) = extend_h(&h0, &g, k as i64, m, &table, &actions).unwrap();

        let cap = h.min_cap();
        assert!(cap >= 30, "cap {cap}");
        let modulus = num_traits::pow(pb.clone(), cap as usize);
        let hp: Poly = (0..k).map(|r| to_int(&h.coeff(r))).collect();
        let gp: Poly = (0..k).map(|r| to_int(&g.coeff(r))).collect();
        let lhs = pmul(&hp, &gp, k);
        let rhs = pmul(&gp, &gamma_of(&hp, chi, k), k);
        for r in 0..k {
            for a in 0..2 {
                for b in 0..2 {
                    let d = (&lhs[r][a][b] - &rhs[r][a][b]).mod_floor(&modulus);
                    assert!(d.is_zero(), "k={k} order {r}: residual {d}");
                }
            }
            let floor = floor_sum(p, k as i64 - 1) - floor_sum(p, r as i64) + m;
            let v = hp[r].iter().flatten().map(|x| vp(&x.mod_floor(&modulus), &pb, cap)).min().unwrap();
            assert!(v >= floor, "k={k}: v(H_{r}) = {v} < {floor}");
        }
        checked += 1;
    }
    assert_eq!(checked, 100);
}
