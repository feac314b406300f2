use lrlab_core::bounds::{optimize_xi, XiSearch};
use lrlab_core::lattice::enumerate_paths_partial;
use lrlab_core::units::natural_time;
use lrlab_core::{
    enumerate_paths, linspace, new_bound_1d, new_bound_pathsum, path_count_bound, tilde_bound,
    validate_path, BoundCurve, BoundSpec, InteractionTerm, Lattice, OldBound, OneDBound, PathSumBound,
    PathSumOptions, Spin, SpinSystem, TermKind, TipParameters,
};
use proptest::prelude::*;

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// 2‖A‖‖B‖ Σ_γ (2t̃)^L/L!·w(γ) from explicit enumeration.
fn enumerated_sum(sys: &SpinSystem, x: &[usize], y: &[usize], t_ps: f64, max_len: usize, pre: f64) -> f64 {
    let paths = enumerate_paths(x, y, sys.terms(), max_len, u64::MAX).unwrap();
    let tt = 2.0 * natural_time(t_ps);
    let overlap = x.iter().any(|s| y.contains(s));
    let mut sum = if overlap { 1.0 } else { 0.0 };
    for p in &paths {
        let l = p.len();
        sum += (l as f64 * tt.ln() - ln_factorial(l)).exp() * p.weight;
    }
    pre * sum
}

fn disordered_chain(n: usize, spin: Spin, couplings: &[f64]) -> SpinSystem {
    let mut sys = SpinSystem::uniform(Lattice::chain(n).unwrap(), spin);
    for i in 0..n - 1 {
        let j = couplings[i % couplings.len()];
        let t = sys.heisenberg_term(i, i + 1, [j, 0.7 * j, 1.3 * j]).unwrap();
        sys.push(t).unwrap();
    }
    sys
}

fn add_one_body(sys: &mut SpinSystem, k: f64, b: [f64; 3], tip_norm: f64) {
    sys.add_uniform_anisotropy(k).unwrap();
    sys.add_uniform_zeeman(2.0, b).unwrap();
    let tip = TipParameters::with_norm(0, [0.0, 0.0, 1.0], tip_norm, sys.spin(0));
    let t = sys.tip_term(&tip).unwrap();
    sys.push(t).unwrap();
}

#[test]
fn pathsum_agrees_with_enumeration() {
    let sys = disordered_chain(6, Spin::HALF, &[1.0, 0.4, 2.0]);
    let opts = PathSumOptions {
        norm_a: 0.5,
        norm_b: 0.5,
        tol: 1e-30,
        clamp: false,
        ..PathSumOptions::default()
    };
    for (x, y) in [(vec![0], vec![5]), (vec![2], vec![3]), (vec![1, 2], vec![4]), (vec![3], vec![3])] {
        for t in [0.01, 0.05, 0.1] {
            let got = new_bound_pathsum(t, &x, &y, &sys, opts.clone()).unwrap();
            let want = enumerated_sum(&sys, &x, &y, t, 20, 0.5);
            assert!((got - want).abs() <= 1e-10 * want.max(1e-300), "{x:?}->{y:?} t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn pathsum_agrees_with_enumeration_on_square_lattice() {
    let mut sys = SpinSystem::uniform(Lattice::square(3, 2).unwrap(), Spin::HALF);
    sys.add_nearest_neighbor_exchange([1.0; 3]).unwrap();
    let opts = PathSumOptions {
        norm_a: 0.5,
        norm_b: 0.5,
        tol: 1e-30,
        clamp: false,
        ..PathSumOptions::default()
    };
    let got = new_bound_pathsum(0.02, &[0], &[5], &sys, opts).unwrap();
    let want = enumerated_sum(&sys, &[0], &[5], 0.02, 12, 0.5);
    assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
}

#[test]
fn enumerated_paths_replay() {
    let mut sys = SpinSystem::uniform(Lattice::square(3, 3).unwrap(), Spin::ONE);
    sys.add_nearest_neighbor_exchange([1.0; 3]).unwrap();
    add_one_body(&mut sys, 1.0, [0.0, 0.0, 1.0], 1.0);
    let paths = enumerate_paths(&[4], &[0, 8], sys.terms(), 5, 10_000_000).unwrap();
    assert!(!paths.is_empty());
    for p in &paths {
        assert!(validate_path(p, &[4], &[0, 8], sys.terms()));
    }
}

#[test]
fn path_counts_respect_lattice_bound() {
    for (lattice, d, x) in [
        (Lattice::chain(20).unwrap(), 1, 10),
        (Lattice::square(9, 9).unwrap(), 2, 40),
    ] {
        let mut sys = SpinSystem::uniform(lattice, Spin::HALF);
        sys.add_nearest_neighbor_exchange([1.0; 3]).unwrap();
        let all: Vec<usize> = (0..sys.sites()).collect();
        let (paths, complete) = enumerate_paths_partial(&[x], &all, sys.terms(), 8, 100_000_000).unwrap();
        assert!(complete);
        for len in 1..=8u32 {
            let count = paths.iter().filter(|p| p.len() == len as usize).count() as u128;
            assert!(count > 0);
            assert!(count <= path_count_bound(d, len).unwrap().value, "d={d} L={len}: {count}");
        }
    }
}

#[test]
fn shortest_path_is_the_distance() {
    for n in 2..=12 {
        let sys = SpinSystem::heisenberg_chain(n, Spin::HALF, 1.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dist = i.abs_diff(j);
                let paths = enumerate_paths(&[i], &[j], sys.terms(), dist, u64::MAX).unwrap();
                let shortest = paths.iter().map(|p| p.len()).min().unwrap();
                assert_eq!(shortest, dist, "chain {n}, {i}->{j}");
            }
        }
    }
}

fn closed_form_dominates(sys: &SpinSystem, spin: Spin, j: f64) {
    let n = sys.sites();
    let s = spin.value();
    let opts = PathSumOptions {
        norm_a: s,
        norm_b: s,
        ..PathSumOptions::default()
    };
    let dist = n - 1;
    let ps = PathSumBound::new(sys, &[0], &[n - 1], opts).unwrap();
    let closed = OneDBound::new(dist, j, spin, 1).unwrap();
    let horizon = 3.0 * dist as f64 * lrlab_core::HBAR_MEV_PS / (j * s * s * 4.0 * std::f64::consts::E);
    for t in linspace(0.0, horizon, 200) {
        let a = ps.eval(t).unwrap();
        let b = closed.eval(t);
        assert!(a <= b + 1e-12, "n={n} s={spin} t={t}: pathsum {a} > closed form {b}");
    }
}

#[test]
fn pathsum_below_closed_form_for_spin_one_heisenberg() {
    for n in 2..=12 {
        closed_form_dominates(&SpinSystem::heisenberg_chain(n, Spin::ONE, 1.0).unwrap(), Spin::ONE, 1.0);
    }
}

#[test]
fn pathsum_below_closed_form_for_ising_chains() {
    for spin in [Spin::HALF, Spin::ONE, Spin::THREE_HALVES] {
        for n in 2..=12 {
            let mut sys = SpinSystem::uniform(Lattice::chain(n).unwrap(), spin);
            sys.add_nearest_neighbor_exchange([0.0, 0.0, 1.0]).unwrap();
            closed_form_dominates(&sys, spin, 1.0);
        }
    }
}

#[test]
fn spin_half_heisenberg_bond_exceeds_closed_form_weight() {
    // ‖S·S‖ = 3/4 > s² = 1/4, so the path sum outgrows the closed form.
    let sys = SpinSystem::heisenberg_chain(4, Spin::HALF, 1.0).unwrap();
    let opts = PathSumOptions {
        norm_a: 0.5,
        norm_b: 0.5,
        ..PathSumOptions::default()
    };
    let t = 0.05;
    let ps = new_bound_pathsum(t, &[0], &[3], &sys, opts).unwrap();
    let closed = new_bound_1d(t, 3, 1.0, Spin::HALF, 1, true).unwrap();
    assert!(ps > closed);
}

#[test]
fn long_half_chain_xi_optimum() {
    let sys = SpinSystem::heisenberg_chain(100, Spin::HALF, 1.0).unwrap();
    let opt = optimize_xi(&sys, 0, 99, 0.05).unwrap();
    assert_eq!(opt.method, XiSearch::GoldenSection);
    assert!((opt.xi - 1.0).abs() < 0.2, "xi* = {}", opt.xi);
    // d/dξ of (99ξ + ln 0.05)/(96e^ξ) vanishes at ξ = 1 − ln(0.05)/99.
    assert!((opt.xi - (1.0 - 0.05_f64.ln() / 99.0)).abs() < 2e-3);
    assert!((opt.arrival_ps - 0.2424).abs() < 5e-3, "{}", opt.arrival_ps);
}

#[test]
fn xi_optimum_under_uniform_rescaling() {
    let one = SpinSystem::heisenberg_chain(100, Spin::HALF, 1.0).unwrap();
    let two = SpinSystem::heisenberg_chain(100, Spin::HALF, 2.0).unwrap();
    let a = optimize_xi(&one, 0, 99, 0.05).unwrap();
    let b = optimize_xi(&two, 0, 99, 0.05).unwrap();
    assert!((a.xi - b.xi).abs() < 2e-3);
    assert!((a.arrival_ps / b.arrival_ps - 2.0).abs() < 1e-2);
}

#[test]
fn old_bound_reaches_cap_near_quarter_picosecond() {
    let sys = SpinSystem::heisenberg_chain(101, Spin::HALF, 1.0).unwrap();
    let b = OldBound::new(&sys, 0, 100, 1.0).unwrap();
    let t_cap = b.arrival_ps(1.0);
    assert!((t_cap - 0.2522).abs() < 2e-3, "{t_cap}");
}

#[test]
fn one_dimensional_bound_crosses_near_24_ps() {
    let b = OneDBound::new(100, 1.0, Spin::HALF, 1).unwrap();
    let curve = BoundCurve::sample(BoundSpec::OneD(b), &linspace(0.0, 40.0, 401)).unwrap();
    let t = lrlab_core::arrival_time(&curve, 0.05).unwrap().time().unwrap();
    // (e·t̃/100)^100 = 0.1 ⇒ t̃ = 100·0.1^{1/100}/e
    let want = 100.0 * 0.1_f64.powf(0.01) / std::f64::consts::E * lrlab_core::HBAR_MEV_PS;
    assert!((t - want).abs() < 2e-4);
    assert!((t - 23.5).abs() < 0.5);
}

fn chains() -> impl Strategy<Value = (usize, Spin, f64)> {
    (2usize..9, prop_oneof![Just(Spin::HALF), Just(Spin::ONE), Just(Spin::THREE_HALVES)], 0.2f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_body_terms_leave_bounds_bit_identical(
        (n, spin, j) in chains(),
        k in -3.0f64..3.0,
        b in prop::array::uniform3(-5.0f64..5.0),
        tip in 0.1f64..4.0,
        t in 0.0f64..3.0,
    ) {
        let bare = SpinSystem::heisenberg_chain(n, spin, j).unwrap();
        let mut dressed = bare.clone();
        add_one_body(&mut dressed, k, b, tip);
        let s = spin.value();
        let opts = PathSumOptions { norm_a: s, norm_b: s, ..PathSumOptions::default() };
        for (x, y) in [(vec![0], vec![n - 1]), (vec![n / 2], vec![0])] {
            let a = new_bound_pathsum(t, &x, &y, &bare, opts.clone()).unwrap();
            let c = new_bound_pathsum(t, &x, &y, &dressed, opts.clone()).unwrap();
            prop_assert_eq!(a.to_bits(), c.to_bits());
        }
        let a = OneDBound::for_system(&bare, 0, n - 1).unwrap().eval(t);
        let c = OneDBound::for_system(&dressed, 0, n - 1).unwrap().eval(t);
        prop_assert_eq!(a.to_bits(), c.to_bits());
        prop_assert_eq!(a.to_bits(), new_bound_1d(t, n - 1, j, spin, 1, true).unwrap().to_bits());
    }

    #[test]
    fn bound_curves_are_monotone((n, spin, j) in chains(), norm_p in 0.1f64..5.0) {
        let sys = SpinSystem::heisenberg_chain(n, spin, j).unwrap();
        let s = spin.value();
        let times = linspace(0.0, 5.0, 60);
        let specs = vec![
            BoundSpec::Old(OldBound::new(&sys, 0, n - 1, 1.0).unwrap()),
            BoundSpec::PathSum(PathSumBound::new(&sys, &[0], &[n - 1], PathSumOptions { norm_a: s, norm_b: s, ..PathSumOptions::default() }).unwrap()),
            BoundSpec::OneD(OneDBound::new(n - 1, j, spin, 1).unwrap()),
            BoundSpec::Tilde(lrlab_core::TildeBound::new(norm_p, s).unwrap()),
        ];
        for spec in specs {
            let c = BoundCurve::sample(spec, &times).unwrap();
            for w in c.values.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn tilde_curves_order_in_perturbation(t in 0.001f64..20.0) {
        let vals: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&p| tilde_bound(t, p, 1.0).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn custom_many_body_terms_enter_paths(j in 0.1f64..2.0) {
        // A three-site term is a single hyperedge: X={0} reaches Y={2} in one step.
        let mut sys = SpinSystem::uniform(Lattice::chain(3).unwrap(), Spin::HALF);
        let sz = lrlab_core::SpinMatrices::new(Spin::HALF).sz;
        let m = lrlab_core::spin::kron(&lrlab_core::spin::kron(&sz, &sz), &sz);
        let m = faer::Mat::from_fn(8, 8, |r, c| m[(r, c)] * j);
        sys.push(InteractionTerm::new(TermKind::Custom, vec![0, 1, 2], m).unwrap()).unwrap();
        let paths = enumerate_paths(&[0], &[2], sys.terms(), 3, 1000).unwrap();
        prop_assert_eq!(paths[0].len(), 1);
        prop_assert!((paths[0].weight - j / 8.0).abs() < 1e-14);
    }
}
