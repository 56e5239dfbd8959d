use divdiv_plate::adapt::mark_dorfler;
use proptest::prelude::*;

fn marked_mass(eta: &[f64], m: &[usize]) -> f64 {
    m.iter().map(|&i| eta[i]).sum()
}

proptest! {
    #[test]
    fn bulk_and_minimality(eta in prop::collection::vec(1e-6f64..1.0, 1..200), theta in 0.05f64..0.95) {
        let m = mark_dorfler(&eta, theta);
        let total: f64 = eta.iter().sum();
        prop_assert!(marked_mass(&eta, &m) >= theta * total * (1.0 - 1e-12));
        // dropping the smallest marked indicator breaks the bulk condition
        let smallest = m.iter().map(|&i| eta[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(marked_mass(&eta, &m) - smallest < theta * total);
    }

    #[test]
    fn permutation_invariant(eta in prop::collection::vec(1e-6f64..1.0, 2..100), theta in 0.05f64..0.95, seed in any::<u64>()) {
        let n = eta.len();
        // a permutation from the seed
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<f64> = perm.iter().map(|&p| eta[p]).collect();
        let a = mark_dorfler(&eta, theta);
        let mut b: Vec<usize> = mark_dorfler(&permuted, theta).into_iter().map(|i| perm[i]).collect();
        b.sort_unstable();
        let mut va: Vec<f64> = a.iter().map(|&i| eta[i]).collect();
        let mut vb: Vec<f64> = b.iter().map(|&i| eta[i]).collect();
        va.sort_by(f64::total_cmp);
        vb.sort_by(f64::total_cmp);
        prop_assert_eq!(va, vb);
    }
}
