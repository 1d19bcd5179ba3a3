use emp_core::{enumerate_minimal, Emp, Pattern, VarianceProfile};
use proptest::prelude::*;

#[test]
fn minimal_counts_for_three_to_eight_nodes() {
    for n in 3..=8 {
        let list = enumerate_minimal(n).unwrap();
        assert_eq!(list.len(), 1 << (n - 2), "n = {n}");
        for (k, p) in list.iter().enumerate() {
            assert!(p.is_minimal());
            assert_eq!(p.cardinality(), n);
            assert_eq!(p.canonical_index(), Some(k));
            assert!(p.is_excited(1) && p.is_measured(n));
        }
    }
}

#[test]
fn four_node_listing() {
    let got: Vec<String> = enumerate_minimal(4).unwrap().iter().map(Pattern::to_string).collect();
    assert_eq!(got, ["B=1;C=2,3,4", "B=1,2;C=3,4", "B=1,3;C=2,4", "B=1,2,3;C=4"]);
    let labels: Vec<_> = enumerate_minimal(4)
        .unwrap()
        .iter()
        .map(|p| p.roman_label().unwrap())
        .collect();
    assert_eq!(labels, ["I", "III", "IV", "II"]);
}

#[test]
fn mirror_is_an_involution_on_the_catalog() {
    for n in 3..=8 {
        let list = enumerate_minimal(n).unwrap();
        for p in &list {
            let m = p.mirror();
            assert!(m.is_minimal());
            assert_eq!(&m.mirror(), p);
            assert!(list.contains(&m));
        }
    }
}

#[test]
fn direct_modules_connect_excited_to_next_measured() {
    for p in enumerate_minimal(6).unwrap() {
        for k in p.direct_modules() {
            assert!(p.is_excited(k) && p.is_measured(k + 1), "{p}: G{k}");
        }
        assert!(!p.direct_modules().is_empty());
    }
}

proptest! {
    #[test]
    fn literal_round_trip(n in 3usize..9, code in any::<u64>()) {
        let list = enumerate_minimal(n).unwrap();
        let p = &list[(code as usize) % list.len()];
        prop_assert_eq!(&Pattern::parse(n, &p.to_string()).unwrap(), p);
    }

    #[test]
    fn mirrored_emp_keeps_pair_snrs(n in 3usize..7, code in any::<u64>(), s in prop::collection::vec(0.01f64..10.0, 14)) {
        let list = enumerate_minimal(n).unwrap();
        let p = list[(code as usize) % list.len()];
        let profile = VarianceProfile::new(s[..n].to_vec(), s[7..7 + n].to_vec()).unwrap();
        let emp = Emp::from_profile(p, &profile).unwrap();
        let m = emp.mirror();
        prop_assert_eq!(m.pattern(), &p.mirror());
        for i in p.excited() {
            for j in p.measured() {
                let a = emp.snr(i, j).unwrap();
                let b = m.snr(n + 1 - j, n + 1 - i).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
        }
        let back = m.mirror();
        for i in p.excited() {
            prop_assert!((back.sigma2(i).unwrap() - emp.sigma2(i).unwrap()).abs() <= 1e-12 * emp.sigma2(i).unwrap());
        }
    }

    #[test]
    fn non_minimal_literals_are_rejected(n in 3usize..7) {
        let all: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
        let lit = format!("B={};C={}", all.join(","), all.join(","));
        prop_assert!(Emp::parse(n, &lit, 1.0, 1.0).map(|e| !e.is_minimal()).unwrap_or(true));
    }
}
