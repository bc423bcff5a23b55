//! Range semantics checked against a brute-force oracle written from the
//! node-semver rules, over every stable version in 0.0.0..=3.3.3.

use std::cmp::Ordering;

use ans_core::ansname::{
    compare_versions, is_version_compatible, version_negotiation, NameError, SemVer, VersionRange,
};
use proptest::prelude::*;

type Triple = (u64, u64, u64);

fn all_triples() -> Vec<Triple> {
    let mut out = Vec::new();
    for a in 0..=3 {
        for b in 0..=3 {
            for c in 0..=3 {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// Upper bound (exclusive) of `^a.b.c`: bump the leftmost non-zero part.
fn caret_oracle(base: Triple, v: Triple) -> bool {
    let upper = match base {
        (0, 0, c) => (0, 0, c + 1),
        (0, b, _) => (0, b + 1, 0),
        (a, _, _) => (a + 1, 0, 0),
    };
    v >= base && v < upper
}

fn tilde_oracle(base: Triple, v: Triple) -> bool {
    v >= base && v < (base.0, base.1 + 1, 0)
}

fn semver(t: Triple) -> SemVer {
    SemVer::new(t.0, t.1, t.2)
}

#[test]
fn caret_matches_oracle_everywhere() {
    for base in all_triples() {
        let range = format!("^{}.{}.{}", base.0, base.1, base.2);
        for v in all_triples() {
            assert_eq!(
                is_version_compatible(&semver(v), &range).unwrap(),
                caret_oracle(base, v),
                "{v:?} against {range}"
            );
        }
    }
}

#[test]
fn tilde_matches_oracle_everywhere() {
    for base in all_triples() {
        let range = format!("~{}.{}.{}", base.0, base.1, base.2);
        for v in all_triples() {
            assert_eq!(
                is_version_compatible(&semver(v), &range).unwrap(),
                tilde_oracle(base, v),
                "{v:?} against {range}"
            );
        }
    }
}

#[test]
fn exact_and_comparator_ranges_match_oracle() {
    for base in all_triples() {
        let exact = format!("{}.{}.{}", base.0, base.1, base.2);
        let ge = format!(">={exact}");
        let lt = format!("<{exact}");
        for v in all_triples() {
            assert_eq!(is_version_compatible(&semver(v), &exact).unwrap(), v == base);
            assert_eq!(is_version_compatible(&semver(v), &ge).unwrap(), v >= base);
            assert_eq!(is_version_compatible(&semver(v), &lt).unwrap(), v < base);
        }
    }
}

#[test]
fn ordering_of_triples_is_lexicographic() {
    for a in all_triples() {
        for b in all_triples() {
            assert_eq!(compare_versions(&semver(a), &semver(b)), a.cmp(&b));
        }
    }
}

#[test]
fn prereleases_sort_below_their_release() {
    let rc: SemVer = "1.0.0-rc1".parse().unwrap();
    let rel: SemVer = "1.0.0".parse().unwrap();
    assert_eq!(compare_versions(&rc, &rel), Ordering::Less);
    assert_eq!(compare_versions(&rel, &rel), Ordering::Equal);
    assert_eq!(
        compare_versions(&semver((2, 0, 0)), &semver((1, 9, 9))),
        Ordering::Greater
    );

    let chain = [
        "1.0.0-alpha",
        "1.0.0-alpha.1",
        "1.0.0-alpha.beta",
        "1.0.0-beta",
        "1.0.0-beta.2",
        "1.0.0-beta.11",
        "1.0.0-rc.1",
        "1.0.0",
    ];
    for pair in chain.windows(2) {
        let a: SemVer = pair[0].parse().unwrap();
        let b: SemVer = pair[1].parse().unwrap();
        assert_eq!(compare_versions(&a, &b), Ordering::Less, "{} < {}", pair[0], pair[1]);
    }
}

#[test]
fn prereleases_need_an_explicit_opt_in() {
    let rc: SemVer = "1.0.0-rc1".parse().unwrap();
    assert!(!is_version_compatible(&rc, "1.0.0").unwrap());
    assert!(!is_version_compatible(&rc, "^0.9.0").unwrap());
    assert!(is_version_compatible(&rc, ">=1.0.0-rc0").unwrap());
    assert!(is_version_compatible(&rc, "*").unwrap());
    assert!(is_version_compatible(&semver((1, 2, 3)), "*").unwrap());
}

#[test]
fn negotiation_prefers_the_stable_release() {
    let vs: Vec<SemVer> = ["1.0.0-rc1", "1.0.0"].iter().map(|s| s.parse().unwrap()).collect();
    let got = version_negotiation(&vs, &VersionRange::wildcard()).unwrap();
    assert_eq!(got.to_string(), "1.0.0");
    let none: Vec<SemVer> = Vec::new();
    assert_eq!(
        version_negotiation(&none, &VersionRange::wildcard()),
        Err(NameError::IncompatibleVersion)
    );
}

proptest! {
    #[test]
    fn negotiation_picks_the_maximum_satisfying(
        set in proptest::collection::vec((0u64..4, 0u64..4, 0u64..4), 0..10),
        base in (0u64..4, 0u64..4, 0u64..4),
    ) {
        let versions: Vec<SemVer> = set.iter().copied().map(semver).collect();
        let range: VersionRange = format!("^{}.{}.{}", base.0, base.1, base.2).parse().unwrap();
        let expected = set.iter().copied().filter(|v| caret_oracle(base, *v)).max();
        let got = version_negotiation(&versions, &range).ok().map(|v| (v.major, v.minor, v.patch));
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn negotiation_ignores_input_order(mut set in proptest::collection::vec((0u64..4, 0u64..4, 0u64..4), 1..10)) {
        let star = VersionRange::wildcard();
        let a = version_negotiation(&set.iter().copied().map(semver).collect::<Vec<_>>(), &star).unwrap().clone();
        set.reverse();
        let b = version_negotiation(&set.iter().copied().map(semver).collect::<Vec<_>>(), &star).unwrap().clone();
        prop_assert_eq!(a, b);
    }
}
