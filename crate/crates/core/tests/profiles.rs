use lfoc_core::profile::parse_profile;
use lfoc_core::{
    classify, critical_size, generate_synthetic, load_profile, write_profile, AppClass, AppProfile, ClassifierConfig,
    ProfileError,
};
use proptest::prelude::*;

#[test]
fn synthetic_profiles_classify_as_generated() {
    let cfg = ClassifierConfig::default();
    for class in AppClass::ALL {
        for seed in 0..300 {
            let p = generate_synthetic(class, seed, 11);
            assert_eq!(classify(&p, &cfg), class, "{}", p.name());
        }
    }
}

#[test]
fn written_profile_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    for class in AppClass::ALL {
        let p = generate_synthetic(class, 7, 11);
        let path = dir.path().join(format!("{}.csv", p.name()));
        write_profile(&path, &p).unwrap();
        let back = load_profile(&path, 11).unwrap();
        assert_eq!(back, p);
    }
}

#[test]
fn loading_checks_the_way_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    write_profile(&path, &generate_synthetic(AppClass::Sensitive, 1, 8)).unwrap();
    assert!(matches!(
        load_profile(&path, 11),
        Err(ProfileError::RowCountMismatch { .. })
    ));
    assert!(matches!(
        load_profile(dir.path().join("missing.csv"), 11),
        Err(ProfileError::Io { .. })
    ));
}

#[test]
fn noisy_slowdowns_are_clamped() {
    let text = "ways,ipc,slowdown,llcmpkc\n1,1.0,1.2,3\n2,1.1,0.997,2\n";
    let p = parse_profile("noisy", text, Some(2)).unwrap();
    assert_eq!(p.slowdown(), &[1.2, 1.0]);
    let bad = "ways,ipc,slowdown,llcmpkc\n1,1.0,1.2,3\n2,1.1,0.99,2\n";
    assert!(parse_profile("bad", bad, Some(2)).is_err());
}

fn arbitrary_profile() -> impl Strategy<Value = AppProfile> {
    (1usize..=11).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..3.0, n),
            prop::collection::vec(1.0f64..4.0, n),
            prop::collection::vec(0.0f64..50.0, n),
        )
            .prop_map(|(ipc, slowdown, miss)| AppProfile::new("prop", ipc, slowdown, miss).unwrap())
    })
}

proptest! {
    #[test]
    fn csv_round_trip(p in arbitrary_profile()) {
        let text = lfoc_core::profile::profile_to_csv(&p);
        let back = parse_profile("prop", &text, Some(p.nr_ways())).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn classifier_is_total_and_consistent(p in arbitrary_profile()) {
        let cfg = ClassifierConfig::default();
        let class = classify(&p, &cfg);
        let s = p.slowdown();
        let sensitive_hit = s.iter().skip(1).any(|&v| v >= 1.05);
        if class == AppClass::Sensitive {
            prop_assert!(sensitive_hit);
        }
        if class == AppClass::Streaming {
            prop_assert!(s.iter().all(|&v| v < 1.06));
        }
        let crit = critical_size(&p, 1.05);
        prop_assert!(crit >= 1 && crit <= p.nr_ways());
        let expected = s.iter().position(|&v| v < 1.05).map_or(p.nr_ways(), |i| i + 1);
        prop_assert_eq!(crit, expected);
    }

    #[test]
    fn interpolation_hits_integer_points(p in arbitrary_profile(), w in 1usize..=11) {
        let w = w.min(p.nr_ways());
        prop_assert_eq!(p.slowdown_at(w as f64).unwrap(), p.slowdown_with(w));
    }
}
