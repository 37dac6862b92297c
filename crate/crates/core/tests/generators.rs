use packlab_core::generators::*;
use packlab_core::geometry::min_gap;
use proptest::prelude::*;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn box_fraction(c: &packlab_core::geometry::Configuration) -> f64 {
    c.solid_volume() / c.boundary.volume(c.dim).unwrap()
}

#[test]
fn rolling_ballistic_deposit_is_looser_than_physical_packings() {
    let phis: Vec<f64> = (0..4)
        .map(|seed| {
            let c = vold_ballistic(&VoldParams { n: 2000, dim: 3, p_stick: 0.0, lateral: None }, seed).unwrap();
            interior_volume_fraction(&c).unwrap()
        })
        .collect();
    assert!(mean(&phis) < 0.582, "{phis:?}");
}

#[test]
fn mean_fractions_order_sticky_rolling_and_rearranged() {
    let seeds = 0..20u64;
    let sticky: Vec<f64> = seeds
        .clone()
        .map(|s| {
            let c = vold_ballistic(&VoldParams { n: 400, dim: 3, p_stick: 1.0, lateral: None }, s).unwrap();
            interior_volume_fraction(&c).unwrap()
        })
        .collect();
    let rolling: Vec<f64> = seeds
        .clone()
        .map(|s| {
            let c = visscher_bolsterli(&VbParams { n: 400, dim: 3, k_drops: 4, lateral: None }, s).unwrap();
            interior_volume_fraction(&c).unwrap()
        })
        .collect();
    let rearranged: Vec<f64> = seeds
        .map(|s| box_fraction(&jodrey_tory(&JtParams::new(150, 3), s).unwrap()))
        .collect();
    let (a, b, c) = (mean(&sticky), mean(&rolling), mean(&rearranged));
    assert!(a < b && b < c, "{a:.4} {b:.4} {c:.4}");
}

#[test]
fn large_upward_shakes_loosen_the_deposit() {
    let mut small = Vec::new();
    let mut large = Vec::new();
    for seed in 0..4 {
        let base = visscher_bolsterli(&VbParams { n: 1200, dim: 3, k_drops: 1, lateral: None }, seed).unwrap();
        for (sigma, out) in [(0.03, &mut small), (0.3, &mut large)] {
            let p = ShakeParams { sigma_up: sigma, sigma_move: sigma, ..ShakeParams::default() };
            let shaken = shake_redeposit(&base, &p, seed + 100).unwrap().configuration;
            out.push(interior_volume_fraction(&shaken).unwrap());
        }
    }
    assert!(mean(&large) < mean(&small), "{large:?} vs {small:?}");
}

#[test]
fn jodrey_tory_recycling_densifies() {
    let p = JtParams::new(150, 3);
    let mut first = 0.0;
    let mut last = 0.0;
    for seed in 0..4 {
        let mut c = jodrey_tory(&p, seed).unwrap();
        first += box_fraction(&c);
        for _ in 0..3 {
            c = jodrey_tory_from(&c, &p).unwrap();
        }
        assert!(min_gap(&c).unwrap() >= -1e-9);
        last += box_fraction(&c);
    }
    assert!(last > first, "{first} -> {last}");
}

fn small_spec() -> impl Strategy<Value = GeneratorSpec> {
    let n = 2usize..60;
    let dim = 2usize..=3;
    prop_oneof![
        (n.clone(), dim.clone(), 0.05f64..0.3)
            .prop_map(|(n, dim, f)| GeneratorSpec::Rsa(RsaParams { n, dim, region: periodic_box_for(n, dim, f) })),
        (n.clone(), dim.clone(), 0.0f64..=1.0)
            .prop_map(|(n, dim, p_stick)| GeneratorSpec::VoldBallistic(VoldParams { n, dim, p_stick, lateral: None })),
        (n.clone(), dim.clone(), 1usize..5)
            .prop_map(|(n, dim, k_drops)| GeneratorSpec::VisscherBolsterli(VbParams { n, dim, k_drops, lateral: None })),
        (n.clone(), dim.clone()).prop_map(|(n, dim)| GeneratorSpec::BennettCentral(BennettParams {
            n,
            dim,
            seed_cluster: SeedCluster::Simplex
        })),
        (n.clone(), dim.clone())
            .prop_map(|(n, dim)| GeneratorSpec::JodreyTory(JtParams { cycles: 100, ..JtParams::new(n, dim) })),
        (n.clone(), dim.clone()).prop_map(|(n, dim)| GeneratorSpec::LubachevskyStillinger(LsParams {
            max_events: 50_000,
            ..LsParams::new(n, dim)
        })),
        (n, 0.01f64..0.2).prop_map(|(n, s)| GeneratorSpec::ShakeRedeposit(ShakeSpec {
            base: Box::new(GeneratorSpec::VisscherBolsterli(VbParams { n, dim: 3, k_drops: 1, lateral: None })),
            shake: ShakeParams { sigma_up: s, sigma_move: s, collision_threshold: 2000, sweeps: 20 },
        })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn every_generator_is_overlap_free_and_deterministic(spec in small_spec(), seed in any::<u64>()) {
        let a = generate(&spec, seed).map_err(|e| TestCaseError::fail(format!("{spec:?}: {e}")))?;
        prop_assert_eq!(a.len(), spec.n());
        prop_assert!(min_gap(&a).unwrap() >= -1e-9, "{} gap {}", spec.name(), min_gap(&a).unwrap());
        prop_assert_eq!(&a, &generate(&spec, seed).unwrap());
    }
}
