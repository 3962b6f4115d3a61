use std::path::PathBuf;

use greenmono_cli::config::{resolve, Origins};
use greenmono_cli::{Format, RunConfig, Suite};
use greenmono_core::greens::USource;
use greenmono_core::model_manifolds::{ExampleId, WarpProfile};
use greenmono_core::monotonicity::LevelParameter;
use greenmono_core::{ModelSpec, Profile, RadiusGrid};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![prop::num::f64::NORMAL, prop::num::f64::SUBNORMAL, Just(0.0), -10.0f64..10.0]
}

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        finite().prop_map(|c| Profile::Linear { c }),
        (finite(), finite()).prop_map(|(c, a)| Profile::Concave { c, a }),
        finite().prop_map(|k| Profile::Convex { k }),
        Just(Profile::Sinh),
        prop::collection::vec((finite(), finite()), 0..6)
            .prop_map(|v| Profile::Table { r: v.iter().map(|x| x.0).collect(), phi: v.iter().map(|x| x.1).collect() }),
    ]
}

fn manifold() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0usize..9).prop_map(|n| ModelSpec::Euclidean { n }),
        (0usize..9, finite()).prop_map(|(n, c)| ModelSpec::Cone { n, c }),
        (0usize..9, profile()).prop_map(|(n, profile)| ModelSpec::RotSym { n, profile }),
        (0usize..9, finite(), finite(), finite())
            .prop_map(|(n, c, exponent, anisotropy)| ModelSpec::Warped { n, warp: WarpProfile { c, exponent, anisotropy } }),
        finite().prop_map(|length| ModelSpec::ProductR3S1 { length }),
    ]
}

fn u_source() -> impl Strategy<Value = USource> {
    prop_oneof![
        Just(USource::Greens),
        Just(USource::AnalyticRadial),
        Just(USource::Example(ExampleId::ProductU1)),
        Just(USource::Example(ExampleId::ProductU2)),
        Just(USource::Example(ExampleId::ShiftedSphere)),
        Just(USource::Example(ExampleId::RadialU)),
    ]
}

fn grid() -> impl Strategy<Value = RadiusGrid> {
    (1e-6f64..1e2, 1.01f64..1e4, 1.001f64..4.0).prop_map(|(r_min, span, ratio)| RadiusGrid { r_min, r_max: r_min * span, ratio })
}

prop_compose! {
    fn run_config()(
        manifold in prop::option::of(manifold()),
        u_source in prop::option::of(u_source()),
        suite in prop::option::of(prop_oneof![
            Just(Suite::Identities), Just(Suite::Monotone), Just(Suite::Umbilic), Just(Suite::GreensProfile), Just(Suite::All)
        ]),
        betas in prop::option::of(prop::collection::vec(finite(), 0..5)),
        radius_grid in prop::option::of(grid()),
        level_parameter in prop::option::of(prop_oneof![Just(LevelParameter::U), Just(LevelParameter::USquared)]),
        seed in prop::option::of(0u64..=i64::MAX as u64),
        output in prop::option::of("[a-zA-Z0-9_ ./-]{0,20}"),
        format in prop::option::of(prop_oneof![Just(Format::Csv), Just(Format::Json), Just(Format::Both)]),
    ) -> RunConfig {
        RunConfig { manifold, u_source, suite, betas, radius_grid, level_parameter, seed, output: output.map(PathBuf::from), format }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn run_config_round_trips(cfg in run_config()) {
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, cfg, "{}", text);
    }

    #[test]
    fn overlay_prefers_present_keys(a in run_config(), b in run_config()) {
        let m = a.clone().overlay(&b);
        prop_assert_eq!(&m.seed, if b.seed.is_some() { &b.seed } else { &a.seed });
        prop_assert_eq!(&m.manifold, if b.manifold.is_some() { &b.manifold } else { &a.manifold });
        prop_assert_eq!(a.clone().overlay(&RunConfig::default()), a);
    }
}

#[test]
fn manifold_text_and_table_forms() {
    let cfg = RunConfig::from_toml("manifold = \"rotsym:3:0.8\"\n").unwrap();
    assert_eq!(cfg.manifold, Some(ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } }));
    let cfg = RunConfig::from_toml("[manifold]\nkind = \"cone\"\nn = 4\nc = 0.5\n").unwrap();
    assert_eq!(cfg.manifold, Some(ModelSpec::Cone { n: 4, c: 0.5 }));
    // text when it parses back, a table otherwise
    assert!(cfg.to_toml().contains("manifold = \"cone:4:0.5\""));
    let table = ModelSpec::RotSym { n: 3, profile: Profile::Table { r: vec![0.0, 1.0], phi: vec![0.0, 1.0] } };
    let text = RunConfig { manifold: Some(table), ..Default::default() }.to_toml();
    assert!(text.contains("[manifold]"), "{text}");
    let grid = RunConfig::from_toml("[radius_grid]\nr_min = 0.5\nr_max = 8.0\nratio = 2.0\n").unwrap();
    assert_eq!(grid.radius_grid, Some(RadiusGrid { r_min: 0.5, r_max: 8.0, ratio: 2.0 }));
}

#[test]
fn defaults_resolve() {
    let r = resolve(&RunConfig::default(), &Origins::default(), None).unwrap();
    assert_eq!(r.suite, Suite::All);
    assert_eq!(r.spec().to_string(), "rotsym:3:0.8:1");
    assert_eq!(r.u(), USource::Greens);
    assert_eq!(r.betas(), vec![0.5, 1.0, 2.0, 3.0]);
    assert_eq!(r.output, PathBuf::from("greenmono-out"));
    assert_eq!(r.format, Format::Both);
    let env = resolve(&RunConfig::default(), &Origins::default(), Some("elsewhere".into())).unwrap();
    assert_eq!(env.output, PathBuf::from("elsewhere"));

    let product = RunConfig {
        manifold: Some("product_r3_s1:6.2832".parse().unwrap()),
        u_source: Some(USource::Example(ExampleId::ProductU1)),
        ..Default::default()
    };
    let r = resolve(&product, &Origins::default(), None).unwrap();
    assert_eq!(r.level_parameter(), LevelParameter::USquared);
    assert_eq!(r.betas(), vec![2.0 / 3.0, 1.0, 1.5]);
    assert_eq!(r.grid(Suite::Umbilic).r_min, 1e2);
}

#[test]
fn canonical_config_reparses_to_itself() {
    let cfg = RunConfig::from_toml("manifold = \"cone:3:0.9\"\nbetas = [1.0, 2.0]\noutput = \"x\"\n").unwrap();
    let r = resolve(&cfg, &Origins::default(), None).unwrap();
    let canon = r.canonical();
    assert_eq!(canon.output, None);
    let again = resolve(&RunConfig::from_toml(&canon.to_toml()).unwrap(), &Origins::default(), None).unwrap();
    assert_eq!(again.canonical(), canon);
}
