use lrlab_cli::config::{ConfigError, TipStrength, XiChoice};
use lrlab_cli::reproduce::{FIG2_PRESET, FIG3_PRESET};
use lrlab_cli::{parse_config, render_config, ExperimentConfig};
use lrlab_core::{BoundKind, Spin};
use proptest::prelude::*;

fn problems(text: &str) -> Vec<String> {
    match parse_config(text) {
        Err(ConfigError::Invalid(p)) => p.into_iter().map(|p| p.to_string()).collect(),
        other => panic!("expected validation errors, got {other:?}"),
    }
}

fn same_apart_from_defaults(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    a.defaults_applied.clear();
    b.defaults_applied.clear();
    a == b
}

#[test]
fn fig2_preset_parses_and_round_trips() {
    let cfg = parse_config(FIG2_PRESET).unwrap();
    assert_eq!(cfg.system.extent, vec![100]);
    assert_eq!(cfg.system.spins, vec![Spin::HALF, Spin::ONE, Spin::THREE_HALVES]);
    assert_eq!(cfg.system.exchange, [1.0; 3]);
    assert_eq!(cfg.bounds.kinds, vec![BoundKind::OldL, BoundKind::NewB1d]);
    assert_eq!((cfg.bounds.from, cfg.bounds.to), (0, 99));
    let again = parse_config(&render_config(&cfg)).unwrap();
    assert!(same_apart_from_defaults(&cfg, &again));
}

#[test]
fn fig3_preset_parses() {
    let cfg = parse_config(FIG3_PRESET).unwrap();
    assert_eq!(cfg.system.extent, vec![8]);
    assert_eq!(cfg.system.spins, vec![Spin::ONE]);
    assert_eq!(cfg.system.anisotropy, 2.0);
    let tip = cfg.tip.as_ref().unwrap();
    assert_eq!(tip.site, 0);
    assert_eq!(tip.strength, TipStrength::Norms(vec![0.5, 1.0, 2.0, 4.0]));
    assert_eq!(tip.norms(Spin::ONE), vec![0.5, 1.0, 2.0, 4.0]);
    assert_eq!(cfg.observe.sites, vec![7]);
    let again = parse_config(&render_config(&cfg)).unwrap();
    assert!(same_apart_from_defaults(&cfg, &again));
}

#[test]
fn empty_file_lists_every_required_key() {
    let p = problems("");
    for key in ["system.extent", "system.spin", "system.exchange", "time.stop", "time.count"] {
        assert!(p.iter().any(|m| m.starts_with(key)), "{key} missing from {p:?}");
    }
}

#[test]
fn unknown_keys_and_sections_are_rejected() {
    let text = "[system]\nextent = [4]\nspin = 1\nexchange = 1.0\nexchnage = 2.0\n[time]\nstop = 1.0\ncount = 5\n[plot]\nx = 1\n";
    let p = problems(text);
    assert!(p.iter().any(|m| m.starts_with("system.exchnage: unknown key")), "{p:?}");
    assert!(p.iter().any(|m| m.starts_with("plot: unknown section")), "{p:?}");
}

#[test]
fn all_problems_are_reported_at_once() {
    let text = "[system]\nextent = [4]\nspin = 0.7\nexchange = 1.0\n\
                [time]\nstop = -1.0\ncount = 5\n\
                [bounds]\nfrom = 0\nto = 9\nthreshold = 2.0\n";
    let p = problems(text);
    for key in ["system.spin", "time.stop", "bounds.from", "bounds.to", "bounds.threshold"] {
        assert!(p.iter().any(|m| m.starts_with(key)), "{key} missing from {p:?}");
    }
}

#[test]
fn syntax_error_reports_line() {
    let text = "[system]\nextent = [4]\n\nspin = [1,\nexchange = 1.0\n";
    match parse_config(text) {
        Err(ConfigError::Syntax { line, .. }) => assert!((4..=5).contains(&line), "line {line}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn tip_strength_forms_are_exclusive() {
    let base = "[system]\nextent = [4]\nspin = 1\nexchange = 1.0\n[time]\nstop = 1.0\ncount = 5\n";
    let both = format!("{base}[tip]\nnorm = 1.0\nprefactor = 2.0\n");
    assert!(problems(&both).iter().any(|m| m.starts_with("tip:")));

    let raw = format!("{base}[tip]\ncoupling = 2.0\nkappa = 1.0\nheight = 0.5\n");
    let cfg = parse_config(&raw).unwrap();
    let p = &cfg.tip.unwrap().parameters(Spin::ONE)[0];
    assert!((p.prefactor() - 2.0 * (-1.0f64).exp()).abs() < 1e-15);

    let neg = format!("{base}[tip]\nprefactor = -1.0\n");
    assert!(problems(&neg).iter().any(|m| m.contains("negative")));
}

#[test]
fn beta_may_be_infinite_and_excludes_temperature() {
    let base = "[system]\nextent = [4]\nspin = 1\nexchange = 1.0\n[time]\nstop = 1.0\ncount = 5\n";
    let cfg = parse_config(&format!("{base}[thermal]\nbeta = \"inf\"\n")).unwrap();
    assert!(cfg.thermal.beta.is_infinite());
    let again = parse_config(&render_config(&cfg)).unwrap();
    assert!(again.thermal.beta.is_infinite());
    assert!(problems(&format!("{base}[thermal]\nbeta = 1.0\ntemperature = 2.0\n"))
        .iter()
        .any(|m| m.starts_with("thermal")));
}

#[test]
fn defaults_are_named() {
    let cfg = parse_config("[system]\nextent = [3]\nspin = 1\nexchange = 1.0\n[time]\nstop = 1.0\ncount = 5\n").unwrap();
    for key in ["thermal.temperature", "bounds.threshold", "bounds.xi", "observe.epsilon", "observe.method"] {
        assert!(cfg.defaults_applied.iter().any(|d| d.starts_with(key)), "{key}");
    }
    assert_eq!(cfg.bounds.xi, XiChoice::Optimize);
}

fn spin_text() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["\"1/2\"", "1", "\"3/2\"", "2"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_configs_round_trip(
        n in 2usize..40,
        spin in spin_text(),
        j in prop::array::uniform3(-3.0f64..3.0),
        k in -5.0f64..5.0,
        norms in prop::collection::vec(0.0f64..10.0, 1..5),
        temp in 0.0f64..50.0,
        stop in 0.1f64..100.0,
        count in 2usize..5000,
        threshold in 0.001f64..0.999,
        clamp in any::<bool>(),
    ) {
        let norms: Vec<String> = norms.iter().map(|x| format!("{x:?}")).collect();
        let text = format!(
            "[system]\nextent = [{n}]\nspin = {spin}\nexchange = [{:?}, {:?}, {:?}]\nanisotropy = {k:?}\n\
             [tip]\nsite = {n}\nnorm = [{}]\n[thermal]\ntemperature = {temp:?}\n\
             [time]\nstop = {stop:?}\ncount = {count}\n\
             [bounds]\nfrom = 1\nto = {n}\nthreshold = {threshold:?}\nclamp = {clamp}\n",
            j[0], j[1], j[2], norms.join(", ")
        );
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&render_config(&cfg)).unwrap();
        prop_assert!(same_apart_from_defaults(&cfg, &again));
    }
}
