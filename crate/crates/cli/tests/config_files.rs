use proptest::prelude::*;
use qwsim::{DensityMatrix64, FanoMode, Method, Preset, Sampling, SweepVariable};
use qwsim_cli::{load_config, parse_config, serialize, Command, ConfigError, RunConfig};

#[test]
fn preset_expands_to_full_bundle() {
    let c = parse_config("preset = fig2a").unwrap();
    assert_eq!(c.preset, Some(Preset::Fig2a));
    assert_eq!(c.sweep_spec(), Preset::Fig2a.spec());
}

#[test]
fn overriding_k_reproduces_the_opposite_sign_run() {
    let c = parse_config("preset = fig2a\nk = 0.70").unwrap();
    assert_eq!(c.scenario, Preset::Fig2b.spec().base);
    assert_eq!(c.preset, Some(Preset::Fig2a));
}

#[test]
fn negative_rate_is_a_range_error() {
    let e = parse_config("gamma2 = -1").unwrap_err();
    assert!(matches!(&e, ConfigError::Range { key, .. } if key == "gamma2"), "{e}");
}

#[test]
fn line_numbers_are_reported() {
    let text = "# comment\npreset = fig3a\n\nomega43 = 6.0\ntau = ten\n";
    assert_eq!(
        parse_config(text).unwrap_err(),
        ConfigError::Parse { line: 5, message: "`tau` expects a number, got `ten`".into() }
    );
}

#[test]
fn set_overrides_follow_the_file() {
    let c = load_config("k = 0.1\n", None, &["k = 0.2".into()]).unwrap();
    assert_eq!(c.scenario.params.k, 0.2);
    assert!(matches!(load_config("", None, &["nope=1".into()]), Err(ConfigError::UnknownKey { line: 0, .. })));
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        prop::sample::select(Preset::ALL.to_vec()).prop_map(RunConfig::preset),
        prop::option::of(prop::sample::select(vec![Command::Evolve, Command::Sweep, Command::Analyze, Command::Check])),
        (finite(-2.0, 2.0), finite(-2.0, 2.0), finite(0.1, 40.0)),
        prop::array::uniform5(finite(0.0, 3.0)),
        prop::array::uniform6(finite(0.0, 1.0)),
        prop::option::of(0.0f64..=1.0),
        (finite(0.0, 5.0), finite(0.0, 5.0), finite(0.5, 30.0), finite(-50.0, 150.0), finite(-50.0, 150.0)),
        (finite(-30.0, 30.0), finite(-30.0, 30.0), 1usize..=4),
        (
            any::<bool>(),
            finite(1e-5, 1e-1),
            finite(1e-14, 1e-6),
            finite(1e-14, 1e-6),
            finite(-10.0, 10.0),
            finite(1.0, 200.0),
        ),
        (any::<bool>(), 1usize..5000),
        (
            prop::sample::select(vec![
                SweepVariable::DetuningBoth,
                SweepVariable::Epsilon,
                SweepVariable::Splitting,
                SweepVariable::TimeEvolution,
            ]),
            prop::option::of(finite(0.0, 0.4)),
            prop::option::of(finite(0.6, 1.0)),
            prop::option::of(2usize..400),
        ),
    )
        .prop_map(|(mut c, command, (k, q, w), g, d, eps, pulses, (dp, ds, initial), it, sampling, grid)| {
            c.command = command;
            let p = &mut c.scenario.params;
            (p.k, p.q, p.omega43) = (k, q, w);
            (p.gamma31, p.gamma32, p.gamma41, p.gamma42, p.gamma2) = (g[0], g[1], g[2], g[3], g[4]);
            (p.dph12, p.dph13, p.dph14, p.dph23, p.dph24, p.dph34) = (d[0], d[1], d[2], d[3], d[4], d[5]);
            p.fano_mode = eps.map_or(FanoMode::PhysicalEta, FanoMode::TargetEpsilon);
            let pl = &mut c.scenario.pulses;
            (pl.omega_p0, pl.omega_s0, pl.tau, pl.t_p, pl.t_s) = pulses;
            c.scenario.detuning.delta_p = dp;
            c.scenario.detuning.delta_s = ds;
            c.scenario.initial = DensityMatrix64::basis(initial);
            let i = &mut c.scenario.integrator;
            i.method = if it.0 { Method::FixedRk4 } else { Method::AdaptiveRk45 };
            (i.step, i.abs_tol, i.rel_tol, i.t_start) = (it.1, it.2, it.3, it.4);
            i.t_end = it.4 + it.5;
            i.sampling = if sampling.0 { Sampling::Intervals(sampling.1) } else { Sampling::Stride(sampling.1) };
            // Grids inside the time window keep time sweeps valid.
            let (variable, start, end, points) = grid;
            c.sweep = variable;
            c.grid_start = start.map(|s| i.t_start + s * it.5);
            c.grid_end = end.map(|e| i.t_start + e * it.5);
            c.grid_points = points;
            c
        })
        .prop_filter("valid configuration", |c| c.validate().is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn serialize_then_parse_is_identity(c in config()) {
        let text = serialize(&c);
        let back = parse_config(&text);
        prop_assert_eq!(back, Ok(c), "{}", text);
    }
}
