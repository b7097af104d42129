use num_complex::Complex64;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resolveq::core::device::{DeviceMode, DeviceRecord, Geometry, Reported};
use resolveq::core::fixtures;
use resolveq::core::spectral::{frequency_grid, synthesize_reflection, Environment, ResonatorParams};
use resolveq::core::{ModeMeasurement, ParticipationRow};
use resolveq::dataio::{self, Input};
use resolveq::ErrorKind;

fn fixture(name: &str) -> Input {
    Input::parse(&format!("fixtures://{name}"))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn bundled_devices_match_builtin_tables() {
    for id in fixtures::device_ids() {
        let loaded = dataio::load_device(&fixture(id)).unwrap();
        let builtin = fixtures::device(id).unwrap();
        assert_eq!(loaded.device_id(), builtin.device_id());
        assert_eq!(loaded.geometry(), builtin.geometry());
        assert_eq!(loaded.modes().len(), builtin.modes().len(), "{id}");
        for (a, b) in loaded.modes().iter().zip(builtin.modes()) {
            assert_eq!(a.measurement.label(), b.measurement.label());
            assert!(rel(a.measurement.q_int(), b.measurement.q_int()) < 1e-12, "{id}");
            assert!(rel(a.measurement.frequency(), b.measurement.frequency()) < 1e-12, "{id}");
            assert_eq!(a.measurement.q_int_rel_sigma(), b.measurement.q_int_rel_sigma(), "{id}");
            for (x, y) in a.participation.as_array().iter().zip(b.participation.as_array()) {
                assert!(rel(*x, y) < 1e-12, "{id}");
            }
        }
        let (ra, rb) = (loaded.reported().unwrap(), builtin.reported().unwrap());
        for (x, y) in ra.iter().zip(rb) {
            assert!(rel(x.value(), y.value()) < 1e-12, "{id}");
        }
    }
}

#[test]
fn f4_rows_in_si() {
    let d = dataio::load_device(&fixture("F4")).unwrap();
    assert_eq!(d.modes().len(), 3);
    let p = d.modes()[0].participation;
    assert!(rel(p.inv_g(), 0.28) < 1e-12);
    assert!(rel(p.p_ma(), 3.8e-6) < 1e-12);
    assert!(rel(p.y_seam(), 2.7e-4) < 1e-12);
    match d.reported().unwrap()[0] {
        Reported::Resolved { value, sigma } => {
            assert!(rel(value, 6.48e-6) < 1e-12);
            assert!(rel(sigma, 0.43e-6) < 1e-12);
        }
        r => panic!("{r:?}"),
    }
}

#[test]
fn e3eb_billion_q_mode() {
    let d = dataio::load_device(&fixture("E3eb")).unwrap();
    let m = d.modes().iter().find(|m| m.measurement.label() == "TE011").unwrap();
    assert!(rel(m.measurement.q_int(), 8.63e8) < 1e-12);
}

#[test]
fn bundled_matrices_and_gap_table() {
    let m = dataio::load_matrix(&fixture("P_FWGMR")).unwrap();
    assert_eq!(m.matrix, fixtures::p_fwgmr());
    assert_eq!(m.eps_y, vec![fixtures::DEFAULT_EPS_Y; 3]);
    assert_eq!(dataio::load_matrix(&fixture("P_ellip")).unwrap().matrix, fixtures::p_ellip());
    let t = dataio::load_gap_table(&fixture("gap_table")).unwrap();
    assert_eq!(t.curves().len(), fixtures::synthetic_gap_table().curves().len());
}

#[test]
fn unknown_fixture_is_rejected() {
    let e = dataio::load_device(&fixture("nope")).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
}

const MINIMAL: &str = r#"{
  "device_id": "X",
  "geometry": "fwgmr",
  "modes": [
    {"label": "A", "freq_ghz": 5.0, "q_int_e6": 10.0, "inv_g_per_ohm": 0.1, "p_ma": 1e-6, "y_seam_per_ohm_m": 1e-4}
  ]
}"#;

#[test]
fn unit_tags_scale_to_si() {
    let d = dataio::device_from_json("t", MINIMAL).unwrap();
    let m = &d.modes()[0].measurement;
    assert_eq!(m.frequency(), 5e9);
    assert_eq!(m.q_int(), 1e7);
    assert_eq!(m.q_int_rel_sigma(), fixtures::DEFAULT_EPS_Y);
    assert!(d.reported().is_none());
}

fn schema_error(text: &str) -> String {
    let e = dataio::device_from_json("t", text).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation, "{e}");
    e.to_string()
}

#[test]
fn schema_violations_are_validation_errors() {
    assert!(schema_error(&MINIMAL.replace("\"freq_ghz\": 5.0, ", "")).contains("unit"));
    let both = MINIMAL.replace("\"freq_ghz\": 5.0", "\"freq_ghz\": 5.0, \"freq_hz\": 5e9");
    assert!(schema_error(&both).contains("exactly one"));
    schema_error(&MINIMAL.replace("\"geometry\": \"fwgmr\"", "\"geometry\": \"round\""));
    schema_error(&MINIMAL.replace("\"p_ma\"", "\"p_mx\""));
    schema_error(&MINIMAL.replace("10.0", "-1.0"));
    schema_error(r#"{"device_id": "X", "geometry": "fwgmr", "modes": []}"#);
    schema_error("{ not json");
}

#[test]
fn parse_errors_carry_position() {
    let msg = schema_error("{\n  \"device_id\": \"X\",\n  oops\n}");
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn saved_fixtures_reload_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for d in fixtures::builtin_fixtures() {
        let path = dir.path().join(format!("{}.json", d.device_id()));
        dataio::save_device(&path, &d).unwrap();
        let back = dataio::load_device(&Input::Path(path)).unwrap();
        assert_eq!(back, d);
    }
}

fn device_strategy() -> impl Strategy<Value = DeviceRecord> {
    let mode = (
        1e8..1e11f64,
        1e3..1e10f64,
        prop::option::of(1e3..1e10f64),
        0.001..0.5f64,
        (1e-4..1.0f64, 0.0..1e-4f64, 0.0..1e-2f64),
    );
    (
        prop::collection::vec(mode, 1..6),
        prop::option::of(1e-6..1e-3f64),
        prop::array::uniform3(prop::option::of((1e-9..1.0f64, 1e-9..1.0f64))),
    )
        .prop_map(|(modes, gap, rep)| {
            let modes = modes
                .into_iter()
                .enumerate()
                .map(|(i, (f, q, qc, eps, (g, p, y)))| {
                    let mut m = ModeMeasurement::new(format!("M{i}"), f, q, eps).unwrap();
                    if let Some(qc) = qc {
                        m = m.with_coupling_q(qc).unwrap();
                    }
                    DeviceMode {
                        measurement: m,
                        participation: ParticipationRow::new(g, p, y).unwrap(),
                    }
                })
                .collect();
            let reported = rep.map(|r| match r {
                Some((v, s)) => Reported::Resolved { value: v, sigma: s },
                None => Reported::Bound(1e-5),
            });
            DeviceRecord::new("R", Geometry::Other, vec!["Al".into()], gap, modes, Some(reported)).unwrap()
        })
}

proptest! {
    #[test]
    fn device_json_round_trip_is_exact(d in device_strategy()) {
        let text = dataio::device_to_json(&d);
        let back = dataio::device_from_json("rt", &text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(dataio::device_to_json(&back), text);
    }
}

#[test]
fn trace_csv_round_trip() {
    let params = ResonatorParams::new(7e9, 2e6, 3e6, 0.1).unwrap();
    let freqs = frequency_grid(7e9, params.q_loaded(), 10.0, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = synthesize_reflection(&params, &Environment::default(), 1e-3, &freqs, &mut rng).unwrap();
    let text = dataio::trace_to_csv(&t);
    let back = dataio::trace_from_csv("t", &text).unwrap();
    assert_eq!(back.frequencies(), t.frequencies());
    assert_eq!(back.s11(), t.s11());
}

#[test]
fn trace_csv_accepts_ghz_and_comments() {
    let mut text = String::from("# comment\nfreq_ghz,re,im\n");
    for k in 0..40 {
        text.push_str(&format!("{},{},0.5\n", 5.0 + k as f64 * 1e-4, 0.25));
    }
    let t = dataio::trace_from_csv("t", &text).unwrap();
    assert_eq!(t.len(), 40);
    assert_eq!(t.frequencies()[0], 5e9);
    assert_eq!(t.s11()[0], Complex64::new(0.25, 0.5));
    let bad = text.replace("0.25", "x");
    assert_eq!(dataio::trace_from_csv("t", &bad).unwrap_err().kind(), ErrorKind::Validation);
}

#[test]
fn losses_and_gap_tables_round_trip() {
    let x = dataio::losses_from_json("l", r#"{"r_s_nohm": 500, "tan_delta": 0.033}"#).unwrap();
    assert!(rel(x.r_s(), 5e-7) < 1e-12);
    assert_eq!(x.r_seam(), 0.0);
    let text = dataio::losses_to_value(&x).to_string();
    assert_eq!(dataio::losses_from_json("l", &text).unwrap(), x);

    let t = fixtures::synthetic_gap_table();
    let text = dataio::gap_table_to_value(&t).to_string();
    let back = dataio::gap_table_from_json("g", &text).unwrap();
    for (a, b) in back.curves().iter().zip(t.curves()) {
        assert_eq!(a.label(), b.label());
        assert!(a.samples().eq(b.samples()));
    }
}

#[test]
fn matrix_eps_overrides() {
    let m = dataio::load_matrix(&fixture("P_FWGMR"))
        .unwrap()
        .with_eps_y(Some(0.1), &[("DFM".into(), 0.2)])
        .unwrap();
    assert_eq!(m.eps_y, vec![0.1, 0.2, 0.1]);
    let e = dataio::load_matrix(&fixture("P_FWGMR"))
        .unwrap()
        .with_eps_y(None, &[("XYZ".into(), 0.2)])
        .unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
}
