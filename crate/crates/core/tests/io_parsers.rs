use std::path::PathBuf;

use proptest::prelude::*;
use qbc_core::channels::BroadcastChannel;
use qbc_core::io::{format_f64, matrix_from_pairs, matrix_to_pairs, parse_dims, parse_state, to_json_string, StateFile};
use qbc_core::protocol::OneShotConfig;
use qbc_core::random::{random_pure_state, stream_rng};
use qbc_core::tensor::Layout;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn dims_examples() {
    let l = parse_dims("A=16,R=2").unwrap();
    assert_eq!(l, Layout::new([("A", 16), ("R", 2)]).unwrap());
    assert_eq!(parse_dims(" A1 = 2 , D=3 ").unwrap().dims(), vec![2, 3]);
    for bad in ["", "A", "A=", "A=x", "=2", "A=2,A=2", "A=0", "A B=2", "A=-1", "A=4096,B=4096"] {
        assert!(parse_dims(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn state_examples() {
    let bell = r#"{"factors":[{"label":"A","dim":2},{"label":"R","dim":2}],"amplitudes":[[1,0],[0,0],[0,0],[1,0]]}"#;
    let psi = parse_state(bell).unwrap();
    assert!((psi.amplitudes()[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    for bad in [
        r#"{"factors":[{"label":"A","dim":2}],"amplitudes":[[1,0]]}"#,
        r#"{"factors":[{"label":"A","dim":2}],"amplitudes":[[0,0],[0,0]]}"#,
        r#"{"factors":[{"label":"A","dim":2}],"amplitudes":[[1,0],[0,0]],"extra":1}"#,
        r#"{"factors":[{"label":"","dim":1}],"amplitudes":[[1,0]]}"#,
        r#"{"factors":[{"label":"A","dim":1},{"label":"A","dim":1}],"amplitudes":[[1,0]]}"#,
        r#"{"factors":[{"label":"A","dim":1}],"amplitudes":[[1,0,0]]}"#,
        "not json",
    ] {
        assert!(parse_state(bad).is_err(), "{bad}");
    }
}

#[test]
fn matrix_pairs_round_trip() {
    let psi = random_pure_state(Layout::single("A", 6).unwrap(), &mut stream_rng(1, 0)).unwrap();
    let m = psi.to_density().matrix().clone();
    assert_eq!(matrix_from_pairs(&matrix_to_pairs(&m)).unwrap(), m);
    assert!(matrix_from_pairs(&[]).is_err());
    assert!(matrix_from_pairs(&[vec![[1.0, 0.0]], vec![]]).is_err());
    assert!(matrix_from_pairs(&[vec![[f64::NAN, 0.0]]]).is_err());
}

#[test]
fn json_writer_uses_fixed_precision() {
    assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(format_f64(f64::INFINITY), "null");
    let text = to_json_string(&serde_json::json!({"x": 0.5, "n": 3, "v": [1.0, -2.5], "s": "a\"b"})).unwrap();
    let back: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back["x"], 0.5);
    assert_eq!(back["n"], 3);
    assert_eq!(back["v"][1], -2.5);
    assert_eq!(back["s"], "a\"b");
    assert!(text.contains("5.0000000000000000e-1"));
}

#[test]
fn channel_seeds_replay() {
    for (name, text) in corpus("channel_json") {
        let ch = BroadcastChannel::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let back = BroadcastChannel::from_json_str(&serde_json::to_string(&ch.to_file()).unwrap()).unwrap();
        assert_eq!(back.input_dim(), ch.input_dim());
        assert_eq!(back.output_labels(), ch.output_labels());
    }
}

#[test]
fn oneshot_seeds_replay() {
    for (name, text) in corpus("oneshot_config") {
        OneShotConfig::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn state_seeds_replay() {
    for (name, text) in corpus("state_file") {
        let psi = parse_state(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-12);
        let again = StateFile::from_state(&psi).to_state().unwrap();
        assert_eq!(again.layout(), psi.layout());
        assert!((again.amplitudes() - psi.amplitudes()).norm() < 1e-14);
    }
}

#[test]
fn dims_seeds_replay() {
    let results: Vec<bool> = corpus("dims_spec").iter().map(|(_, t)| parse_dims(t).is_ok()).collect();
    assert!(results.iter().any(|&ok| ok) && results.iter().any(|&ok| !ok));
}

proptest! {
    #[test]
    fn dims_never_panic(s in ".{0,40}") {
        let _ = parse_dims(&s);
    }

    #[test]
    fn dims_round_trip(items in prop::collection::vec(("[A-Za-z'][A-Za-z0-9']{0,3}", 1usize..5), 1..4)) {
        let text: Vec<String> = items.iter().map(|(l, d)| format!("{l}={d}")).collect();
        let mut seen = std::collections::HashSet::new();
        let unique = items.iter().all(|(l, _)| seen.insert(l.clone()));
        let parsed = parse_dims(&text.join(","));
        prop_assert_eq!(parsed.is_ok(), unique);
        if let Ok(l) = parsed {
            prop_assert_eq!(l.dims(), items.iter().map(|i| i.1).collect::<Vec<_>>());
        }
    }

    #[test]
    fn state_parser_never_panics(s in "\\PC{0,80}") {
        let _ = parse_state(&s);
        let _ = BroadcastChannel::from_json_str(&s);
        let _ = OneShotConfig::from_json_str(&s);
    }

    #[test]
    fn state_files_round_trip(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5) {
        let psi = random_pure_state(Layout::new([("A", d1), ("B", d2)]).unwrap(), &mut stream_rng(seed, 0)).unwrap();
        let text = serde_json::to_string(&StateFile::from_state(&psi)).unwrap();
        let back = parse_state(&text).unwrap();
        prop_assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-14);
    }
}
