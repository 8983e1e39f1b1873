//! Encoding dumps against checked-in files. Regenerate with
//! `imgidx dump-rope --out tests/golden/rope_default.json` and
//! `imgidx dump-index --out tests/golden/index_n64.json` only after an
//! intentional format change.

use imgidx::commands::{dump_index, dump_rope};
use imgidx::config::FileConfig;
use serde_json::Value;

const ROPE: &str = include_str!("golden/rope_default.json");
const INDEX: &str = include_str!("golden/index_n64.json");

#[test]
fn rope_dump_matches_golden() {
    assert_eq!(dump_rope(&FileConfig::default()).unwrap(), ROPE);
}

#[test]
fn index_table_matches_golden() {
    assert_eq!(dump_index(&FileConfig::default(), 64).unwrap(), INDEX);
}

#[test]
fn rope_golden_hand_entries() {
    let v: Value = serde_json::from_str(ROPE).unwrap();
    assert_eq!(v["head_dim"], 32);
    // Frame axis, 8 channels: 10000^(-2i/8) = 10^-i.
    let frame: Vec<f64> = serde_json::from_value(v["frame"].clone()).unwrap();
    for (i, f) in frame.iter().enumerate() {
        assert!((f - 10f64.powi(-(i as i32))).abs() < 1e-18 + 1e-16 * f);
    }
    // Height axis, 12 channels: 10000^(-6/12) = 0.01, 10000^(-2/12) = 10^(-2/3).
    let height: Vec<f64> = serde_json::from_value(v["height"].clone()).unwrap();
    assert_eq!(height.len(), 6);
    assert_eq!(height[0], 1.0);
    assert!((height[3] - 0.01).abs() < 1e-17);
    assert!((height[1] - 0.215_443_469_003_188_4).abs() < 1e-16);
    assert_eq!(v["width"], v["height"]);
}

#[test]
fn index_golden_hand_entries() {
    let v: Value = serde_json::from_str(INDEX).unwrap();
    let table: Vec<Vec<f64>> = serde_json::from_value(v["table"].clone()).unwrap();
    assert_eq!(table.len(), 64);
    assert!(table.iter().all(|r| r.len() == 32));
    // Image 64 of 64, lowest channel pair: angle 1.
    assert!((table[63][0] - 0.841_470_984_807_896_5).abs() < 1e-16);
    assert!((table[63][1] - 0.540_302_305_868_139_8).abs() < 1e-16);
    // Image 32 of 64: angle 1/2.
    assert!((table[31][0] - 0.479_425_538_604_203).abs() < 1e-16);
    // Highest pair of image 64: angle 10000^(-30/32).
    let a = 10_000f64.powf(-30.0 / 32.0);
    assert!((table[63][30] - a.sin()).abs() < 1e-16);
    for row in &table {
        let sq: f64 = row.iter().map(|x| x * x).sum();
        assert!((sq - 16.0).abs() < 1e-12);
    }
}

#[test]
fn golden_floats_are_canonical() {
    for text in [ROPE, INDEX] {
        for line in text.lines() {
            let t = line.trim().trim_end_matches(',');
            if t.contains('e') && !t.contains('"') {
                let (mant, _) = t.split_once('e').unwrap();
                let digits = mant.trim_start_matches('-').replace('.', "");
                assert_eq!(digits.len(), 17, "{t}");
            }
        }
    }
}
