use std::collections::BTreeSet;

use wifio_core::model::{read_scan_log, write_scan_log};
use wifio_core::synth::{generate, WorldSpec};
use wifio_core::Label;

fn four_hours(seed: u64) -> WorldSpec {
    WorldSpec {
        seed,
        duration_s: 4.0 * 3600.0,
        ..WorldSpec::default()
    }
}

#[test]
fn indoor_share_follows_the_dwell_schedule() {
    let spec = four_hours(1);
    let records = generate(&spec).unwrap();
    let indoor = records
        .iter()
        .filter(|r| r.label == Some(Label::Indoor))
        .count();
    let share = indoor as f64 / records.len() as f64;
    assert!(
        (share - spec.expected_indoor_fraction()).abs() <= 0.05,
        "{share}"
    );
}

#[test]
fn indoor_scans_hear_three_times_more_aps() {
    for seed in 1..9 {
        let records = generate(&four_hours(seed)).unwrap();
        let mean = |label| {
            let v: Vec<usize> = records
                .iter()
                .filter(|r| r.label == Some(label))
                .map(|r| r.readings.len())
                .collect();
            v.iter().sum::<usize>() as f64 / v.len() as f64
        };
        let (indoor, outdoor) = (mean(Label::Indoor), mean(Label::Outdoor));
        assert!(
            indoor >= 3.0 * outdoor,
            "seed {seed}: {indoor} vs {outdoor}"
        );
    }
}

#[test]
fn worlds_with_different_seeds_share_no_aps() {
    let aps = |seed| -> BTreeSet<String> {
        generate(&four_hours(seed))
            .unwrap()
            .iter()
            .flat_map(|r| r.readings.iter().map(|x| x.bssid.as_str().to_string()))
            .collect()
    };
    assert!(aps(1).is_disjoint(&aps(2)));
}

#[test]
fn every_record_is_labelled_and_tagged() {
    let records = generate(&four_hours(5)).unwrap();
    assert!(records
        .iter()
        .all(|r| r.label.is_some() && r.location.is_some()));
    assert!(records.iter().any(|r| r.readings.is_empty()));
    assert!(records
        .windows(2)
        .all(|w| w[1].timestamp_ms - w[0].timestamp_ms == 3000));
}

#[test]
fn scan_log_round_trip() {
    let records = generate(&WorldSpec {
        duration_s: 900.0,
        ..WorldSpec::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_scan_log(&mut buf, &records).unwrap();
    assert_eq!(read_scan_log(&buf[..]).unwrap(), records);
}

#[test]
fn spec_from_config_text() {
    let spec =
        WorldSpec::from_text("# world\nseed = 8\nduration_s = 600\nscan_period_s = 5\n").unwrap();
    let records = generate(&spec).unwrap();
    assert_eq!(records.len(), 120);
}
