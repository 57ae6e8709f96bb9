//! Loading and window alignment on small fixture files.

use std::io::Write;
use std::path::PathBuf;

use trendgram::ingest::{
    build_cohort, load_labels, load_observations, read_labels, read_observations, write_labels,
    write_observations, IngestError, LabelRecord, Measure, Observation, DEFAULT_FALSE_ANCHOR,
};
use trendgram::{Label, MetricId};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn loaded() -> (Vec<Observation>, Vec<LabelRecord>) {
    (
        load_observations(fixture("observations.csv")).unwrap(),
        load_labels(fixture("labels.csv"), DEFAULT_FALSE_ANCHOR).unwrap(),
    )
}

#[test]
fn windows_follow_each_anchor() {
    let (obs, labels) = loaded();
    let cohort = build_cohort(&obs, &labels, 10).unwrap();
    let ids: Vec<&str> = cohort.entities.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["r1", "r2", "r3"]);
    let years = |i: usize| cohort.entities[i].series(MetricId::DomesticPapers).years();
    assert_eq!(years(0), 2000..2010);
    assert_eq!(years(1), 2004..2014);
    assert_eq!(years(2), 1998..2008);
    assert_eq!(cohort.entities[1].label, Label::False);
    assert_eq!(cohort.entities[1].anchor_year, 2014);
}

#[test]
fn zero_fill_keeps_in_window_sums() {
    let (obs, labels) = loaded();
    let cohort = build_cohort(&obs, &labels, 10).unwrap();
    for e in &cohort.entities {
        for m in MetricId::ALL {
            let series = e.series(m);
            assert_eq!(series.values.len(), 10);
            let expected: f64 = obs
                .iter()
                .filter(|o| o.entity_id == e.id && o.metric == Measure::Metric(m))
                .filter(|o| series.years().contains(&o.year))
                .map(|o| o.value)
                .sum();
            assert_eq!(
                series.values.iter().sum::<f64>(),
                expected,
                "{} {m:?}",
                e.id
            );
        }
    }
    assert_eq!(
        cohort.entities[0].series(MetricId::DomesticPapers).values,
        [2.0, 0.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 1.0]
    );
}

#[test]
fn unlabeled_entities_are_counted_and_skipped() {
    let (obs, labels) = loaded();
    let cohort = build_cohort(&obs, &labels, 10).unwrap();
    assert_eq!(cohort.skipped_unlabeled, 1);
    assert!(cohort.entities.iter().all(|e| e.id != "r4"));
}

#[test]
fn moving_an_anchor_by_one_year_moves_its_window_by_one_year() {
    let (obs, labels) = loaded();
    let before = build_cohort(&obs, &labels, 10).unwrap();
    let shifted: Vec<LabelRecord> = labels
        .iter()
        .cloned()
        .map(|mut l| {
            l.anchor_year += 1;
            l
        })
        .collect();
    let after = build_cohort(&obs, &shifted, 10).unwrap();
    for (a, b) in before.entities.iter().zip(&after.entities) {
        for m in MetricId::ALL {
            let (sa, sb) = (a.series(m), b.series(m));
            assert_eq!(sb.first_year, sa.first_year + 1);
            assert_eq!(sa.values[1..], sb.values[..9], "{} {m:?}", a.id);
        }
    }
}

#[test]
fn cohort_round_trips_through_csv() {
    let (obs, labels) = loaded();
    let cohort = build_cohort(&obs, &labels, 10).unwrap();
    let mut obs_csv = Vec::new();
    let mut labels_csv = Vec::new();
    write_observations(&cohort, &mut obs_csv).unwrap();
    write_labels(&cohort, &mut labels_csv).unwrap();
    let again = build_cohort(
        &read_observations(obs_csv.as_slice()).unwrap(),
        &read_labels(labels_csv.as_slice(), DEFAULT_FALSE_ANCHOR).unwrap(),
        10,
    )
    .unwrap();
    assert_eq!(again.entities, cohort.entities);
}

fn observations_error(body: &str) -> IngestError {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "entity_id,metric,year,value\n{body}").unwrap();
    load_observations(file.path()).unwrap_err()
}

#[test]
fn bad_observation_files_name_the_line() {
    let e = observations_error("r1,international_papers,2005,3\nr1,international_papers,2005,-2\n");
    assert_eq!(e.to_string(), "negative value at line 3");

    let e = observations_error("r1,international_papers,2005,3\nr2,domestic_papers,2001,1\nr1,international_papers,2005,4\n");
    assert!(
        matches!(
            e,
            IngestError::DuplicateObservation {
                first_line: 2,
                second_line: 4,
                ..
            }
        ),
        "{e}"
    );

    let e = observations_error("r1,h_index,2005,3\n");
    assert!(
        matches!(e, IngestError::UnknownMetric { line: 2, .. }),
        "{e}"
    );

    let e = observations_error("r1,first_author_ratio,2005,130\n");
    assert!(matches!(e, IngestError::RatioOutOfRange { line: 2 }), "{e}");

    let e = observations_error("r1,domestic_papers,twenty,3\n");
    assert!(matches!(e, IngestError::Malformed { line: 2, .. }), "{e}");
}

#[test]
fn bad_label_files_are_rejected() {
    let err = |body: &str| {
        read_labels(
            format!("entity_id,label,anchor_year\n{body}").as_bytes(),
            2014,
        )
        .unwrap_err()
    };
    assert!(err("r3,MAYBE,2010\n").to_string().contains("unknown label"));
    assert!(matches!(
        err("r1,TRUE,\n"),
        IngestError::MissingAnchor { line: 2 }
    ));
    assert!(matches!(
        err("r1,TRUE,2010\nr1,FALSE,\n"),
        IngestError::DuplicateLabel {
            first_line: 2,
            second_line: 3,
            ..
        }
    ));
}

#[test]
fn false_rows_take_the_configured_default_anchor() {
    let labels = read_labels("entity_id,label,anchor_year\nr2,FALSE,\n".as_bytes(), 2012).unwrap();
    assert_eq!(labels[0].anchor_year, 2012);
    assert_eq!(labels[0].label, Label::False);
}
