use std::fs;
use std::path::Path;

use scrub_core::csv_io::to_csv_bytes;
use scrub_core::gate::{tally_failures, tally_outcomes, validate_submission, GateReference, Outcome, ValidationVerdict};
use scrub_core::provision::{DatasetBundle, DatasetsFile};
use scrub_core::rng::Substream;
use scrub_core::table::{Cell, ColumnKind, ColumnSpec, Table};

fn bundle() -> DatasetBundle {
    let (bundle, recipe) = DatasetsFile::default().build("synthetic-default", Some(7)).unwrap();
    bundle.corrupt(&recipe).unwrap().0
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

fn with_extra_column(t: &Table) -> Table {
    let mut columns = t.columns().to_vec();
    columns.push(ColumnSpec { name: "age_was_missing".into(), kind: ColumnKind::Numeric });
    let rows = t.rows().iter().map(|r| r.iter().cloned().chain([Cell::Number(0.0)]).collect()).collect();
    Table::new(columns, rows, t.index_column().map(String::from)).unwrap()
}

fn with_extra_rows(t: &Table, n: usize) -> Table {
    let idx = t.column_position(t.index_column().unwrap()).unwrap();
    let next = t.index_values().into_iter().max().unwrap() + 1;
    let mut rows = t.rows().to_vec();
    for i in 0..n {
        let mut row = t.rows()[i].clone();
        row[idx] = Cell::Number((next + i as i64) as f64);
        rows.push(row);
    }
    Table::new(t.columns().to_vec(), rows, t.index_column().map(String::from)).unwrap()
}

#[test]
fn crafted_fixtures_get_their_categories() {
    let b = bundle();
    let dirty = b.train_dirty.clone().unwrap();
    let reference = GateReference::for_bundle(&b);
    let dir = tempfile::tempdir().unwrap();
    let index = dirty.index_column().unwrap().to_string();
    let cases = [
        (dir.path().join("nope.csv"), Outcome::DatasetNotFound),
        (write(dir.path(), "added.csv", &to_csv_bytes(&with_extra_column(&dirty))), Outcome::ColumnViolation),
        (write(dir.path(), "noindex.csv", &to_csv_bytes(&dirty.drop_columns(&[index]))), Outcome::Other),
        (write(dir.path(), "rows.csv", &to_csv_bytes(&with_extra_rows(&dirty, 3))), Outcome::Other),
        (write(dir.path(), "same.csv", &to_csv_bytes(&dirty)), Outcome::Accepted),
    ];
    for (path, expected) in cases {
        let v = validate_submission(&path, &reference);
        assert_eq!(v.outcome, expected, "{}: {}", path.display(), v.detail);
    }
}

#[test]
fn added_columns_are_named_and_outrank_other_problems() {
    let b = bundle();
    let dirty = b.train_dirty.clone().unwrap();
    let reference = GateReference::for_bundle(&b);
    let dir = tempfile::tempdir().unwrap();
    // Extra column plus extra rows: the column rule wins.
    let both = with_extra_rows(&with_extra_column(&dirty), 2);
    let v = validate_submission(&write(dir.path(), "both.csv", &to_csv_bytes(&both)), &reference);
    assert_eq!(v.outcome, Outcome::ColumnViolation);
    assert_eq!(v.offending, vec!["age_was_missing".to_string()]);
}

#[test]
fn permitted_edits_pass_and_malformed_files_are_other() {
    let b = bundle();
    let dirty = b.train_dirty.clone().unwrap();
    let reference = GateReference::for_bundle(&b);
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let fewer_rows = dirty.take_rows(&(0..dirty.n_rows()).filter(|r| r % 3 != 0).collect::<Vec<_>>());
    let feature = dirty.columns().iter().find(|c| c.kind == ColumnKind::Categorical).unwrap().name.clone();
    let accepted = [
        write(dir, "fewer_rows.csv", &to_csv_bytes(&fewer_rows)),
        write(dir, "fewer_cols.csv", &to_csv_bytes(&dirty.drop_columns(&[feature]))),
        write(dir, "clean.csv", &to_csv_bytes(&b.train_clean)),
    ];
    for p in accepted {
        assert!(validate_submission(&p, &reference).is_accepted(), "{}", p.display());
    }

    let text = String::from_utf8(to_csv_bytes(&dirty)).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines[0].to_string();
    let target = b.task.target_column.clone();
    let duplicate = format!("{text}{}\n", lines[1]);
    lines.truncate(3);
    let ragged = format!("{}\n{},extra\n", header, lines[1]);
    let no_target = to_csv_bytes(&dirty.drop_columns(&[target]));
    let others: Vec<(&str, Vec<u8>)> = vec![
        ("empty.csv", Vec::new()),
        ("ragged.csv", ragged.into_bytes()),
        ("dup_index.csv", duplicate.into_bytes()),
        ("no_target.csv", no_target),
    ];
    for (name, bytes) in others {
        let v = validate_submission(&write(dir, name, &bytes), &reference);
        assert_eq!(v.outcome, Outcome::Other, "{name}: {}", v.detail);
    }
}

/// Published per-model failure rates, as counts per 10,000 submissions.
const PUBLISHED_ROWS: [(&str, [usize; 3], [f64; 4]); 4] = [
    ("claude-3-5-sonnet", [884, 0, 469], [8.84, 0.00, 4.69, 13.53]),
    ("gemini-2.0-flash-exp", [505, 432, 373], [5.05, 4.32, 3.73, 13.10]),
    ("gpt-4o", [587, 0, 207], [5.87, 0.00, 2.07, 7.94]),
    ("o3-mini", [0, 540, 547], [0.00, 5.40, 5.47, 10.87]),
];

fn outcomes(counts: [usize; 3], n: usize) -> Vec<Outcome> {
    let mut v = Vec::with_capacity(n);
    v.extend(std::iter::repeat_n(Outcome::ColumnViolation, counts[0]));
    v.extend(std::iter::repeat_n(Outcome::DatasetNotFound, counts[1]));
    v.extend(std::iter::repeat_n(Outcome::Other, counts[2]));
    v.resize(n, Outcome::Accepted);
    v
}

#[test]
fn tally_reproduces_the_failure_table_shape() {
    for (model, counts, expected) in PUBLISHED_ROWS {
        let t = tally_outcomes(&outcomes(counts, 10_000));
        assert_eq!([t.column_violation, t.dataset_not_found, t.other, t.total], expected, "{model}");
    }
    // Hand-computed: 88 column violations and 47 others in 1000.
    let verdicts: Vec<ValidationVerdict> = outcomes([88, 0, 47], 1000)
        .into_iter()
        .map(|o| ValidationVerdict { outcome: o, detail: String::new(), offending: Vec::new() })
        .collect();
    let t = tally_failures(&verdicts);
    assert_eq!((t.column_violation, t.dataset_not_found, t.other, t.total), (8.8, 0.0, 4.7, 13.5));
    assert_eq!(tally_outcomes(&[]).submissions, 0);
}

#[test]
fn tally_matches_recount_on_random_outcome_lists() {
    let mut rng = Substream::new(2, "test/tally");
    let all = [Outcome::Accepted, Outcome::ColumnViolation, Outcome::DatasetNotFound, Outcome::Other];
    for _ in 0..500 {
        let n = 1 + rng.below(400) as usize;
        let mut list: Vec<Outcome> = (0..n).map(|_| all[rng.below(4) as usize]).collect();
        let mut counts = [0usize; 4];
        for o in &list {
            counts[all.iter().position(|a| a == o).unwrap()] += 1;
        }
        let t = tally_outcomes(&list);
        // Each percentage is the exact ratio, correctly rounded once.
        let share = |c: usize| (c * 100) as f64 / n as f64;
        assert_eq!(t.submissions, n);
        assert_eq!(t.column_violation, share(counts[1]));
        assert_eq!(t.dataset_not_found, share(counts[2]));
        assert_eq!(t.other, share(counts[3]));
        assert_eq!(t.total, share(n - counts[0]));
        // Order never matters.
        rng.shuffle(&mut list);
        assert_eq!(tally_outcomes(&list), t);
    }
}
