//! Seeded fixtures shared by the integration tests.
#![allow(dead_code)]

use scrub_core::corrupt::{Action, CorruptionRecipe, CorruptionStep};
use scrub_core::predicate::{Comparator, Condition, RowPredicate};
use scrub_core::rng::Substream;
use scrub_core::table::{Cell, ColumnKind, ColumnSpec, Table, DEFAULT_INDEX_COLUMN};

pub fn pick<'a, T>(rng: &mut Substream, items: &'a [T]) -> &'a T {
    &items[rng.below(items.len() as u64) as usize]
}

fn spec(name: &str, kind: ColumnKind) -> ColumnSpec {
    ColumnSpec { name: name.to_string(), kind }
}

fn index_spec() -> ColumnSpec {
    spec(DEFAULT_INDEX_COLUMN, ColumnKind::Numeric)
}

fn table(columns: Vec<ColumnSpec>, rows: Vec<Vec<Cell>>) -> Table {
    Table::new(columns, rows, Some(DEFAULT_INDEX_COLUMN.to_string())).unwrap()
}

fn maybe_missing(rng: &mut Substream, p: f64, cell: Cell) -> Cell {
    if rng.next_f64() < p {
        Cell::Missing
    } else {
        cell
    }
}

pub const WORDS: [&str; 6] = ["red", "green", "blue", "north", "south", "a,b"];

/// Random table: shuffled index, 1-4 numeric and 1-3 categorical columns,
/// roughly 10% missing cells.
pub fn random_table(rng: &mut Substream, n_rows: usize) -> Table {
    let n_num = 1 + rng.below(4) as usize;
    let n_cat = 1 + rng.below(3) as usize;
    let mut columns = vec![index_spec()];
    columns.extend((0..n_num).map(|i| spec(&format!("n{i}"), ColumnKind::Numeric)));
    columns.extend((0..n_cat).map(|i| spec(&format!("c{i}"), ColumnKind::Categorical)));
    let mut ids: Vec<usize> = (0..n_rows).collect();
    rng.shuffle(&mut ids);
    let rows = ids
        .into_iter()
        .map(|id| {
            let mut row = vec![Cell::Number(id as f64)];
            for _ in 0..n_num {
                let v = (rng.uniform(-50.0, 50.0) * 100.0).round() / 100.0;
                row.push(maybe_missing(rng, 0.1, Cell::Number(v)));
            }
            for _ in 0..n_cat {
                let w = pick(rng, &WORDS).to_string();
                row.push(maybe_missing(rng, 0.1, Cell::Text(w)));
            }
            row
        })
        .collect();
    table(columns, rows)
}

fn random_condition(rng: &mut Substream, t: &Table) -> Condition {
    let candidates: Vec<&ColumnSpec> = t.columns().iter().filter(|c| c.name != DEFAULT_INDEX_COLUMN).collect();
    let col = *pick(rng, &candidates);
    if rng.below(8) == 0 {
        return Condition::is_missing(&col.name);
    }
    if col.kind == ColumnKind::Numeric {
        let op = *pick(rng, &[Comparator::Eq, Comparator::Ne, Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge]);
        Condition::new(&col.name, op, rng.uniform(-50.0, 50.0).round())
    } else {
        match rng.below(3) {
            0 => Condition::new(&col.name, *pick(rng, &[Comparator::Eq, Comparator::Ne]), *pick(rng, &WORDS)),
            1 => Condition::one_of(&col.name, [*pick(rng, &WORDS), *pick(rng, &WORDS)]),
            _ => Condition::contains_any(&col.name, &[*pick(rng, &["r", "e", "th", ","])]),
        }
    }
}

/// A random predicate with 0-2 conditions over `t`'s columns.
pub fn random_predicate(rng: &mut Substream, t: &Table) -> RowPredicate {
    let n = rng.below(3);
    (0..n).fold(RowPredicate::all(), |p, _| p.and(random_condition(rng, t)))
}

/// A valid random recipe of 1-5 steps for a table from [`random_table`].
/// Steps may target the same column more than once.
pub fn random_recipe(rng: &mut Substream, t: &Table, seed: u64) -> CorruptionRecipe {
    let numeric: Vec<String> =
        t.columns().iter().filter(|c| c.kind == ColumnKind::Numeric && c.name != DEFAULT_INDEX_COLUMN).map(|c| c.name.clone()).collect();
    let text: Vec<String> = t.columns().iter().filter(|c| c.kind.is_stringly()).map(|c| c.name.clone()).collect();
    let n_steps = 1 + rng.below(5) as usize;
    let mut recipe = CorruptionRecipe::empty(seed);
    recipe.name = format!("random-{seed}");
    for i in 0..n_steps {
        let predicate = random_predicate(rng, t);
        let fraction = *pick(rng, &[1.0, 0.5, 0.3, 0.7, 0.0]);
        let (target, action) = match rng.below(8) {
            0 => (pick(rng, &numeric).clone(), Action::Add { value: rng.uniform(-10.0, 10.0) }),
            1 => (pick(rng, &numeric).clone(), Action::Multiply { value: rng.uniform(0.1, 3.0) }),
            2 => (pick(rng, &numeric).clone(), Action::ResampleRange { lo: -1.0, hi: 1.0 }),
            3 => (pick(rng, &numeric).clone(), Action::ResampleQuantileBand { q_lo: 0.1, q_hi: 0.9 }),
            4 => (
                pick(rng, &numeric).clone(),
                Action::CompoundYearly { key_column: pick(rng, &numeric).clone(), base: 0.0, factor: 1.1, compounding: rng.below(2) == 0 },
            ),
            5 => (pick(rng, &numeric).clone(), Action::SetMissing),
            6 => (pick(rng, &text).clone(), Action::SetMissing),
            _ => (pick(rng, &text).clone(), Action::Replace { value: pick(rng, &WORDS).to_string() }),
        };
        recipe.steps.push(CorruptionStep {
            kind: action.kind(),
            predicate,
            target_column: target,
            fraction,
            action,
            stream_label: format!("step-{i}"),
        });
    }
    recipe
}

const SURNAMES: [&str; 5] = ["Smith", "Brown", "Jones", "Taylor", "Wilson"];
const TITLES: [&str; 7] = ["Mr.", "Mrs.", "Miss.", "Master.", "Dr.", "Lady", "Rev."];

/// 200 rows shaped like the Titanic training file.
pub fn titanic_fixture(seed: u64) -> Table {
    let mut rng = Substream::new(seed, "fixture/titanic");
    let columns = vec![
        index_spec(),
        spec("Survived", ColumnKind::Numeric),
        spec("Pclass", ColumnKind::Numeric),
        spec("Name", ColumnKind::Text),
        spec("Sex", ColumnKind::Categorical),
        spec("Age", ColumnKind::Numeric),
        spec("Fare", ColumnKind::Numeric),
        spec("Embarked", ColumnKind::Categorical),
    ];
    let rows = (0..200)
        .map(|i| {
            let title = *pick(&mut rng, &TITLES);
            let female = matches!(title, "Mrs." | "Miss." | "Lady");
            let name = format!("{}, {} {}", pick(&mut rng, &SURNAMES), title, pick(&mut rng, &["Anna", "John", "Mary"]));
            let age = (rng.uniform(1.0, 80.0) * 2.0).round() / 2.0;
            let port = pick(&mut rng, &["S", "C", "Q"]).to_string();
            vec![
                Cell::Number(i as f64),
                Cell::Number(rng.below(2) as f64),
                Cell::Number(1.0 + rng.below(3) as f64),
                Cell::Text(name),
                Cell::Text(if female { "female" } else { "male" }.into()),
                maybe_missing(&mut rng, 0.2, Cell::Number(age)),
                Cell::Number((rng.uniform(5.0, 300.0) * 10000.0).round() / 10000.0),
                maybe_missing(&mut rng, 0.02, Cell::Text(port)),
            ]
        })
        .collect();
    table(columns, rows)
}

const ENTITIES: [&str; 8] = ["Chad", "Nepal", "Mali", "Italy", "Japan", "Mexico", "France", "Brazil"];

/// 200 rows shaped like the meat consumption table (country by year).
pub fn meat_fixture(seed: u64) -> Table {
    let mut rng = Substream::new(seed, "fixture/meat");
    let mut columns = vec![index_spec(), spec("Entity", ColumnKind::Categorical), spec("Year", ColumnKind::Numeric)];
    for c in scrub_core::corrupt::recipes::MEAT_COLUMNS {
        columns.push(spec(c, ColumnKind::Numeric));
    }
    columns.push(spec("Total", ColumnKind::Numeric));
    let rows = (0..200)
        .map(|i| {
            let mut row = vec![Cell::Text(ENTITIES[i % ENTITIES.len()].into()), Cell::Number(1980.0 + (i / ENTITIES.len()) as f64)];
            let mut total = 0.0;
            for _ in 0..6 {
                let v = (rng.uniform(0.0, 40.0) * 1000.0).round() / 1000.0;
                total += v;
                row.push(Cell::Number(v));
            }
            row.push(Cell::Number(total));
            row.insert(0, Cell::Number(i as f64));
            row
        })
        .collect();
    table(columns, rows)
}

/// 200 rows shaped like the hotel bookings table.
pub fn hotel_fixture(seed: u64) -> Table {
    let mut rng = Substream::new(seed, "fixture/hotel");
    let columns = vec![
        index_spec(),
        spec("is_canceled", ColumnKind::Numeric),
        spec("lead_time", ColumnKind::Numeric),
        spec("arrival_date_year", ColumnKind::Numeric),
        spec("country", ColumnKind::Categorical),
        spec("distribution_channel", ColumnKind::Categorical),
        spec("deposit_type", ColumnKind::Categorical),
        spec("adr", ColumnKind::Numeric),
    ];
    let rows = (0..200)
        .map(|i| {
            let country = pick(&mut rng, &["PRT", "PRT", "GBR", "ESP", "FRA"]).to_string();
            vec![
                Cell::Number(i as f64),
                Cell::Number(rng.below(2) as f64),
                Cell::Number(rng.below(400) as f64),
                Cell::Number(2015.0 + rng.below(3) as f64),
                maybe_missing(&mut rng, 0.03, Cell::Text(country)),
                Cell::Text(pick(&mut rng, &["TA/TO", "Direct", "Corporate"]).to_string()),
                Cell::Text(pick(&mut rng, &["No Deposit", "Non Refund", "Refundable"]).to_string()),
                Cell::Number((rng.uniform(20.0, 300.0) * 100.0).round() / 100.0),
            ]
        })
        .collect();
    table(columns, rows)
}

/// A finished run with random submissions, verdicts and token counts.
pub fn random_run(rng: &mut Substream, id: usize) -> scrub_core::agent::RunResult {
    use scrub_core::agent::{best_of, HintLevel, RunResult, SubmissionRecord, SubmissionSource, Termination};
    use scrub_core::gate::{Outcome, ValidationVerdict};
    use scrub_core::pipeline::BaselineReport;

    let p_dirty = rng.uniform(0.4, 0.8);
    let p_clean = p_dirty + rng.uniform(0.0, 0.2);
    let mut tokens = 0u64;
    let n = rng.below(12) as usize;
    let outcomes = [Outcome::Accepted, Outcome::Accepted, Outcome::ColumnViolation, Outcome::DatasetNotFound, Outcome::Other];
    let submissions: Vec<SubmissionRecord> = (1..=n)
        .map(|ordinal| {
            tokens += 1 + rng.below(40_000);
            let outcome = *pick(rng, &outcomes);
            let verdict = ValidationVerdict { outcome, detail: String::new(), offending: Vec::new() };
            let score = (outcome == Outcome::Accepted).then(|| rng.uniform(p_dirty - 0.1, p_clean));
            SubmissionRecord {
                ordinal,
                path: format!("train_cleaned_v{ordinal}.csv"),
                source: SubmissionSource::NotFound,
                verdict,
                score,
                turn: ordinal,
                cumulative_tokens: tokens,
            }
        })
        .collect();
    let best = best_of(&submissions);
    let best_score = best.as_ref().map_or(p_dirty, |b| b.score);
    let code_calls = rng.below(30) as usize;
    RunResult {
        run_id: format!("run-{id:04}"),
        dataset: pick(rng, &["titanic", "hotel_bookings"]).to_string(),
        agent: pick(rng, &["agent-a", "agent-b"]).to_string(),
        hint_level: *pick(rng, &HintLevel::ALL),
        baselines: BaselineReport { p_clean, p_dirty, gap: p_clean - p_dirty },
        submissions,
        best,
        best_score,
        improvement: best_score - p_dirty,
        termination: Termination::Idle,
        turns: n,
        total_tokens: tokens + rng.below(10_000),
        code_calls,
        submission_code_calls: rng.below(code_calls as u64 + 1) as usize,
        transcript: String::new(),
    }
}
