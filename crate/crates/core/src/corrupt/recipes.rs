//! Built-in recipes for the registered datasets.
//!
//! Column names follow the public CSV releases of each dataset. Hint strings
//! are the benchmark's fixed hint texts and are reproduced exactly.

use super::{Action, CorruptionKind, CorruptionRecipe, CorruptionStep};
use crate::predicate::{Comparator, Condition, RowPredicate};

/// Dataset ids with a built-in recipe.
pub const REGISTERED: [&str; 4] = ["titanic", "meat_consumption", "hotel_bookings", "synthetic-default"];

pub const DEFAULT_MASTER_SEED: u64 = 20_250_101;

/// Titles marking female passengers.
pub const TITANIC_FEMALE_TITLES: [&str; 2] = ["Miss.", "Mrs."];
/// Titles marking married women.
pub const TITANIC_MARRIED_TITLES: [&str; 1] = ["Mrs."];
/// Titles marking high social status.
pub const TITANIC_STATUS_TITLES: [&str; 2] = ["Dr.", "Lady"];

pub const MEAT_POULTRY_YEARS: [f64; 8] = [1986.0, 1990.0, 1993.0, 1995.0, 2000.0, 2005.0, 2010.0, 2015.0];
pub const MEAT_LANDLOCKED: [&str; 11] = [
    "Afghanistan",
    "Burkina Faso",
    "Chad",
    "Burundi",
    "Central African Republic",
    "Niger",
    "Nepal",
    "Mali",
    "Tajikistan",
    "Uzbekistan",
    "Kyrgyzstan",
];
pub const MEAT_INFLATED: [&str; 6] = ["Mauritius", "Italy", "Japan", "Vietnam", "China", "Mexico"];
pub const MEAT_COLUMNS: [&str; 6] = ["Poultry", "Beef", "Sheep and goat", "Pork", "Other meats", "Fish and seafood"];

/// The built-in recipe for `dataset_id`, or `None` if unregistered.
pub fn builtin(dataset_id: &str) -> Option<CorruptionRecipe> {
    match dataset_id {
        "titanic" => Some(titanic()),
        "meat_consumption" => Some(meat_consumption()),
        "hotel_bookings" => Some(hotel_bookings()),
        "synthetic-default" => Some(synthetic_default()),
        _ => None,
    }
}

fn step(
    kind: CorruptionKind,
    predicate: RowPredicate,
    target: &str,
    fraction: f64,
    action: Action,
    label: &str,
) -> CorruptionStep {
    CorruptionStep {
        kind,
        predicate,
        target_column: target.to_string(),
        fraction,
        action,
        stream_label: label.to_string(),
    }
}

pub fn titanic() -> CorruptionRecipe {
    let female_survivors = RowPredicate::all()
        .and(Condition::contains_any("Name", &TITANIC_FEMALE_TITLES))
        .and(Condition::new("Survived", Comparator::Eq, 1.0));
    let married_non_survivors = RowPredicate::all()
        .and(Condition::contains_any("Name", &TITANIC_MARRIED_TITLES))
        .and(Condition::new("Survived", Comparator::Eq, 0.0));
    let high_status = RowPredicate::all().and(Condition::contains_any("Name", &TITANIC_STATUS_TITLES));
    CorruptionRecipe {
        name: "titanic".into(),
        master_seed: DEFAULT_MASTER_SEED,
        weak_hint: "Errors are in the Sex, Age and Fare columns.".into(),
        strong_hint: "Errors are here: Female survisors had their sex entry corrupted, The same happened for the age \
                      of female married non-survivors, and the fare of some passengers with high social status was \
                      corrupted."
            .into(),
        steps: vec![
            step(
                CorruptionKind::CategoricalShift,
                female_survivors,
                "Sex",
                0.5,
                Action::Replace { value: "male".into() },
                "titanic/sex",
            ),
            step(
                CorruptionKind::NumericalShift,
                married_non_survivors,
                "Age",
                0.5,
                Action::ResampleRange { lo: 2.0, hi: 8.0 },
                "titanic/age",
            ),
            step(CorruptionKind::NumericalShift, high_status, "Fare", 1.0, Action::Multiply { value: 0.1 }, "titanic/fare"),
        ],
    }
}

pub fn meat_consumption() -> CorruptionRecipe {
    let mut steps = vec![
        step(
            CorruptionKind::NumericalShift,
            RowPredicate::all().and(Condition::one_of("Year", MEAT_POULTRY_YEARS)),
            "Poultry",
            1.0,
            Action::ResampleRange { lo: 0.0, hi: 0.1 },
            "meat/poultry",
        ),
        step(
            CorruptionKind::NumericalShift,
            RowPredicate::all().and(Condition::one_of("Entity", MEAT_LANDLOCKED)),
            "Fish and seafood",
            1.0,
            Action::ResampleQuantileBand { q_lo: 0.85, q_hi: 0.95 },
            "meat/fish",
        ),
    ];
    let inflated = RowPredicate::all()
        .and(Condition::one_of("Entity", MEAT_INFLATED))
        .and(Condition::new("Year", Comparator::Ge, 1997.0))
        .and(Condition::new("Year", Comparator::Le, 2004.0));
    for column in MEAT_COLUMNS {
        steps.push(step(
            CorruptionKind::NumericalShift,
            inflated.clone(),
            column,
            1.0,
            Action::CompoundYearly { key_column: "Year".into(), base: 1996.0, factor: 1.3, compounding: true },
            &format!("meat/inflate/{column}"),
        ));
    }
    CorruptionRecipe {
        name: "meat_consumption".into(),
        master_seed: DEFAULT_MASTER_SEED,
        weak_hint: "Errors are observed in 1) certain years [1986, 1990, 1993, 1995, 2000, 2005, 2010, 2015]), 2) In \
                    some countries regarding fish and seafood consumption, and in consecutive years for the following \
                    countries Mauritius, Italy, Japan, Vietnam, China, Mexico."
            .into(),
        strong_hint: "Observed errors:\n\
                      1. In the years [1986, 1990, 1993, 1995, 2000, 2005, 2010, 2015], poultry consumption is \
                      significantly underreported.\n\
                      2. In landlocked countries such as Afghanistan, Burkina Faso, Chad, Burundi, Central African \
                      Republic, Niger, Nepal, Mali, Tajikistan, Uzbekistan, and Kyrgyzstan, fish and seafood \
                      consumption is reported to be excessively high.\n\
                      3. In countries like Mauritius, Italy, Japan, Vietnam, China, and Mexico, the total meat \
                      consumption is notably overreported during the years [1997, 1998, 1999, 2000, 2001, 2003, 2004]."
            .into(),
        steps,
    }
}

pub fn hotel_bookings() -> CorruptionRecipe {
    const YEAR: &str = "arrival_date_year";
    CorruptionRecipe {
        name: "hotel_bookings".into(),
        master_seed: DEFAULT_MASTER_SEED,
        weak_hint: "Errors are in the lead_time, deposit and country columns, there are no errors in any entries from \
                    2015."
            .into(),
        strong_hint: "Errors are here: There is a systematic bias in the lead_time of 2016, the deposit with \
                      distribution_channel TA/TO looks wrong in 2017 and often when people arrive from PRT, the country \
                      is not recorded."
            .into(),
        steps: vec![
            step(
                CorruptionKind::NumericalShift,
                RowPredicate::all().and(Condition::new(YEAR, Comparator::Eq, 2016.0)),
                "lead_time",
                1.0,
                Action::Add { value: 10.0 },
                "hotel/lead_time",
            ),
            step(
                CorruptionKind::CategoricalShift,
                RowPredicate::all()
                    .and(Condition::new("distribution_channel", Comparator::Eq, "TA/TO"))
                    .and(Condition::new(YEAR, Comparator::Eq, 2017.0)),
                "deposit_type",
                1.0,
                Action::Replace { value: "Non Refund".into() },
                "hotel/deposit",
            ),
            step(
                CorruptionKind::NanCorruption,
                RowPredicate::all()
                    .and(Condition::new("country", Comparator::Eq, "PRT"))
                    .and(Condition::new(YEAR, Comparator::Ne, 2015.0)),
                "country",
                0.7,
                Action::SetMissing,
                "hotel/country",
            ),
        ],
    }
}

/// Recipe for the built-in synthetic dataset (see
/// [`crate::provision::SyntheticSpec::desk_default`]).
pub fn synthetic_default() -> CorruptionRecipe {
    CorruptionRecipe {
        name: "synthetic-default".into(),
        master_seed: DEFAULT_MASTER_SEED,
        weak_hint: "Errors are in the income, age and region columns.".into(),
        strong_hint: "Errors are here: income of customers who signed up on the web was recorded in the wrong unit, \
                      age is often missing for customers who churned, and many non-churning customers from the north \
                      were recorded as coming from the south."
            .into(),
        steps: vec![
            step(
                CorruptionKind::NumericalShift,
                RowPredicate::all().and(Condition::new("channel", Comparator::Eq, "web")),
                "income",
                1.0,
                Action::Multiply { value: 0.1 },
                "synthetic/income",
            ),
            step(
                CorruptionKind::NanCorruption,
                RowPredicate::all().and(Condition::new("label", Comparator::Eq, 1.0)),
                "age",
                0.7,
                Action::SetMissing,
                "synthetic/age",
            ),
            step(
                CorruptionKind::CategoricalShift,
                RowPredicate::all()
                    .and(Condition::new("region", Comparator::Eq, "north"))
                    .and(Condition::new("label", Comparator::Eq, 0.0)),
                "region",
                0.6,
                Action::Replace { value: "south".into() },
                "synthetic/region",
            ),
        ],
    }
}
