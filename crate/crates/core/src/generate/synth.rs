//! Deterministic offline value synthesis keyed on semantic types.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Column, Datatype};
use crate::text::derive_seed;

pub(crate) const CURRENCY_CODES: &[(&str, &str)] = &[
    ("USD", "US Dollar"),
    ("EUR", "Euro"),
    ("GBP", "Pound Sterling"),
    ("JPY", "Japanese Yen"),
    ("CHF", "Swiss Franc"),
    ("CAD", "Canadian Dollar"),
    ("AUD", "Australian Dollar"),
    ("CNY", "Chinese Yuan"),
    ("HKD", "Hong Kong Dollar"),
    ("SGD", "Singapore Dollar"),
    ("SEK", "Swedish Krona"),
    ("NOK", "Norwegian Krone"),
    ("DKK", "Danish Krone"),
    ("INR", "Indian Rupee"),
    ("BRL", "Brazilian Real"),
    ("MXN", "Mexican Peso"),
    ("ZAR", "South African Rand"),
    ("KRW", "South Korean Won"),
    ("NZD", "New Zealand Dollar"),
    ("PLN", "Polish Zloty"),
];

pub(crate) const STATES: &[(&str, &str)] = &[
    ("AL", "Alabama"),
    ("AZ", "Arizona"),
    ("CA", "California"),
    ("CO", "Colorado"),
    ("CT", "Connecticut"),
    ("FL", "Florida"),
    ("GA", "Georgia"),
    ("IL", "Illinois"),
    ("MA", "Massachusetts"),
    ("MI", "Michigan"),
    ("MN", "Minnesota"),
    ("NC", "North Carolina"),
    ("NJ", "New Jersey"),
    ("NY", "New York"),
    ("OH", "Ohio"),
    ("OR", "Oregon"),
    ("PA", "Pennsylvania"),
    ("TX", "Texas"),
    ("VA", "Virginia"),
    ("WA", "Washington"),
];

const CITIES: &[&str] = &[
    "Springfield", "Riverside", "Franklin", "Greenville", "Bristol", "Clinton", "Fairview", "Salem",
    "Madison", "Georgetown", "Arlington", "Ashland", "Dover", "Oxford", "Jackson", "Burlington",
    "Manchester", "Milton", "Newport", "Auburn", "Dayton", "Lexington", "Milford", "Winchester",
    "Hudson", "Kingston", "Marion", "Mount Vernon", "Oakland", "Princeton",
];

const STREETS: &[&str] = &[
    "Oak", "Maple", "Cedar", "Pine", "Elm", "Washington", "Lake", "Hill", "Park", "Main", "Sunset",
    "Highland", "Church", "Mill", "River", "Walnut", "Spring", "Chestnut", "Willow", "Lincoln",
];

pub(crate) const STREET_SUFFIXES: &[(&str, &str)] = &[
    ("Street", "St"),
    ("Avenue", "Ave"),
    ("Road", "Rd"),
    ("Boulevard", "Blvd"),
    ("Drive", "Dr"),
    ("Lane", "Ln"),
    ("Court", "Ct"),
    ("Place", "Pl"),
];

const COMPANY_STEMS: &[&str] = &[
    "Apex", "Summit", "Harbor", "Northwind", "Blue Ridge", "Granite", "Evergreen", "Silverline",
    "Redwood", "Crescent", "Pioneer", "Beacon", "Meridian", "Atlas", "Keystone", "Lakeshore",
    "Ironbridge", "Sterling", "Oakmont", "Horizon", "Cobalt", "Falcon", "Juniper", "Trident",
];

const COMPANY_SECTORS: &[&str] = &[
    "Capital", "Holdings", "Financial", "Partners", "Bancorp", "Securities", "Investments", "Trust",
    "Industries", "Technologies", "Energy", "Insurance",
];

pub(crate) const COMPANY_SUFFIXES: &[(&str, &str)] = &[
    ("Inc.", "Incorporated"),
    ("Corp.", "Corporation"),
    ("LLC", "Limited Liability Company"),
    ("Ltd.", "Limited"),
    ("Co.", "Company"),
];

const FIRST_NAMES: &[&str] = &[
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael", "Linda", "David",
    "Elizabeth", "William", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah",
    "Charles", "Karen", "Daniel", "Nancy", "Matthew", "Lisa",
];

const LAST_NAMES: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez",
    "Martinez", "Hernandez", "Lopez", "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson",
    "Martin", "Lee", "Thompson", "White", "Harris", "Clark",
];

const COUNTRIES: &[&str] = &[
    "United States", "United Kingdom", "Germany", "France", "Japan", "Canada", "Switzerland",
    "Australia", "Singapore", "Netherlands", "Sweden", "Brazil", "India", "Spain", "Italy",
];

const RATINGS: &[&str] = &["AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "B"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    CurrencyName,
    Currency,
    Ticker,
    Zip,
    Date,
    Amount,
    Rate,
    Count,
    AccountNumber,
    Lei,
    Company,
    Person,
    Email,
    Phone,
    City,
    State,
    Country,
    Address,
    Rating,
    Integer,
    Unknown,
}

fn classify(column: &Column) -> Kind {
    let t = column.semantic_type.to_lowercase();
    let has = |k: &str| t.contains(k);
    if has("currency") && has("name") {
        Kind::CurrencyName
    } else if has("currency") {
        Kind::Currency
    } else if has("ticker") || has("symbol") {
        Kind::Ticker
    } else if has("zip") || has("postal code") {
        Kind::Zip
    } else if has("date") {
        Kind::Date
    } else if has("amount") || has("price") || has("balance") || has("value") {
        Kind::Amount
    } else if (has("rate") && !has("rating")) || has("percent") || has("ratio") {
        Kind::Rate
    } else if has("count") || has("quantity") || has("shares") || has("number of") {
        Kind::Count
    } else if has("account number") || has("routing") || has("iban") {
        Kind::AccountNumber
    } else if t == "lei" || has("entity identifier") {
        Kind::Lei
    } else if has("email") {
        Kind::Email
    } else if has("phone") {
        Kind::Phone
    } else if has("city") {
        Kind::City
    } else if has("state") || has("province") {
        Kind::State
    } else if has("country") {
        Kind::Country
    } else if has("address") || has("street") {
        Kind::Address
    } else if has("rating") {
        Kind::Rating
    } else if has("person") || has("first name") || has("last name") || has("manager") || has("holder") {
        Kind::Person
    } else if has("name") || has("company") || has("issuer") || has("institution") {
        Kind::Company
    } else if t.split_whitespace().any(|w| w == "id") || has("identifier") {
        Kind::Integer
    } else {
        match column.datatype {
            Datatype::Integer => Kind::Count,
            Datatype::Decimal => Kind::Amount,
            Datatype::Date => Kind::Date,
            _ => Kind::Unknown,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty dictionary")
}

fn letters<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'A' + rng.gen_range(0..26u8))).collect()
}

fn digits<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn draw<R: Rng>(kind: Kind, tag: &str, k: usize, rng: &mut R) -> String {
    match kind {
        Kind::CurrencyName => CURRENCY_CODES.choose(rng).expect("codes").1.to_string(),
        Kind::Currency => CURRENCY_CODES.choose(rng).expect("codes").0.to_string(),
        Kind::Ticker => {
            let n = rng.gen_range(2..=4);
            letters(rng, n)
        }
        Kind::Zip => format!("{:05}", rng.gen_range(1001..99951)),
        Kind::Date => {
            let (y, m) = (rng.gen_range(1990..=2023), rng.gen_range(1..=12));
            let d = rng.gen_range(1..=28);
            format!("{y:04}-{m:02}-{d:02}")
        }
        Kind::Amount => format!("{:.2}", rng.gen_range(1.0..50_000.0f64)),
        Kind::Rate => format!("{:.3}", rng.gen_range(0.0..25.0f64)),
        Kind::Count => rng.gen_range(1..10_000u32).to_string(),
        Kind::AccountNumber => format!("{}{}", rng.gen_range(1..10u8), digits(rng, 8)),
        Kind::Lei => format!("{}{}", digits(rng, 4), letters(rng, 14)) + &digits(rng, 2),
        Kind::Company => {
            let stem = pick(rng, COMPANY_STEMS);
            let sector = pick(rng, COMPANY_SECTORS);
            let suffix = COMPANY_SUFFIXES.choose(rng).expect("suffixes").0;
            format!("{stem} {sector} {suffix}")
        }
        Kind::Person => format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES)),
        Kind::Email => {
            let f = pick(rng, FIRST_NAMES).to_lowercase();
            let l = pick(rng, LAST_NAMES).to_lowercase();
            format!("{f}.{l}{}@example.com", rng.gen_range(1..100))
        }
        Kind::Phone => format!("({}) {}-{}", rng.gen_range(201..990), digits(rng, 3), digits(rng, 4)),
        Kind::City => pick(rng, CITIES).to_string(),
        Kind::State => STATES.choose(rng).expect("states").0.to_string(),
        Kind::Country => pick(rng, COUNTRIES).to_string(),
        Kind::Address => {
            let suffix = STREET_SUFFIXES.choose(rng).expect("suffixes").0;
            format!("{} {} {suffix}", rng.gen_range(1..9999), pick(rng, STREETS))
        }
        Kind::Rating => pick(rng, RATINGS).to_string(),
        Kind::Integer => rng.gen_range(1..1_000_000u32).to_string(),
        Kind::Unknown => format!("{tag}_{k}"),
    }
}

fn column_rng(column: &Column, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &column.semantic_type))
}

/// `n` type-plausible values for a column. Same seed, same values.
pub fn synthesize_offline(column: &Column, n: usize, seed: u64) -> Vec<String> {
    let kind = classify(column);
    let mut rng = column_rng(column, seed);
    (0..n).map(|k| draw(kind, &column.semantic_type, k, &mut rng)).collect()
}

/// Like [`synthesize_offline`] but all values are distinct. Collisions are
/// redrawn a few times, then disambiguated with a numeric suffix.
pub fn synthesize_offline_unique(column: &Column, n: usize, seed: u64) -> Vec<String> {
    let kind = classify(column);
    let mut rng = column_rng(column, seed);
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = draw(kind, &column.semantic_type, k, &mut rng);
        let mut tries = 0;
        while seen.contains(&v) && tries < 8 {
            v = draw(kind, &column.semantic_type, k, &mut rng);
            tries += 1;
        }
        if seen.contains(&v) {
            let base = v.clone();
            v = (1..).map(|i| format!("{base} {}", k + i)).find(|c| !seen.contains(c)).expect("unbounded");
        }
        seen.insert(v.clone());
        out.push(v);
    }
    out
}
