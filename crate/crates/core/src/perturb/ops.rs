//! Value-, schema- and shape-level perturbation operators.

use std::collections::HashSet;

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::PerturbError;
use crate::corpus::{CellEdit, Row, TableData, TableSchema, ValueMapping};
use crate::generate::{COMPANY_SUFFIXES, STREET_SUFFIXES};
use crate::text::{round_half_up, split_words};

/// Word-level synonym pairs; applied in both directions.
const SYNONYMS: &[(&str, &str)] = &[
    ("Street", "Road"),
    ("Capital", "Funds"),
    ("Holdings", "Group"),
    ("Financial", "Finance"),
    ("Partners", "Associates"),
    ("Securities", "Brokerage"),
    ("Investments", "Investing"),
    ("Trust", "Fiduciary"),
    ("Industries", "Manufacturing"),
    ("Technologies", "Tech"),
    ("Energy", "Power"),
    ("Insurance", "Assurance"),
    ("Bank", "Lender"),
    ("Dollar", "Buck"),
    ("Mount", "Mountain"),
    ("Lake", "Pond"),
    ("Hill", "Heights"),
];

const ABBREVIATIONS: &[(&str, &str)] = &[
    ("Incorporated", "Inc."),
    ("Corporation", "Corp."),
    ("Company", "Co."),
    ("Limited", "Ltd."),
    ("International", "Intl."),
    ("Technologies", "Tech."),
    ("Financial", "Fin."),
    ("Investments", "Inv."),
    ("Securities", "Sec."),
    ("Holdings", "Hldgs."),
    ("Mount", "Mt."),
    ("North", "N."),
    ("South", "S."),
    ("East", "E."),
    ("West", "W."),
    ("Saint", "St."),
];

const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Typos,
    Synonyms,
    Abbreviations,
    WordRemoval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatKind {
    Dates,
    Addresses,
    Names,
}

/// Indices of `round_half_up(rate * n)` seeded non-null cells.
fn pick_cells(values: &[Option<String>], rate: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let live: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let k = round_half_up(rate * live.len() as f64).min(live.len());
    let mut chosen: Vec<usize> = sample(rng, live.len(), k).into_iter().map(|i| live[i]).collect();
    chosen.sort_unstable();
    chosen
}

/// Edits turning `old` into `new`, one per differing cell.
pub fn diff_mapping(old: &[Option<String>], new: &[Option<String>]) -> ValueMapping {
    ValueMapping {
        edits: old
            .iter()
            .zip(new)
            .enumerate()
            .filter(|(_, (o, n))| o != n)
            .map(|(row, (o, n))| CellEdit { row, old: o.clone(), new: n.clone() })
            .collect(),
    }
}

fn decimals(s: &str) -> usize {
    s.split_once('.').map_or(0, |(_, d)| d.len())
}

/// Multiplies every numeric cell by `1 + u`, `u` uniform in `[-rel_scale,
/// rel_scale]`, keeping the cell's number of decimals.
pub fn numeric_jitter(values: &[Option<String>], rel_scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Option<String>>, PerturbError> {
    values
        .iter()
        .map(|v| match v {
            None => Ok(None),
            Some(s) => {
                let x: f64 = s.trim().parse().map_err(|_| PerturbError::NotNumeric(s.clone()))?;
                let u = if rel_scale > 0.0 { rng.gen_range(-rel_scale..=rel_scale) } else { 0.0 };
                Ok(Some(format!("{:.*}", decimals(s.trim()), x * (1.0 + u))))
            }
        })
        .collect()
}

/// Overwrites a share of cells with values copied from other rows.
pub fn duplicates(values: &[Option<String>], rate: f64, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    let mut out = values.to_vec();
    let pool: Vec<&String> = values.iter().flatten().collect();
    if pool.len() < 2 {
        return out;
    }
    for i in pick_cells(values, rate, rng) {
        out[i] = Some((*pool.choose(rng).expect("non-empty")).clone());
    }
    out
}

/// One adjacent swap, insertion or deletion that changes the string.
pub fn typo(s: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = s.chars().collect();
    for _ in 0..16 {
        let mut c = chars.clone();
        match rng.gen_range(0..3) {
            0 if c.len() >= 2 => {
                let i = rng.gen_range(0..c.len() - 1);
                c.swap(i, i + 1);
            }
            1 => {
                let i = rng.gen_range(0..=c.len());
                c.insert(i, char::from(b'a' + rng.gen_range(0..26u8)));
            }
            2 if !c.is_empty() => {
                c.remove(rng.gen_range(0..c.len()));
            }
            _ => continue,
        }
        let t: String = c.into_iter().collect();
        if t != s {
            return t;
        }
    }
    format!("{s}x")
}

fn replace_word(s: &str, table: &[(&str, &str)], both_ways: bool) -> Option<String> {
    let words: Vec<&str> = s.split(' ').collect();
    for (i, w) in words.iter().enumerate() {
        let hit = table.iter().find_map(|(a, b)| {
            if w == a {
                Some(*b)
            } else if both_ways && w == b {
                Some(*a)
            } else {
                None
            }
        });
        if let Some(r) = hit {
            let mut out = words.clone();
            out[i] = r;
            return Some(out.join(" "));
        }
    }
    None
}

fn abbreviate(s: &str) -> Option<String> {
    let table: Vec<(&str, &str)> =
        ABBREVIATIONS.iter().copied().chain(STREET_SUFFIXES.iter().copied()).collect();
    replace_word(s, &table, false)
}

/// Typos, synonyms, abbreviations or word removal on a share of cells.
pub fn text_noise(values: &[Option<String>], mode: NoiseMode, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    let mut out = values.to_vec();
    for i in pick_cells(values, rate, rng) {
        let s = values[i].as_deref().expect("picked cells are non-null");
        let changed = match mode {
            NoiseMode::Typos => Some(typo(s, rng)),
            NoiseMode::Synonyms => replace_word(s, SYNONYMS, true),
            NoiseMode::Abbreviations => abbreviate(s),
            NoiseMode::WordRemoval => {
                let words: Vec<&str> = s.split(' ').filter(|w| !w.is_empty()).collect();
                (words.len() >= 2).then(|| {
                    let drop = rng.gen_range(0..words.len());
                    words.iter().enumerate().filter(|(j, _)| *j != drop).map(|(_, w)| *w).collect::<Vec<_>>().join(" ")
                })
            }
        };
        if let Some(c) = changed {
            out[i] = Some(c);
        }
    }
    out
}

/// `(year, month, day)` of an ISO `YYYY-MM-DD` date.
pub(crate) fn parse_iso_date(s: &str) -> Option<(u32, u32, u32)> {
    let mut it = s.split('-');
    let (y, m, d) = (it.next()?, it.next()?, it.next()?);
    if it.next().is_some() || y.len() != 4 || m.len() != 2 || d.len() != 2 {
        return None;
    }
    let (y, m, d) = (y.parse().ok()?, m.parse().ok()?, d.parse().ok()?);
    ((1..=12).contains(&m) && (1..=31).contains(&d)).then_some((y, m, d))
}

pub(crate) fn long_date(s: &str) -> Option<String> {
    let (y, m, d) = parse_iso_date(s)?;
    Some(format!("{} {d}, {y}", MONTHS[m as usize - 1]))
}

/// Rewrites dates, street suffixes or person-name order.
pub fn format_noise(values: &[Option<String>], kind: FormatKind, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    let mut out = values.to_vec();
    for i in pick_cells(values, rate, rng) {
        let s = values[i].as_deref().expect("picked cells are non-null");
        let changed = match kind {
            FormatKind::Dates => parse_iso_date(s).map(|(y, m, d)| match rng.gen_range(0..3) {
                0 => format!("{m:02}/{d:02}/{y}"),
                1 => format!("{d:02}.{m:02}.{y}"),
                _ => format!("{} {d}, {y}", MONTHS[m as usize - 1]),
            }),
            FormatKind::Addresses => replace_word(s, STREET_SUFFIXES, false),
            FormatKind::Names => {
                let words: Vec<&str> = s.split(' ').collect();
                (words.len() == 2).then(|| format!("{}, {}", words[1], words[0]))
            }
        };
        if let Some(c) = changed {
            out[i] = Some(c);
        }
    }
    out
}

/// Nulls exactly `round_half_up(rate * cells)` cells, capped at the
/// non-null count.
pub fn inject_nulls(values: &[Option<String>], rate: f64, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    let live: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let k = round_half_up(rate * values.len() as f64).min(live.len());
    let mut out = values.to_vec();
    for j in sample(rng, live.len(), k) {
        out[live[j]] = None;
    }
    out
}

/// Cryptic form of one header: initialism for several words (all-caps words
/// kept whole), first letter plus following consonants for one word.
pub fn cryptic_name(header: &str) -> String {
    let words = split_words(header);
    match words.as_slice() {
        [] => header.to_string(),
        [w] => {
            let mut chars = w.chars();
            let first = chars.next().expect("non-empty word");
            let mut out: String = first.to_uppercase().collect();
            for c in chars {
                if out.chars().count() >= 3 {
                    break;
                }
                if c.is_alphanumeric() && !"aeiouAEIOU".contains(c) {
                    out.extend(c.to_uppercase());
                }
            }
            out
        }
        ws => ws
            .iter()
            .map(|w| {
                if w.len() > 1 && w.chars().all(|c| c.is_uppercase() || c.is_ascii_digit()) {
                    w.clone()
                } else {
                    w.chars().next().expect("non-empty word").to_uppercase().collect()
                }
            })
            .collect(),
    }
}

/// Cryptifies the selected headers; collisions with any other header get
/// numeric suffixes. Returns the new header list.
pub fn cryptify_headers(headers: &[String], selected: &[bool]) -> Vec<String> {
    let mut taken: HashSet<String> =
        headers.iter().zip(selected).filter(|(_, s)| !**s).map(|(h, _)| h.clone()).collect();
    headers
        .iter()
        .zip(selected)
        .map(|(h, &sel)| {
            if !sel {
                return h.clone();
            }
            let base = cryptic_name(h);
            let name = if taken.contains(&base) {
                (1..).map(|k| format!("{base}{k}")).find(|n| !taken.contains(n)).expect("unbounded")
            } else {
                base
            };
            taken.insert(name.clone());
            name
        })
        .collect()
}

/// One typo in `round_half_up(rate * selected)` of the selected headers,
/// keeping headers unique.
pub fn header_typos(headers: &[String], selected: &[bool], rate: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
    let idx: Vec<usize> = (0..headers.len()).filter(|&i| selected[i]).collect();
    let k = round_half_up(rate * idx.len() as f64).min(idx.len());
    let mut out = headers.to_vec();
    let mut picked: Vec<usize> = sample(rng, idx.len(), k).into_iter().map(|j| idx[j]).collect();
    picked.sort_unstable();
    for i in picked {
        for _ in 0..16 {
            let cand = typo(&headers[i], rng);
            if !out.contains(&cand) {
                out[i] = cand;
                break;
            }
        }
    }
    out
}

fn project(t: &TableData, name: &str, cols: &[usize], key: usize, rows: &[usize]) -> TableData {
    TableData {
        schema: TableSchema {
            name: name.to_string(),
            columns: cols.iter().map(|&c| t.schema.columns[c].clone()).collect(),
            primary_key: t.schema.columns[key].name.clone(),
        },
        rows: rows.iter().map(|&r| cols.iter().map(|&c| t.rows[r][c].clone()).collect::<Row>()).collect(),
    }
}

/// Result of a vertical split.
#[derive(Debug, Clone)]
pub struct VerticalSplit {
    pub a: TableData,
    pub b: TableData,
    pub shared: Vec<String>,
}

/// Splits columns into two overlapping projections. `max(1,
/// round_half_up(ratio * n))` columns (at most `n - 1`) are shared.
///
/// Without `unique_key` the primary key is always shared and both sides keep
/// every row. With `unique_key` the first shared column is a non-key column
/// `k`; side B keeps one row per distinct non-null `k` and uses `k` as its
/// key, so B's `k` is a key that A's `k` references.
pub fn vertical_split(
    t: &TableData,
    overlap_ratio: f64,
    unique_key: bool,
    names: (&str, &str),
    rng: &mut ChaCha8Rng,
) -> Result<VerticalSplit, PerturbError> {
    let n = t.schema.columns.len();
    if n < 2 {
        return Err(PerturbError::Shape(format!("vertical split of `{}` needs at least 2 columns", t.name())));
    }
    let pk = t.schema.key_index();
    let s = round_half_up(overlap_ratio * n as f64).clamp(1, n - 1);
    let mut others: Vec<usize> = (0..n).filter(|&c| c != pk).collect();
    others.shuffle(rng);
    let mut shared: Vec<usize> = Vec::with_capacity(s);
    if unique_key {
        shared.extend(others.drain(..s.min(others.len())));
    } else {
        shared.push(pk);
        shared.extend(others.drain(..s - 1));
    }
    let half = others.len().div_ceil(2);
    let mut a_cols: Vec<usize> = shared.iter().copied().chain(others[..half].iter().copied()).collect();
    let mut b_cols: Vec<usize> = shared.iter().copied().chain(others[half..].iter().copied()).collect();
    if unique_key {
        a_cols.push(pk);
    }
    a_cols.sort_unstable();
    b_cols.sort_unstable();
    let all_rows: Vec<usize> = (0..t.rows.len()).collect();
    let a = project(t, names.0, &a_cols, pk, &all_rows);
    let b = if unique_key {
        let k = shared[0];
        let mut seen = HashSet::new();
        let rows: Vec<usize> = all_rows
            .into_iter()
            .filter(|&r| t.rows[r][k].as_ref().is_some_and(|v| seen.insert(v.clone())))
            .collect();
        project(t, names.1, &b_cols, k, &rows)
    } else {
        project(t, names.1, &b_cols, pk, &all_rows)
    };
    let mut shared_names: Vec<String> = shared.iter().map(|&c| t.schema.columns[c].name.clone()).collect();
    shared_names.sort();
    Ok(VerticalSplit { a, b, shared: shared_names })
}

/// Splits rows into two overlapping subsets: `round_half_up(ratio * n)`
/// seeded rows go to both sides and the rest are halved.
pub fn horizontal_split(
    t: &TableData,
    ratio: f64,
    names: (&str, &str),
    rng: &mut ChaCha8Rng,
) -> Result<(TableData, TableData), PerturbError> {
    let n = t.rows.len();
    if n < 2 {
        return Err(PerturbError::Shape(format!("horizontal split of `{}` needs at least 2 rows", t.name())));
    }
    let shared = round_half_up(ratio * n as f64).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let rest = &order[shared..];
    let half = rest.len().div_ceil(2);
    let mut a: Vec<usize> = order[..shared].iter().chain(&rest[..half]).copied().collect();
    let mut b: Vec<usize> = order[..shared].iter().chain(&rest[half..]).copied().collect();
    a.sort_unstable();
    b.sort_unstable();
    let cols: Vec<usize> = (0..t.schema.columns.len()).collect();
    let key = t.schema.key_index();
    Ok((project(t, names.0, &cols, key, &a), project(t, names.1, &cols, key, &b)))
}

/// Keeps the primary key plus the columns for which `keep` holds.
pub fn remove_columns(t: &TableData, keep: impl Fn(&str) -> bool, name: &str) -> TableData {
    let key = t.schema.key_index();
    let cols: Vec<usize> = (0..t.schema.columns.len()).filter(|&c| c == key || keep(&t.schema.columns[c].name)).collect();
    project(t, name, &cols, key, &(0..t.rows.len()).collect::<Vec<_>>())
}

/// Keeps `max(1, round_half_up(fraction * n))` seeded rows in original order.
pub fn sample_rows(t: &TableData, fraction: f64, name: &str, rng: &mut ChaCha8Rng) -> TableData {
    let n = t.rows.len();
    let k = round_half_up(fraction * n as f64).clamp(n.min(1), n);
    let mut rows: Vec<usize> = sample(rng, n, k).into_vec();
    rows.sort_unstable();
    let cols: Vec<usize> = (0..t.schema.columns.len()).collect();
    project(t, name, &cols, t.schema.key_index(), &rows)
}

/// Expands company suffixes (`Inc.` → `Incorporated`).
pub(crate) fn expand_company_suffix(s: &str) -> Option<String> {
    let (head, last) = s.rsplit_once(' ')?;
    COMPANY_SUFFIXES.iter().find(|(short, _)| *short == last).map(|(_, long)| format!("{head} {long}"))
}
