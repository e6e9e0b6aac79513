//! Deterministic rule-based extraction of quantities, units, times,
//! temperatures, and cooking actions from ingredient and instruction text.
//!
//! All quantities are canonicalized to the metric trio {g, ml, piece} using
//! a pinned alias table (kg -> g x1000, l -> ml x1000, tbsp -> 15 ml,
//! tsp -> 5 ml, cup -> 240 ml, anything else -> piece). Times become
//! seconds, temperatures become Celsius. Numeric ranges take their
//! arithmetic midpoint; unicode fractions are understood. Identical input
//! text always yields identical extractions.

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Canonical measurement units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    Gram,
    Milliliter,
    Piece,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Gram => "g",
            Unit::Milliliter => "ml",
            Unit::Piece => "piece",
        })
    }
}

/// A numeric quantity with its canonical unit, as found in an ingredient line.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantityMention {
    pub value: f64,
    pub unit: Unit,
    pub raw: String,
}

/// A time duration converted to seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMention {
    pub seconds: f64,
    pub raw: String,
}

/// A temperature converted to Celsius. Values outside the culinary range
/// [-50, 400] are still extracted but flagged implausible.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureMention {
    pub celsius: f64,
    pub raw: String,
    pub plausible: bool,
}

/// One recognized cooking verb; `position` is the occurrence index within
/// the text the mention was extracted from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMention {
    pub verb: String,
    pub position: usize,
}

/// A parsed ingredient line: normalized head noun phrase plus the optional
/// leading/embedded quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct IngredientEntry {
    pub head: String,
    pub quantity: Option<QuantityMention>,
    pub raw: String,
}

const FRACTIONS: &[(char, f64)] = &[
    ('½', 0.5),
    ('⅓', 1.0 / 3.0),
    ('⅔', 2.0 / 3.0),
    ('¼', 0.25),
    ('¾', 0.75),
    ('⅕', 0.2),
    ('⅖', 0.4),
    ('⅗', 0.6),
    ('⅘', 0.8),
    ('⅙', 1.0 / 6.0),
    ('⅚', 5.0 / 6.0),
    ('⅛', 0.125),
    ('⅜', 0.375),
    ('⅝', 0.625),
    ('⅞', 0.875),
];

const FRACTION_CLASS: &str = "[½⅓⅔¼¾⅕⅖⅗⅘⅙⅚⅛⅜⅝⅞]";

fn number_pattern() -> String {
    // Order matters: mixed number, ascii fraction, decimal, lone fraction.
    format!(
        r"(?:\d+\s*{f}|\d+\s*/\s*\d+|\d+(?:\.\d+)?|{f})",
        f = FRACTION_CLASS
    )
}

fn value_pattern(n1: &str, n2: &str) -> String {
    let num = number_pattern();
    format!(r"(?P<{n1}>{num})(?:\s*(?:[-–—]|to)\s*(?P<{n2}>{num}))?")
}

/// Parses one simple number: integer, decimal, ascii fraction, unicode
/// fraction, or a mixed integer + unicode fraction.
fn parse_simple_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((c, frac)) = FRACTIONS
        .iter()
        .find(|(c, _)| s.ends_with(*c))
        .map(|&(c, v)| (c, v))
    {
        let head = s.trim_end_matches(c).trim();
        if head.is_empty() {
            return Some(frac);
        }
        return head.parse::<f64>().ok().map(|whole| whole + frac);
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        return Some(num / den);
    }
    s.parse().ok()
}

/// Resolves a possibly-ranged capture pair into one value (midpoint of a
/// range, else the single number).
fn captured_value(caps: &regex::Captures<'_>, n1: &str, n2: &str) -> Option<f64> {
    let first = parse_simple_number(caps.name(n1)?.as_str())?;
    match caps.name(n2) {
        Some(m) => {
            let second = parse_simple_number(m.as_str())?;
            Some((first + second) / 2.0)
        }
        None => Some(first),
    }
}

/// Alias -> (canonical unit, factor). Lookup keys are lowercase with any
/// trailing period stripped.
fn unit_alias(token: &str) -> Option<(Unit, f64)> {
    let key = token.to_lowercase();
    let key = key.trim_end_matches('.');
    Some(match key {
        "g" | "gram" | "grams" => (Unit::Gram, 1.0),
        "kg" | "kilogram" | "kilograms" => (Unit::Gram, 1000.0),
        "ml" | "milliliter" | "milliliters" | "millilitre" | "millilitres" => {
            (Unit::Milliliter, 1.0)
        }
        "l" | "liter" | "liters" | "litre" | "litres" => (Unit::Milliliter, 1000.0),
        "tbsp" | "tablespoon" | "tablespoons" => (Unit::Milliliter, 15.0),
        "tsp" | "teaspoon" | "teaspoons" => (Unit::Milliliter, 5.0),
        "cup" | "cups" => (Unit::Milliliter, 240.0),
        _ => return None,
    })
}

static QUANTITY_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&value_pattern("n1", "n2")).expect("static quantity regex")
});

static UNIT_TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([A-Za-z]+\.?)").expect("static unit token regex"));

/// Leading tokens stripped from ingredient heads: articles/prepositions and
/// pinned descriptor adjectives/adverbs.
const HEAD_DESCRIPTORS: &[&str] = &[
    "of", "a", "an", "the", "fresh", "freshly", "large", "small", "medium", "big", "little",
    "ground", "whole", "extra", "dried", "raw", "cooked", "ripe", "hot", "cold", "warm", "coarse",
    "coarsely", "fine", "finely", "roughly", "thinly", "thickly", "lightly", "gently",
];

/// Suffix-rule singularization applied to the head noun (last token only by
/// [`normalize_head`]). `-ies -> -y`, `-oes/-ches/-shes/-xes/-sses -> strip
/// es`, other `-es -> strip s`, plain `-s -> strip` unless the word ends in
/// `ss`/`us`/`is`.
fn singularize(word: &str) -> String {
    let n = word.len();
    if n >= 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n >= 5
        && (word.ends_with("oes")
            || word.ends_with("ches")
            || word.ends_with("shes")
            || word.ends_with("xes")
            || word.ends_with("sses"))
    {
        return word[..n - 2].to_string();
    }
    if n >= 4 && word.ends_with("es") {
        return word[..n - 1].to_string();
    }
    if n >= 3
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Lowercases, strips punctuation and digit-bearing tokens, drops leading
/// descriptor tokens, and singularizes the final token.
fn normalize_head(text: &str) -> String {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphabetic() || c == '-' || c == '\'' || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    let mut tokens: Vec<&str> = cleaned
        .split_whitespace()
        .filter(|t| !t.chars().any(|c| c.is_ascii_digit()))
        .collect();
    while let Some(first) = tokens.first() {
        if HEAD_DESCRIPTORS.contains(first) {
            tokens.remove(0);
        } else {
            break;
        }
    }
    match tokens.split_last() {
        None => String::new(),
        Some((last, rest)) => {
            let mut parts: Vec<String> = rest.iter().map(|t| t.to_string()).collect();
            parts.push(singularize(last));
            parts.join(" ")
        }
    }
}

/// Parses one ingredient line into a normalized head plus optional quantity.
///
/// The first number (with an optional recognized unit token) anywhere in the
/// line becomes the quantity; text after the first comma is treated as a
/// trailing descriptor and dropped from the head.
pub fn parse_ingredient(line: &str) -> Result<IngredientEntry> {
    let trimmed = line.trim();
    if !trimmed.chars().any(|c| c.is_alphabetic()) {
        return Err(Error::UnparsableIngredient(line.to_string()));
    }

    let head_region = trimmed.split(',').next().unwrap_or(trimmed);

    let mut quantity = None;
    let mut head_text = head_region.to_string();
    if let Some(caps) = QUANTITY_RE.captures(trimmed) {
        let m = caps.get(0).expect("whole match");
        if let Some(value) = captured_value(&caps, "n1", "n2") {
            let after = &trimmed[m.end()..];
            let (unit, factor, consumed_end) = match UNIT_TOKEN_RE.captures(after) {
                Some(ucaps) => {
                    let tok = ucaps.get(1).expect("unit token");
                    match unit_alias(tok.as_str()) {
                        Some((unit, factor)) => (unit, factor, m.end() + tok.end()),
                        None => (Unit::Piece, 1.0, m.end()),
                    }
                }
                None => (Unit::Piece, 1.0, m.end()),
            };
            let canonical = value * factor;
            if canonical > 0.0 {
                quantity = Some(QuantityMention {
                    value: canonical,
                    unit,
                    raw: trimmed[m.start()..consumed_end].to_string(),
                });
                if m.start() < head_region.len() {
                    let cut_end = consumed_end.min(head_region.len());
                    head_text =
                        format!("{} {}", &head_region[..m.start()], &head_region[cut_end..]);
                }
            }
        }
    }

    let head = normalize_head(&head_text);
    if head.is_empty() {
        return Err(Error::UnparsableIngredient(line.to_string()));
    }
    Ok(IngredientEntry {
        head,
        quantity,
        raw: line.to_string(),
    })
}

static TIME_RE: LazyLock<Regex> = LazyLock::new(|| {
    let pattern = format!(
        r"(?i){}\s*(?P<unit>hours?|hrs?|h|minutes?|mins?|seconds?|secs?|sec)\b",
        value_pattern("n1", "n2")
    );
    Regex::new(&pattern).expect("static time regex")
});

static TIME_GAP_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[\s,]*(?:and\s+)?$").expect("static time gap regex"));

fn time_unit_factor(unit: &str) -> f64 {
    match unit.to_lowercase().as_str() {
        "h" | "hr" | "hrs" | "hour" | "hours" => 3600.0,
        "min" | "mins" | "minute" | "minutes" => 60.0,
        _ => 1.0,
    }
}

/// Extracts time durations, converted to seconds. Compound mentions whose
/// units strictly decrease ("1 hour 20 minutes") merge into one mention.
pub fn extract_times(step: &str) -> Vec<TimeMention> {
    struct Raw {
        start: usize,
        end: usize,
        seconds: f64,
        factor: f64,
    }
    let mut raw: Vec<Raw> = Vec::new();
    for caps in TIME_RE.captures_iter(step) {
        let m = caps.get(0).expect("whole match");
        let Some(value) = captured_value(&caps, "n1", "n2") else {
            continue;
        };
        let factor = time_unit_factor(&caps["unit"]);
        let seconds = value * factor;
        if seconds <= 0.0 {
            continue;
        }
        raw.push(Raw {
            start: m.start(),
            end: m.end(),
            seconds,
            factor,
        });
    }

    let mut merged: Vec<Raw> = Vec::new();
    for r in raw {
        if let Some(last) = merged.last_mut() {
            let gap = &step[last.end..r.start];
            if TIME_GAP_RE.is_match(gap) && r.factor < last.factor {
                last.seconds += r.seconds;
                last.end = r.end;
                last.factor = r.factor;
                continue;
            }
        }
        merged.push(r);
    }
    merged
        .into_iter()
        .map(|r| TimeMention {
            seconds: r.seconds,
            raw: step[r.start..r.end].to_string(),
        })
        .collect()
}

static TEMPERATURE_RE: LazyLock<Regex> = LazyLock::new(|| {
    let pattern = format!(
        r"(?i){}\s*(?:°\s*(?P<sym>[cf])\b|(?P<w1>degrees?|celsius|centigrade|fahrenheit)\b(?:\s+(?P<w2>degrees?|celsius|centigrade|fahrenheit|c|f)\b)?)",
        value_pattern("n1", "n2")
    );
    Regex::new(&pattern).expect("static temperature regex")
});

/// Extracts temperatures, converted to Celsius (`(F - 32) * 5/9` for
/// Fahrenheit mentions; bare "degrees" is read as Celsius).
pub fn extract_temperatures(step: &str) -> Vec<TemperatureMention> {
    let mut out = Vec::new();
    for caps in TEMPERATURE_RE.captures_iter(step) {
        let m = caps.get(0).expect("whole match");
        let Some(value) = captured_value(&caps, "n1", "n2") else {
            continue;
        };
        let words: Vec<String> = [
            caps.name("sym"),
            caps.name("w1"),
            caps.name("w2"),
        ]
        .iter()
        .flatten()
        .map(|w| w.as_str().to_lowercase())
        .collect();
        let fahrenheit = words
            .iter()
            .any(|w| w == "f" || w == "fahrenheit");
        let celsius = if fahrenheit {
            (value - 32.0) * 5.0 / 9.0
        } else {
            value
        };
        out.push(TemperatureMention {
            celsius,
            raw: step[m.start()..m.end()].to_string(),
            plausible: (-50.0..=400.0).contains(&celsius),
        });
    }
    out
}

fn fold_accents(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'á' | 'à' | 'â' | 'ä' | 'å' | 'ã' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'í' | 'ì' | 'î' | 'ï' => 'i',
            'ó' | 'ò' | 'ô' | 'ö' | 'õ' => 'o',
            'ú' | 'ù' | 'û' | 'ü' => 'u',
            'ç' => 'c',
            'ñ' => 'n',
            other => other,
        })
        .collect()
}

fn is_cvc_end(word: &str) -> bool {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n < 3 {
        return false;
    }
    let vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u');
    !vowel(chars[n - 3])
        && vowel(chars[n - 2])
        && !vowel(chars[n - 1])
        && !matches!(chars[n - 1], 'w' | 'x' | 'y')
}

/// Generates the surface forms of a verb: base, third person, past, gerund,
/// with y/ies, silent-e, and consonant-doubling spellings all included (the
/// superset is harmless; only real text is ever matched against it).
fn verb_forms(verb: &str) -> Vec<String> {
    let v = fold_accents(&verb.to_lowercase());
    let mut forms = vec![v.clone()];
    let chars: Vec<char> = v.chars().collect();
    let n = chars.len();
    let ends_y_after_consonant = n >= 2
        && chars[n - 1] == 'y'
        && !matches!(chars[n - 2], 'a' | 'e' | 'i' | 'o' | 'u');
    let ends_e = v.ends_with('e');

    if ends_y_after_consonant {
        let stem = &v[..v.len() - 1];
        forms.push(format!("{stem}ies"));
        forms.push(format!("{stem}ied"));
        forms.push(format!("{v}ing"));
    } else if v.ends_with('s') || v.ends_with('x') || v.ends_with('z') || v.ends_with("ch")
        || v.ends_with("sh")
    {
        forms.push(format!("{v}es"));
        forms.push(format!("{v}ed"));
        forms.push(format!("{v}ing"));
    } else if ends_e {
        let stem = &v[..v.len() - 1];
        forms.push(format!("{v}s"));
        forms.push(format!("{v}d"));
        forms.push(format!("{v}ed"));
        forms.push(format!("{stem}ing"));
        forms.push(format!("{v}ing"));
    } else {
        forms.push(format!("{v}s"));
        forms.push(format!("{v}ed"));
        forms.push(format!("{v}ing"));
        if is_cvc_end(&v) {
            let last = chars[n - 1];
            forms.push(format!("{v}{last}ed"));
            forms.push(format!("{v}{last}ing"));
        }
    }
    forms
}

/// The cooking-verb lexicon: canonical verbs plus a surface-form index
/// covering inflections and accent-folded spellings.
#[derive(Clone, Debug)]
pub struct ActionLexicon {
    canonical: Vec<String>,
    forms: HashMap<String, usize>,
}

static WORD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\p{L}+").expect("static word regex"));

static BUILTIN_LEXICON: LazyLock<ActionLexicon> = LazyLock::new(|| {
    ActionLexicon::parse(include_str!("../data/actions.txt")).expect("builtin lexicon is valid")
});

impl ActionLexicon {
    pub fn new(verbs: Vec<String>) -> Result<Self> {
        let canonical: Vec<String> = verbs
            .into_iter()
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if canonical.is_empty() {
            return Err(Error::UnparsableIngredient(
                "action lexicon must contain at least one verb".into(),
            ));
        }
        let mut forms = HashMap::new();
        for (idx, verb) in canonical.iter().enumerate() {
            for form in verb_forms(verb) {
                forms.entry(form).or_insert(idx); // first verb wins
            }
        }
        Ok(Self { canonical, forms })
    }

    /// Parses the lexicon file format: one verb per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let verbs = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Self::new(verbs)
    }

    /// The built-in 40-verb lexicon shipped with the crate.
    pub fn builtin() -> &'static ActionLexicon {
        &BUILTIN_LEXICON
    }

    pub fn verbs(&self) -> &[String] {
        &self.canonical
    }

    fn lookup(&self, word: &str) -> Option<&str> {
        let key = fold_accents(&word.to_lowercase());
        self.forms.get(&key).map(|&idx| self.canonical[idx].as_str())
    }
}

/// Extracts lexicon verbs from a step, in order of occurrence, matching
/// case-insensitively on word boundaries with inflected and accent-folded
/// variants included.
pub fn extract_actions(step: &str, lexicon: &ActionLexicon) -> Vec<ActionMention> {
    let mut out = Vec::new();
    for word in WORD_RE.find_iter(step) {
        if let Some(verb) = lexicon.lookup(word.as_str()) {
            out.push(ActionMention {
                verb: verb.to_string(),
                position: out.len(),
            });
        }
    }
    out
}
