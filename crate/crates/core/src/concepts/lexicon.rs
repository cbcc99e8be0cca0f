use std::collections::{BTreeMap, HashMap};

use super::{ConceptError, Pos};

const RANKED_WORDS: &str = include_str!("../../data/ranked_words.tsv");
const LEMMA_EXCEPTIONS: &str = include_str!("../../data/lemma_exceptions.tsv");

/// Frequency rank cut-offs for the packaged word list.
pub const DEFAULT_TIER1_MAX_RANK: usize = 2_000;
pub const DEFAULT_TIER2_MAX_RANK: usize = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tier(u8);

impl Tier {
    pub const ONE: Tier = Tier(1);
    pub const TWO: Tier = Tier(2);

    pub fn new(tier: u8) -> Option<Tier> {
        matches!(tier, 1 | 2).then_some(Tier(tier))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub tier: Tier,
    /// Allowed open-class tags, most preferred first.
    pub pos: Vec<Pos>,
    pub concreteness: Option<f64>,
}

/// Tier 1/2 vocabulary with allowed parts of speech, plus the irregular
/// inflection table used by the lemmatizer.
#[derive(Debug, Clone, Default)]
pub struct TierLexicon {
    entries: BTreeMap<String, LexiconEntry>,
    exceptions: HashMap<String, (String, Pos)>,
}

impl TierLexicon {
    /// The packaged frequency-ranked list, with the default cut-offs.
    pub fn packaged() -> TierLexicon {
        Self::from_ranked_list(RANKED_WORDS, DEFAULT_TIER1_MAX_RANK, DEFAULT_TIER2_MAX_RANK)
            .expect("packaged word list is well-formed")
    }

    /// Builds tiers from a frequency-ranked list (`word<TAB>pos,pos`, most
    /// frequent first): rank ≤ `tier1_max` is tier 1, rank ≤ `tier2_max`
    /// tier 2, anything rarer is left out.
    pub fn from_ranked_list(text: &str, tier1_max: usize, tier2_max: usize) -> Result<TierLexicon, ConceptError> {
        let mut lexicon = TierLexicon::with_packaged_exceptions();
        let mut rank = 0;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rank += 1;
            if rank > tier2_max {
                break;
            }
            let mut fields = line.split('\t');
            let word = fields.next().unwrap_or_default();
            let pos = parse_pos_list(fields.next().unwrap_or_default(), no + 1)?;
            let tier = if rank <= tier1_max { Tier::ONE } else { Tier::TWO };
            lexicon.entries.entry(word.to_lowercase()).or_insert(LexiconEntry {
                tier,
                pos,
                concreteness: None,
            });
        }
        Ok(lexicon)
    }

    /// Parses a lexicon file: `lemma<TAB>tier<TAB>pos,pos[<TAB>concreteness]`
    /// per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<TierLexicon, ConceptError> {
        let mut lexicon = TierLexicon::with_packaged_exceptions();
        for (no, line) in text.lines().enumerate() {
            let no = no + 1;
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(lexicon_error(no, "expected 3 or 4 tab-separated fields"));
            }
            let tier = fields[1]
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Tier::new)
                .ok_or_else(|| lexicon_error(no, "tier must be 1 or 2"))?;
            let pos = parse_pos_list(fields[2], no)?;
            let concreteness = match fields.get(3).map(|s| s.trim()) {
                None | Some("") => None,
                Some(s) => Some(s.parse::<f64>().map_err(|_| lexicon_error(no, "bad concreteness score"))?),
            };
            lexicon.insert(fields[0].trim(), LexiconEntry { tier, pos, concreteness });
        }
        Ok(lexicon)
    }

    fn with_packaged_exceptions() -> TierLexicon {
        let exceptions = LEMMA_EXCEPTIONS
            .lines()
            .filter_map(|l| {
                let mut f = l.split('\t');
                let (form, lemma, pos) = (f.next()?, f.next()?, Pos::parse(f.next()?)?);
                Some((form.to_string(), (lemma.to_string(), pos)))
            })
            .collect();
        TierLexicon {
            entries: BTreeMap::new(),
            exceptions,
        }
    }

    pub fn insert(&mut self, lemma: &str, entry: LexiconEntry) {
        self.entries.insert(lemma.to_lowercase(), entry);
    }

    pub fn get(&self, lemma: &str) -> Option<&LexiconEntry> {
        self.entries.get(lemma)
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.entries.contains_key(lemma)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reduces a lowercase word form to a lemma. Irregular forms come from
    /// the exception table; otherwise regular suffixes are stripped and the
    /// first candidate present in the lexicon wins. Returns the lemma and
    /// the part of speech the stripped suffix suggests.
    pub fn lemmatize(&self, word: &str) -> (String, Option<Pos>) {
        if let Some((lemma, pos)) = self.exceptions.get(word) {
            return (lemma.clone(), Some(*pos));
        }
        let candidates = suffix_candidates(word);
        // Verb inflections that are also listed on their own ("running")
        // still reduce to a known verb stem.
        if word.ends_with("ed") || word.ends_with("ing") {
            let verb_stem = candidates.iter().find(|(c, hint)| {
                *hint == Pos::Verb && self.get(c).is_some_and(|e| e.pos.contains(&Pos::Verb))
            });
            if let Some((stem, hint)) = verb_stem {
                return (stem.clone(), Some(*hint));
            }
        }
        if self.contains(word) {
            return (word.to_string(), None);
        }
        for (candidate, hint) in candidates {
            if self.contains(&candidate) {
                return (candidate, Some(hint));
            }
        }
        (word.to_string(), None)
    }
}

fn lexicon_error(line: usize, message: &str) -> ConceptError {
    ConceptError::Lexicon {
        line,
        message: message.to_string(),
    }
}

fn parse_pos_list(field: &str, line: usize) -> Result<Vec<Pos>, ConceptError> {
    let pos: Vec<Pos> = field
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Pos::parse(s).ok_or_else(|| lexicon_error(line, &format!("unknown POS tag {s:?}"))))
        .collect::<Result<_, _>>()?;
    if pos.is_empty() {
        return Err(lexicon_error(line, "no POS tags"));
    }
    Ok(pos)
}

/// A bare consonant-vowel-consonant lemma doubles its final letter before
/// -ed/-ing, so an undoubled stem like "hop" in "hoped" points to "hope".
fn ends_cvc(stem: &str) -> bool {
    let is_vowel = |c: char| "aeiou".contains(c);
    let tail: Vec<char> = stem.chars().rev().take(3).collect();
    matches!(tail.as_slice(), [c, v, p]
        if !is_vowel(*c) && !"wxy".contains(*c) && is_vowel(*v) && !is_vowel(*p))
}

fn suffix_candidates(word: &str) -> Vec<(String, Pos)> {
    let mut out = Vec::new();
    let mut push = |stem: &str, suffix: &str, pos: Pos| {
        if stem.len() >= 2 {
            out.push((format!("{stem}{suffix}"), pos));
        }
    };
    let undouble = |stem: &str| -> Option<String> {
        let mut rev = stem.chars().rev();
        let (last, prev) = (rev.next()?, rev.next()?);
        (last == prev && rev.next().is_some()).then(|| stem[..stem.len() - last.len_utf8()].to_string())
    };

    if let Some(stem) = word.strip_suffix("ies") {
        push(stem, "y", Pos::Noun);
    }
    if let Some(stem) = word.strip_suffix("ves") {
        push(stem, "f", Pos::Noun);
        push(stem, "fe", Pos::Noun);
    }
    if let Some(stem) = word.strip_suffix("es") {
        push(stem, "", Pos::Noun);
    }
    if let Some(stem) = word.strip_suffix('s') {
        if !stem.ends_with('s') {
            push(stem, "", Pos::Noun);
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        push(stem, "y", Pos::Verb);
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if ends_cvc(stem) {
            push(stem, "e", Pos::Verb);
            push(stem, "", Pos::Verb);
        } else {
            push(stem, "", Pos::Verb);
            push(stem, "e", Pos::Verb);
        }
        if let Some(s) = undouble(stem) {
            push(&s, "", Pos::Verb);
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if ends_cvc(stem) {
            push(stem, "e", Pos::Verb);
            push(stem, "", Pos::Verb);
        } else {
            push(stem, "", Pos::Verb);
            push(stem, "e", Pos::Verb);
        }
        if let Some(s) = undouble(stem) {
            push(&s, "", Pos::Verb);
        }
    }
    for (suffix, len) in [("iest", 4), ("ier", 3)] {
        if word.ends_with(suffix) {
            push(&word[..word.len() - len], "y", Pos::Adjective);
        }
    }
    for suffix in ["est", "er"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            push(stem, "", Pos::Adjective);
            push(stem, "e", Pos::Adjective);
            if let Some(s) = undouble(stem) {
                push(&s, "", Pos::Adjective);
            }
        }
    }
    out
}
