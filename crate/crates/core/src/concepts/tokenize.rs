use super::{Pos, Span, TierLexicon, Token};

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
    "their", "some", "any", "no", "every", "each", "either", "neither", "another", "such", "whose",
    "which", "what", "all", "both", "few", "many", "much", "several",
];
const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "to", "from", "with", "by", "for", "about", "into", "onto", "over",
    "under", "after", "before", "between", "through", "during", "without", "within", "upon",
    "against", "among", "around", "across", "along", "behind", "beyond", "near", "off", "out",
    "up", "down", "than", "like", "since", "until", "till", "towards", "toward", "beside",
    "beneath", "above", "below", "inside", "outside", "throughout", "amongst", "unto", "via",
];
const AUXILIARIES: &[&str] = &[
    "be", "am", "is", "are", "was", "were", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
    "ought", "wo", "ca", "isn", "aren", "wasn", "weren", "don", "doesn", "didn", "hasn", "haven",
    "hadn", "won", "wouldn", "shouldn", "couldn", "mustn", "shan", "cannot",
];
const PRONOUNS: &[&str] = &[
    "i", "me", "you", "he", "him", "she", "it", "we", "us", "they", "them", "myself", "yourself",
    "himself", "herself", "itself", "ourselves", "yourselves", "themselves", "who", "whom",
    "someone", "something", "anyone", "anything", "everyone", "everything", "nobody", "nothing",
    "somebody", "anybody", "everybody", "mine", "yours", "hers", "ours", "theirs", "one", "thee",
    "thou", "thy", "thine", "ye",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "yet", "so"];
const SUBORDINATORS: &[&str] = &[
    "if", "because", "although", "though", "while", "whether", "when", "where", "as", "unless",
    "whereas", "once", "whenever", "wherever",
];
const PARTICLES: &[&str] = &["not", "n't"];
const ADVERBS: &[&str] = &[
    "very", "too", "also", "then", "there", "here", "now", "never", "always", "often", "just",
    "only", "even", "still", "already", "again", "ever", "soon", "quite", "rather", "almost",
    "how", "why", "however", "perhaps", "indeed", "thus", "away", "back", "together", "yes",
];
const INTERJECTIONS: &[&str] = &["oh", "ah", "alas", "hello", "hey", "ha", "o", "well"];

fn closed_class(word: &str) -> Option<Pos> {
    let lists: [(&[&str], Pos); 9] = [
        (DETERMINERS, Pos::Det),
        (AUXILIARIES, Pos::Aux),
        (PRONOUNS, Pos::Pron),
        (PARTICLES, Pos::Part),
        (CONJUNCTIONS, Pos::Cconj),
        (SUBORDINATORS, Pos::Sconj),
        (ADPOSITIONS, Pos::Adp),
        (ADVERBS, Pos::Adv),
        (INTERJECTIONS, Pos::Intj),
    ];
    lists
        .iter()
        .find(|(list, _)| list.contains(&word))
        .map(|(_, pos)| *pos)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-')
}

/// Splits text into maximal word runs (letters and digits, with internal
/// apostrophes or hyphens) and maximal punctuation runs. Tokens carry
/// character-offset spans; lemma and tag are left empty/`X`.
pub fn tokenize_untagged(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    i += 1;
                } else if is_joiner(chars[i])
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            while i < chars.len() && !chars[i].is_whitespace() && !chars[i].is_alphanumeric() {
                i += 1;
            }
        }
        tokens.push(Token {
            text: chars[start..i].iter().collect(),
            lemma: String::new(),
            pos: Pos::X,
            span: Span { start, end: i },
        });
    }
    tokens
}

/// Number of tokens the default tokenizer produces for `text`.
pub fn count_tokens(text: &str) -> usize {
    tokenize_untagged(text).len()
}

/// Tokenizes and tags with the default heuristic tagger: closed-class word
/// lists, then the lexicon's allowed tags for the lemma, then suffix
/// heuristics.
pub fn tokenize(text: &str, lexicon: &TierLexicon) -> Vec<Token> {
    let mut tokens = tokenize_untagged(text);
    let mut sentence_start = true;
    for token in &mut tokens {
        let (lemma, pos) = tag(&token.text, lexicon, sentence_start);
        token.lemma = lemma;
        token.pos = pos;
        sentence_start = match pos {
            Pos::Punct => token.text.contains(['.', '!', '?']) || sentence_start,
            _ => false,
        };
    }
    tokens
}

fn tag(surface: &str, lexicon: &TierLexicon, sentence_start: bool) -> (String, Pos) {
    let first = surface.chars().next().unwrap_or(' ');
    if !first.is_alphanumeric() {
        let pos = if surface.chars().all(|c| c.is_ascii_punctuation() && !"$%+<=>^|~#&*@".contains(c)) {
            Pos::Punct
        } else if surface.chars().any(|c| c.is_alphanumeric()) {
            Pos::X
        } else if surface.chars().all(|c| !c.is_ascii()) {
            // Curly quotes, dashes and the like.
            Pos::Punct
        } else {
            Pos::Sym
        };
        return (surface.to_string(), pos);
    }

    let lower = surface.to_lowercase();
    if lower.chars().all(|c| c.is_numeric()) {
        return (lower, Pos::Num);
    }
    if let Some(pos) = closed_class(&lower) {
        return (lower, pos);
    }

    // Possessives and contractions: tag the part before the apostrophe.
    let (base, clitic) = match lower.find(['\'', '’']) {
        Some(i) => (&lower[..i], Some(&lower[i..])),
        None => (lower.as_str(), None),
    };
    if clitic.is_some() {
        if let Some(pos) = closed_class(base) {
            return (base.to_string(), pos);
        }
    }

    let (lemma, hint) = lexicon.lemmatize(base);
    if let Some(entry) = lexicon.get(&lemma) {
        let pos = hint
            .filter(|h| entry.pos.contains(h))
            .unwrap_or(entry.pos[0]);
        return (lemma, pos);
    }

    let capitalized = first.is_uppercase();
    let pos = if capitalized && !sentence_start {
        Pos::Propn
    } else if base.ends_with("ly") {
        Pos::Adv
    } else if base.ends_with("ing") || base.ends_with("ed") {
        Pos::Verb
    } else if ["ous", "ful", "ive", "able", "ible", "less", "ish"].iter().any(|s| base.ends_with(s)) {
        Pos::Adjective
    } else {
        Pos::Noun
    };
    (lemma, pos)
}
