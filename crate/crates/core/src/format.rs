//! Four-stage reasoning format: parsing, validation, canonical rendering.
//!
//! A conforming response consists of exactly four tagged sections, in order:
//!
//! ```text
//! <general description>...</general description>
//! <evidence>...</evidence>
//! <thought>...</thought>
//! <answer>...</answer>
//! ```
//!
//! Tag names are case-sensitive. Whitespace between sections is ignored, but
//! any other text outside a section is a violation, as is an empty section.
//! [`FormatMode::Cot`] selects the two-section `<thought>`/`<answer>` layout.
//!
//! All spans are character offsets into the input.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::{canonical_phrase, FoldedText, Phrase};

/// Default cap on the number of characters accepted by the parser.
pub const DEFAULT_MAX_CHARS: usize = 65_536;

/// Longest tag name the tokenizer will consider.
const MAX_TAG_NAME: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    GeneralDescription,
    Evidence,
    Thought,
    Answer,
}

impl Section {
    pub const ALL: [Section; 4] = [
        Section::GeneralDescription,
        Section::Evidence,
        Section::Thought,
        Section::Answer,
    ];

    pub fn tag_name(self) -> &'static str {
        match self {
            Section::GeneralDescription => "general description",
            Section::Evidence => "evidence",
            Section::Thought => "thought",
            Section::Answer => "answer",
        }
    }

    fn from_tag_name(name: &str) -> Option<Section> {
        Section::ALL.into_iter().find(|s| s.tag_name() == name)
    }
}

/// Which section layout a response must follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatMode {
    /// general description, evidence, thought, answer
    #[default]
    Coa,
    /// thought, answer
    Cot,
}

impl FormatMode {
    pub fn sections(self) -> &'static [Section] {
        match self {
            FormatMode::Coa => &Section::ALL,
            FormatMode::Cot => &Section::ALL[2..],
        }
    }

    fn position(self, section: Section) -> Option<usize> {
        self.sections().iter().position(|s| *s == section)
    }
}

impl std::str::FromStr for FormatMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coa" => Ok(FormatMode::Coa),
            "cot" => Ok(FormatMode::Cot),
            other => Err(format!("unknown format mode `{other}` (expected coa or cot)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    MissingSection,
    DuplicateSection,
    OrderViolation,
    UnclosedTag,
    StrayText,
    EmptySection,
    UnknownTag,
    InputTooLong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub span: Span,
    pub message: String,
}

/// Result of checking a response against a [`FormatMode`].
///
/// `valid` is true iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl FormatReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn count(&self, code: ViolationCode) -> usize {
        self.violations.iter().filter(|v| v.code == code).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed response: {}", summarize(&.0.violations))]
pub struct FormatError(pub FormatReport);

impl FormatError {
    pub fn report(&self) -> &FormatReport {
        &self.0
    }

    fn single(code: ViolationCode, span: Span, message: impl Into<String>) -> Self {
        FormatError(FormatReport::from_violations(vec![Violation {
            code,
            span,
            message: message.into(),
        }]))
    }
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{:?} at {}..{}: {}", v.code, v.span.start, v.span.end, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Strictness knobs. The defaults give the strict gate used for rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_chars: usize,
    pub require_order: bool,
    pub reject_empty: bool,
    pub reject_stray_text: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_chars: DEFAULT_MAX_CHARS,
            require_order: true,
            reject_empty: true,
            reject_stray_text: true,
        }
    }
}

/// A parsed four-section response. Bodies are trimmed and non-empty and
/// contain nothing that tokenizes as a tag, so rendering and re-parsing is
/// the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCoaResponse", into = "RawCoaResponse")]
pub struct CoaResponse {
    general_description: String,
    evidence: String,
    thought: String,
    answer: String,
}

#[derive(Serialize, Deserialize)]
struct RawCoaResponse {
    general_description: String,
    evidence: String,
    thought: String,
    answer: String,
}

impl TryFrom<RawCoaResponse> for CoaResponse {
    type Error = FormatError;

    fn try_from(raw: RawCoaResponse) -> Result<Self, Self::Error> {
        CoaResponse::new(raw.general_description, raw.evidence, raw.thought, raw.answer)
    }
}

impl From<CoaResponse> for RawCoaResponse {
    fn from(r: CoaResponse) -> Self {
        RawCoaResponse {
            general_description: r.general_description,
            evidence: r.evidence,
            thought: r.thought,
            answer: r.answer,
        }
    }
}

impl CoaResponse {
    /// Builds a response from section bodies. Surrounding whitespace is
    /// trimmed; empty bodies and bodies containing tag markup are rejected.
    pub fn new(
        general_description: impl Into<String>,
        evidence: impl Into<String>,
        thought: impl Into<String>,
        answer: impl Into<String>,
    ) -> Result<Self, FormatError> {
        let bodies = [
            general_description.into(),
            evidence.into(),
            thought.into(),
            answer.into(),
        ];
        let mut violations = Vec::new();
        for (section, body) in Section::ALL.iter().zip(&bodies) {
            check_body(*section, body.trim(), &mut violations);
        }
        if !violations.is_empty() {
            return Err(FormatError(FormatReport::from_violations(violations)));
        }
        let [g, e, t, a] = bodies.map(|b| b.trim().to_string());
        Ok(Self {
            general_description: g,
            evidence: e,
            thought: t,
            answer: a,
        })
    }

    pub fn general_description(&self) -> &str {
        &self.general_description
    }

    pub fn evidence(&self) -> &str {
        &self.evidence
    }

    pub fn thought(&self) -> &str {
        &self.thought
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }

    pub fn section(&self, section: Section) -> &str {
        match section {
            Section::GeneralDescription => &self.general_description,
            Section::Evidence => &self.evidence,
            Section::Thought => &self.thought,
            Section::Answer => &self.answer,
        }
    }
}

fn check_body(section: Section, body: &str, out: &mut Vec<Violation>) {
    if body.is_empty() {
        out.push(Violation {
            code: ViolationCode::EmptySection,
            span: Span::new(0, 0),
            message: format!("<{}> body is empty", section.tag_name()),
        });
        return;
    }
    let chars: Vec<char> = body.chars().collect();
    for tok in tokenize(&chars) {
        if let Token::Tag { span, .. } = tok {
            out.push(Violation {
                code: ViolationCode::UnknownTag,
                span,
                message: format!("<{}> body contains tag markup", section.tag_name()),
            });
        }
    }
}

/// Sections of a valid response, in canonical order for the mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSections {
    pub mode: FormatMode,
    bodies: Vec<(Section, String)>,
}

impl ParsedSections {
    pub fn get(&self, section: Section) -> Option<&str> {
        self.bodies
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, b)| b.as_str())
    }

    pub fn answer(&self) -> &str {
        self.get(Section::Answer).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
enum Token {
    Text { start: usize, end: usize },
    Tag { name_start: usize, name_end: usize, closing: bool, span: Span },
}

/// Splits characters into text runs and tag-shaped tokens
/// (`<name>` / `</name>` with `name` = letter followed by letters, digits,
/// spaces, `_` or `-`).
fn tokenize(chars: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut text_start = 0;
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some(tag) = tag_at(chars, i) {
                if text_start < i {
                    tokens.push(Token::Text { start: text_start, end: i });
                }
                let Token::Tag { span, .. } = tag else { unreachable!() };
                i = span.end;
                text_start = i;
                tokens.push(tag);
                continue;
            }
        }
        i += 1;
    }
    if text_start < chars.len() {
        tokens.push(Token::Text {
            start: text_start,
            end: chars.len(),
        });
    }
    tokens
}

fn tag_at(chars: &[char], start: usize) -> Option<Token> {
    let mut j = start + 1;
    let closing = chars.get(j) == Some(&'/');
    if closing {
        j += 1;
    }
    let name_start = j;
    if !chars.get(j)?.is_ascii_alphabetic() {
        return None;
    }
    while j < chars.len() && j - name_start <= MAX_TAG_NAME {
        let c = chars[j];
        if c == '>' {
            return Some(Token::Tag {
                name_start,
                name_end: j,
                closing,
                span: Span::new(start, j + 1),
            });
        }
        if !(c.is_ascii_alphanumeric() || c == ' ' || c == '_' || c == '-') {
            return None;
        }
        j += 1;
    }
    None
}

struct Completed {
    section: Section,
    open: Span,
    body: String,
}

/// Check `text` against `mode` and return the section bodies, or every
/// violation found.
pub fn parse_with(
    text: &str,
    mode: FormatMode,
    opts: &ParseOptions,
) -> Result<ParsedSections, FormatError> {
    let chars: Vec<char> = text.chars().take(opts.max_chars + 1).collect();
    if chars.len() > opts.max_chars {
        return Err(FormatError::single(
            ViolationCode::InputTooLong,
            Span::new(opts.max_chars, opts.max_chars),
            format!("input exceeds {} characters", opts.max_chars),
        ));
    }
    let mut violations = Vec::new();
    let mut completed: Vec<Completed> = Vec::new();
    // (section, opening tag span, body start)
    let mut open: Option<(Section, Span, usize)> = None;

    let push = |v: &mut Vec<Violation>, code, span, message: String| {
        v.push(Violation { code, span, message });
    };

    for tok in tokenize(&chars) {
        match tok {
            Token::Text { start, end } => {
                if open.is_some() || !opts.reject_stray_text {
                    continue;
                }
                let seg = &chars[start..end];
                if let Some(first) = seg.iter().position(|c| !c.is_whitespace()) {
                    let last = seg.iter().rposition(|c| !c.is_whitespace()).unwrap_or(first);
                    push(
                        &mut violations,
                        ViolationCode::StrayText,
                        Span::new(start + first, start + last + 1),
                        "text outside of any section".into(),
                    );
                }
            }
            Token::Tag {
                name_start,
                name_end,
                closing,
                span,
            } => {
                let name: String = chars[name_start..name_end].iter().collect();
                let section = match Section::from_tag_name(&name) {
                    Some(s) if mode.position(s).is_some() => s,
                    Some(_) => {
                        push(
                            &mut violations,
                            ViolationCode::UnknownTag,
                            span,
                            format!("<{name}> is not a section in {mode:?} mode"),
                        );
                        continue;
                    }
                    None => {
                        push(
                            &mut violations,
                            ViolationCode::UnknownTag,
                            span,
                            format!("unknown tag <{}{name}>", if closing { "/" } else { "" }),
                        );
                        continue;
                    }
                };
                match (open.take(), closing) {
                    (None, false) => open = Some((section, span, span.end)),
                    (None, true) => push(
                        &mut violations,
                        ViolationCode::UnclosedTag,
                        span,
                        format!("</{name}> has no matching opening tag"),
                    ),
                    (Some((cur, cur_span, _)), false) => {
                        push(
                            &mut violations,
                            ViolationCode::UnclosedTag,
                            cur_span,
                            format!("<{}> is not closed before <{name}>", cur.tag_name()),
                        );
                        open = Some((section, span, span.end));
                    }
                    (Some((cur, cur_span, body_start)), true) => {
                        if cur == section {
                            let body: String = chars[body_start..span.start].iter().collect();
                            completed.push(Completed {
                                section,
                                open: cur_span,
                                body: body.trim().to_string(),
                            });
                        } else {
                            push(
                                &mut violations,
                                ViolationCode::UnclosedTag,
                                cur_span,
                                format!("<{}> is closed by </{name}>", cur.tag_name()),
                            );
                        }
                    }
                }
            }
        }
    }
    if let Some((cur, cur_span, _)) = open {
        push(
            &mut violations,
            ViolationCode::UnclosedTag,
            cur_span,
            format!("<{}> is never closed", cur.tag_name()),
        );
    }

    for &section in mode.sections() {
        let occurrences: Vec<&Completed> =
            completed.iter().filter(|c| c.section == section).collect();
        match occurrences.as_slice() {
            [] => push(
                &mut violations,
                ViolationCode::MissingSection,
                Span::new(chars.len(), chars.len()),
                format!("missing <{}> section", section.tag_name()),
            ),
            [_, rest @ ..] => {
                for dup in rest {
                    push(
                        &mut violations,
                        ViolationCode::DuplicateSection,
                        dup.open,
                        format!("<{}> appears more than once", section.tag_name()),
                    );
                }
            }
        }
    }

    if opts.require_order {
        let mut max_seen: Option<usize> = None;
        for c in &completed {
            let pos = mode.position(c.section).expect("only mode sections complete");
            if let Some(prev) = max_seen {
                if pos < prev {
                    push(
                        &mut violations,
                        ViolationCode::OrderViolation,
                        c.open,
                        format!("<{}> is out of order", c.section.tag_name()),
                    );
                    break;
                }
            }
            max_seen = Some(max_seen.map_or(pos, |p| p.max(pos)));
        }
    }

    if opts.reject_empty {
        for c in completed.iter().filter(|c| c.body.is_empty()) {
            push(
                &mut violations,
                ViolationCode::EmptySection,
                c.open,
                format!("<{}> body is empty", c.section.tag_name()),
            );
        }
    }

    if !violations.is_empty() {
        violations.sort_by_key(|v| (v.span.start, v.span.end));
        return Err(FormatError(FormatReport::from_violations(violations)));
    }

    let mut bodies = Vec::with_capacity(mode.sections().len());
    for &section in mode.sections() {
        let c = completed
            .iter()
            .find(|c| c.section == section)
            .expect("presence checked above");
        bodies.push((section, c.body.clone()));
    }
    Ok(ParsedSections { mode, bodies })
}

/// Parse a four-section response with the strict default options.
pub fn parse_coa(text: &str) -> Result<CoaResponse, FormatError> {
    let parsed = parse_with(text, FormatMode::Coa, &ParseOptions::default())?;
    let body = |s| parsed.get(s).unwrap_or_default().to_string();
    // Bodies that tokenized cleanly within the response are already valid.
    CoaResponse::new(
        body(Section::GeneralDescription),
        body(Section::Evidence),
        body(Section::Thought),
        body(Section::Answer),
    )
}

/// Full diagnostic report for `text` under `mode`.
pub fn validate(text: &str, mode: FormatMode) -> FormatReport {
    match parse_with(text, mode, &ParseOptions::default()) {
        Ok(_) => FormatReport::from_violations(Vec::new()),
        Err(FormatError(report)) => report,
    }
}

/// Trimmed body of the single answer section of a response conforming to `mode`.
pub fn extract_answer(text: &str, mode: FormatMode) -> Result<String, FormatError> {
    parse_with(text, mode, &ParseOptions::default()).map(|p| p.answer().to_string())
}

/// Canonical serialization: sections in order, one newline between them.
pub fn render_coa(resp: &CoaResponse) -> String {
    render_sections(
        Section::ALL
            .iter()
            .map(|s| (*s, resp.section(*s))),
    )
}

pub(crate) fn render_sections<'a>(sections: impl Iterator<Item = (Section, &'a str)>) -> String {
    let mut out = String::new();
    for (i, (section, body)) in sections.enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let name = section.tag_name();
        out.push('<');
        out.push_str(name);
        out.push('>');
        out.push_str(body);
        out.push_str("</");
        out.push_str(name);
        out.push('>');
    }
    out
}

impl fmt::Display for CoaResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_coa(self))
    }
}

/// Banned-term list for the general description section.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    terms: std::collections::BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("lexicon term at position {0} is empty")]
pub struct EmptyTermError(pub usize);

impl Lexicon {
    pub fn new<I, S>(terms: I) -> Result<Self, EmptyTermError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = std::collections::BTreeSet::new();
        for (i, t) in terms.into_iter().enumerate() {
            let canon = canonical_phrase(t.as_ref());
            if canon.is_empty() {
                return Err(EmptyTermError(i));
            }
            set.insert(canon);
        }
        Ok(Self { terms: set })
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LexiconHit {
    pub term: String,
    pub span: Span,
}

/// Every case-insensitive, word-bounded occurrence of a lexicon term,
/// ordered by position. Diagnostic only.
pub fn lexicon_scan(section_text: &str, lexicon: &Lexicon) -> Vec<LexiconHit> {
    let folded = FoldedText::new(section_text);
    let mut hits: Vec<LexiconHit> = lexicon
        .terms
        .iter()
        .flat_map(|term| {
            Phrase::new(term)
                .occurrences(&folded)
                .into_iter()
                .map(move |(start, end)| LexiconHit {
                    term: term.clone(),
                    span: Span::new(start, end),
                })
        })
        .collect();
    hits.sort_by(|a, b| (a.span.start, a.span.end, &a.term).cmp(&(b.span.start, b.span.end, &b.term)));
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "<general description>red shapes</general description><evidence>A; B</evidence><thought>compare</thought><answer>grasper</answer>";

    fn codes(text: &str, mode: FormatMode) -> Vec<ViolationCode> {
        validate(text, mode).violations.iter().map(|v| v.code).collect()
    }

    #[test]
    fn minimal_instance_parses() {
        let r = parse_coa(MINIMAL).unwrap();
        assert_eq!(r, CoaResponse::new("red shapes", "A; B", "compare", "grasper").unwrap());
    }

    #[test]
    fn vanilla_cot_misses_two_sections() {
        let err = parse_coa("<thought>x</thought><answer>y</answer>").unwrap_err();
        assert_eq!(err.report().violations.len(), 2);
        assert_eq!(err.report().count(ViolationCode::MissingSection), 2);
        assert!(!err.report().valid);
    }

    #[test]
    fn order_is_enforced() {
        let text = "<evidence>e</evidence><general description>g</general description><thought>t</thought><answer>a</answer>";
        assert_eq!(codes(text, FormatMode::Coa), vec![ViolationCode::OrderViolation]);
        let lax = ParseOptions {
            require_order: false,
            ..Default::default()
        };
        let parsed = parse_with(text, FormatMode::Coa, &lax).unwrap();
        assert_eq!(parsed.get(Section::GeneralDescription), Some("g"));
    }

    #[test]
    fn empty_section_rejected() {
        let text = "<general description>g</general description><evidence>e</evidence><thought>t</thought><answer>  </answer>";
        assert_eq!(codes(text, FormatMode::Coa), vec![ViolationCode::EmptySection]);
    }

    #[test]
    fn stray_text_and_whitespace_between_sections() {
        let spaced = "  <general description> g </general description>\n\n<evidence>e</evidence>\t<thought>t</thought>\n<answer>a</answer>\n";
        assert!(validate(spaced, FormatMode::Coa).valid);
        let stray = "Sure! <general description>g</general description><evidence>e</evidence><thought>t</thought><answer>a</answer>";
        let report = validate(stray, FormatMode::Coa);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, ViolationCode::StrayText);
        assert_eq!(report.violations[0].span, Span::new(0, 5));
    }

    #[test]
    fn tags_are_case_sensitive() {
        let text = MINIMAL.replace("<answer>", "<Answer>");
        let report = validate(&text, FormatMode::Coa);
        assert!(report.has(ViolationCode::UnknownTag));
        assert!(!report.valid);
    }

    #[test]
    fn unclosed_and_mismatched_tags() {
        let text = "<general description>g<evidence>e</evidence><thought>t</thought><answer>a</answer>";
        assert!(validate(text, FormatMode::Coa).has(ViolationCode::UnclosedTag));
        let text = "<general description>g</general description><evidence>e</evidence><thought>t</thought><answer>a";
        assert!(validate(text, FormatMode::Coa).has(ViolationCode::UnclosedTag));
        let text = "<general description>g</evidence>";
        assert!(validate(text, FormatMode::Coa).has(ViolationCode::UnclosedTag));
    }

    #[test]
    fn angle_brackets_in_prose_are_text() {
        let text = MINIMAL.replace("compare", "a < b and c > d, 3<4");
        assert!(parse_coa(&text).is_ok());
    }

    #[test]
    fn extract_answer_modes() {
        let text = MINIMAL.replace(">grasper<", ">grasper, hook<");
        assert_eq!(extract_answer(&text, FormatMode::Coa).unwrap(), "grasper, hook");
        assert_eq!(
            extract_answer("<thought>t</thought><answer>scissors</answer>", FormatMode::Cot).unwrap(),
            "scissors"
        );
        let twice = format!("{MINIMAL}<answer>hook</answer>");
        let err = extract_answer(&twice, FormatMode::Coa).unwrap_err();
        assert!(err.report().has(ViolationCode::DuplicateSection));
    }

    #[test]
    fn cot_mode_rejects_coa_sections() {
        assert!(validate(MINIMAL, FormatMode::Cot).has(ViolationCode::UnknownTag));
    }

    #[test]
    fn render_is_canonical() {
        let r = CoaResponse::new("g", "e", "t", "a").unwrap();
        assert_eq!(
            render_coa(&r),
            "<general description>g</general description>\n<evidence>e</evidence>\n<thought>t</thought>\n<answer>a</answer>"
        );
        assert_eq!(parse_coa(&render_coa(&r)).unwrap(), r);
    }

    #[test]
    fn invalid_response_rejected() {
        let err = CoaResponse::new("g", "e", " ", "a").unwrap_err();
        assert!(err.report().has(ViolationCode::EmptySection));
        assert!(CoaResponse::new("g", "e", "t", "x</answer>").is_err());
        let json = r#"{"general_description":"g","evidence":"","thought":"t","answer":"a"}"#;
        assert!(serde_json::from_str::<CoaResponse>(json).is_err());
    }

    #[test]
    fn input_cap() {
        let opts = ParseOptions {
            max_chars: 16,
            ..Default::default()
        };
        let err = parse_with(MINIMAL, FormatMode::Coa, &opts).unwrap_err();
        assert!(err.report().has(ViolationCode::InputTooLong));
    }

    #[test]
    fn spans_are_char_offsets() {
        let text = "é<thought>t</thought><answer>a</answer>";
        let report = validate(text, FormatMode::Cot);
        assert_eq!(report.violations[0].span, Span::new(0, 1));
    }

    #[test]
    fn lexicon_examples() {
        let lex = Lexicon::new(["duodenum", "grasper"]).unwrap();
        assert!(lexicon_scan("a metal rod near pink tissue", &lex).is_empty());
        let lex = Lexicon::new(["grasper"]).unwrap();
        assert_eq!(
            lexicon_scan("the grasper holds tissue", &lex),
            vec![LexiconHit {
                term: "grasper".into(),
                span: Span::new(4, 11)
            }]
        );
        assert_eq!(lexicon_scan("Grasper; GRASPER", &lex).len(), 2);
    }

    #[test]
    fn lexicon_normalizes_and_rejects_empty() {
        let lex = Lexicon::new(["  Needle   Driver "]).unwrap();
        assert_eq!(lex.terms().collect::<Vec<_>>(), vec!["needle driver"]);
        assert_eq!(Lexicon::new(["ok", " "]), Err(EmptyTermError(1)));
    }
}
