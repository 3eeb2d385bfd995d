//! POML-lite: a `<poml>` root holding module elements and
//! `<include src="..."/>` references. Module files hold exactly one module
//! element. Bodies are plain text with the five XML character entities;
//! there are no other attributes, variables or templates.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{normalize_newlines, ModuleKind, PromptError, PromptModule, StructuredPrompt};

/// Maps an include `src` to module-file text.
pub trait ImportResolver: Send + Sync {
    /// Returns the file text and the source id recorded on the module.
    fn resolve(&self, src: &str) -> Result<(String, String), String>;
}

/// Resolves includes against a directory, normally the main file's parent.
#[derive(Debug, Clone)]
pub struct FsResolver {
    base: PathBuf,
}

impl FsResolver {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }

    pub fn for_main_file(main: &Path) -> Self {
        Self::new(main.parent().unwrap_or(Path::new(".")))
    }
}

impl ImportResolver for FsResolver {
    fn resolve(&self, src: &str) -> Result<(String, String), String> {
        let path = self.base.join(src);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok((text, src.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MapResolver {
    files: HashMap<String, String>,
}

impl MapResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, src: impl Into<String>, text: impl Into<String>) -> Self {
        self.files.insert(src.into(), text.into());
        self
    }
}

impl ImportResolver for MapResolver {
    fn resolve(&self, src: &str) -> Result<(String, String), String> {
        self.files.get(src).map(|t| (t.clone(), src.to_string())).ok_or_else(|| "no such file".to_string())
    }
}

/// Parses a module file holding a single module element.
pub fn parse_module_file(text: &str, expected: Option<ModuleKind>) -> Result<PromptModule, PromptError> {
    let text = normalize_newlines(text);
    let mut sc = Scanner::new(&text);
    sc.skip_trivia()?;
    let kind = sc.open_module_tag()?;
    let module = sc.module_body(kind)?;
    sc.skip_trivia()?;
    if !sc.at_end() {
        return Err(sc.malformed("unexpected content after the module element"));
    }
    match expected {
        Some(expected) if expected != kind => Err(PromptError::KindMismatch { expected, found: kind }),
        _ => Ok(module),
    }
}

/// Parses a main `<poml>` file, pulling included modules through `resolver`.
pub fn parse_main_file(text: &str, resolver: &dyn ImportResolver) -> Result<StructuredPrompt, PromptError> {
    let text = normalize_newlines(text);
    let mut sc = Scanner::new(&text);
    sc.skip_trivia()?;
    sc.expect("<poml>")?;
    let mut modules = Vec::new();
    loop {
        sc.skip_trivia()?;
        if sc.eat("</poml>") {
            break;
        }
        if sc.at_end() {
            return Err(sc.malformed("missing </poml>"));
        }
        if sc.eat("<include") {
            let src = sc.include_src()?;
            let (module_text, source_id) =
                resolver.resolve(&src).map_err(|reason| PromptError::UnresolvedInclude { src: src.clone(), reason })?;
            let module = parse_module_file(&module_text, None)?.with_source(source_id);
            modules.push(module);
        } else if sc.peek_is('<') {
            let kind = sc.open_module_tag()?;
            modules.push(sc.module_body(kind)?);
        } else {
            return Err(sc.malformed("text outside a module element"));
        }
    }
    sc.skip_trivia()?;
    if !sc.at_end() {
        return Err(sc.malformed("unexpected content after </poml>"));
    }
    StructuredPrompt::new(modules)
}

/// Serializes a module as a standalone module file.
pub fn module_to_markup(module: &PromptModule) -> String {
    let tag = module.kind().tag();
    format!("<{tag}>{}</{tag}>\n", escape_text(module.value()))
}

/// Main file with every module inline.
pub fn prompt_to_markup(prompt: &StructuredPrompt) -> String {
    let mut out = String::from("<poml>\n");
    for m in prompt.modules() {
        out.push_str("  ");
        out.push_str(&module_to_markup(m));
    }
    out.push_str("</poml>\n");
    out
}

/// Main file importing each module from `<tag>.poml`.
pub fn main_file_with_includes(prompt: &StructuredPrompt) -> String {
    let mut out = String::from("<poml>\n");
    for m in prompt.modules() {
        out.push_str(&format!("  <include src=\"{}.poml\"/>\n", m.kind().tag()));
    }
    out.push_str("</poml>\n");
    out
}

const RESERVED_TAGS: &[&str] = &["poml", "include", "role", "background", "requirements", "example", "output-format"];

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn peek_is(&self, c: char) -> bool {
        self.rest().starts_with(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), PromptError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.malformed(&format!("expected {s}")))
        }
    }

    fn malformed(&self, what: &str) -> PromptError {
        let line = self.text[..self.pos.min(self.text.len())].matches('\n').count() + 1;
        PromptError::MalformedMarkup(format!("line {line}: {what}"))
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Whitespace, comments and an optional XML declaration.
    fn skip_trivia(&mut self) -> Result<(), PromptError> {
        loop {
            self.skip_ws();
            if self.eat("<!--") {
                match self.rest().find("-->") {
                    Some(end) => self.pos += end + 3,
                    None => return Err(self.malformed("unterminated comment")),
                }
            } else if self.eat("<?") {
                match self.rest().find("?>") {
                    Some(end) => self.pos += end + 2,
                    None => return Err(self.malformed("unterminated declaration")),
                }
            } else {
                return Ok(());
            }
        }
    }

    fn open_module_tag(&mut self) -> Result<ModuleKind, PromptError> {
        if !self.eat("<") {
            return Err(self.malformed("expected a module element"));
        }
        let end = self.rest().find('>').ok_or_else(|| self.malformed("unterminated tag"))?;
        let name = &self.rest()[..end];
        let kind = ModuleKind::from_tag(name.trim_end()).ok_or_else(|| {
            if name.contains(char::is_whitespace) {
                self.malformed(&format!("attributes are not allowed on <{name}>"))
            } else {
                self.malformed(&format!("unknown element <{name}>"))
            }
        })?;
        self.pos += end + 1;
        Ok(kind)
    }

    fn module_body(&mut self, kind: ModuleKind) -> Result<PromptModule, PromptError> {
        let close = format!("</{}>", kind.tag());
        let end =
            self.rest().find(&close).ok_or_else(|| self.malformed(&format!("<{}> is never closed", kind.tag())))?;
        let raw = &self.rest()[..end];
        if let Some(tag) = nested_reserved_tag(raw) {
            return Err(self.malformed(&format!("<{tag}> inside <{}>", kind.tag())));
        }
        let body = unescape_text(raw);
        self.pos += end + close.len();
        PromptModule::new(kind, body)
    }

    /// Attributes of `<include ... />` (the `<include` prefix already eaten).
    fn include_src(&mut self) -> Result<String, PromptError> {
        let mut src = None;
        loop {
            self.skip_ws();
            if self.eat("/>") {
                break;
            }
            if self.eat(">") {
                self.skip_ws();
                self.expect("</include>")?;
                break;
            }
            let eq = self.rest().find('=').ok_or_else(|| self.malformed("malformed <include> attribute"))?;
            let name = self.rest()[..eq].trim().to_string();
            self.pos += eq + 1;
            self.skip_ws();
            let quote = self
                .rest()
                .chars()
                .next()
                .filter(|c| *c == '"' || *c == '\'')
                .ok_or_else(|| self.malformed("attribute value must be quoted"))?;
            self.pos += 1;
            let close = self.rest().find(quote).ok_or_else(|| self.malformed("unterminated attribute value"))?;
            let value = unescape_text(&self.rest()[..close]);
            self.pos += close + 1;
            if name != "src" {
                return Err(self.malformed(&format!("unsupported <include> attribute {name:?}")));
            }
            if src.replace(value).is_some() {
                return Err(self.malformed("duplicate src attribute"));
            }
        }
        match src {
            Some(s) if !s.trim().is_empty() => Ok(s),
            _ => Err(self.malformed("<include> without src")),
        }
    }
}

fn nested_reserved_tag(body: &str) -> Option<&'static str> {
    RESERVED_TAGS.iter().copied().find(|tag| {
        [format!("<{tag}>"), format!("<{tag} "), format!("</{tag}>"), format!("<{tag}/")]
            .iter()
            .any(|pat| body.contains(pat.as_str()))
    })
}

fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_text(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let entity = &rest[1..semi];
            let c = match entity {
                "lt" => Some('<'),
                "gt" => Some('>'),
                "amp" => Some('&'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                _ => entity
                    .strip_prefix("#x")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                    .and_then(char::from_u32),
            }?;
            Some((c, semi + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_module_prompt() -> StructuredPrompt {
        StructuredPrompt::new(vec![
            PromptModule::new(ModuleKind::Role, "You are <b>bold</b> & brief.").unwrap(),
            PromptModule::new(ModuleKind::OutputFormat, "JSON only").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn inline_main_file_round_trips() {
        let p = two_module_prompt();
        let text = prompt_to_markup(&p);
        assert_eq!(parse_main_file(&text, &MapResolver::new()).unwrap(), p);
    }

    #[test]
    fn include_main_file_round_trips() {
        let p = two_module_prompt();
        let mut resolver = MapResolver::new();
        for m in p.modules() {
            resolver = resolver.with(format!("{}.poml", m.kind().tag()), module_to_markup(m));
        }
        let main = main_file_with_includes(&p);
        assert!(main.contains("<include src=\"output-format.poml\"/>"));
        assert_eq!(parse_main_file(&main, &resolver).unwrap().rendered(), p.rendered());
    }

    #[test]
    fn parses_role_module() {
        let m = parse_module_file("<role>You are an assistant for Practical Writing tasks.</role>", None).unwrap();
        assert_eq!(m.kind(), ModuleKind::Role);
        assert_eq!(m.value(), "You are an assistant for Practical Writing tasks.");
    }

    #[test]
    fn blank_body_is_empty_module() {
        assert_eq!(parse_module_file("<role>   </role>", None), Err(PromptError::EmptyModule(ModuleKind::Role)));
    }

    #[test]
    fn requirements_body_round_trips_through_markup() {
        let m = parse_module_file(
            "<requirements>1. ≤200 words\n2. mention the investor</requirements>",
            Some(ModuleKind::Requirements),
        )
        .unwrap();
        assert_eq!(m.value(), "1. ≤200 words\n2. mention the investor");
        assert_eq!(parse_module_file(&module_to_markup(&m), None).unwrap(), m);
    }

    #[test]
    fn entities_are_decoded_and_reescaped() {
        let m = parse_module_file("<example>a &lt;b&gt; &amp; c &#x41;&#66; &bogus</example>", None).unwrap();
        assert_eq!(m.value(), "a <b> & c AB &bogus");
        assert_eq!(parse_module_file(&module_to_markup(&m), None).unwrap(), m);
    }

    #[test]
    fn crlf_input_is_normalized() {
        let m = parse_module_file("<background>\r\nline one\r\nline two\r\n</background>\r\n", None).unwrap();
        assert_eq!(m.value(), "line one\nline two");
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "<role>unclosed",
            "<summary>x</summary>",
            "<role>x</background>",
            "<role>x</role><role>y</role>",
            "<role>a <background>b</background></role>",
            "plain text",
            "<role id=\"1\">x</role>",
        ] {
            assert!(matches!(parse_module_file(bad, None), Err(PromptError::MalformedMarkup(_))), "{bad}");
        }
    }

    #[test]
    fn kind_mismatch() {
        assert_eq!(
            parse_module_file("<role>x</role>", Some(ModuleKind::Example)),
            Err(PromptError::KindMismatch { expected: ModuleKind::Example, found: ModuleKind::Role })
        );
    }

    fn resolver() -> MapResolver {
        MapResolver::new()
            .with("role.poml", "<role>You are a poet.</role>")
            .with("role2.poml", "<!-- alt --><role>You are a critic.</role>")
            .with("req.poml", "<requirements>Write a haiku.</requirements>\n")
    }

    #[test]
    fn includes_are_sorted_by_rank() {
        let main = "<poml>\n  <include src=\"req.poml\"/>\n  <include src='role.poml' />\n</poml>\n";
        let p = parse_main_file(main, &resolver()).unwrap();
        let kinds: Vec<_> = p.modules().iter().map(|m| m.kind()).collect();
        assert_eq!(kinds, vec![ModuleKind::Role, ModuleKind::Requirements]);
        assert_eq!(p.modules()[0].source_id(), Some("role.poml"));
    }

    #[test]
    fn inline_and_included_modules_mix() {
        let main = "<?xml version=\"1.0\"?><poml><output-format>JSON</output-format><include src=\"role.poml\"></include></poml>";
        let p = parse_main_file(main, &resolver()).unwrap();
        assert_eq!(p.modules().len(), 2);
        assert_eq!(p.modules()[1].source_id(), None);
    }

    #[test]
    fn main_file_errors() {
        let r = resolver();
        assert_eq!(parse_main_file("<poml></poml>", &r), Err(PromptError::NoModules));
        assert_eq!(
            parse_main_file("<poml><include src=\"role.poml\"/><include src=\"role2.poml\"/></poml>", &r),
            Err(PromptError::DuplicateModuleKind(ModuleKind::Role))
        );
        assert!(matches!(
            parse_main_file("<poml><include src=\"missing.poml\"/></poml>", &r),
            Err(PromptError::UnresolvedInclude { .. })
        ));
        for bad in [
            "<poml>",
            "<poml>stray text</poml>",
            "<poml><include/></poml>",
            "<poml><include href=\"x\"/></poml>",
            "<poml></poml>trailing",
            "<role>x</role>",
        ] {
            assert!(matches!(parse_main_file(bad, &r), Err(PromptError::MalformedMarkup(_))), "{bad}");
        }
    }

    #[test]
    fn fs_resolver_reads_relative_to_main_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("modules")).unwrap();
        std::fs::write(dir.path().join("modules/role.poml"), "<role>R</role>").unwrap();
        let main = dir.path().join("main.poml");
        std::fs::write(&main, "<poml><include src=\"modules/role.poml\"/></poml>").unwrap();
        let text = std::fs::read_to_string(&main).unwrap();
        let p = parse_main_file(&text, &FsResolver::for_main_file(&main)).unwrap();
        assert_eq!(p.modules()[0].value(), "R");
        assert_eq!(p.modules()[0].source_id(), Some("modules/role.poml"));
    }
}
