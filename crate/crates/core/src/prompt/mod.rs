//! Modular prompts: the five module kinds, POML-lite markup, Markdown rendering
//! and decomposition of plain prompts back into modules.

mod decompose;
mod markup;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

pub use decompose::{decompose_plain_prompt, ModelExtractor, PromptExtractor, RuleExtractor, RuleMode};
pub use markup::{
    main_file_with_includes, module_to_markup, parse_main_file, parse_module_file, prompt_to_markup, FsResolver,
    ImportResolver, MapResolver,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("malformed markup: {0}")]
    MalformedMarkup(String),
    #[error("{0} module has an empty body")]
    EmptyModule(ModuleKind),
    #[error("expected a {expected} module, found {found}")]
    KindMismatch { expected: ModuleKind, found: ModuleKind },
    #[error("cannot resolve include {src:?}: {reason}")]
    UnresolvedInclude { src: String, reason: String },
    #[error("more than one {0} module")]
    DuplicateModuleKind(ModuleKind),
    #[error("a prompt needs at least one module")]
    NoModules,
    #[error("prompt text is empty")]
    EmptyPrompt,
    #[error("prompt extraction failed: {0}")]
    ExtractionFailed(String),
}

/// The module kinds, declared in rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModuleKind {
    Role,
    Background,
    Requirements,
    Example,
    OutputFormat,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 5] = [
        ModuleKind::Role,
        ModuleKind::Background,
        ModuleKind::Requirements,
        ModuleKind::Example,
        ModuleKind::OutputFormat,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    /// Element name in POML-lite markup.
    pub fn tag(self) -> &'static str {
        match self {
            ModuleKind::Role => "role",
            ModuleKind::Background => "background",
            ModuleKind::Requirements => "requirements",
            ModuleKind::Example => "example",
            ModuleKind::OutputFormat => "output-format",
        }
    }

    /// Markdown heading text.
    pub fn heading(self) -> &'static str {
        match self {
            ModuleKind::OutputFormat => "Output Format",
            other => other.type_name(),
        }
    }

    /// `@type` of the module node in JSON-LD.
    pub fn type_name(self) -> &'static str {
        match self {
            ModuleKind::Role => "Role",
            ModuleKind::Background => "Background",
            ModuleKind::Requirements => "Requirements",
            ModuleKind::Example => "Example",
            ModuleKind::OutputFormat => "OutputFormat",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn from_type_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.type_name() == name)
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.type_name())
    }
}

impl FromStr for ModuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_tag(s).or_else(|| Self::from_type_name(s)).ok_or_else(|| format!("unknown module kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptModule {
    kind: ModuleKind,
    value: String,
    source_id: Option<String>,
}

impl PromptModule {
    /// Builds a module, trimming `value`. Fails when nothing is left.
    pub fn new(kind: ModuleKind, value: impl AsRef<str>) -> Result<Self, PromptError> {
        let value = normalize_newlines(value.as_ref()).trim().to_string();
        if value.is_empty() {
            return Err(PromptError::EmptyModule(kind));
        }
        Ok(Self { kind, value, source_id: None })
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn kind(&self) -> ModuleKind {
        self.kind
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }
}

/// A prompt as an ordered set of typed modules, at most one per kind.
#[derive(Clone)]
pub struct StructuredPrompt {
    modules: Vec<PromptModule>,
    rendered: OnceLock<String>,
}

impl StructuredPrompt {
    pub fn new(mut modules: Vec<PromptModule>) -> Result<Self, PromptError> {
        if modules.is_empty() {
            return Err(PromptError::NoModules);
        }
        modules.sort_by_key(|m| m.kind.rank());
        if let Some(w) = modules.windows(2).find(|w| w[0].kind == w[1].kind) {
            return Err(PromptError::DuplicateModuleKind(w[0].kind));
        }
        Ok(Self { modules, rendered: OnceLock::new() })
    }

    pub fn modules(&self) -> &[PromptModule] {
        &self.modules
    }

    pub fn module(&self, kind: ModuleKind) -> Option<&PromptModule> {
        self.modules.iter().find(|m| m.kind == kind)
    }

    /// Markdown rendering, computed once per value.
    pub fn rendered(&self) -> &str {
        self.rendered.get_or_init(|| render_markdown(self))
    }
}

impl PartialEq for StructuredPrompt {
    fn eq(&self, other: &Self) -> bool {
        self.modules == other.modules
    }
}

impl Eq for StructuredPrompt {}

impl fmt::Debug for StructuredPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructuredPrompt").field("modules", &self.modules).finish()
    }
}

/// `# <Heading>\n\n<value>\n\n` per module in rank order, ending in exactly
/// one newline.
pub fn render_markdown(prompt: &StructuredPrompt) -> String {
    let mut out = String::new();
    for module in &prompt.modules {
        out.push_str("# ");
        out.push_str(module.kind.heading());
        out.push_str("\n\n");
        out.push_str(&module.value);
        out.push_str("\n\n");
    }
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    out.push('\n');
    out
}

pub(crate) fn normalize_newlines(text: &str) -> String {
    if text.contains('\r') {
        text.replace("\r\n", "\n").replace('\r', "\n")
    } else {
        text.to_string()
    }
}
