//! Python source facts: symbols, imports, base-class lists and name reads.
//!
//! Nothing in here knows about the graph. The indexer turns [`FileFacts`]
//! into nodes and edges.

mod extract;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::extract_facts;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParserError {
    #[error("invalid path {path}: {reason}")]
    InvalidPath { path: String, reason: String },
    #[error("relative import in {module} (level {level}) escapes the repository root")]
    ImportEscapesRoot { module: String, level: u32 },
}

/// A syntax error reported for one file.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("{file_path}:{line}:{column}: {message}")]
pub struct ParseError {
    pub file_path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Returned when a file does not parse. `facts` is the MODULE-only fact set
/// with `parse_failed` set, so the file still shows up in the graph.
#[derive(Debug, Clone)]
pub struct ParseFailure {
    pub error: ParseError,
    pub facts: FileFacts,
}

/// One repository file as handed to the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub file_path: String,
    pub content: String,
    pub content_hash: String,
}

impl SourceUnit {
    pub fn new(file_path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let content_hash = content_hash(content.as_bytes());
        Self {
            file_path: file_path.into(),
            content,
            content_hash,
        }
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefKind {
    Class,
    Function,
    Method,
    Field,
    GlobalVariable,
}

impl fmt::Display for DefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DefKind::Class => "class",
            DefKind::Function => "function",
            DefKind::Method => "method",
            DefKind::Field => "field",
            DefKind::GlobalVariable => "global_variable",
        };
        f.write_str(s)
    }
}

/// Byte range of a definition. Lines are 1-based and informational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpan {
    pub file_path: String,
    pub start_byte: usize,
    pub end_byte: usize,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefFact {
    pub kind: DefKind,
    pub name: String,
    pub qualified_name: String,
    /// Simple name of the owning class, for methods and fields.
    pub enclosing_class: Option<String>,
    pub signature: Option<String>,
    pub span: CodeSpan,
}

/// `import a.b as c` has `raw = "a.b"`, no names and one alias.
/// `from ..x import y as z` has `raw = "x"`, `level = 2`, `names = ["y"]`.
/// A star import is recorded with `names = ["*"]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportFact {
    pub raw: String,
    pub level: u32,
    pub is_from: bool,
    pub names: Vec<String>,
    pub aliases: Vec<Option<String>>,
    pub line: usize,
}

impl ImportFact {
    pub fn is_star(&self) -> bool {
        self.is_from && self.names.len() == 1 && self.names[0] == "*"
    }

    /// Names this import binds in the importing module's namespace, paired
    /// with the index into `names` (or `None` for a plain `import`).
    pub fn bindings(&self) -> Vec<(String, Option<usize>)> {
        if self.is_from {
            if self.is_star() {
                return Vec::new();
            }
            self.names
                .iter()
                .zip(&self.aliases)
                .enumerate()
                .map(|(i, (name, alias))| (alias.clone().unwrap_or_else(|| name.clone()), Some(i)))
                .collect()
        } else {
            let bound = match self.aliases.first().cloned().flatten() {
                Some(alias) => alias,
                None => self.raw.split('.').next().unwrap_or_default().to_string(),
            };
            vec![(bound, None)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBases {
    pub class_qualified_name: String,
    /// Base expressions as written, in source order. Keyword arguments such
    /// as `metaclass=` are not included.
    pub bases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReaderKind {
    Function,
    Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadForm {
    BareName,
    SelfAttribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseFact {
    pub reader: String,
    pub reader_kind: ReaderKind,
    pub name: String,
    pub form: ReadForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFacts {
    pub file_path: String,
    pub module_name: String,
    pub is_package_init: bool,
    pub definitions: Vec<DefFact>,
    pub imports: Vec<ImportFact>,
    pub bases: Vec<ClassBases>,
    pub uses: Vec<UseFact>,
    /// Literal `__all__`, when the module declares one.
    pub exports: Option<Vec<String>>,
    pub parse_failed: bool,
}

impl FileFacts {
    pub fn module_only(file_path: &str) -> Self {
        Self {
            file_path: file_path.to_string(),
            module_name: module_name_for(file_path),
            is_package_init: is_package_init(file_path),
            definitions: Vec::new(),
            imports: Vec::new(),
            bases: Vec::new(),
            uses: Vec::new(),
            exports: None,
            parse_failed: false,
        }
    }
}

pub fn is_package_init(file_path: &str) -> bool {
    file_path == "__init__.py" || file_path.ends_with("/__init__.py")
}

/// Dotted module name for a repo-relative, forward-slash path ending in `.py`.
pub fn module_name_for(file_path: &str) -> String {
    let stem = file_path.strip_suffix(".py").unwrap_or(file_path);
    let mut parts: Vec<&str> = stem.split('/').filter(|p| !p.is_empty()).collect();
    if parts.len() > 1 && parts.last() == Some(&"__init__") {
        parts.pop();
    }
    parts.join(".")
}

/// Repo-relative forward-slash form of `file_path`, which may be absolute or
/// relative to `repo_root`.
pub fn relative_path(repo_root: &Path, file_path: &Path) -> Result<String, ParserError> {
    let invalid = |reason: &str| ParserError::InvalidPath {
        path: file_path.display().to_string(),
        reason: reason.to_string(),
    };
    let rel = if file_path.is_absolute() {
        file_path
            .strip_prefix(repo_root)
            .map_err(|_| invalid("outside the repository root"))?
    } else {
        file_path
    };
    let mut parts = Vec::new();
    for comp in rel.components() {
        match comp {
            Component::Normal(p) => parts.push(p.to_str().ok_or_else(|| invalid("not UTF-8"))?),
            Component::CurDir => {}
            _ => return Err(invalid("outside the repository root")),
        }
    }
    if parts.is_empty() {
        return Err(invalid("empty path"));
    }
    Ok(parts.join("/"))
}

/// `a/b/c.py` → `a.b.c`, `a/b/__init__.py` → `a.b`.
pub fn resolve_module_name(repo_root: &Path, file_path: &Path) -> Result<String, ParserError> {
    let rel = relative_path(repo_root, file_path)?;
    if !rel.ends_with(".py") {
        return Err(ParserError::InvalidPath {
            path: rel,
            reason: "not a .py file".into(),
        });
    }
    Ok(module_name_for(&rel))
}

/// The set of dotted module names present in a repository.
#[derive(Debug, Clone, Default)]
pub struct ModuleSet {
    modules: BTreeSet<String>,
    roots: BTreeSet<String>,
}

impl ModuleSet {
    pub fn new<I, S>(modules: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = ModuleSet::default();
        for m in modules {
            set.insert(m.into());
        }
        set
    }

    pub fn insert(&mut self, module: String) {
        if let Some(root) = module.split('.').next() {
            self.roots.insert(root.to_string());
        }
        self.modules.insert(module);
    }

    pub fn contains(&self, module: &str) -> bool {
        self.modules.contains(module)
    }

    pub fn has_root(&self, first_component: &str) -> bool {
        self.roots.contains(first_component)
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.modules.iter()
    }

    /// Longest prefix of `dotted` that names a module, with the remainder.
    pub fn split_module_prefix<'a>(&self, dotted: &'a str) -> Option<(&'a str, Option<&'a str>)> {
        let mut end = dotted.len();
        loop {
            let prefix = &dotted[..end];
            if self.modules.contains(prefix) {
                let rest = if end == dotted.len() {
                    None
                } else {
                    Some(&dotted[end + 1..])
                };
                return Some((prefix, rest));
            }
            end = prefix.rfind('.')?;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ImportTarget {
    /// Absolute dotted name inside the repository. For a star import this
    /// is the source module itself.
    Internal(String),
    External(String),
}

/// Absolute targets for one import statement, one per imported name (one in
/// total for plain and star imports).
pub fn normalize_import(
    fact: &ImportFact,
    current_module: &str,
    is_package_init: bool,
    modules: &ModuleSet,
) -> Result<Vec<ImportTarget>, ParserError> {
    let base = if fact.level == 0 {
        fact.raw.clone()
    } else {
        let mut package: Vec<&str> = if current_module.is_empty() {
            Vec::new()
        } else {
            current_module.split('.').collect()
        };
        if !is_package_init {
            package.pop();
        }
        let level = fact.level as usize;
        if level > package.len() {
            return Err(ParserError::ImportEscapesRoot {
                module: current_module.to_string(),
                level: fact.level,
            });
        }
        package.truncate(package.len() + 1 - level);
        if !fact.raw.is_empty() {
            package.push(&fact.raw);
        }
        package.join(".")
    };

    let classify = |dotted: String| {
        let first = dotted.split('.').next().unwrap_or_default();
        if modules.has_root(first) {
            ImportTarget::Internal(dotted)
        } else {
            ImportTarget::External(dotted)
        }
    };

    if !fact.is_from || fact.is_star() {
        return Ok(vec![classify(base)]);
    }
    Ok(fact
        .names
        .iter()
        .map(|name| {
            if base.is_empty() {
                classify(name.clone())
            } else {
                classify(format!("{base}.{name}"))
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_import(raw: &str, level: u32, names: &[&str]) -> ImportFact {
        ImportFact {
            raw: raw.into(),
            level,
            is_from: true,
            names: names.iter().map(|s| s.to_string()).collect(),
            aliases: names.iter().map(|_| None).collect(),
            line: 1,
        }
    }

    #[test]
    fn module_names() {
        let root = Path::new("/repo");
        assert_eq!(resolve_module_name(root, Path::new("pkg/core.py")).unwrap(), "pkg.core");
        assert_eq!(resolve_module_name(root, Path::new("pkg/__init__.py")).unwrap(), "pkg");
        assert_eq!(resolve_module_name(root, Path::new("main.py")).unwrap(), "main");
        assert_eq!(
            resolve_module_name(root, Path::new("/repo/a/b/c.py")).unwrap(),
            "a.b.c"
        );
    }

    #[test]
    fn module_name_outside_root_is_invalid() {
        let root = Path::new("/repo");
        assert!(matches!(
            resolve_module_name(root, Path::new("/elsewhere/x.py")),
            Err(ParserError::InvalidPath { .. })
        ));
        assert!(matches!(
            resolve_module_name(root, Path::new("../x.py")),
            Err(ParserError::InvalidPath { .. })
        ));
    }

    // Expected values checked with importlib.util.resolve_name.
    #[test]
    fn relative_imports() {
        let modules = ModuleSet::new(["pkg", "pkg.sub", "pkg.sub.mod", "pkg.a", "pkg.core"]);
        let t = normalize_import(&from_import("", 1, &["helper"]), "pkg.sub", false, &modules).unwrap();
        assert_eq!(t, vec![ImportTarget::Internal("pkg.helper".into())]);

        let t = normalize_import(&from_import("a", 2, &["B"]), "pkg.sub.mod", false, &modules).unwrap();
        assert_eq!(t, vec![ImportTarget::Internal("pkg.a.B".into())]);

        let t = normalize_import(&from_import("core", 1, &["Engine"]), "pkg", true, &modules).unwrap();
        assert_eq!(t, vec![ImportTarget::Internal("pkg.core.Engine".into())]);
    }

    #[test]
    fn relative_import_escaping_root() {
        let modules = ModuleSet::new(["pkg", "pkg.sub", "main"]);
        let err = normalize_import(&from_import("", 2, &["x"]), "pkg.sub", false, &modules).unwrap_err();
        assert!(matches!(err, ParserError::ImportEscapesRoot { level: 2, .. }));
        assert!(normalize_import(&from_import("", 1, &["x"]), "main", false, &modules).is_err());
        assert!(normalize_import(&from_import("", 2, &["x"]), "pkg", true, &modules).is_err());
    }

    #[test]
    fn external_and_plain_imports() {
        let modules = ModuleSet::new(["pkg", "pkg.core"]);
        let os = ImportFact {
            raw: "os".into(),
            level: 0,
            is_from: false,
            names: vec![],
            aliases: vec![None],
            line: 1,
        };
        assert_eq!(
            normalize_import(&os, "pkg.core", false, &modules).unwrap(),
            vec![ImportTarget::External("os".into())]
        );
        let star = from_import("pkg.core", 0, &["*"]);
        assert_eq!(
            normalize_import(&star, "pkg", true, &modules).unwrap(),
            vec![ImportTarget::Internal("pkg.core".into())]
        );
    }

    #[test]
    fn module_prefix_split() {
        let modules = ModuleSet::new(["pkg", "pkg.core"]);
        assert_eq!(
            modules.split_module_prefix("pkg.core.Engine"),
            Some(("pkg.core", Some("Engine")))
        );
        assert_eq!(modules.split_module_prefix("pkg.core"), Some(("pkg.core", None)));
        assert_eq!(modules.split_module_prefix("other.x"), None);
    }

    #[test]
    fn import_bindings() {
        let mut f = from_import("m", 0, &["a", "b"]);
        f.aliases[1] = Some("c".into());
        assert_eq!(
            f.bindings(),
            vec![("a".to_string(), Some(0)), ("c".to_string(), Some(1))]
        );
        let plain = ImportFact {
            raw: "a.b".into(),
            level: 0,
            is_from: false,
            names: vec![],
            aliases: vec![None],
            line: 1,
        };
        assert_eq!(plain.bindings(), vec![("a".to_string(), None)]);
    }
}
