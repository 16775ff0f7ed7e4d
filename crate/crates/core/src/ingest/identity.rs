use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Patterns applied to both name and email when no explicit list is given.
pub const DEFAULT_BOT_PATTERNS: &[&str] = &["*[bot]*", "*-bot@*"];

/// A resolved developer identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AuthorId {
    pub canonical_key: String,
    pub display_name: String,
    pub is_bot: bool,
}

impl fmt::Display for AuthorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_key)
    }
}

/// Maps lowercased, trimmed emails onto a canonical key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasMap(pub BTreeMap<String, String>);

impl AliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, canonical: &str) {
        self.0
            .insert(alias.trim().to_lowercase(), canonical.trim().to_lowercase());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `alias,canonical` lines. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = Self::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (alias, canonical) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected `alias,canonical`", no + 1))?;
            if alias.trim() == "alias" && canonical.trim() == "canonical" {
                continue;
            }
            map.insert(alias, canonical);
        }
        Ok(map)
    }
}

/// Case-insensitive wildcard match where only `*` and `?` are special.
///
/// Square brackets are literal so that `*[bot]*` matches `dependabot[bot]`.
pub fn wildcard_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let t: Vec<char> = text.to_lowercase().chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

pub fn resolve_identity<S: AsRef<str>>(
    name: &str,
    email: &str,
    alias_map: &AliasMap,
    bot_patterns: &[S],
) -> Result<AuthorId, IngestError> {
    let name = name.trim();
    let email_key = email.trim().to_lowercase();
    if name.is_empty() && email_key.is_empty() {
        return Err(IngestError::UnidentifiableAuthor);
    }
    let canonical_key = if let Some(c) = alias_map.get(&email_key) {
        c.to_string()
    } else if !email_key.is_empty() {
        email_key.clone()
    } else {
        name.to_lowercase()
    };
    let is_bot = bot_patterns.iter().any(|p| {
        let p = p.as_ref();
        (!name.is_empty() && wildcard_match(p, name))
            || (!email_key.is_empty() && wildcard_match(p, &email_key))
    });
    Ok(AuthorId {
        canonical_key,
        display_name: if name.is_empty() { email.trim().to_string() } else { name.to_string() },
        is_bot,
    })
}
