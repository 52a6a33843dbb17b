//! URL normalization and the in-app boundary.

use url::Url;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Normalization {
    /// Fragments are always removed; the query is removed only when set.
    pub strip_query: bool,
}

pub fn normalize(url: &Url, rules: Normalization) -> Url {
    let mut u = url.clone();
    u.set_fragment(None);
    if rules.strip_query {
        u.set_query(None);
    }
    u
}

/// Resolves `href` against `base`. `javascript:` pseudo-links resolve to
/// nothing.
pub fn resolve(base: &Url, href: &str) -> Option<Url> {
    let href = href.trim();
    if href.is_empty() || href.to_ascii_lowercase().starts_with("javascript:") {
        return None;
    }
    base.join(href).ok()
}

/// True unless `url` is http(s) on exactly `allowed_host` (case-insensitive).
/// Unparseable input counts as external.
pub fn is_external(url: &str, allowed_host: &str) -> bool {
    let Ok(u) = Url::parse(url) else {
        return true;
    };
    if !matches!(u.scheme(), "http" | "https") {
        return true;
    }
    match u.host_str() {
        Some(h) => !h.eq_ignore_ascii_case(allowed_host),
        None => true,
    }
}
