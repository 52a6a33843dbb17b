//! DOM inspection: titles, headings and clickable controls of one page.

use grag_core::graph::EdgeKind;
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::urls::{normalize, resolve, Normalization};

/// Placed between the title and the heading list in node descriptions.
pub const TITLE_SEPARATOR: &str = " \u{2014} ";
pub const HEADING_SEPARATOR: &str = "; ";

const CLICKABLE: &str = "a[href], button, input[type=submit], input[type=button], input[type=image], select, [role=menuitem]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clickable {
    pub label: String,
    /// Absolute and normalized. `None` for controls that do not navigate.
    pub target_url: Option<String>,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub url: String,
    pub title: String,
    pub headings: Vec<String>,
    /// Document order.
    pub clickables: Vec<Clickable>,
}

impl Page {
    /// Title, then the h1 to h3 texts.
    pub fn description(&self) -> String {
        match (self.title.is_empty(), self.headings.is_empty()) {
            (_, true) => self.title.clone(),
            (true, false) => self.headings.join(HEADING_SEPARATOR),
            (false, false) => format!("{}{TITLE_SEPARATOR}{}", self.title, self.headings.join(HEADING_SEPARATOR)),
        }
    }

    /// Title, else first heading, else the URL.
    pub fn display_name(&self) -> String {
        if !self.title.is_empty() {
            self.title.clone()
        } else if let Some(h) = self.headings.first() {
            h.clone()
        } else {
            self.url.clone()
        }
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn text_of(el: ElementRef<'_>) -> String {
    squash(&el.text().collect::<String>())
}

fn attr(el: ElementRef<'_>, name: &str) -> Option<String> {
    el.value().attr(name).map(squash).filter(|s| !s.is_empty())
}

fn label_of(el: ElementRef<'_>) -> String {
    let text = if el.value().name() == "input" {
        attr(el, "value").unwrap_or_default()
    } else if el.value().name() == "select" {
        String::new()
    } else {
        text_of(el)
    };
    if !text.is_empty() {
        return text;
    }
    ["aria-label", "title", "name", "id"]
        .iter()
        .find_map(|a| attr(el, a))
        .unwrap_or_default()
}

fn ancestors(el: ElementRef<'_>) -> impl Iterator<Item = ElementRef<'_>> {
    el.ancestors().filter_map(ElementRef::wrap)
}

fn in_menu(el: ElementRef<'_>) -> bool {
    el.value().attr("role") == Some("menuitem")
        || ancestors(el).any(|a| matches!(a.value().attr("role"), Some("menu" | "menubar")))
}

fn submits(el: ElementRef<'_>) -> bool {
    let ty = el.value().attr("type").map(str::to_ascii_lowercase);
    match el.value().name() {
        "button" => matches!(ty.as_deref(), None | Some("submit")),
        "input" => matches!(ty.as_deref(), Some("submit" | "image")),
        _ => false,
    }
}

/// The form action a submit control would navigate to, if any.
fn form_target(el: ElementRef<'_>, base: &Url) -> Option<Url> {
    if !submits(el) {
        return None;
    }
    if let Some(fa) = el.value().attr("formaction") {
        return resolve(base, fa);
    }
    let form = ancestors(el).find(|a| a.value().name() == "form")?;
    resolve(base, form.value().attr("action")?)
}

/// Extracts everything the crawler needs from one HTML document.
pub fn parse_page(url: &Url, html: &str, rules: Normalization) -> Page {
    let doc = Html::parse_document(html);
    let title_sel = Selector::parse("title").expect("static selector");
    let heading_sel = Selector::parse("h1, h2, h3").expect("static selector");
    let click_sel = Selector::parse(CLICKABLE).expect("static selector");
    let nested_sel = Selector::parse("a[href], button, input, select").expect("static selector");

    let title = doc.select(&title_sel).next().map(text_of).unwrap_or_default();
    let headings = doc
        .select(&heading_sel)
        .map(text_of)
        .filter(|h| !h.is_empty())
        .collect();

    let mut clickables = Vec::new();
    for el in doc.select(&click_sel) {
        let name = el.value().name();
        // A menu item wrapping a real control is represented by that control.
        if name != "a" && name != "button" && name != "input" && name != "select" && el.select(&nested_sel).next().is_some() {
            continue;
        }
        let label = label_of(el);
        if label.is_empty() {
            continue;
        }
        let (target, kind) = match name {
            "a" => {
                let Some(t) = el.value().attr("href").and_then(|h| resolve(url, h)) else {
                    continue;
                };
                (Some(t), if in_menu(el) { EdgeKind::Menu } else { EdgeKind::Link })
            }
            "button" | "input" => match form_target(el, url) {
                Some(t) => (Some(t), EdgeKind::Form),
                None if in_menu(el) => (None, EdgeKind::Menu),
                None => (None, EdgeKind::Button),
            },
            "select" => (None, EdgeKind::Dropdown),
            _ => (None, EdgeKind::Menu),
        };
        clickables.push(Clickable {
            label,
            target_url: target.map(|t| normalize(&t, rules).to_string()),
            kind,
        });
    }

    Page {
        url: normalize(url, rules).to_string(),
        title,
        headings,
        clickables,
    }
}
