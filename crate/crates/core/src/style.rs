use std::fmt;

use serde::{Deserialize, Serialize};

/// Image style identifier, e.g. `comic-book`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StyleId(String);

impl StyleId {
    pub const COMIC_BOOK: &'static str = "comic-book";

    pub fn new(id: impl Into<String>) -> Self {
        StyleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for StyleId {
    fn default() -> Self {
        StyleId(Self::COMIC_BOOK.to_string())
    }
}

impl fmt::Display for StyleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Styles the image adapter knows how to render.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleRegistry {
    styles: Vec<StyleId>,
}

impl Default for StyleRegistry {
    fn default() -> Self {
        StyleRegistry {
            styles: ["comic-book", "neon-punk", "anime", "line-art"]
                .into_iter()
                .map(StyleId::new)
                .collect(),
        }
    }
}

impl StyleRegistry {
    pub fn register(&mut self, style: StyleId) {
        if !self.styles.contains(&style) {
            self.styles.push(style);
        }
    }

    pub fn contains(&self, style: &StyleId) -> bool {
        self.styles.contains(style)
    }

    pub fn styles(&self) -> &[StyleId] {
        &self.styles
    }
}
