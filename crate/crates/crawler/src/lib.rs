//! Turns a web application into a state-action graph by breadth-first
//! exploration of its pages.

pub mod crawl;
pub mod page;
pub mod provider;
pub mod urls;

pub use crawl::{collect_clickables, crawl, CrawlConfig, CrawlError, CrawlReport};
pub use page::{parse_page, Clickable, Page};
pub use provider::{FixtureProvider, PageProvider, ProviderError, WebDriverConfig, WebDriverProvider};
pub use urls::{is_external, normalize, Normalization};
