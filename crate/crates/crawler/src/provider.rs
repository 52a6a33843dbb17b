//! Page sources: a static fixture directory and a WebDriver session.

use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("page not found: {0}")]
    NotFound(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid fixture manifest: {0}")]
    Manifest(String),
    #[error("webdriver: {0}")]
    WebDriver(String),
}

/// Anything that can return the HTML of an in-app URL.
pub trait PageProvider {
    fn fetch(&self, url: &Url) -> Result<String, ProviderError>;
}

impl<P: PageProvider + ?Sized> PageProvider for &P {
    fn fetch(&self, url: &Url) -> Result<String, ProviderError> {
        (**self).fetch(url)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SiteManifest {
    /// Path of the home page relative to the site directory.
    pub home: String,
    pub host: String,
}

/// Serves `https://{host}/{path}` from `{dir}/{path}`.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
    manifest: SiteManifest,
}

impl FixtureProvider {
    /// Reads `site.json` from `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        let path = dir.join("site.json");
        let raw = std::fs::read_to_string(&path).map_err(|e| ProviderError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let manifest: SiteManifest = serde_json::from_str(&raw).map_err(|e| ProviderError::Manifest(e.to_string()))?;
        if manifest.host.trim().is_empty() {
            return Err(ProviderError::Manifest("host must not be empty".into()));
        }
        Ok(Self { dir, manifest })
    }

    pub fn host(&self) -> &str {
        &self.manifest.host
    }

    pub fn home_url(&self) -> String {
        format!("https://{}/{}", self.manifest.host, self.manifest.home.trim_start_matches('/'))
    }

    fn file_for(&self, url: &Url) -> Option<PathBuf> {
        if url.host_str()? != self.manifest.host {
            return None;
        }
        let rel = url.path().trim_start_matches('/');
        let rel = if rel.is_empty() { self.manifest.home.as_str() } else { rel };
        let rel = Path::new(rel);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return None;
        }
        Some(self.dir.join(rel))
    }
}

impl PageProvider for FixtureProvider {
    fn fetch(&self, url: &Url) -> Result<String, ProviderError> {
        let path = self.file_for(url).ok_or_else(|| ProviderError::NotFound(url.to_string()))?;
        std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ProviderError::NotFound(url.to_string()),
            _ => ProviderError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct WebDriverConfig {
    /// e.g. `http://localhost:4444`
    pub endpoint: String,
    pub browser: String,
    /// Session cookies set on the home page before crawling.
    pub cookies: Vec<(String, String)>,
    pub timeout: Duration,
}

impl WebDriverConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            browser: "chrome".into(),
            cookies: Vec::new(),
            timeout: Duration::from_secs(30),
        }
    }
}

/// Drives a real browser through the W3C WebDriver protocol. The session is
/// deleted on drop.
pub struct WebDriverProvider {
    http: reqwest::blocking::Client,
    base: String,
    session: String,
}

fn wd_err(e: impl std::fmt::Display) -> ProviderError {
    ProviderError::WebDriver(e.to_string())
}

impl WebDriverProvider {
    pub fn connect(cfg: &WebDriverConfig, home_url: &Url) -> Result<Self, ProviderError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(wd_err)?;
        let base = cfg.endpoint.trim_end_matches('/').to_string();
        let body = json!({"capabilities": {"alwaysMatch": {"browserName": cfg.browser}}});
        let resp: Value = http
            .post(format!("{base}/session"))
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(wd_err)?;
        let session = resp["value"]["sessionId"]
            .as_str()
            .ok_or_else(|| wd_err("new session response has no sessionId"))?
            .to_string();
        let p = Self { http, base, session };
        if !cfg.cookies.is_empty() {
            p.navigate(home_url)?;
            for (name, value) in &cfg.cookies {
                p.call(reqwest::Method::POST, "cookie", Some(json!({"cookie": {"name": name, "value": value}})))?;
            }
        }
        Ok(p)
    }

    fn call(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Result<Value, ProviderError> {
        let mut req = self.http.request(method, format!("{}/session/{}/{path}", self.base, self.session));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().map_err(wd_err)?;
        let status = resp.status();
        let v: Value = resp.json().map_err(wd_err)?;
        if !status.is_success() {
            let msg = v["value"]["message"].as_str().unwrap_or("request failed");
            return Err(wd_err(format!("{status}: {msg}")));
        }
        Ok(v["value"].clone())
    }

    fn navigate(&self, url: &Url) -> Result<(), ProviderError> {
        self.call(reqwest::Method::POST, "url", Some(json!({"url": url.as_str()}))).map(drop)
    }
}

impl PageProvider for WebDriverProvider {
    fn fetch(&self, url: &Url) -> Result<String, ProviderError> {
        self.navigate(url)?;
        let src = self.call(reqwest::Method::GET, "source", None)?;
        src.as_str()
            .map(String::from)
            .ok_or_else(|| wd_err("page source is not a string"))
    }
}

impl Drop for WebDriverProvider {
    fn drop(&mut self) {
        let url = format!("{}/session/{}", self.base, self.session);
        if let Err(e) = self.http.delete(url).send() {
            tracing::warn!(error = %e, "failed to close webdriver session");
        }
    }
}
