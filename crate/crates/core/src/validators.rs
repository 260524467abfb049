//! Checks beyond the manifest schema: URL syntax, live reachability, local
//! file presence and SHA-256 digests.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::io::AsyncReadExt;
use url::Url;

use crate::fields::{is_local_path, FieldType};
use crate::manifest::{validate_manifest, RetrievabilityManifest};
use crate::report::{Finding, Location, ValidationReport};
use crate::tree::DecisionTree;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_MAX_REDIRECTS: usize = 5;
pub const DEFAULT_PARALLELISM: usize = 4;

const ALLOWED_SCHEMES: [&str; 4] = ["http", "https", "ftp", "doi"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidatorError {
    #[error("invalid URL: {0}")]
    UrlSyntax(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ValidatorError {
    pub fn code(&self) -> &'static str {
        match self {
            ValidatorError::UrlSyntax(_) => "E_URL_SYNTAX",
            ValidatorError::Io { .. } => "E_IO",
        }
    }
}

/// Accepts absolute `http`, `https`, `ftp` and `doi` URIs with a non-empty
/// host (or, for `doi:`, a non-empty opaque part).
pub fn check_url_syntax(text: &str) -> Result<Url, ValidatorError> {
    let fail = |reason: String| Err(ValidatorError::UrlSyntax(reason));
    if text.is_empty() {
        return fail("empty".into());
    }
    if text.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return fail(format!("{text:?} contains whitespace"));
    }
    let url = match Url::parse(text) {
        Ok(url) => url,
        Err(e) => return fail(format!("{text:?}: {e}")),
    };
    if !ALLOWED_SCHEMES.contains(&url.scheme()) {
        return fail(format!("scheme {:?} not allowed (http, https, ftp, doi)", url.scheme()));
    }
    if url.scheme() == "doi" {
        let opaque = url.path().trim_start_matches('/');
        if opaque.is_empty() {
            return fail("doi: URI without an identifier".into());
        }
    } else if url.host_str().is_none_or(str::is_empty) {
        return fail(format!("{text:?} has no host"));
    }
    Ok(url)
}

/// Rewrites `doi:` URIs to their `https://doi.org/` resolver form.
pub fn resolve_doi(url: &Url) -> Url {
    if url.scheme() != "doi" {
        return url.clone();
    }
    let id = url.path().trim_start_matches('/');
    Url::parse(&format!("https://doi.org/{id}")).unwrap_or_else(|_| url.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkStatus {
    Reachable,
    Unreachable,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reachability {
    pub status: LinkStatus,
    pub http_status: Option<u16>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiveOptions {
    pub timeout_ms: u64,
    pub max_redirects: usize,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self { timeout_ms: DEFAULT_TIMEOUT_MS, max_redirects: DEFAULT_MAX_REDIRECTS }
    }
}

/// Reusable live checker; one HTTP client shared across checks.
#[derive(Debug, Clone)]
pub struct LinkChecker {
    client: reqwest::Client,
    options: LiveOptions,
}

impl LinkChecker {
    pub fn new(options: LiveOptions) -> Self {
        // Redirects are followed by hand so HEAD->GET fallback applies per hop.
        let client = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .user_agent(concat!("shepherd/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("HTTP client configuration is static");
        Self { client, options }
    }

    pub async fn check(&self, text: &str) -> Result<Reachability, ValidatorError> {
        let url = resolve_doi(&check_url_syntax(text)?);
        let started = Instant::now();
        let limit = Duration::from_millis(self.options.timeout_ms);
        let outcome = tokio::time::timeout(limit, self.probe(url)).await;
        let elapsed_ms = started.elapsed().as_millis() as u64;
        Ok(match outcome {
            Err(_) => Reachability { status: LinkStatus::Timeout, http_status: None, elapsed_ms },
            Ok((status, http_status)) => Reachability { status, http_status, elapsed_ms },
        })
    }

    async fn probe(&self, url: Url) -> (LinkStatus, Option<u16>) {
        if url.scheme() == "ftp" {
            return (probe_ftp(&url).await, None);
        }
        let mut current = url;
        let mut hops = 0;
        loop {
            let response = match self.request(&current).await {
                Ok(r) => r,
                Err(e) if e.is_timeout() => return (LinkStatus::Timeout, None),
                Err(_) => return (LinkStatus::Unreachable, None),
            };
            let status = response.status();
            if status.is_redirection() && hops < self.options.max_redirects {
                let next = response
                    .headers()
                    .get(reqwest::header::LOCATION)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|loc| current.join(loc).ok());
                if let Some(next) = next {
                    current = next;
                    hops += 1;
                    continue;
                }
            }
            let reachable = status.is_success() || status.is_redirection();
            let link = if reachable { LinkStatus::Reachable } else { LinkStatus::Unreachable };
            return (link, Some(status.as_u16()));
        }
    }

    async fn request(&self, url: &Url) -> reqwest::Result<reqwest::Response> {
        let head = self.client.head(url.clone()).send().await?;
        match head.status().as_u16() {
            405 | 501 => self.client.get(url.clone()).send().await,
            _ => Ok(head),
        }
    }
}

async fn probe_ftp(url: &Url) -> LinkStatus {
    let host = url.host_str().unwrap_or_default();
    let port = url.port_or_known_default().unwrap_or(21);
    let Ok(mut stream) = tokio::net::TcpStream::connect((host, port)).await else {
        return LinkStatus::Unreachable;
    };
    let mut greeting = [0u8; 3];
    match stream.read_exact(&mut greeting).await {
        Ok(_) if &greeting == b"220" => LinkStatus::Reachable,
        _ => LinkStatus::Unreachable,
    }
}

/// HEAD (falling back to GET on 405/501) with bounded redirects. HTTP and
/// network failures are encoded in the result, never raised.
pub async fn check_url_live(url: &str, timeout_ms: u64, max_redirects: usize) -> Result<Reachability, ValidatorError> {
    LinkChecker::new(LiveOptions { timeout_ms, max_redirects }).check(url).await
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String, ValidatorError> {
    let io_err = |e: io::Error| ValidatorError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut file = File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone)]
pub struct DeepOptions {
    pub live: bool,
    /// Enables local file presence and digest checks.
    pub checksums: bool,
    pub timeout_ms: u64,
    pub max_redirects: usize,
    pub parallelism: usize,
    /// Upper bound on distinct URLs checked live; the rest are skipped.
    pub max_live_urls: Option<usize>,
    /// Relative paths in the manifest resolve against this directory.
    pub base_dir: Option<PathBuf>,
}

impl Default for DeepOptions {
    fn default() -> Self {
        Self {
            live: false,
            checksums: false,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_redirects: DEFAULT_MAX_REDIRECTS,
            parallelism: DEFAULT_PARALLELISM,
            max_live_urls: None,
            base_dir: None,
        }
    }
}

impl DeepOptions {
    fn resolve(&self, path: &str) -> PathBuf {
        match &self.base_dir {
            Some(base) if Path::new(path).is_relative() => base.join(path),
            _ => PathBuf::from(path),
        }
    }
}

/// Schema validation plus the optional live, file and checksum checks.
/// Findings are ordered: schema, files, checksums, links (in field order).
pub async fn deep_validate(
    manifest: &RetrievabilityManifest,
    tree: &DecisionTree,
    options: &DeepOptions,
) -> ValidationReport {
    let mut report = validate_manifest(manifest, tree);
    if !options.live && !options.checksums {
        return report;
    }
    let Some(leaf) = tree.node(&manifest.outcome).ok().and_then(|n| n.as_leaf()) else {
        return report;
    };

    // (field id, text) for declared, syntactically usable text values
    let mut local_paths = Vec::new();
    let mut urls: Vec<(String, String)> = Vec::new();
    for (id, value) in &manifest.fields {
        let (Some(req), Some(text)) = (leaf.field(id), value.as_text()) else { continue };
        match req.field_type {
            FieldType::Url if check_url_syntax(text).is_ok() => urls.push((id.clone(), text.to_string())),
            FieldType::Path if is_local_path(text) && !text.trim().is_empty() => {
                local_paths.push((id.clone(), text.to_string()))
            }
            FieldType::Path if check_url_syntax(text).is_ok() => urls.push((id.clone(), text.to_string())),
            _ => {}
        }
    }

    if options.checksums {
        for (id, path) in &local_paths {
            if !options.resolve(path).is_file() {
                report.push(Finding::error(
                    "E_FILE_MISSING",
                    Location::Key(format!("fields.{id}")),
                    format!("{path} does not exist"),
                ));
            }
        }
        // `<name>_sha256` fields carry the digest of the `<name>_ref` file.
        for (id, value) in &manifest.fields {
            let (Some(stem), Some(expected)) = (id.strip_suffix("_sha256"), value.as_text()) else { continue };
            let Some((_, path)) = local_paths.iter().find(|(f, _)| f == &format!("{stem}_ref")) else { continue };
            if let Ok(actual) = sha256_file(&options.resolve(path)) {
                if !actual.eq_ignore_ascii_case(expected.trim()) {
                    report.push(Finding::error(
                        "E_CHECKSUM_MISMATCH",
                        Location::Key(format!("fields.{id}")),
                        format!("{path} hashes to {actual}, manifest says {expected}"),
                    ));
                }
            }
        }
        for (reference, expected) in &manifest.checksums {
            let loc = Location::Key(format!("checksums.{reference}"));
            if !is_local_path(reference) {
                report.push(Finding::info("I_CHECKSUM_UNVERIFIED", loc, "remote references are not downloaded"));
                continue;
            }
            match sha256_file(&options.resolve(reference)) {
                Err(_) => report.push(Finding::error("E_FILE_MISSING", loc, format!("{reference} does not exist"))),
                Ok(actual) if actual != *expected => report.push(Finding::error(
                    "E_CHECKSUM_MISMATCH",
                    loc,
                    format!("{reference} hashes to {actual}, manifest says {expected}"),
                )),
                Ok(_) => {}
            }
        }
    }

    if options.live {
        let mut distinct: Vec<&str> = Vec::new();
        for (_, url) in &urls {
            if !distinct.contains(&url.as_str()) {
                distinct.push(url);
            }
        }
        let cap = options.max_live_urls.unwrap_or(usize::MAX).min(distinct.len());
        let checker = LinkChecker::new(LiveOptions { timeout_ms: options.timeout_ms, max_redirects: options.max_redirects });
        // `buffered` keeps input order, so completion order cannot leak into the report.
        let owned: Vec<String> = distinct[..cap].iter().map(|u| u.to_string()).collect();
        let results: Vec<Reachability> = stream::iter(owned.into_iter().map(|u| {
            let checker = checker.clone();
            async move { checker.check(&u).await.expect("syntax checked above") }
        }))
        .buffered(options.parallelism.max(1))
        .collect()
        .await;

        for (id, url) in &urls {
            let loc = Location::Key(format!("fields.{id}"));
            let index = distinct.iter().position(|u| u == url).expect("collected above");
            let Some(result) = results.get(index) else {
                report.push(Finding::info("I_LINK_SKIPPED", loc, format!("{url} not checked: live check limit of {cap} URLs")));
                continue;
            };
            match result.status {
                LinkStatus::Reachable => {}
                LinkStatus::Unreachable => {
                    let detail = match result.http_status {
                        Some(code) => format!("HTTP {code}"),
                        None => "connection failed".to_string(),
                    };
                    report.push(Finding::error("E_LINK_DEAD", loc, format!("{url} is unreachable ({detail})")));
                }
                LinkStatus::Timeout => report.push(Finding::warning(
                    "W_LINK_TIMEOUT",
                    loc,
                    format!("{url} did not answer within {} ms", options.timeout_ms),
                )),
            }
        }
    }
    report
}
