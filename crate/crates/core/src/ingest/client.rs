use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{read_payload_dir, CohortQuery, IngestError};
use crate::record::Source;
use crate::retry::{is_transient_status, Attempt, RetryPolicy};

pub const DEFAULT_EUTILS_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPayload {
    pub id: String,
    pub text: String,
}

pub trait RepositoryClient {
    /// Up to `limit` record ids matching the query, in repository order.
    fn search(&self, query: &CohortQuery, limit: usize) -> Result<Vec<String>, IngestError>;
    fn fetch(&self, query: &CohortQuery, ids: &[String]) -> Result<Vec<RawPayload>, IngestError>;
    /// Retries performed so far.
    fn retries(&self) -> u32 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    pub payloads: Vec<RawPayload>,
    pub retries: u32,
}

pub fn fetch_raw(
    query: &CohortQuery,
    limit: usize,
    client: &dyn RepositoryClient,
) -> Result<FetchOutcome, IngestError> {
    if limit == 0 {
        return Ok(FetchOutcome {
            payloads: Vec::new(),
            retries: 0,
        });
    }
    let before = client.retries();
    let mut ids = client.search(query, limit)?;
    ids.truncate(limit);
    tracing::info!(query = %query.query_string, count = ids.len(), "search returned ids");
    let mut payloads = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(100) {
        payloads.extend(client.fetch(query, chunk)?);
    }
    payloads.truncate(limit);
    Ok(FetchOutcome {
        payloads,
        retries: client.retries() - before,
    })
}

/// Reads canned payloads from a directory laid out like the raw cache.
pub struct FixtureClient {
    root: PathBuf,
}

impl FixtureClient {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureClient { root: root.into() }
    }

    fn load(&self, query: &CohortQuery) -> Result<Vec<RawPayload>, IngestError> {
        read_payload_dir(&super::raw_cache_dir(&self.root, query.source, query.cohort))
    }
}

impl RepositoryClient for FixtureClient {
    fn search(&self, query: &CohortQuery, limit: usize) -> Result<Vec<String>, IngestError> {
        Ok(self.load(query)?.into_iter().take(limit).map(|p| p.id).collect())
    }

    fn fetch(&self, query: &CohortQuery, ids: &[String]) -> Result<Vec<RawPayload>, IngestError> {
        let all = self.load(query)?;
        Ok(ids
            .iter()
            .filter_map(|id| all.iter().find(|p| &p.id == id).cloned())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait HttpTransport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("fairmeta/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Network(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, String> {
        let response = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// NCBI E-utilities client: `esearch` for ids, `efetch` (BioSample) or the
/// GEO accession viewer (GEO samples) for payloads.
pub struct EntrezClient<T: HttpTransport> {
    transport: T,
    base_url: String,
    geo_base_url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
    retries: Mutex<u32>,
}

#[derive(Deserialize)]
struct SearchEnvelope {
    esearchresult: SearchResult,
}

#[derive(Deserialize)]
struct SearchResult {
    #[serde(default)]
    idlist: Vec<String>,
}

// GEO sample uids are the GSM number offset by this value.
const GSM_UID_OFFSET: u64 = 300_000_000;

impl<T: HttpTransport> EntrezClient<T> {
    pub fn new(transport: T, base_url: impl Into<String>, api_key: Option<String>) -> Self {
        // NCBI allows 3 requests/s without a key and 10 with one
        let min_interval = if api_key.is_some() {
            Duration::from_millis(100)
        } else {
            Duration::from_millis(334)
        };
        EntrezClient {
            transport,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            geo_base_url: "https://www.ncbi.nlm.nih.gov/geo/query".into(),
            api_key,
            retry: RetryPolicy::default(),
            min_interval,
            last_request: Mutex::new(None),
            retries: Mutex::new(0),
        }
    }

    /// Reads `NCBI_API_KEY` from the environment.
    pub fn from_env(transport: T, base_url: impl Into<String>) -> Self {
        let key = std::env::var("NCBI_API_KEY").ok().filter(|k| !k.is_empty());
        Self::new(transport, base_url, key)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.min_interval = interval;
        self
    }

    pub fn with_geo_base_url(mut self, url: impl Into<String>) -> Self {
        self.geo_base_url = url.into().trim_end_matches('/').to_string();
        self
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("throttle lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn get(&self, url: &str) -> Result<String, IngestError> {
        let (result, retries) = self.retry.run(|attempt| {
            self.throttle();
            tracing::info!(%url, attempt, "GET");
            match self.transport.get(url) {
                Err(e) => Attempt::Retryable(IngestError::Network(e)),
                Ok(r) if (200..300).contains(&r.status) => Attempt::Done(r.body),
                Ok(r) if is_transient_status(r.status) => {
                    Attempt::Retryable(IngestError::Network(format!("HTTP {}", r.status)))
                }
                Ok(r) if r.status == 401 || r.status == 403 => Attempt::Fatal(IngestError::Quota {
                    status: r.status,
                    message: r.body,
                }),
                Ok(r) => Attempt::Fatal(IngestError::Response(format!("HTTP {}: {}", r.status, r.body))),
            }
        });
        *self.retries.lock().expect("retry counter") += retries;
        result
    }

    fn key_param(&self) -> String {
        self.api_key
            .as_ref()
            .map(|k| format!("&api_key={}", encode(k)))
            .unwrap_or_default()
    }
}

fn encode(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for b in text.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

impl<T: HttpTransport> RepositoryClient for EntrezClient<T> {
    fn search(&self, query: &CohortQuery, limit: usize) -> Result<Vec<String>, IngestError> {
        let (db, term) = match query.source {
            Source::BioSample => ("biosample", query.query_string.clone()),
            Source::Geo => ("gds", format!("{} AND gsm[Entry Type]", query.query_string)),
        };
        let url = format!(
            "{}/esearch.fcgi?db={db}&term={}&retmax={limit}&retmode=json{}",
            self.base_url,
            encode(&term),
            self.key_param()
        );
        let body = self.get(&url)?;
        let envelope: SearchEnvelope =
            serde_json::from_str(&body).map_err(|e| IngestError::Response(format!("esearch: {e}")))?;
        Ok(envelope.esearchresult.idlist)
    }

    fn fetch(&self, query: &CohortQuery, ids: &[String]) -> Result<Vec<RawPayload>, IngestError> {
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        match query.source {
            Source::BioSample => {
                let url = format!(
                    "{}/efetch.fcgi?db=biosample&id={}&retmode=xml{}",
                    self.base_url,
                    ids.join(","),
                    self.key_param()
                );
                Ok(split_biosample_set(&self.get(&url)?))
            }
            Source::Geo => ids
                .iter()
                .map(|uid| {
                    let accession = match uid.parse::<u64>() {
                        Ok(n) if n > GSM_UID_OFFSET => format!("GSM{}", n - GSM_UID_OFFSET),
                        _ => uid.clone(),
                    };
                    let url = format!(
                        "{}/acc.cgi?acc={}&targ=self&form=text&view=brief",
                        self.geo_base_url,
                        encode(&accession)
                    );
                    Ok(RawPayload {
                        id: accession,
                        text: self.get(&url)?,
                    })
                })
                .collect(),
        }
    }

    fn retries(&self) -> u32 {
        *self.retries.lock().expect("retry counter")
    }
}

/// Splits a `<BioSampleSet>` document into one payload per `<BioSample>`.
/// Elements without a closing tag are kept as-is so the parser rejects them.
pub(crate) fn split_biosample_set(xml: &str) -> Vec<RawPayload> {
    let mut out = Vec::new();
    let mut rest = xml;
    while let Some(start) = find_open_tag(rest) {
        let tail = &rest[start..];
        let end = tail
            .find("</BioSample>")
            .map(|e| e + "</BioSample>".len())
            .unwrap_or(tail.len());
        let text = &tail[..end];
        let id = attribute(text, "accession")
            .or_else(|| attribute(text, "id"))
            .unwrap_or_else(|| format!("biosample-{}", out.len() + 1));
        out.push(RawPayload {
            id,
            text: text.to_string(),
        });
        rest = &tail[end..];
    }
    out
}

fn find_open_tag(text: &str) -> Option<usize> {
    let mut offset = 0;
    while let Some(pos) = text[offset..].find("<BioSample") {
        let at = offset + pos;
        let next = text[at + "<BioSample".len()..].chars().next();
        if matches!(next, Some(' ' | '>' | '\n' | '\t' | '\r' | '/')) {
            return Some(at);
        }
        offset = at + 1;
    }
    None
}

fn attribute(element: &str, name: &str) -> Option<String> {
    let open_end = element.find('>')?;
    let open = &element[..open_end];
    let needle = format!(" {name}=\"");
    let start = open.find(&needle)? + needle.len();
    let len = open[start..].find('"')?;
    Some(open[start..start + len].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_biosample_set() {
        let xml = r#"<?xml version="1.0"?><BioSampleSet><BioSample accession="SAMN1" id="1"><Attributes/></BioSample>
<BioSample id="2"><Attributes/></BioSample><BioSampleSet2/></BioSampleSet>"#;
        let parts = split_biosample_set(xml);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].id, "SAMN1");
        assert_eq!(parts[1].id, "2");
        assert!(parts[1].text.ends_with("</BioSample>"));
    }

    #[test]
    fn percent_encoding() {
        assert_eq!(encode("lung cancer[All Fields]"), "lung%20cancer%5BAll%20Fields%5D");
    }
}
