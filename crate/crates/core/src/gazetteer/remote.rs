//! HTTP clients for Nominatim-like and GeoNames-like search services.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, Utc};
use serde::Deserialize;

use super::{GazetteerError, GazetteerMatch, Geocoder, SourceDb};
use crate::country::CountryCode;

pub const NOMINATIM_URL_ENV: &str = "GEOFOCUS_NOMINATIM_URL";
pub const GEONAMES_USER_ENV: &str = "GEOFOCUS_GEONAMES_USER";

const DEFAULT_NOMINATIM_URL: &str = "https://nominatim.openstreetmap.org";
const DEFAULT_GEONAMES_URL: &str = "http://api.geonames.org";
const USER_AGENT: &str = concat!("geofocus/", env!("CARGO_PKG_VERSION"));

/// Serializes callers so that consecutive requests start at least
/// `min_interval` apart.
#[derive(Debug)]
pub struct MinIntervalLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl MinIntervalLimiter {
    pub fn new(min_interval: Duration) -> Self {
        MinIntervalLimiter {
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn min_interval(&self) -> Duration {
        self.min_interval
    }

    /// Blocks until the next request may start. The lock is held while
    /// sleeping, so waiting callers queue up in order.
    pub fn acquire(&self) {
        let mut last = self.last.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Per-UTC-day request budget.
#[derive(Debug)]
pub struct DailyBudget {
    limit: u32,
    state: Mutex<(NaiveDate, u32)>,
}

impl DailyBudget {
    pub fn new(limit: u32) -> Self {
        DailyBudget {
            limit,
            state: Mutex::new((Utc::now().date_naive(), 0)),
        }
    }

    pub fn remaining(&self) -> u32 {
        let state = self.state.lock().unwrap();
        if state.0 != Utc::now().date_naive() {
            self.limit
        } else {
            self.limit.saturating_sub(state.1)
        }
    }

    /// Consumes one request, or reports the time until the budget resets.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let now = Utc::now();
        let today = now.date_naive();
        let mut state = self.state.lock().unwrap();
        if state.0 != today {
            *state = (today, 0);
        }
        if state.1 >= self.limit {
            let midnight = today
                .succ_opt()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .map(|t| t.and_utc());
            let wait = midnight
                .and_then(|m| (m - now).to_std().ok())
                .unwrap_or(Duration::from_secs(3600));
            return Err(wait);
        }
        state.1 += 1;
        Ok(())
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .user_agent(USER_AGENT)
        .build()
        .into()
}

struct RawResponse {
    status: u16,
    retry_after: Option<Duration>,
    body: String,
}

fn http_get(
    agent: &ureq::Agent,
    url: &str,
    params: &[(&str, &str)],
) -> Result<RawResponse, GazetteerError> {
    let mut req = agent.get(url);
    for (k, v) in params {
        req = req.query(*k, *v);
    }
    let mut resp = req.call().map_err(|e| GazetteerError::Transport {
        message: e.to_string(),
        retryable: true,
    })?;
    let status = resp.status().as_u16();
    let retry_after = resp
        .headers()
        .get("retry-after")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| GazetteerError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
    Ok(RawResponse {
        status,
        retry_after,
        body,
    })
}

fn check_status(resp: &RawResponse) -> Result<(), GazetteerError> {
    match resp.status {
        200..=299 => Ok(()),
        429 => Err(GazetteerError::Throttled {
            retry_after: resp.retry_after,
        }),
        500..=599 => Err(GazetteerError::Transport {
            message: format!("server returned HTTP {}", resp.status),
            retryable: true,
        }),
        other => Err(GazetteerError::Transport {
            message: format!("server returned HTTP {other}"),
            retryable: false,
        }),
    }
}

fn parse_coord(raw: &serde_json::Value, field: &str) -> Result<f64, GazetteerError> {
    let v = match raw {
        serde_json::Value::String(s) => s.parse::<f64>().ok(),
        serde_json::Value::Number(n) => n.as_f64(),
        _ => None,
    };
    v.ok_or_else(|| GazetteerError::Response(format!("field {field:?} is not a coordinate")))
}

#[derive(Deserialize)]
struct NominatimPlace {
    lat: serde_json::Value,
    lon: serde_json::Value,
    #[serde(default)]
    category: Option<String>,
    #[serde(default, rename = "class")]
    class_: Option<String>,
    #[serde(default, rename = "type")]
    kind: Option<String>,
    #[serde(default)]
    address: Option<NominatimAddress>,
}

#[derive(Deserialize)]
struct NominatimAddress {
    #[serde(default)]
    country_code: Option<String>,
}

/// Parses a Nominatim `/search` JSON array. Alpha-2 country codes become
/// alpha-3; unknown codes become `None`.
pub fn parse_nominatim(body: &str, query: &str) -> Result<Vec<GazetteerMatch>, GazetteerError> {
    let places: Vec<NominatimPlace> =
        serde_json::from_str(body).map_err(|e| GazetteerError::Response(e.to_string()))?;
    places
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let country = p
                .address
                .and_then(|a| a.country_code)
                .and_then(|c| CountryCode::parse(&c).ok());
            let place_class = p.kind.or(p.category).or(p.class_).unwrap_or_default();
            let m = GazetteerMatch {
                query: query.to_string(),
                latitude: parse_coord(&p.lat, "lat")?,
                longitude: parse_coord(&p.lon, "lon")?,
                country,
                rank: i as u32 + 1,
                place_class,
                source_db: SourceDb::Nominatim,
            };
            m.validate()?;
            Ok(m)
        })
        .collect()
}

#[derive(Deserialize)]
struct GeonamesResponse {
    #[serde(default)]
    geonames: Option<Vec<GeonamesPlace>>,
    #[serde(default)]
    status: Option<GeonamesStatus>,
}

#[derive(Deserialize)]
struct GeonamesPlace {
    lat: serde_json::Value,
    lng: serde_json::Value,
    #[serde(default, rename = "countryCode")]
    country_code: Option<String>,
    #[serde(default)]
    fcode: Option<String>,
    #[serde(default)]
    fcl: Option<String>,
}

#[derive(Deserialize)]
struct GeonamesStatus {
    #[serde(default)]
    message: String,
    #[serde(default)]
    value: i64,
}

/// Parses a GeoNames `searchJSON` payload, mapping its quota status codes
/// (18 daily, 19 hourly, 20 weekly) to throttle errors.
pub fn parse_geonames(body: &str, query: &str) -> Result<Vec<GazetteerMatch>, GazetteerError> {
    let resp: GeonamesResponse =
        serde_json::from_str(body).map_err(|e| GazetteerError::Response(e.to_string()))?;
    if let Some(status) = resp.status {
        return Err(match status.value {
            18..=20 => GazetteerError::Throttled { retry_after: None },
            10 => GazetteerError::Transport {
                message: format!("authorization failed: {}", status.message),
                retryable: false,
            },
            _ => GazetteerError::Response(format!("status {}: {}", status.value, status.message)),
        });
    }
    resp.geonames
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let country = p
                .country_code
                .filter(|c| !c.is_empty())
                .and_then(|c| CountryCode::parse(&c).ok());
            let m = GazetteerMatch {
                query: query.to_string(),
                latitude: parse_coord(&p.lat, "lat")?,
                longitude: parse_coord(&p.lng, "lng")?,
                country,
                rank: i as u32 + 1,
                place_class: p.fcode.or(p.fcl).unwrap_or_default(),
                source_db: SourceDb::Geonames,
            };
            m.validate()?;
            Ok(m)
        })
        .collect()
}

/// Free-text search client for a Nominatim-compatible service.
pub struct NominatimClient {
    base_url: String,
    agent: ureq::Agent,
    limiter: MinIntervalLimiter,
    requests: AtomicUsize,
}

impl NominatimClient {
    pub fn new(base_url: impl Into<String>, min_interval: Duration) -> Self {
        NominatimClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: agent(),
            limiter: MinIntervalLimiter::new(min_interval),
            requests: AtomicUsize::new(0),
        }
    }

    /// Uses `GEOFOCUS_NOMINATIM_URL` when set, else the public instance.
    pub fn from_env(min_interval: Duration) -> Self {
        let url = std::env::var(NOMINATIM_URL_ENV).unwrap_or_else(|_| DEFAULT_NOMINATIM_URL.into());
        NominatimClient::new(url, min_interval)
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

impl Geocoder for NominatimClient {
    fn db(&self) -> SourceDb {
        SourceDb::Nominatim
    }

    fn search(&self, toponym: &str, limit: usize) -> Result<Vec<GazetteerMatch>, GazetteerError> {
        self.limiter.acquire();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let limit = limit.to_string();
        let resp = http_get(
            &self.agent,
            &format!("{}/search", self.base_url),
            &[
                ("q", toponym),
                ("format", "jsonv2"),
                ("addressdetails", "1"),
                ("limit", &limit),
            ],
        )?;
        check_status(&resp)?;
        parse_nominatim(&resp.body, toponym)
    }

    fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

/// Exact-name search client for a GeoNames-compatible service
/// (`name_equals` plus `fuzzy=1`).
pub struct GeonamesClient {
    base_url: String,
    username: String,
    agent: ureq::Agent,
    budget: DailyBudget,
    requests: AtomicUsize,
}

impl GeonamesClient {
    pub fn new(
        base_url: impl Into<String>,
        username: impl Into<String>,
        daily_budget: u32,
    ) -> Self {
        GeonamesClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            username: username.into(),
            agent: agent(),
            budget: DailyBudget::new(daily_budget),
            requests: AtomicUsize::new(0),
        }
    }

    /// Reads the username from `GEOFOCUS_GEONAMES_USER`.
    pub fn from_env(daily_budget: u32) -> Result<Self, GazetteerError> {
        let user = std::env::var(GEONAMES_USER_ENV)
            .map_err(|_| GazetteerError::Config(format!("{GEONAMES_USER_ENV} is not set")))?;
        Ok(GeonamesClient::new(
            DEFAULT_GEONAMES_URL,
            user,
            daily_budget,
        ))
    }
}

impl Geocoder for GeonamesClient {
    fn db(&self) -> SourceDb {
        SourceDb::Geonames
    }

    fn search(&self, toponym: &str, limit: usize) -> Result<Vec<GazetteerMatch>, GazetteerError> {
        self.budget
            .try_acquire()
            .map_err(|wait| GazetteerError::Throttled {
                retry_after: Some(wait),
            })?;
        self.requests.fetch_add(1, Ordering::SeqCst);
        let limit = limit.to_string();
        let resp = http_get(
            &self.agent,
            &format!("{}/searchJSON", self.base_url),
            &[
                ("q", toponym),
                ("name_equals", toponym),
                ("fuzzy", "1"),
                ("maxRows", &limit),
                ("username", &self.username),
            ],
        )?;
        check_status(&resp)?;
        parse_geonames(&resp.body, toponym)
    }

    fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}
