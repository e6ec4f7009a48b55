use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Knobs of the synthetic request generator. `diversity` scales every
/// vocabulary at once and is the main control of intrinsic dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub diversity: usize,
    pub max_path_depth: usize,
    pub max_params: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            diversity: 8,
            max_path_depth: 4,
            max_params: 3,
        }
    }
}

const METHODS: [&str; 3] = ["GET", "POST", "HEAD"];
const HOSTS: [&str; 4] = ["www.example.org", "intranet.local", "mail.example.org", "static.example.net"];
const AGENTS: [&str; 5] = [
    "Mozilla/5.0 (X11; Linux x86_64)",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64)",
    "curl/8.5.0",
    "Wget/1.21",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 14_0)",
];
const SEGMENTS: [&str; 24] = [
    "index", "images", "css", "js", "api", "v1", "v2", "users", "login", "search", "static",
    "docs", "download", "news", "archive", "blog", "assets", "media", "admin", "cart", "shop",
    "help", "forum", "profile",
];
const EXTENSIONS: [&str; 8] = [".html", ".php", ".png", ".jpg", ".css", ".js", ".gif", ""];
const KEYS: [&str; 16] = [
    "id", "q", "page", "lang", "sort", "session", "user", "ref", "limit", "offset", "cat", "view",
    "mode", "token", "year", "format",
];

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, items: &[&'a str], diversity: usize) -> &'a str {
    let m = diversity.clamp(1, items.len());
    items[rng.random_range(0..m)]
}

fn token<R: Rng + ?Sized>(rng: &mut R, diversity: usize) -> String {
    const ALPHA: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let m = (diversity * 2).clamp(2, ALPHA.len());
    let len = rng.random_range(2..=2 + diversity.min(8));
    (0..len).map(|_| ALPHA[rng.random_range(0..m)] as char).collect()
}

/// Deterministic pool of HTTP-request-like byte strings.
pub fn synth_corpus(source: RandomSource, size: usize, params: CorpusParams) -> Result<Vec<Vec<u8>>> {
    if size == 0 {
        return Err(Error::param("size", "corpus size must be at least 1"));
    }
    if params.diversity == 0 {
        return Err(Error::param("diversity", "must be at least 1"));
    }
    let mut rng = source.rng();
    let d = params.diversity;
    Ok((0..size)
        .map(|_| {
            let method = pick(&mut rng, &METHODS, d);
            let depth = rng.random_range(1..=params.max_path_depth.max(1));
            let mut path = String::new();
            for _ in 0..depth {
                path.push('/');
                if rng.random_bool(0.8) {
                    path.push_str(pick(&mut rng, &SEGMENTS, 3 * d));
                } else {
                    path.push_str(&token(&mut rng, d));
                }
            }
            path.push_str(pick(&mut rng, &EXTENSIONS, d));
            let np = rng.random_range(0..=params.max_params);
            for p in 0..np {
                path.push(if p == 0 { '?' } else { '&' });
                path.push_str(pick(&mut rng, &KEYS, 2 * d));
                path.push('=');
                path.push_str(&token(&mut rng, d));
            }
            let host = pick(&mut rng, &HOSTS, d);
            let agent = pick(&mut rng, &AGENTS, d);
            format!(
                "{method} {path} HTTP/1.1\r\nHost: {host}\r\nUser-Agent: {agent}\r\nAccept: */*\r\n\r\n"
            )
            .into_bytes()
        })
        .collect())
}
