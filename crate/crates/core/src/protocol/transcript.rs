//! Line-delimited JSON transcript (`.qkdlog`): a header with version, seed
//! and config, one object per round, then a footer with declarations, keys
//! and summary.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Declaration, ProtocolError, RoundRecord, SessionConfig, SessionSummary, Transcript};

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line} ({record} record): {message}")]
pub struct ParseError {
    pub line: usize,
    pub record: String,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, record: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            record: record.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    seed: u64,
    config: SessionConfig,
}

#[derive(Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct Footer {
    declarations: Vec<Declaration>,
    #[serde(with = "bits")]
    alice_key: Vec<u8>,
    #[serde(with = "bits")]
    bob_key: Vec<u8>,
    summary: SessionSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(Header),
    Round(RoundRecord),
    Footer(Footer),
}

impl Line {
    fn kind(&self) -> &'static str {
        match self {
            Line::Header(_) => "header",
            Line::Round(_) => "round",
            Line::Footer(_) => "footer",
        }
    }
}

/// Key bits as a string of '0'/'1'.
mod bits {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        String::deserialize(d)?
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(D::Error::custom(format!("invalid key character {other:?}"))),
            })
            .collect()
    }
}

fn write_line<W: Write>(sink: &mut W, line: &Line) -> Result<(), ProtocolError> {
    serde_json::to_writer(&mut *sink, line).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn save_transcript<W: Write>(t: &Transcript, mut sink: W) -> Result<(), ProtocolError> {
    write_line(
        &mut sink,
        &Line::Header(Header {
            version: TRANSCRIPT_VERSION,
            seed: t.config.seed,
            config: t.config.clone(),
        }),
    )?;
    for r in &t.records {
        write_line(&mut sink, &Line::Round(*r))?;
    }
    write_line(
        &mut sink,
        &Line::Footer(Footer {
            declarations: t.declarations.clone(),
            alice_key: t.alice_key.clone(),
            bob_key: t.bob_key.clone(),
            summary: t.summary,
        }),
    )?;
    sink.flush()?;
    Ok(())
}

/// Parses and cross-checks a transcript: the footer must agree with the
/// records it summarizes.
pub fn load_transcript<R: BufRead>(source: R) -> Result<Transcript, ProtocolError> {
    let mut header: Option<Header> = None;
    let mut records = Vec::new();
    let mut footer: Option<(usize, Footer)> = None;
    let mut last_line = 0;

    for (idx, text) in source.lines().enumerate() {
        let n = idx + 1;
        last_line = n;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let expected = match (&header, &footer) {
            (None, _) => "header",
            (Some(_), None) => "round",
            (Some(_), Some(_)) => "end of file",
        };
        if footer.is_some() {
            return Err(ParseError::new(n, expected, "content after footer").into());
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ParseError::new(n, expected, format!("malformed JSON: {e}")))?;
        if header.is_none() {
            let version = value.get("version").and_then(|v| v.as_u64());
            if value.get("type").and_then(|v| v.as_str()) == Some("header")
                && version != Some(TRANSCRIPT_VERSION as u64)
            {
                return Err(ParseError::new(
                    n,
                    "header",
                    format!("unsupported version {version:?}, expected {TRANSCRIPT_VERSION}"),
                )
                .into());
            }
        }
        let line: Line = serde_json::from_value(value)
            .map_err(|e| ParseError::new(n, expected, e.to_string()))?;
        match (line, header.is_some()) {
            (Line::Header(h), false) => {
                if h.seed != h.config.seed {
                    return Err(ParseError::new(n, "header", "seed disagrees with config").into());
                }
                header = Some(h);
            }
            (Line::Round(r), true) => {
                if r.round_index != records.len() as u64 {
                    return Err(ParseError::new(
                        n,
                        "round",
                        format!("expected round_index {}, got {}", records.len(), r.round_index),
                    )
                    .into());
                }
                records.push(r);
            }
            (Line::Footer(f), true) => footer = Some((n, f)),
            (other, _) => {
                return Err(ParseError::new(
                    n,
                    expected,
                    format!("unexpected {} record", other.kind()),
                )
                .into())
            }
        }
    }

    let header = header.ok_or_else(|| ParseError::new(last_line + 1, "header", "empty transcript"))?;
    let (footer_line, footer) = footer.ok_or_else(|| {
        ParseError::new(
            last_line + 1,
            "footer",
            format!("truncated after {} round records", records.len()),
        )
    })?;
    if records.len() as u64 != header.config.n_rounds {
        return Err(ParseError::new(
            footer_line,
            "footer",
            format!(
                "config declares {} rounds but {} were recorded",
                header.config.n_rounds,
                records.len()
            ),
        )
        .into());
    }
    let t = Transcript::assemble(header.config, records);
    let derived = Footer {
        declarations: t.declarations.clone(),
        alice_key: t.alice_key.clone(),
        bob_key: t.bob_key.clone(),
        summary: t.summary,
    };
    if derived != footer {
        return Err(ParseError::new(
            footer_line,
            "footer",
            "declarations, keys or summary disagree with the round records",
        )
        .into());
    }
    Ok(t)
}
