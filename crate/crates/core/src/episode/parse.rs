use serde_json::Value as Json;

use super::action::Verdict;
use crate::templates::{EXEC_SQL, MEMORY_RETRIEVE};

/// A recognised span of model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    /// Reasoning, including free text between tags.
    Think(String),
    ToolCall {
        name: String,
        code: String,
    },
    ExecVerify(Verdict),
    MemoryVerify(Verdict),
    Answer(String),
}

impl Tag {
    pub fn is_action(&self) -> bool {
        !matches!(self, Tag::Think(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TagParseError {
    #[error("unclosed <{tag}> at byte {offset}")]
    Unclosed { tag: &'static str, offset: usize },
    #[error("malformed tool call at byte {offset}: {reason}")]
    MalformedToolCall { offset: usize, reason: String },
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("invalid verdict {0:?}")]
    InvalidVerdict(String),
    #[error("empty <answer_sql>")]
    EmptyAnswer,
    #[error("statement is empty")]
    EmptySql,
}

const THINK: &str = "think";
const TOOL_CALL: &str = "tool_call";
const EXEC_VERIFY: &str = "exec_verify";
const MEMORY_VERIFY: &str = "memory_verify";
const ANSWER: &str = "answer_sql";
const ACTION_TAGS: [&str; 4] = [TOOL_CALL, EXEC_VERIFY, MEMORY_VERIFY, ANSWER];

fn open(tag: &str) -> String {
    format!("<{tag}>")
}

fn close(tag: &str) -> String {
    format!("</{tag}>")
}

/// Earliest opening tag at or after `from`.
fn next_open(text: &str, from: usize, tags: &[&'static str]) -> Option<(usize, &'static str)> {
    tags.iter()
        .filter_map(|t| text[from..].find(&open(t)).map(|i| (from + i, *t)))
        .min_by_key(|(i, _)| *i)
}

/// Splits model output into tags in order of appearance.
///
/// Anything inside `<think>` is reasoning, even if it mentions other tags. A
/// `<think>` left open is tolerated when an action tag follows it.
pub fn scan_tags(text: &str) -> Result<Vec<Tag>, TagParseError> {
    let all = [THINK, TOOL_CALL, EXEC_VERIFY, MEMORY_VERIFY, ANSWER];
    let mut tags = Vec::new();
    let mut pos = 0;
    let mut free = String::new();
    let flush = |free: &mut String, tags: &mut Vec<Tag>| {
        let t = free.trim();
        if !t.is_empty() {
            tags.push(Tag::Think(t.to_string()));
        }
        free.clear();
    };
    while let Some((start, tag)) = next_open(text, pos, &all) {
        free.push_str(&text[pos..start]);
        let body_start = start + open(tag).len();
        if tag == THINK {
            let (body_end, resume) = match text[body_start..].find(&close(THINK)) {
                Some(i) => (body_start + i, body_start + i + close(THINK).len()),
                None => match next_open(text, body_start, &ACTION_TAGS) {
                    Some((i, _)) => (i, i),
                    None => {
                        return Err(TagParseError::Unclosed {
                            tag: THINK,
                            offset: start,
                        })
                    }
                },
            };
            free.push_str(&text[body_start..body_end]);
            flush(&mut free, &mut tags);
            pos = resume;
            continue;
        }
        let body_end = text[body_start..]
            .find(&close(tag))
            .map(|i| body_start + i)
            .ok_or(TagParseError::Unclosed { tag, offset: start })?;
        flush(&mut free, &mut tags);
        let body = &text[body_start..body_end];
        tags.push(match tag {
            TOOL_CALL => parse_tool_call(body, start)?,
            EXEC_VERIFY => Tag::ExecVerify(verdict(body)?),
            MEMORY_VERIFY => Tag::MemoryVerify(verdict(body)?),
            _ => {
                let sql = body.trim();
                if sql.is_empty() {
                    return Err(TagParseError::EmptyAnswer);
                }
                Tag::Answer(sql.to_string())
            }
        });
        pos = body_end + close(tag).len();
    }
    free.push_str(&text[pos..]);
    flush(&mut free, &mut tags);
    Ok(tags)
}

fn verdict(body: &str) -> Result<Verdict, TagParseError> {
    Verdict::parse(body).ok_or_else(|| TagParseError::InvalidVerdict(body.trim().to_string()))
}

fn parse_tool_call(body: &str, offset: usize) -> Result<Tag, TagParseError> {
    let bad = |reason: String| TagParseError::MalformedToolCall { offset, reason };
    let v: Json = serde_json::from_str(body.trim()).map_err(|e| bad(e.to_string()))?;
    let name = v
        .get("name")
        .and_then(Json::as_str)
        .ok_or_else(|| bad("missing \"name\"".into()))?;
    if name != EXEC_SQL && name != MEMORY_RETRIEVE {
        return Err(TagParseError::UnknownTool(name.to_string()));
    }
    let args = match v.get("arguments") {
        Some(Json::String(s)) => {
            serde_json::from_str(s).map_err(|e| bad(format!("arguments: {e}")))?
        }
        Some(a) => a.clone(),
        None => return Err(bad("missing \"arguments\"".into())),
    };
    let code = args
        .get("code")
        .and_then(Json::as_str)
        .ok_or_else(|| bad("missing \"code\" argument".into()))?;
    if code.trim().is_empty() {
        return Err(bad("empty \"code\" argument".into()));
    }
    Ok(Tag::ToolCall {
        name: name.to_string(),
        code: code.to_string(),
    })
}

/// Cuts `text` right after the first closed tool call, if any.
pub fn cut_after_tool_call(text: &str) -> &str {
    let end = close(TOOL_CALL);
    let mut from = 0;
    while let Some((start, tag)) = next_open(text, from, &[THINK, TOOL_CALL]) {
        let body = start + open(tag).len();
        if tag == THINK {
            match text[body..].find(&close(THINK)) {
                Some(i) => from = body + i,
                None => from = body,
            }
            continue;
        }
        return match text[body..].find(&end) {
            Some(i) => &text[..body + i + end.len()],
            None => text,
        };
    }
    text
}
