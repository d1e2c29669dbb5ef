//! Prompt and tool-response text.

use serde_json::{json, Value};

pub const SYSTEM_PROMPT: &str = include_str!("../templates/system_prompt.txt");
pub const EXEC_SQL_RESPONSE: &str = include_str!("../templates/exec_sql_response.txt");
pub const MEMORY_RETRIEVE_RESPONSE: &str =
    include_str!("../templates/memory_retrieve_response.txt");

pub const EXEC_SQL: &str = "exec_sql";
pub const MEMORY_RETRIEVE: &str = "memory_retrieve";

/// Replaces each `{name}` placeholder once per occurrence, in a single pass,
/// so substituted text is never re-scanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            vars.iter()
                .find(|(k, _)| *k == &after[..close])
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn current_q(question: &str) -> String {
    format!("Question: {question}")
}

pub fn exec_sql_response(question: &str, code: &str, return_msg: &str) -> String {
    fill(
        EXEC_SQL_RESPONSE,
        &[
            ("current_q", &current_q(question)),
            ("code", code),
            ("return_msg", return_msg),
        ],
    )
}

pub fn tool_schemas() -> Vec<Value> {
    vec![
        json!({
            "type": "function",
            "function": {
                "name": EXEC_SQL,
                "description": "A tool for executing sql and return the query results",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "code": {"type": "string", "description": "The current generated SQL that will be executed"}
                    },
                    "required": ["code"]
                }
            }
        }),
        json!({
            "type": "function",
            "function": {
                "name": MEMORY_RETRIEVE,
                "description": "A tool for retrieving the historical questions and ground-truth SQL in this dialogue",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "code": {
                            "type": "string",
                            "description": "The current generated SQL that needs to be verified coherence with the given historical memory"
                        }
                    },
                    "required": ["code"]
                }
            }
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(
            fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]),
            "a {y} b 2 {z}"
        );
        assert_eq!(fill("{", &[]), "{");
    }

    #[test]
    fn exec_response_layout() {
        let r = exec_sql_response(
            "What about USA?",
            "SELECT 1",
            "The sql results example is: [(1,)]",
        );
        assert!(r.starts_with("Recap:  \n- Current question: Question: What about USA?  \n- Generated SQL: SELECT 1  \n"));
        assert!(r.contains("(truncated to 200 characters): The sql results example is: [(1,)]  \n\nNow please:  \n"));
        assert!(r.ends_with("coherent with the historical memory."));
    }

    #[test]
    fn templates_have_expected_placeholders() {
        for p in ["{current_q}", "{code}", "{return_msg}"] {
            assert!(EXEC_SQL_RESPONSE.contains(p));
        }
        for p in [
            "{current_q}",
            "{code}",
            "{execution_results}",
            "{memory_str}",
        ] {
            assert!(MEMORY_RETRIEVE_RESPONSE.contains(p));
        }
    }
}
