use crate::task::HistoryTurn;
use crate::templates::SYSTEM_PROMPT;

const INSTRUCTION: &str = "(Note you only need to translate the question to SQL instead answer the question. Once you feel you are ready for the final SQL, directly return the SQL inside <answer_sql> and </answer_sql>  at the end of your response. \n Note please call `exec_sql` tool at least once)";

/// User message: schema, earlier turns with their SQL, then the question.
///
/// `history_sql` holds the SQL shown for each earlier turn.
pub fn render_user(
    schema_prompt: &str,
    history: &[HistoryTurn],
    history_sql: &[&str],
    question: &str,
) -> String {
    let mut out = String::new();
    if history.is_empty() {
        out.push_str(&format!("Database schema: \n{schema_prompt}\n\n"));
    } else {
        out.push_str(
            "Here are previous question and corresponding correct SQL in this dialogue: \n\n",
        );
        for (k, (turn, sql)) in history.iter().zip(history_sql).enumerate() {
            let schema = if k == 0 {
                format!("Database schema: \n{schema_prompt}\n")
            } else {
                String::new()
            };
            out.push_str(&format!(
                "## Turn {} ## \nUser: \"{schema}Question: {} \" \nCorresponding Correct SQL: \"{sql}\" \n\n",
                k + 1,
                turn.question
            ));
        }
    }
    out.push_str(&format!("Now please translate the following question to SQL step by step \nQuestion: {question} {INSTRUCTION}"));
    out
}

pub fn system_prompt() -> &'static str {
    SYSTEM_PROMPT
}

/// The prompt as one text: system block, blank line, user block.
pub fn render_prompt(system: &str, user: &str) -> String {
    format!("{system}\n\n{user}")
}
