use std::fmt;

use serde::{Deserialize, Serialize};

use crate::db::ExecClass;
use crate::sql::NormalizedSql;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Propose,
    Execute,
    EVerify,
    MVerify,
    SelfCorrect,
    Finalize,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Propose,
        ActionKind::Execute,
        ActionKind::EVerify,
        ActionKind::MVerify,
        ActionKind::SelfCorrect,
        ActionKind::Finalize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Propose => "PROPOSE",
            ActionKind::Execute => "EXECUTE",
            ActionKind::EVerify => "E_VERIFY",
            ActionKind::MVerify => "M_VERIFY",
            ActionKind::SelfCorrect => "SELF_CORRECT",
            ActionKind::Finalize => "FINALIZE",
        }
    }

    pub fn is_verify(self) -> bool {
        matches!(self, ActionKind::EVerify | ActionKind::MVerify)
    }

    /// Kinds that issue a tool call and count against the interaction budget.
    pub fn is_tool_call(self) -> bool {
        matches!(self, ActionKind::Execute | ActionKind::MVerify)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn parse(text: &str) -> Option<Verdict> {
        match text.trim().to_ascii_lowercase().as_str() {
            "pass" => Some(Verdict::Pass),
            "no_pass" | "fail" => Some(Verdict::Fail),
            _ => None,
        }
    }
}

/// One typed step of an episode.
///
/// `sql` carries the statement being proposed, executed, checked against
/// memory, or finalized. `exec_class` is filled on `EXECUTE` once the
/// statement has run. `implicit` marks verdicts inferred from the next action
/// rather than written out as a tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql: Option<NormalizedSql>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub thought: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_class: Option<ExecClass>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub implicit: bool,
}

impl Action {
    pub fn new(kind: ActionKind) -> Self {
        Self {
            kind,
            sql: None,
            verdict: None,
            thought: String::new(),
            exec_class: None,
            implicit: false,
        }
    }

    pub fn with_sql(kind: ActionKind, sql: NormalizedSql) -> Self {
        Self {
            sql: Some(sql),
            ..Self::new(kind)
        }
    }

    pub fn verdict(kind: ActionKind, verdict: Verdict) -> Self {
        Self {
            verdict: Some(verdict),
            ..Self::new(kind)
        }
    }

    pub fn sig(&self) -> (ActionKind, Option<Verdict>) {
        (self.kind, self.verdict)
    }
}
