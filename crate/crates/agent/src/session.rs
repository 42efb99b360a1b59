use std::collections::BTreeMap;

use codegraph_core::query::ResultTable;
use serde::Serialize;

use crate::backend::{ChatResponse, Message};
use crate::prompt::{Preset, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Primary,
    Translator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnRole {
    System,
    User,
    Primary,
    Translator,
    Results,
    Notice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub round: usize,
    pub role: TurnRole,
    pub content: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoleUsage {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Set when some call reported no usage and counts were estimated
    /// as ceil(chars / 4).
    pub approximate: bool,
    pub by_role: BTreeMap<AgentRole, RoleUsage>,
}

fn approx_tokens(chars: usize) -> u64 {
    chars.div_ceil(4) as u64
}

impl TokenUsage {
    pub fn record(&mut self, role: AgentRole, messages: &[Message], response: &ChatResponse) {
        let prompt = response.prompt_tokens.unwrap_or_else(|| {
            self.approximate = true;
            approx_tokens(messages.iter().map(|m| m.content.chars().count()).sum())
        });
        let completion = response.completion_tokens.unwrap_or_else(|| {
            self.approximate = true;
            approx_tokens(response.content.chars().count())
        });
        self.prompt_tokens += prompt;
        self.completion_tokens += completion;
        let entry = self.by_role.entry(role).or_default();
        entry.calls += 1;
        entry.prompt_tokens += prompt;
        entry.completion_tokens += completion;
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Usage accumulated since `earlier` was taken.
    pub fn since(&self, earlier: &TokenUsage) -> TokenUsage {
        let mut by_role = BTreeMap::new();
        for (role, now) in &self.by_role {
            let then = earlier.by_role.get(role).copied().unwrap_or_default();
            by_role.insert(
                *role,
                RoleUsage {
                    calls: now.calls - then.calls,
                    prompt_tokens: now.prompt_tokens - then.prompt_tokens,
                    completion_tokens: now.completion_tokens - then.completion_tokens,
                },
            );
        }
        TokenUsage {
            prompt_tokens: self.prompt_tokens - earlier.prompt_tokens,
            completion_tokens: self.completion_tokens - earlier.completion_tokens,
            approximate: self.approximate,
            by_role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryStatus {
    Executed { result: ResultTable },
    TranslationFailed { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IssuedQuery {
    pub round: usize,
    pub natural_language: String,
    /// Last graph query the translator produced, valid or not.
    pub graph_query: Option<String>,
    pub translate_retries: usize,
    #[serde(flatten)]
    pub status: QueryStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exchange {
    pub task: String,
    pub answer: Option<String>,
    pub rounds: usize,
    /// Indexes into `Session::queries` issued during this exchange.
    pub queries: std::ops::Range<usize>,
}

/// State of an exchange interrupted by a backend failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pending {
    pub history: Vec<Message>,
    pub rounds_done: usize,
    pub usage_before: TokenUsage,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    pub id: String,
    pub preset: Preset,
    pub strategy: Strategy,
    pub transcript: Vec<Turn>,
    pub queries: Vec<IssuedQuery>,
    pub usage: TokenUsage,
    pub exchanges: Vec<Exchange>,
    #[serde(skip)]
    pub pending: Option<Pending>,
}

impl Session {
    pub fn new(id: impl Into<String>, preset: Preset, strategy: Strategy) -> Self {
        Self {
            id: id.into(),
            preset,
            strategy,
            transcript: Vec::new(),
            queries: Vec::new(),
            usage: TokenUsage::default(),
            exchanges: Vec::new(),
            pending: None,
        }
    }

    pub(crate) fn push(&mut self, round: usize, role: TurnRole, content: impl Into<String>) {
        self.transcript.push(Turn { round, role, content: content.into() });
    }

    /// Earlier completed exchanges as user/assistant message pairs.
    pub(crate) fn earlier_messages(&self) -> Vec<Message> {
        self.exchanges
            .iter()
            .filter_map(|e| e.answer.as_ref().map(|a| [Message::user(&e.task), Message::assistant(format!("FINISH:\n{a}"))]))
            .flatten()
            .collect()
    }

    /// The transcript as JSON Lines, one turn per line.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for turn in &self.transcript {
            out.push_str(&serde_json::to_string(turn).expect("turns serialize"));
            out.push('\n');
        }
        out
    }
}
