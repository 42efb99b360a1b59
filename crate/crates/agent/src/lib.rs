//! Retrieval agent: a primary agent writes natural-language queries and
//! decides when it knows enough, a translation agent turns each query into
//! a graph query, and the results feed the next round.

pub mod backend;
pub mod prompt;
pub mod protocol;
pub mod session;
pub mod translate;

use std::path::PathBuf;
use std::sync::Arc;

use codegraph_core::query::{execute_with_source, render_result, Caps};
use codegraph_core::schema::SCHEMA_TEXT;
use codegraph_core::store::GraphHandle;
use thiserror::Error;

pub use backend::{BackendError, ChatBackend, ChatParams, ChatResponse, HttpBackend, Message, ScriptedBackend};
pub use prompt::{build_prompt, Preset, Strategy};
pub use protocol::{parse_primary, Decision};
pub use session::{AgentRole, Exchange, IssuedQuery, QueryStatus, Session, TokenUsage, Turn, TurnRole};
pub use translate::{translate, TranslateError, Translation};

use session::Pending;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("the primary agent did not follow the reply format after {attempts} reformat requests: {reason}")]
    Protocol { reason: String, attempts: usize },
    #[error("session has no interrupted exchange to resume")]
    NothingToResume,
}

/// Reformat requests allowed before a malformed primary reply is fatal.
pub const REFORMAT_ATTEMPTS: usize = 2;

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub preset: Preset,
    pub strategy: Strategy,
    pub max_rounds: usize,
    pub translate_retries: usize,
    /// Cap on executed queries per round under the multiple strategy.
    pub max_queries_per_round: usize,
    /// Characters of rendered results fed back per round, shared by the
    /// round's queries.
    pub round_char_budget: usize,
    pub caps: Caps,
    pub params: ChatParams,
    /// Repository checkout used to resolve `code` properties.
    pub source_root: Option<PathBuf>,
}

impl AgentConfig {
    pub fn for_preset(preset: Preset) -> Self {
        Self {
            preset,
            strategy: preset.default_strategy(),
            max_rounds: 5,
            translate_retries: 3,
            max_queries_per_round: 5,
            round_char_budget: 8000,
            caps: Caps::default(),
            params: ChatParams { model: "gpt-4o".into(), temperature: 0.0, max_tokens: None },
            source_root: None,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_rounds == 0 {
            return Err(AgentError::Config("max_rounds must be at least 1".into()));
        }
        if self.max_queries_per_round == 0 {
            return Err(AgentError::Config("max_queries_per_round must be at least 1".into()));
        }
        if self.round_char_budget == 0 {
            return Err(AgentError::Config("round_char_budget must be positive".into()));
        }
        Ok(())
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self::for_preset(Preset::Chat)
    }
}

/// What one user message produced.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExchangeOutcome {
    pub answer: String,
    pub rounds: usize,
    pub queries: Vec<IssuedQuery>,
    pub usage: TokenUsage,
}

#[derive(Clone)]
pub struct Agent {
    handle: GraphHandle,
    backend: Arc<dyn ChatBackend>,
    config: AgentConfig,
}

impl Agent {
    pub fn new(handle: GraphHandle, backend: Arc<dyn ChatBackend>, config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self { handle, backend, config })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn new_session(&self, id: impl Into<String>) -> Session {
        Session::new(id, self.config.preset, self.config.strategy)
    }

    /// Runs one exchange for `task`. On a backend failure the session keeps
    /// everything up to the last completed round and [`Agent::resume`]
    /// picks up from there.
    pub fn send(&self, session: &mut Session, task: &str) -> Result<ExchangeOutcome, AgentError> {
        if session.transcript.is_empty() {
            let system = prompt::system_prompt(self.config.preset, SCHEMA_TEXT, self.config.strategy, self.query_cap());
            session.push(0, TurnRole::System, system);
        }
        session.push(0, TurnRole::User, task);
        let first_query = session.queries.len();
        session.exchanges.push(Exchange { task: task.to_string(), answer: None, rounds: 0, queries: first_query..first_query });
        session.pending = Some(Pending { history: Vec::new(), rounds_done: 0, usage_before: session.usage.clone() });
        self.drive(session)
    }

    pub fn resume(&self, session: &mut Session) -> Result<ExchangeOutcome, AgentError> {
        if session.pending.is_none() {
            return Err(AgentError::NothingToResume);
        }
        self.drive(session)
    }

    fn query_cap(&self) -> usize {
        match self.config.strategy {
            Strategy::Single => 1,
            Strategy::Multiple => self.config.max_queries_per_round,
        }
    }

    fn messages(&self, session: &Session, history: &[Message]) -> Vec<Message> {
        let exchange = session.exchanges.last().expect("an exchange is in progress");
        // The in-progress exchange has no answer yet, so it is not among
        // the earlier messages.
        let earlier = session.earlier_messages();
        build_prompt(
            self.config.preset,
            &exchange.task,
            SCHEMA_TEXT,
            self.config.strategy,
            self.query_cap(),
            &earlier,
            history,
        )
    }

    /// Calls the primary agent until it produces a well-formed reply,
    /// asking it to reformat at most [`REFORMAT_ATTEMPTS`] times.
    fn primary(
        &self,
        session: &mut Session,
        mut messages: Vec<Message>,
        round: usize,
        require_finish: bool,
    ) -> Result<(String, Decision), AgentError> {
        for attempt in 0..=REFORMAT_ATTEMPTS {
            let response = self.backend.send(&messages, &self.config.params)?;
            session.usage.record(AgentRole::Primary, &messages, &response);
            session.push(round, TurnRole::Primary, &response.content);
            let reason = match parse_primary(&response.content) {
                Ok(Decision::Queries(_)) if require_finish => "no retrieval rounds are left, so the reply must be FINISH:".to_string(),
                Ok(decision) => return Ok((response.content, decision)),
                Err(reason) => reason,
            };
            if attempt == REFORMAT_ATTEMPTS {
                return Err(AgentError::Protocol { reason, attempts: REFORMAT_ATTEMPTS });
            }
            let notice = if require_finish {
                format!("Your reply was not accepted: {reason}. Reply with FINISH: followed by your answer.")
            } else {
                format!(
                    "Your reply was not accepted: {reason}. Reply with FINISH: followed by your answer, \
                     or QUERIES: followed by one query per line."
                )
            };
            session.push(round, TurnRole::Notice, &notice);
            messages.push(Message::assistant(response.content));
            messages.push(Message::user(notice));
        }
        unreachable!("the last attempt returns")
    }

    fn run_query(&self, session: &mut Session, round: usize, nl: &str, budget: usize) -> Result<String, AgentError> {
        let result = translate(nl, SCHEMA_TEXT, self.backend.as_ref(), &self.config.params, self.config.translate_retries);
        let calls = match &result {
            Ok(t) => t.calls.clone(),
            Err(TranslateError::Failed { calls, .. }) | Err(TranslateError::Backend { calls, .. }) => calls.clone(),
        };
        for call in &calls {
            session.usage.record(AgentRole::Translator, &call.messages, &call.response);
            session.push(round, TurnRole::Translator, &call.response.content);
            if let Some(rejection) = &call.rejection {
                session.push(round, TurnRole::Notice, rejection);
            }
        }
        match result {
            Ok(t) => {
                let caps = Caps { max_rows: self.config.caps.max_rows, max_chars: self.config.caps.max_chars.min(budget) };
                let table = execute_with_source(&t.query, &self.handle, caps, self.config.source_root.as_deref());
                let rendered = render_result(&table, budget);
                session.queries.push(IssuedQuery {
                    round,
                    natural_language: nl.to_string(),
                    graph_query: Some(t.text.clone()),
                    translate_retries: t.retries,
                    status: QueryStatus::Executed { result: table },
                });
                Ok(format!("Query: {nl}\nGraph query: {}\n{rendered}", t.text))
            }
            Err(TranslateError::Failed { last_error, last_query, calls }) => {
                session.queries.push(IssuedQuery {
                    round,
                    natural_language: nl.to_string(),
                    graph_query: Some(last_query),
                    translate_retries: calls.len().saturating_sub(1),
                    status: QueryStatus::TranslationFailed { error: last_error.clone() },
                });
                Ok(format!("Query: {nl}\nThis query could not be translated into a graph query ({last_error}). Try rephrasing it.\n"))
            }
            Err(TranslateError::Backend { source, .. }) => Err(source.into()),
        }
    }

    fn drive(&self, session: &mut Session) -> Result<ExchangeOutcome, AgentError> {
        let max_rounds = self.config.max_rounds;
        loop {
            let pending = session.pending.clone().expect("drive runs with a pending exchange");
            let round = pending.rounds_done + 1;
            let exhausted = pending.rounds_done >= max_rounds;
            let mut messages = self.messages(session, &pending.history);
            if exhausted {
                let notice = "No retrieval rounds are left. Reply now with FINISH: and your answer, based on the results above.";
                session.push(pending.rounds_done, TurnRole::Notice, notice);
                messages.push(Message::user(notice));
            }
            let turn_round = if exhausted { pending.rounds_done } else { round };
            let (reply, decision) = match self.primary(session, messages, turn_round, exhausted) {
                Ok(r) => r,
                Err(e @ AgentError::Protocol { .. }) => {
                    session.pending = None;
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            let queries = match decision {
                Decision::Finish(answer) => {
                    let rounds = if exhausted { pending.rounds_done } else { round };
                    return Ok(self.finish(session, answer, rounds, &pending));
                }
                Decision::Queries(q) => q,
            };

            let cap = self.query_cap();
            let mut notices = Vec::new();
            if queries.len() > cap {
                notices.push(match self.config.strategy {
                    Strategy::Single => format!(
                        "Only one query per round is allowed; ran the first of your {} queries and ignored the rest.",
                        queries.len()
                    ),
                    Strategy::Multiple => format!(
                        "At most {cap} queries per round are allowed; ran the first {cap} of your {} queries.",
                        queries.len()
                    ),
                });
            }
            let run: Vec<&String> = queries.iter().take(cap).collect();
            let budget = (self.config.round_char_budget / run.len()).max(1);
            let mut blocks = Vec::new();
            for nl in run {
                blocks.push(self.run_query(session, round, nl, budget)?);
            }
            let mut feedback = format!("Results of round {round}:\n\n{}", blocks.join("\n"));
            for n in &notices {
                session.push(round, TurnRole::Notice, n);
                feedback.push_str(&format!("\nNote: {n}"));
            }
            if round < max_rounds {
                feedback.push_str("\nReply with FINISH: if this is enough to answer, otherwise with QUERIES:.");
            }
            session.push(round, TurnRole::Results, &feedback);
            let pending = session.pending.as_mut().expect("still pending");
            pending.history.push(Message::assistant(reply));
            pending.history.push(Message::user(feedback));
            pending.rounds_done = round;
            session.exchanges.last_mut().expect("exchange in progress").rounds = round;
        }
    }

    fn finish(&self, session: &mut Session, answer: String, rounds: usize, pending: &Pending) -> ExchangeOutcome {
        let usage = session.usage.since(&pending.usage_before);
        let exchange = session.exchanges.last_mut().expect("exchange in progress");
        exchange.answer = Some(answer.clone());
        exchange.rounds = rounds;
        exchange.queries.end = session.queries.len();
        let queries = session.queries[exchange.queries.clone()].to_vec();
        session.pending = None;
        ExchangeOutcome { answer, rounds, queries, usage }
    }
}

/// Runs a fresh session for `task` and returns the answer with the session.
pub fn run_session(
    task: &str,
    handle: &GraphHandle,
    backend: Arc<dyn ChatBackend>,
    config: AgentConfig,
) -> Result<(String, Session), AgentError> {
    let agent = Agent::new(handle.clone(), backend, config)?;
    let mut session = agent.new_session("session-1");
    let outcome = agent.send(&mut session, task)?;
    Ok((outcome.answer, session))
}
