use codegraph_core::query::{parse_query, Query};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatParams, ChatResponse, Message};
use crate::prompt::translator_prompt;
use crate::protocol::extract_query;

/// One backend call made while translating.
#[derive(Debug, Clone)]
pub struct TranslatorCall {
    pub messages: Vec<Message>,
    pub response: ChatResponse,
    /// Parser error fed back after this reply, if it was rejected.
    pub rejection: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub text: String,
    pub query: Query,
    pub retries: usize,
    pub calls: Vec<TranslatorCall>,
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("translation failed after {} attempts: {last_error}", calls.len())]
    Failed {
        last_error: String,
        last_query: String,
        calls: Vec<TranslatorCall>,
    },
    #[error("{source}")]
    Backend {
        #[source]
        source: BackendError,
        calls: Vec<TranslatorCall>,
    },
}

/// Turns a natural-language query into a graph query that parses against
/// the schema, feeding parser errors back for up to `retries` retries.
pub fn translate(
    nl_query: &str,
    schema_text: &str,
    backend: &dyn ChatBackend,
    params: &ChatParams,
    retries: usize,
) -> Result<Translation, TranslateError> {
    let mut messages = vec![Message::system(translator_prompt(schema_text)), Message::user(nl_query)];
    let mut calls = Vec::new();
    let mut last = (String::new(), String::new());
    for attempt in 0..=retries {
        let response = match backend.send(&messages, params) {
            Ok(r) => r,
            Err(source) => return Err(TranslateError::Backend { source, calls }),
        };
        let text = extract_query(&response.content);
        match parse_query(&text) {
            Ok(query) => {
                calls.push(TranslatorCall { messages, response, rejection: None });
                return Ok(Translation { text, query, retries: attempt, calls });
            }
            Err(e) => {
                let feedback = format!(
                    "The query `{text}` was rejected: {e}. Reply with a corrected query only."
                );
                let sent = messages.clone();
                messages.push(Message::assistant(&response.content));
                messages.push(Message::user(&feedback));
                calls.push(TranslatorCall { messages: sent, response, rejection: Some(feedback) });
                last = (e.to_string(), text);
            }
        }
    }
    Err(TranslateError::Failed { last_error: last.0, last_query: last.1, calls })
}
