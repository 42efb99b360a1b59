use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::Message;
use crate::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Single,
    Multiple,
}

impl FromStr for Strategy {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Strategy::Single),
            "multiple" => Ok(Strategy::Multiple),
            other => Err(AgentError::Config(format!("unknown strategy {other:?} (expected single or multiple)"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Single => "single",
            Strategy::Multiple => "multiple",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Chat,
    Debugger,
    Unittestor,
    Generator,
    Commentor,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Chat, Preset::Debugger, Preset::Unittestor, Preset::Generator, Preset::Commentor];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Chat => "chat",
            Preset::Debugger => "debugger",
            Preset::Unittestor => "unittestor",
            Preset::Generator => "generator",
            Preset::Commentor => "commentor",
        }
    }

    pub fn default_strategy(self) -> Strategy {
        match self {
            Preset::Debugger => Strategy::Single,
            _ => Strategy::Multiple,
        }
    }

    fn role(self) -> &'static str {
        match self {
            Preset::Chat => "You answer questions about a Python code repository.",
            Preset::Debugger => "You locate and explain the cause of bugs in a Python code repository.",
            Preset::Unittestor => "You write unit tests for code in a Python code repository.",
            Preset::Generator => "You write new code that fits into an existing Python code repository.",
            Preset::Commentor => "You write docstrings and comments for code in a Python code repository.",
        }
    }

    fn instructions(self) -> &'static str {
        match self {
            Preset::Chat => {
                "Look up the modules, classes, methods, functions and variables the question mentions, \
                 then answer from what the code graph shows. Name the files and symbols you relied on."
            }
            Preset::Debugger => {
                "Work iteratively. From the bug report, infer the most likely cause, retrieve the code \
                 involved, and refine the hypothesis with each result. When the cause is clear, answer \
                 with the cause and the exact locations to fix (file, class, method) plus the fix itself."
            }
            Preset::Unittestor => {
                "Before writing tests, retrieve all methods and inheritance relationships of the class \
                 under test, including inherited methods and the fields they use. Then answer with \
                 test cases that cover each method."
            }
            Preset::Generator => {
                "First locate every field, method, class or variable the requested code refers to and \
                 check their signatures. Then answer with code that uses them correctly."
            }
            Preset::Commentor => {
                "Retrieve the implementation of the code to document and of the functions it calls, so \
                 that return types and side effects are stated correctly. Then answer with the \
                 documented code."
            }
        }
    }
}

impl FromStr for Preset {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| AgentError::Config(format!("unknown preset {s:?} (expected chat, debugger, unittestor, generator or commentor)")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn strategy_rule(strategy: Strategy, max_queries: usize) -> String {
    match strategy {
        Strategy::Single => "Ask exactly one query per reply.".to_string(),
        Strategy::Multiple => format!("You may ask up to {max_queries} queries per reply, one per line."),
    }
}

/// System prompt for the primary agent.
pub fn system_prompt(preset: Preset, schema_text: &str, strategy: Strategy, max_queries: usize) -> String {
    format!(
        "{role}\n\
         You cannot read files directly. Instead you ask questions in plain English about the \
         repository's code graph; another agent turns them into graph queries and you receive the \
         results. Ask about concrete things the graph records: modules, classes, methods, functions, \
         fields, global variables, their names, files, signatures and code, and the CONTAINS, \
         HAS_METHOD, HAS_FIELD, INHERITS and USES relationships between them.\n\n\
         Code graph schema:\n{schema_text}\n\n\
         Reply in exactly one of two forms.\n\
         To retrieve information:\n\
         QUERIES:\n\
         <one plain-English query per line>\n\
         To give the final answer:\n\
         FINISH:\n\
         <your answer>\n\
         {rule} Answer with FINISH as soon as the results are sufficient.\n\n\
         {instructions}",
        role = preset.role(),
        rule = strategy_rule(strategy, max_queries),
        instructions = preset.instructions(),
    )
}

/// Messages for one primary-agent call: system prompt, earlier exchanges,
/// the task, then this exchange's history.
pub fn build_prompt(
    preset: Preset,
    task: &str,
    schema_text: &str,
    strategy: Strategy,
    max_queries: usize,
    earlier: &[Message],
    history: &[Message],
) -> Vec<Message> {
    let mut messages = vec![Message::system(system_prompt(preset, schema_text, strategy, max_queries))];
    messages.extend(earlier.iter().cloned());
    messages.push(Message::user(task));
    messages.extend(history.iter().cloned());
    messages
}

/// System prompt for the translation agent.
pub fn translator_prompt(schema_text: &str) -> String {
    format!(
        "You translate a plain-English question about a code repository into one graph query.\n\n\
         Code graph schema:\n{schema_text}\n\n\
         Query language:\n\
         MATCH pattern (, pattern)* [WHERE condition] RETURN item (, item)* [LIMIT n]\n\
         - node: (var:LABEL {{name: \"value\"}}), where var, label and properties are optional\n\
         - relationship: -[:TYPE]-> or <-[:TYPE]-, at most 4 per query\n\
         - condition: var.property = | <> | CONTAINS | STARTS WITH | ENDS WITH \"string\", \
           combined with AND, OR, NOT and parentheses\n\
         - item: var, var.property or count(*) (count(*) must be the only item)\n\
         - properties: name, file_path, class_name (alias class), signature, label, code\n\
         - MODULE names are dotted module paths such as pkg.core\n\n\
         Example: \"Find the methods of class Engine\" becomes\n\
         MATCH (c:CLASS {{name: \"Engine\"}})-[:HAS_METHOD]->(m:METHOD) RETURN m.name, m.signature\n\n\
         Reply with the query only, no explanation."
    )
}
