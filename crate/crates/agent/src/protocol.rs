//! The reply formats exchanged with the two agents.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Finish(String),
    Queries(Vec<String>),
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn strip_marker(line: &str) -> &str {
    let t = line.trim();
    let t = t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).unwrap_or(t);
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = t[digits..].strip_prefix(". ").or_else(|| t[digits..].strip_prefix(") ")) {
            return rest.trim();
        }
    }
    t
}

/// Reads a primary-agent reply. The first line starting with `FINISH:` or
/// `QUERIES:` (outside or inside a code fence) decides the form.
pub fn parse_primary(reply: &str) -> Result<Decision, String> {
    let lines: Vec<&str> = reply.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim().trim_start_matches(['*', '#', ' ']);
        if let Some(rest) = t.strip_prefix("FINISH:") {
            let mut body: Vec<&str> = vec![rest.trim_start_matches('*').trim_start()];
            body.extend(&lines[i + 1..]);
            while body.last().is_some_and(|l| is_fence(l) || l.trim().is_empty()) {
                body.pop();
            }
            let answer = body.join("\n").trim().to_string();
            return if answer.is_empty() { Err("FINISH: is followed by an empty answer".into()) } else { Ok(Decision::Finish(answer)) };
        }
        if let Some(rest) = t.strip_prefix("QUERIES:") {
            let rest = rest.trim_start_matches('*');
            let mut queries = Vec::new();
            if !rest.trim().is_empty() {
                queries.push(strip_marker(rest).to_string());
            }
            for l in &lines[i + 1..] {
                if is_fence(l) {
                    break;
                }
                let q = strip_marker(l);
                if !q.is_empty() {
                    queries.push(q.to_string());
                }
            }
            return if queries.is_empty() { Err("QUERIES: lists no queries".into()) } else { Ok(Decision::Queries(queries)) };
        }
    }
    Err("the reply starts with neither FINISH: nor QUERIES:".into())
}

/// Pulls the graph query out of a translation-agent reply: fenced code is
/// unwrapped and anything before the first MATCH is dropped.
pub fn extract_query(reply: &str) -> String {
    let mut text = reply.trim();
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let body_start = after.find('\n').map_or(after.len(), |p| p + 1);
        let body = &after[body_start..];
        text = body.find("```").map_or(body, |end| &body[..end]);
    }
    let upper = text.to_ascii_uppercase();
    match upper.find("MATCH") {
        Some(p) => text[p..].trim().to_string(),
        None => text.trim().to_string(),
    }
}
