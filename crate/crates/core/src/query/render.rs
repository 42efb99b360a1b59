use super::ResultTable;

fn render_row(cells: &[String], widths: &[usize]) -> String {
    let split: Vec<Vec<&str>> = cells.iter().map(|c| c.split('\n').collect()).collect();
    let height = split.iter().map(Vec::len).max().unwrap_or(1);
    let mut out = String::new();
    for line in 0..height {
        let parts: Vec<String> = split
            .iter()
            .zip(widths)
            .map(|(lines, w)| format!("{:<w$}", lines.get(line).copied().unwrap_or(""), w = *w))
            .collect();
        out.push_str(parts.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

/// Fixed-width table text. Rows are dropped from the end to stay within
/// `char_budget`, with a trailer saying how many were shown.
pub fn render_result(table: &ResultTable, char_budget: usize) -> String {
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| r.iter().map(|c| c.display_text()).collect())
        .collect();
    let mut widths: Vec<usize> = table.columns.iter().map(|c| c.chars().count()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.split('\n').map(|l| l.chars().count()).max().unwrap_or(0));
        }
    }
    let mut out = render_row(&table.columns, &widths);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    if table.rows.is_empty() {
        out.push_str("(0 rows)\n");
        return out;
    }

    let total = if table.truncated {
        table.total_before_limit.max(table.rows.len())
    } else {
        table.rows.len()
    };
    let rendered: Vec<String> = cells.iter().map(|r| render_row(r, &widths)).collect();
    let full: usize = out.len() + rendered.iter().map(String::len).sum::<usize>();
    if full <= char_budget && total == table.rows.len() {
        rendered.iter().for_each(|r| out.push_str(r));
        return out;
    }
    let trailer = |shown: usize| format!("... truncated (showing {shown} of {total} rows)\n");
    let mut shown = 0;
    for r in &rendered {
        if out.len() + r.len() + trailer(shown + 1).len() > char_budget {
            break;
        }
        out.push_str(r);
        shown += 1;
    }
    out.push_str(&trailer(shown));
    out
}
