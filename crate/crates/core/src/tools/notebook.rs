use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::json;

use super::{arg, invalid, required, Args, Source, ToolError, ToolResult, ToolSpec, NOTEBOOK};
use crate::agent::{Notebook, NotebookRecord};

pub struct NotebookTool {
    notebook: Option<Arc<Notebook>>,
    batch_tokens: usize,
}

impl NotebookTool {
    pub fn new(notebook: Option<Arc<Notebook>>, batch_tokens: usize) -> Self {
        Self { notebook, batch_tokens }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            NOTEBOOK,
            "Long-term notebook. op=write stores a note under a unique key; op=read returns stored notes in token-budgeted batches.",
        )
        .required("op", "write or read.")
        .optional("key", "Note key for op=write, e.g. h001/2024-05-06.")
        .optional("payload", "Note text for op=write.")
        .optional("prefix", "Key prefix to read (default: all notes).")
        .optional("batch", "1-based batch number for op=read (default 1).")
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let nb = self
            .notebook
            .as_ref()
            .ok_or_else(|| ToolError::Failed("no notebook is open for this run".into()))?;
        match required(args, "op")? {
            "write" => {
                let key = required(args, "key")?;
                let payload = required(args, "payload")?;
                let record = NotebookRecord::new(key, payload);
                let tokens = record.tokens();
                nb.append(record)?;
                Ok(ToolResult::new(
                    json!({"key": key, "tokens": tokens}),
                    format!("Saved note {key} ({tokens} tokens)."),
                    Source::Fixture,
                ))
            }
            "read" => {
                let prefix = arg(args, "prefix").unwrap_or("");
                let batch: usize = match arg(args, "batch") {
                    None => 1,
                    Some(raw) => raw
                        .parse()
                        .ok()
                        .filter(|b| *b >= 1)
                        .ok_or_else(|| invalid("batch", format!("{raw:?} is not a positive integer")))?,
                };
                let batches = nb.batches(prefix, self.batch_tokens)?;
                if batches.is_empty() {
                    return Ok(ToolResult::new(
                        json!({"batch": batch, "batches": 0, "records": []}),
                        format!("No notes with prefix {prefix:?}."),
                        Source::Fixture,
                    ));
                }
                let records = batches
                    .get(batch - 1)
                    .ok_or_else(|| invalid("batch", format!("only {} batch(es) exist", batches.len())))?;
                let mut text = format!("Notes batch {batch} of {} for prefix {prefix:?}:", batches.len());
                for r in records {
                    let _ = write!(text, " [{}] {}", r.key, r.payload);
                }
                Ok(ToolResult::new(
                    json!({"batch": batch, "batches": batches.len(), "records": records}),
                    text,
                    Source::Fixture,
                ))
            }
            other => Err(invalid("op", format!("{other:?} is not write or read"))),
        }
    }
}
