use std::fmt::Write as _;
use std::sync::Arc;

use super::{arg, Args, Source, ToolError, ToolResult, ToolSpec, HUB_INFO};
use crate::ingest::{BoundingBox, Hub};

const LISTED: usize = 20;

pub struct HubInfoTool {
    hubs: Arc<Vec<Hub>>,
}

impl HubInfoTool {
    pub fn new(hubs: Arc<Vec<Hub>>) -> Self {
        Self { hubs }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            HUB_INFO,
            "Looks up candidate logistic hubs (id, state, latitude, longitude) by hub id or state.",
        )
        .optional("hub_id", "Exact hub id, e.g. h001.")
        .optional("state", "State name, e.g. Georgia. Omit both filters to list every hub.")
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let hub_id = arg(args, "hub_id");
        let state = arg(args, "state");
        let matches: Vec<&Hub> = self
            .hubs
            .iter()
            .filter(|h| hub_id.is_none_or(|id| h.id == id))
            .filter(|h| state.is_none_or(|s| h.state.eq_ignore_ascii_case(s)))
            .collect();

        let mut filter: Vec<String> = Vec::new();
        if let Some(id) = hub_id {
            filter.push(format!("hub_id={id}"));
        }
        if let Some(s) = state {
            filter.push(format!("state={s}"));
        }
        let filter = if filter.is_empty() {
            "no filter".to_string()
        } else {
            filter.join(", ")
        };
        if matches.is_empty() {
            return Err(ToolError::HubNotFound(filter));
        }

        let mut text = format!("Found {} hub(s) matching {filter}:", matches.len());
        for h in matches.iter().take(LISTED) {
            let _ = write!(text, " {} ({}) at {}, {};", h.id, h.state, h.latitude, h.longitude);
        }
        if matches.len() > LISTED {
            let _ = write!(text, " and {} more;", matches.len() - LISTED);
        }
        let bbox = BoundingBox::of(matches.iter().map(|h| h.location())).expect("non-empty");
        let _ = write!(
            text,
            " bounding box lat {}..{}, lon {}..{}.",
            bbox.min_lat, bbox.max_lat, bbox.min_lon, bbox.max_lon
        );
        let records = serde_json::to_value(&matches).map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolResult::new(records, text, Source::Fixture))
    }
}
