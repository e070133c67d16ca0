//! Validation of the model's reasoning-first JSON reply.

use serde_json::Value;

use super::Sentiment;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub reasoning: String,
    pub on_target: u8,
    pub sentiment: Sentiment,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed response: {0}")]
pub struct MalformedResponse(pub String);

/// Finds the first JSON object carrying the classification fields. Prose or
/// code fences around it are ignored.
pub fn parse_response(raw: &str) -> Result<ParsedReply, MalformedResponse> {
    let mut last_err = None;
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else { continue };
        if !obj.contains_key("on_target") && !obj.contains_key("sentiment") && !obj.contains_key("reasoning") {
            continue;
        }
        match validate(&obj) {
            Ok(p) => return Ok(p),
            Err(e) => {
                last_err.get_or_insert(e);
            }
        }
    }
    Err(last_err.unwrap_or_else(|| MalformedResponse("no JSON object with classification fields".into())))
}

fn validate(obj: &serde_json::Map<String, Value>) -> Result<ParsedReply, MalformedResponse> {
    let reasoning = match obj.get("reasoning") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => return Err(MalformedResponse("reasoning must be a non-empty string".into())),
        None => return Err(MalformedResponse("missing field reasoning".into())),
    };
    let on_target = match obj.get("on_target") {
        Some(v) => match number(v) {
            Some(x) if x == 0.0 => 0,
            Some(x) if x == 1.0 => 1,
            _ => return Err(MalformedResponse(format!("on_target must be 0 or 1, got {v}"))),
        },
        None => return Err(MalformedResponse("missing field on_target".into())),
    };
    let sentiment = match obj.get("sentiment") {
        Some(v) => number(v)
            .and_then(Sentiment::from_value)
            .ok_or_else(|| MalformedResponse(format!("sentiment must be one of -1, -0.5, 0, 0.5, 1, got {v}")))?,
        None => return Err(MalformedResponse("missing field sentiment".into())),
    };
    Ok(ParsedReply {
        reasoning,
        on_target,
        sentiment,
    })
}

/// Numbers, or strings holding a number.
fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}
