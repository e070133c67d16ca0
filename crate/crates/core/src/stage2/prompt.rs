//! Versioned prompt templates.

use super::Stage2Error;

const TEMPLATES: &[(&str, &str)] = &[("v1", include_str!("../../prompts/v1.txt"))];

pub fn known_versions() -> impl Iterator<Item = &'static str> {
    TEMPLATES.iter().map(|(v, _)| *v)
}

pub fn template(version: &str) -> Result<&'static str, Stage2Error> {
    TEMPLATES
        .iter()
        .find(|(v, _)| *v == version)
        .map(|(_, t)| *t)
        .ok_or_else(|| Stage2Error::UnknownPromptVersion(version.to_string()))
}

/// Fills `{{party}}` and `{{window}}` in one left-to-right pass, so text
/// inside the window is never re-expanded.
pub fn build_prompt(window_text: &str, party: &str, prompt_version: &str) -> Result<String, Stage2Error> {
    let tpl = template(prompt_version)?;
    let mut out = String::with_capacity(tpl.len() + window_text.len() + 64);
    let mut rest = tpl;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                match &after[..close] {
                    "party" => out.push_str(party),
                    "window" => out.push_str(window_text),
                    other => {
                        out.push_str("{{");
                        out.push_str(other);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Sent after a reply that could not be parsed.
pub const REASK: &str = "Your previous reply could not be parsed. Reply again with only the JSON object, keys in this order: {\"reasoning\": \"<one sentence>\", \"on_target\": <1 or 0>, \"sentiment\": <-1, -0.5, 0, 0.5 or 1>}";
