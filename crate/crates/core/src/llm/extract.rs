use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FenceTag {
    Json,
    Program,
}

impl FenceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FenceTag::Json => "json",
            FenceTag::Program => "program",
        }
    }
}

impl fmt::Display for FenceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no ```{tag} block found in response")]
pub struct ExtractError {
    pub tag: &'static str,
}

/// Content of the first fence whose info string matches `tag`. For
/// [`FenceTag::Json`] a bare top-level JSON object is accepted when the
/// text holds no matching fence.
pub fn extract_fenced_block(text: &str, tag: FenceTag) -> Result<String, ExtractError> {
    if let Some(inner) = first_fence(text, tag.as_str()) {
        return Ok(inner.trim().to_string());
    }
    if tag == FenceTag::Json {
        if let Some(obj) = bare_json_object(text) {
            return Ok(obj.to_string());
        }
    }
    Err(ExtractError { tag: tag.as_str() })
}

fn first_fence<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let mut rest = text;
    let mut base = 0usize;
    while let Some(open) = rest.find("```") {
        let after = base + open + 3;
        let line_end = text[after..].find('\n').map(|i| after + i).unwrap_or(text.len());
        let info = text[after..line_end].trim();
        let body_start = (line_end + 1).min(text.len());
        let close = text[body_start..].find("```").map(|i| body_start + i);
        let matches = info.eq_ignore_ascii_case(tag)
            || info
                .split_whitespace()
                .next()
                .is_some_and(|w| w.eq_ignore_ascii_case(tag));
        if matches {
            return Some(match close {
                Some(c) => &text[body_start..c],
                None => &text[body_start..],
            });
        }
        // skip this whole fence so its closing marker is not read as an opener
        let next = match close {
            Some(c) => c + 3,
            None => return None,
        };
        base = next;
        rest = &text[next..];
    }
    None
}

/// First balanced `{...}` span that parses as JSON.
fn bare_json_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    for (start, _) in text.match_indices('{') {
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_str {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_str = false;
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let cand = &text[start..=i];
                        if serde_json::from_str::<serde_json::Value>(cand).is_ok() {
                            return Some(cand);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_json_fence() {
        let t = "Here you go:\n```json\n{\"a\": 1}\n```\nthanks";
        assert_eq!(extract_fenced_block(t, FenceTag::Json).unwrap(), "{\"a\": 1}");
    }

    #[test]
    fn first_of_two_fences() {
        let t = "```json\n{\"a\": 1}\n```\n```json\n{\"a\": 2}\n```";
        assert_eq!(extract_fenced_block(t, FenceTag::Json).unwrap(), "{\"a\": 1}");
    }

    #[test]
    fn skips_other_tags() {
        let t = "```python\nprint(1)\n```\n```program\nreturn 1\n```";
        assert_eq!(extract_fenced_block(t, FenceTag::Program).unwrap(), "return 1");
    }

    #[test]
    fn prose_only_is_error() {
        assert!(extract_fenced_block("I think the answer is B.", FenceTag::Json).is_err());
        assert!(extract_fenced_block("{not json}", FenceTag::Json).is_err());
    }

    #[test]
    fn bare_object_with_braces_in_strings() {
        let t = "result: {\"s\": \"a } b\", \"n\": {\"k\": 2}} trailing";
        assert_eq!(
            extract_fenced_block(t, FenceTag::Json).unwrap(),
            "{\"s\": \"a } b\", \"n\": {\"k\": 2}}"
        );
    }
}
