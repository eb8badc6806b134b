use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::DataError;
use crate::tree::{DepTree, Span};

pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// One annotated sentence with a subject/object pair and its relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub ner: Vec<String>,
    /// 1-based heads, 0 for the root.
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
    pub subj: Span,
    pub obj: Span,
    pub subj_type: String,
    pub obj_type: String,
    pub relation: String,
}

impl Example {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks parallel lengths, tree well-formedness and span placement.
    pub fn validate(&self) -> Result<DepTree, DataError> {
        let n = self.tokens.len();
        let invalid = |reason: String| DataError::InvalidExample { id: self.id.clone(), reason };
        if n == 0 {
            return Err(invalid("no tokens".into()));
        }
        for (name, len) in [
            ("pos", self.pos.len()),
            ("ner", self.ner.len()),
            ("heads", self.heads.len()),
            ("deprels", self.deprels.len()),
        ] {
            if len != n {
                return Err(invalid(format!("{name} has {len} entries for {n} tokens")));
            }
        }
        for (name, span) in [("subject", self.subj), ("object", self.obj)] {
            if span.start > span.end || span.end >= n {
                return Err(invalid(format!(
                    "{name} span ({}, {}) outside 0..{n}",
                    span.start, span.end
                )));
            }
        }
        if self.subj.overlaps(&self.obj) {
            return Err(invalid("subject and object spans overlap".into()));
        }
        DepTree::from_heads(&self.heads)
            .map_err(|source| DataError::InvalidTree { id: self.id.clone(), source })
    }

    /// Token distance between the subject and object starts.
    pub fn entity_distance(&self) -> usize {
        self.subj.start.abs_diff(self.obj.start)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "id": self.id,
            "tokens": self.tokens,
            "pos": self.pos,
            "ner": self.ner,
            "heads": self.heads,
            "deprels": self.deprels,
            "subj_start": self.subj.start,
            "subj_end": self.subj.end,
            "obj_start": self.obj.start,
            "obj_end": self.obj.end,
            "subj_type": self.subj_type,
            "obj_type": self.obj_type,
            "relation": self.relation,
        })
    }
}

/// Entity masking applied before indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Entity tokens become `SUBJ-<TYPE>` / `OBJ-<TYPE>`.
    #[default]
    Typed,
    /// Entity tokens become the unknown-word token.
    Unk,
    None,
}

impl FromStr for MaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "typed" => Ok(MaskMode::Typed),
            "unk" => Ok(MaskMode::Unk),
            "none" => Ok(MaskMode::None),
            _ => Err(format!("unknown mask mode {s:?}: expected typed, unk or none")),
        }
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Typed => "typed",
            MaskMode::Unk => "unk",
            MaskMode::None => "none",
        })
    }
}

pub fn subj_mask_token(entity_type: &str) -> String {
    format!("SUBJ-{entity_type}")
}

pub fn obj_mask_token(entity_type: &str) -> String {
    format!("OBJ-{entity_type}")
}

pub fn mask_entities(ex: &Example, mode: MaskMode) -> Example {
    let mut out = ex.clone();
    let (subj, obj) = match mode {
        MaskMode::None => return out,
        MaskMode::Typed => (subj_mask_token(&ex.subj_type), obj_mask_token(&ex.obj_type)),
        MaskMode::Unk => (UNK_TOKEN.to_string(), UNK_TOKEN.to_string()),
    };
    for i in ex.subj.tokens() {
        out.tokens[i] = subj.clone();
    }
    for i in ex.obj.tokens() {
        out.tokens[i] = obj.clone();
    }
    out
}

/// Input formats accepted by [`load_examples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    /// CoNLL-U carries no relation annotation; one pair of spans is applied
    /// to every sentence.
    Conllu { subj: Span, obj: Span },
}

pub fn load_examples(path: &Path, format: DatasetFormat) -> Result<Vec<Example>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    match format {
        DatasetFormat::Jsonl => parse_jsonl(&text),
        DatasetFormat::Conllu { subj, obj } => super::conllu::parse_conllu(&text, subj, obj),
    }
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex = parse_record(line, i + 1)?;
        ex.validate()?;
        out.push(ex);
    }
    Ok(out)
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, names: &[&str], line: usize) -> Result<T, DataError> {
    let (name, value) = names
        .iter()
        .find_map(|n| obj.get(*n).map(|v| (*n, v)))
        .ok_or_else(|| DataError::Parse {
            line,
            field: names[0].to_string(),
            message: "missing field".into(),
        })?;
    serde_json::from_value(value.clone()).map_err(|e| DataError::Parse {
        line,
        field: name.to_string(),
        message: e.to_string(),
    })
}

// Accepts the field names used here and the ones of the public TACRED release.
fn parse_record(line: &str, lineno: usize) -> Result<Example, DataError> {
    let value: Value = serde_json::from_str(line).map_err(|e| DataError::Parse {
        line: lineno,
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| DataError::Parse {
        line: lineno,
        field: "<record>".into(),
        message: "expected a JSON object".into(),
    })?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => {
            return Err(DataError::Parse { line: lineno, field: "id".into(), message: "expected string".into() })
        }
        None => format!("line{lineno}"),
    };
    let tokens: Vec<String> = field(obj, &["tokens", "token"], lineno)?;
    let n = tokens.len();
    let tags = |names: &[&str], fill: &str| -> Result<Vec<String>, DataError> {
        if names.iter().any(|k| obj.contains_key(*k)) {
            field(obj, names, lineno)
        } else {
            Ok(vec![fill.to_string(); n])
        }
    };
    Ok(Example {
        id,
        pos: tags(&["pos", "stanford_pos"], "X")?,
        ner: tags(&["ner", "stanford_ner"], "O")?,
        heads: field(obj, &["heads", "stanford_head"], lineno)?,
        deprels: tags(&["deprels", "stanford_deprel"], "dep")?,
        subj: Span::new(field(obj, &["subj_start"], lineno)?, field(obj, &["subj_end"], lineno)?),
        obj: Span::new(field(obj, &["obj_start"], lineno)?, field(obj, &["obj_end"], lineno)?),
        subj_type: field(obj, &["subj_type"], lineno)?,
        obj_type: field(obj, &["obj_type"], lineno)?,
        relation: if obj.contains_key("relation") { field(obj, &["relation"], lineno)? } else { String::new() },
        tokens,
    })
}
