//! Reader and writer for the UEA/sktime `.ts` text format.

use std::fmt::Write as _;

use crate::{Error, Result};

/// One case: `dims[c]` is channel `c`'s values.
#[derive(Clone, Debug, PartialEq)]
pub struct TsCase {
    pub dims: Vec<Vec<f64>>,
    pub label: Option<String>,
}

impl TsCase {
    pub fn length(&self) -> usize {
        self.dims.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TsFile {
    pub problem_name: String,
    /// Header lines other than `@problemName`, `@classLabel` and `@data`,
    /// kept verbatim (without the `@`).
    pub headers: Vec<String>,
    pub class_labels: Option<Vec<String>>,
    pub cases: Vec<TsCase>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    let t = tok.trim();
    if t == "?" || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid value {t:?}")))
}

/// Parses `.ts` text. Missing values (`?`, `NaN`) at the end of a channel
/// are dropped, so unequal-length padding disappears.
pub fn parse_ts(text: &str) -> Result<TsFile> {
    let mut file = TsFile::default();
    let mut in_data = false;
    let mut channels: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            let Some(header) = line.strip_prefix('@') else {
                return Err(parse_err(line_no, "expected a header line before @data"));
            };
            let mut parts = header.split_whitespace();
            let key = parts.next().unwrap_or("").to_ascii_lowercase();
            match key.as_str() {
                "problemname" => {
                    file.problem_name = parts.collect::<Vec<_>>().join(" ");
                }
                "classlabel" => match parts.next().map(str::to_ascii_lowercase).as_deref() {
                    Some("true") => {
                        let labels: Vec<String> = parts.map(str::to_string).collect();
                        if labels.is_empty() {
                            return Err(parse_err(line_no, "@classLabel true without labels"));
                        }
                        file.class_labels = Some(labels);
                    }
                    Some("false") => file.class_labels = None,
                    _ => return Err(parse_err(line_no, "malformed @classLabel header")),
                },
                "data" => in_data = true,
                "" => return Err(parse_err(line_no, "empty header")),
                _ => file.headers.push(header.to_string()),
            }
            continue;
        }
        let mut fields: Vec<&str> = line.split(':').collect();
        let label = if let Some(labels) = &file.class_labels {
            if fields.len() < 2 {
                return Err(parse_err(line_no, "case has no class label"));
            }
            let l = fields.pop().expect("nonempty").trim().to_string();
            if !labels.contains(&l) {
                return Err(parse_err(line_no, format!("class label {l:?} not declared")));
            }
            Some(l)
        } else {
            None
        };
        match channels {
            None => channels = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(parse_err(
                    line_no,
                    format!("case has {} channels, earlier cases have {c}", fields.len()),
                ))
            }
            _ => {}
        }
        let mut dims = Vec::with_capacity(fields.len());
        for f in fields {
            let mut values = f
                .split(',')
                .map(|t| parse_value(t, line_no))
                .collect::<Result<Vec<_>>>()?;
            while values.last().is_some_and(|v| v.is_nan()) {
                values.pop();
            }
            if values.iter().any(|v| v.is_nan()) {
                return Err(parse_err(line_no, "missing value inside a series"));
            }
            dims.push(values);
        }
        if dims.iter().any(|d| d.len() != dims[0].len()) {
            return Err(parse_err(line_no, "channels of one case differ in length"));
        }
        if dims[0].is_empty() {
            return Err(parse_err(line_no, "empty series"));
        }
        file.cases.push(TsCase { dims, label });
    }
    if !in_data {
        return Err(parse_err(text.lines().count().max(1), "missing @data section"));
    }
    Ok(file)
}

/// Serializes back to `.ts` text. Values use the shortest representation
/// that parses back to the same float.
pub fn write_ts(file: &TsFile) -> String {
    let mut out = String::new();
    if !file.problem_name.is_empty() {
        let _ = writeln!(out, "@problemName {}", file.problem_name);
    }
    for h in &file.headers {
        let _ = writeln!(out, "@{h}");
    }
    match &file.class_labels {
        Some(labels) => {
            let _ = writeln!(out, "@classLabel true {}", labels.join(" "));
        }
        None => out.push_str("@classLabel false\n"),
    }
    out.push_str("@data\n");
    for case in &file.cases {
        let dims: Vec<String> = case
            .dims
            .iter()
            .map(|d| d.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","))
            .collect();
        out.push_str(&dims.join(":"));
        if let Some(l) = &case.label {
            out.push(':');
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}
