use std::collections::BTreeSet;
use std::fmt::{Display, Write};

use clap::ValueEnum;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Structured,
}

/// Collects report lines in either format. Structured records are
/// `kind key=value ...`; values containing spaces are double-quoted.
pub struct Emitter {
    pub format: Format,
    pub text: String,
}

impl Emitter {
    pub fn new(format: Format) -> Self {
        Emitter {
            format,
            text: String::new(),
        }
    }

    /// Emits `human` in text mode and the record in structured mode.
    pub fn line(&mut self, human: impl Display, kind: &str, fields: &[(&str, String)]) {
        match self.format {
            Format::Text => writeln!(self.text, "{human}").unwrap(),
            Format::Structured => {
                self.text.push_str(kind);
                for (key, value) in fields {
                    write!(self.text, " {key}={}", quote(value)).unwrap();
                }
                self.text.push('\n');
            }
        }
    }

    /// Raw text, identical in both formats.
    pub fn raw(&mut self, text: &str) {
        self.text.push_str(text);
    }
}

fn quote(value: &str) -> String {
    if value.is_empty() || value.contains(char::is_whitespace) || value.contains('"') {
        format!("\"{}\"", value.replace('\\', "\\\\").replace('"', "\\\""))
    } else {
        value.to_string()
    }
}

/// `{a,b}`, with no spaces so it survives as a single field.
pub fn set<V: Display>(values: &BTreeSet<V>) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// Like [`set`], but distinguishes equal tokens from different writers.
pub fn values<V: mvrr_core::sim::SimValue>(values: &BTreeSet<V>) -> String {
    let items: Vec<String> = values.iter().map(|v| v.describe()).collect();
    format!("{{{}}}", items.join(","))
}
