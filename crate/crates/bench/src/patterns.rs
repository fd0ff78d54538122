//! Text files holding a set of labelled pattern pairs.
//!
//! ```text
//! window 100
//! pattern 0
//! input
//! 0: 3.500 41.000
//! 1: 12.000
//! target
//! 0: 20.500 70.000
//! pattern 1
//! ...
//! ```
//!
//! Trains use the `index: t1 t2 ...` line format; `#` starts a comment.

use std::path::Path;

use snn_resume::spike::{format_trains, parse_trains};
use snn_resume::PatternPair;

use crate::error::BenchError;

pub fn format_patterns(patterns: &[PatternPair<f64>], window: f64) -> String {
    let mut text = format!("window {window}\n");
    for p in patterns {
        text.push_str(&format!("pattern {}\ninput\n", p.label));
        text.push_str(&format_trains(&p.inputs));
        text.push_str("target\n");
        text.push_str(&format_trains(&p.targets));
    }
    text
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Input,
    Target,
}

struct Block {
    label: usize,
    input: String,
    target: String,
}

pub fn parse_patterns(text: &str) -> Result<(Vec<PatternPair<f64>>, f64), BenchError> {
    let err = |line: usize, message: String| BenchError::Parse { line, message };
    let mut window = None;
    let mut blocks: Vec<(usize, Block)> = Vec::new();
    let mut section = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("window ") {
            window = Some(rest.trim().parse::<f64>().map_err(|_| err(line_no, format!("bad window `{rest}`")))?);
        } else if let Some(rest) = line.strip_prefix("pattern ") {
            let label = rest.trim().parse().map_err(|_| err(line_no, format!("bad label `{rest}`")))?;
            blocks.push((line_no, Block { label, input: String::new(), target: String::new() }));
            section = None;
        } else if line == "input" || line == "target" {
            if blocks.is_empty() {
                return Err(err(line_no, format!("`{line}` before any `pattern` line")));
            }
            section = Some(if line == "input" { Section::Input } else { Section::Target });
        } else {
            let (Some((_, block)), Some(s)) = (blocks.last_mut(), section) else {
                return Err(err(line_no, format!("unexpected line `{line}`")));
            };
            let buf = if s == Section::Input { &mut block.input } else { &mut block.target };
            buf.push_str(line);
            buf.push('\n');
        }
    }
    let window = window.ok_or_else(|| err(1, "missing `window` line".into()))?;
    let patterns = blocks
        .into_iter()
        .map(|(line_no, b)| {
            let inputs = parse_trains(&b.input, window).map_err(|e| err(line_no, format!("pattern inputs: {e}")))?;
            let targets = parse_trains(&b.target, window).map_err(|e| err(line_no, format!("pattern targets: {e}")))?;
            if inputs.is_empty() || targets.is_empty() {
                return Err(err(line_no, "pattern needs input and target trains".into()));
            }
            Ok(PatternPair::new(inputs, targets, b.label))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if patterns.is_empty() {
        return Err(err(1, "no patterns".into()));
    }
    Ok((patterns, window))
}

pub fn load_patterns(path: &Path) -> Result<(Vec<PatternPair<f64>>, f64), BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_patterns(&text)
}

pub fn save_patterns(path: &Path, patterns: &[PatternPair<f64>], window: f64) -> Result<(), BenchError> {
    std::fs::write(path, format_patterns(patterns, window)).map_err(|e| BenchError::io(path, e))
}
