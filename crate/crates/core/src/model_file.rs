//! Line-oriented text format for models, and symbol/character mapping for
//! sequence files.
//!
//! ```text
//! # comment
//! hmm m=2 alphabet=01
//! initial 0.5 0.5
//! trans 0.9 0.1
//! trans 0.1 0.9
//! emit 0.8 0.2
//! emit 0.2 0.8
//! labels plus minus     # optional state names
//! ```
//!
//! Probabilities are linear-space and validated on load. Sequence files are
//! raw symbol characters with all whitespace ignored; lines starting with
//! `>` are headers and are skipped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hmm::Hmm;
use crate::Symbol;

/// A model plus its on-disk alphabet and optional state labels.
#[derive(Clone, Debug)]
pub struct Model {
    pub hmm: Hmm,
    pub alphabet: Vec<char>,
    pub labels: Option<Vec<String>>,
}

impl Model {
    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        Model::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Model> {
        let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                None
            } else {
                Some((i + 1, line))
            }
        });

        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "missing 'hmm' header line".into(),
            })?;
        let mut m = None;
        let mut alphabet: Option<Vec<char>> = None;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("hmm") {
            return Err(Error::Parse {
                line: line_no,
                msg: "model file must start with an 'hmm' header".into(),
            });
        }
        for field in fields {
            match field.split_once('=') {
                Some(("m", v)) => {
                    m = Some(v.parse::<usize>().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad state count '{v}'"),
                    })?)
                }
                Some(("alphabet", v)) => alphabet = Some(v.chars().collect()),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unrecognized header field '{field}'"),
                    })
                }
            }
        }
        let m = m.ok_or(Error::Parse {
            line: line_no,
            msg: "header missing m=<states>".into(),
        })?;
        let alphabet = alphabet.ok_or(Error::Parse {
            line: line_no,
            msg: "header missing alphabet=<characters>".into(),
        })?;
        {
            let mut seen = alphabet.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != alphabet.len() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "alphabet characters must be distinct".into(),
                });
            }
        }

        let mut parse_row = |expected_tag: &str, count: usize| -> Result<Vec<f64>> {
            let (line_no, line) = lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected '{expected_tag}' line"),
            })?;
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap_or("");
            if tag != expected_tag {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected '{expected_tag}' line, found '{tag}'"),
                });
            }
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad probability '{f}'"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != count {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "'{expected_tag}' line has {} values, expected {count}",
                        values.len()
                    ),
                });
            }
            Ok(values)
        };

        let initial = parse_row("initial", m)?;
        let mut transitions = Vec::with_capacity(m * m);
        for _ in 0..m {
            transitions.extend(parse_row("trans", m)?);
        }
        let mut emissions = Vec::with_capacity(m * alphabet.len());
        for _ in 0..m {
            emissions.extend(parse_row("emit", alphabet.len())?);
        }

        let mut labels = None;
        if let Some((line_no, line)) = lines.next() {
            let mut fields = line.split_whitespace();
            if fields.next() != Some("labels") {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "unexpected content after emission rows (only 'labels' allowed)".into(),
                });
            }
            let names: Vec<String> = fields.map(str::to_owned).collect();
            if names.len() != m {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("'labels' line has {} names, expected {m}", names.len()),
                });
            }
            labels = Some(names);
            if let Some((line_no, _)) = lines.next() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "unexpected trailing content".into(),
                });
            }
        }

        let hmm = Hmm::new(m, alphabet.len(), &initial, &transitions, &emissions)?;
        Ok(Model {
            hmm,
            alphabet,
            labels,
        })
    }

    /// Maps sequence-file text to symbol codes. Whitespace is ignored and
    /// `>` header lines are skipped; any other character must belong to the
    /// model alphabet.
    pub fn encode_sequence(&self, text: &str) -> Result<Vec<Symbol>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.starts_with('>') {
                continue;
            }
            for c in raw.chars() {
                if c.is_whitespace() {
                    continue;
                }
                match self.alphabet.iter().position(|&a| a == c) {
                    Some(idx) => out.push(idx as Symbol),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!(
                                "symbol '{c}' not in model alphabet (sequence position {})",
                                out.len() + 1
                            ),
                        })
                    }
                }
            }
        }
        Ok(out)
    }

    /// Renders symbols as alphabet characters, newline-wrapped at 80.
    pub fn format_sequence(&self, seq: &[Symbol]) -> String {
        let mut out = String::with_capacity(seq.len() + seq.len() / 80 + 1);
        for (i, &s) in seq.iter().enumerate() {
            if i > 0 && i % 80 == 0 {
                out.push('\n');
            }
            out.push(self.alphabet[s as usize]);
        }
        out.push('\n');
        out
    }

    /// Label for a state: its declared name, or the index as text.
    pub fn state_name(&self, state: usize) -> String {
        match &self.labels {
            Some(names) => names[state].clone(),
            None => state.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYM: &str = "\
# symmetric two-state test model
hmm m=2 alphabet=01
initial 0.5 0.5
trans 0.9 0.1
trans 0.1 0.9
emit 0.8 0.2   # state 0 favors '0'
emit 0.2 0.8
";

    #[test]
    fn parses_valid_model() {
        let model = Model::parse(SYM).unwrap();
        assert_eq!(model.hmm.num_states(), 2);
        assert_eq!(model.alphabet, vec!['0', '1']);
        assert!(model.labels.is_none());
        assert!((model.hmm.trans(0, 0).prob() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn parses_labels() {
        let text = format!("{SYM}labels plus minus\n");
        let model = Model::parse(&text).unwrap();
        assert_eq!(model.labels.as_deref().unwrap(), ["plus", "minus"]);
        assert_eq!(model.state_name(1), "minus");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Model::parse("").is_err());
        assert!(Model::parse("hmm m=2\ninitial 0.5 0.5\n").is_err());
        let bad_sum = SYM.replace("trans 0.9 0.1", "trans 0.8 0.1");
        assert!(matches!(
            Model::parse(&bad_sum),
            Err(Error::RowSum { .. })
        ));
        let short_row = SYM.replace("emit 0.2 0.8", "emit 0.2");
        assert!(matches!(Model::parse(&short_row), Err(Error::Parse { .. })));
        let dup = SYM.replace("alphabet=01", "alphabet=00");
        assert!(Model::parse(&dup).is_err());
    }

    #[test]
    fn sequence_round_trip_skips_headers_and_whitespace() {
        let model = Model::parse(SYM).unwrap();
        let seq = model
            .encode_sequence(">header line\n0101 1\n 0 1\n")
            .unwrap();
        assert_eq!(seq, vec![0, 1, 0, 1, 1, 0, 1]);
        let text = model.format_sequence(&seq);
        assert_eq!(model.encode_sequence(&text).unwrap(), seq);
    }

    #[test]
    fn sequence_reports_offending_symbol() {
        let model = Model::parse(SYM).unwrap();
        let err = model.encode_sequence("0102").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("position 4"), "{msg}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn format_wraps_at_80() {
        let model = Model::parse(SYM).unwrap();
        let seq = vec![0u8; 200];
        let text = model.format_sequence(&seq);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() <= 80));
    }
}
