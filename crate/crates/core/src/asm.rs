//! Two-pass assembler and canonical disassembler for `.svm` sources.
//!
//! Syntax, one instruction per line:
//!
//! ```text
//! ; comment
//! loop:  JLEZ 26 0 done   ; labels resolve to instruction indices
//!        ADD 27 30 27
//! done:  RET
//! ```
//!
//! `HALT` and `RET` may omit their operands; everything else takes exactly three.

use crate::isa::{decode_program, DecodeError, Instruction, Opcode};
use crate::state::Word;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("`{mnemonic}` takes 3 operands, found {found}")]
    WrongArity { mnemonic: String, found: usize },
    #[error("invalid operand `{0}`")]
    InvalidOperand(String),
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

enum Operand<'a> {
    Literal(Word),
    Label(&'a str),
}

struct Line<'a> {
    number: usize,
    opcode: Opcode,
    operands: Vec<Operand<'a>>,
}

pub fn assemble(text: &str) -> Result<Vec<Word>, AsmError> {
    let mut labels: HashMap<&str, usize> = HashMap::new();
    let mut lines = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let err = |kind| AsmError { line: number, kind };
        let mut rest = raw.split(';').next().unwrap_or("").trim();
        while let Some((head, tail)) = rest.split_once(':') {
            let label = head.trim();
            if !is_identifier(label) {
                return Err(err(AsmErrorKind::InvalidLabel(label.to_string())));
            }
            if labels.insert(label, lines.len()).is_some() {
                return Err(err(AsmErrorKind::DuplicateLabel(label.to_string())));
            }
            rest = tail.trim();
        }
        if rest.is_empty() {
            continue;
        }
        let mut tokens = rest.split_whitespace();
        let mnemonic = tokens.next().unwrap();
        let opcode = Opcode::from_mnemonic(mnemonic)
            .ok_or_else(|| err(AsmErrorKind::UnknownMnemonic(mnemonic.to_string())))?;
        let operands = tokens
            .map(|tok| {
                if is_decimal(tok) {
                    tok.parse().map(Operand::Literal).map_err(|_| ())
                } else if is_identifier(tok) {
                    Ok(Operand::Label(tok))
                } else {
                    Err(())
                }
                .map_err(|_| err(AsmErrorKind::InvalidOperand(tok.to_string())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let optional = matches!(opcode, Opcode::Halt | Opcode::Ret);
        if operands.len() != 3 && !(optional && operands.is_empty()) {
            return Err(err(AsmErrorKind::WrongArity {
                mnemonic: mnemonic.to_string(),
                found: operands.len(),
            }));
        }
        lines.push(Line {
            number,
            opcode,
            operands,
        });
    }

    let mut words = Vec::with_capacity(lines.len() * 4);
    for line in &lines {
        let mut ops = [0.0; 3];
        for (slot, operand) in ops.iter_mut().zip(&line.operands) {
            *slot = match operand {
                Operand::Literal(v) => *v,
                Operand::Label(name) => *labels.get(name).ok_or_else(|| AsmError {
                    line: line.number,
                    kind: AsmErrorKind::UnresolvedLabel(name.to_string()),
                })? as Word,
            };
        }
        words.extend(Instruction::new(line.opcode, ops[0], ops[1], ops[2]).encode());
    }
    Ok(words)
}

/// Canonical text: one `MNEMONIC a b c` per line, no trailing newline.
pub fn disassemble(words: &[Word]) -> Result<String, DecodeError> {
    Ok(decode_program(words)?
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("\n"))
}
