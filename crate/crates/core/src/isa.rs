//! Instruction set: SUBLEQ plus a small arithmetic and call extension.
//!
//! Every instruction is four words: opcode, `a`, `b`, `c`. Direct operands
//! address static memory relative to the frame pointer; jump targets are
//! relative to the code base of the running skill.

use crate::state::{word_to_index, Word, INSTRUCTION_WORDS};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    Halt = 0,
    Subleq = 1,
    Add = 2,
    Mul = 3,
    Mov = 4,
    Movi = 5,
    Jlez = 6,
    Loadi = 7,
    Storei = 8,
    Call = 9,
    Ret = 10,
}

impl Opcode {
    pub const ALL: [Opcode; 11] = [
        Opcode::Halt,
        Opcode::Subleq,
        Opcode::Add,
        Opcode::Mul,
        Opcode::Mov,
        Opcode::Movi,
        Opcode::Jlez,
        Opcode::Loadi,
        Opcode::Storei,
        Opcode::Call,
        Opcode::Ret,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Halt => "HALT",
            Opcode::Subleq => "SUBLEQ",
            Opcode::Add => "ADD",
            Opcode::Mul => "MUL",
            Opcode::Mov => "MOV",
            Opcode::Movi => "MOVI",
            Opcode::Jlez => "JLEZ",
            Opcode::Loadi => "LOADI",
            Opcode::Storei => "STOREI",
            Opcode::Call => "CALL",
            Opcode::Ret => "RET",
        }
    }

    pub fn from_mnemonic(text: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.mnemonic().eq_ignore_ascii_case(text))
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("unknown opcode {0}")]
    UnknownOpcode(Word),
    #[error("opcode word {0} is not an integer")]
    NonIntegerOpcode(Word),
    #[error("instruction needs 4 words, got {0}")]
    Truncated(usize),
    #[error("program length {0} is not a multiple of 4")]
    MalformedLength(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub a: Word,
    pub b: Word,
    pub c: Word,
}

impl Instruction {
    pub const fn new(opcode: Opcode, a: Word, b: Word, c: Word) -> Self {
        Self { opcode, a, b, c }
    }

    pub fn encode(&self) -> [Word; INSTRUCTION_WORDS] {
        [self.opcode as u8 as Word, self.a, self.b, self.c]
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.opcode.mnemonic(),
            self.a,
            self.b,
            self.c
        )
    }
}

pub fn decode(words: &[Word]) -> Result<Instruction, DecodeError> {
    if words.len() < INSTRUCTION_WORDS {
        return Err(DecodeError::Truncated(words.len()));
    }
    let op = words[0];
    if !op.is_finite() || (op - op.round()).abs() > crate::state::INTEGER_TOLERANCE {
        return Err(DecodeError::NonIntegerOpcode(op));
    }
    let opcode = word_to_index(op)
        .and_then(Opcode::from_code)
        .ok_or(DecodeError::UnknownOpcode(op))?;
    Ok(Instruction {
        opcode,
        a: words[1],
        b: words[2],
        c: words[3],
    })
}

pub fn decode_program(words: &[Word]) -> Result<Vec<Instruction>, DecodeError> {
    if !words.len().is_multiple_of(INSTRUCTION_WORDS) {
        return Err(DecodeError::MalformedLength(words.len()));
    }
    words.chunks_exact(INSTRUCTION_WORDS).map(decode).collect()
}

pub fn encode_program(program: &[Instruction]) -> Vec<Word> {
    program.iter().flat_map(Instruction::encode).collect()
}
