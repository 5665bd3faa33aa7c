//! The state: one flat word array that is both the input and the output of
//! every execution.
//!
//! Regions are laid out in a fixed order:
//!
//! | region        | words                                             |
//! |---------------|---------------------------------------------------|
//! | registers     | `SYSTEM_REGISTERS + register_count`               |
//! | stack         | `stack_capacity`                                  |
//! | descriptors   | `1 + 2 * descriptor_capacity` (count, then pairs) |
//! | skill blocks  | `2 + HEADER_WORDS * skill_block_capacity`         |
//! | code          | `code_capacity`                                   |
//! | static memory | `static_memory_capacity`                          |

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// A single state cell.
pub type Word = f64;

/// Encoded marker for a slot that has no descriptor bound to it.
pub const UNBOUND: Word = -1.0;

/// Largest state accepted by [`State::new`] unless a caller overrides it.
pub const DEFAULT_MAX_WORDS: usize = 1 << 20;

/// Tolerance of the integer-exactness check for address-like words.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

/// Words per encoded instruction.
pub const INSTRUCTION_WORDS: usize = 4;

/// Register indices inside the register region.
pub mod reg {
    /// Line register: index of the next instruction to execute.
    pub const L: usize = 0;
    /// Stack-top index (number of occupied stack words).
    pub const SP: usize = 1;
    /// Halt flag.
    pub const HALT: usize = 2;
    /// Code base: entry line of the running skill; jump targets are relative to it.
    pub const CB: usize = 3;
    /// Frame pointer: static-memory base of direct operands.
    pub const FP: usize = 4;
}

/// Number of fixed registers preceding the general-purpose ones.
pub const SYSTEM_REGISTERS: usize = 5;

/// Maximum number of slots (inputs + outputs) a skill may declare.
pub const MAX_SLOTS: usize = 8;
/// Maximum number of frame-local buffers a skill may declare.
pub const MAX_LOCALS: usize = 4;

/// Offsets of the fields of one encoded skill header.
pub mod header {
    use super::{MAX_LOCALS, MAX_SLOTS};
    pub const ENTRY: usize = 0;
    pub const CODE_LEN: usize = 1;
    pub const N_INPUTS: usize = 2;
    pub const N_OUTPUTS: usize = 3;
    pub const HAS_WEIGHTS: usize = 4;
    pub const WEIGHT_DESCRIPTOR: usize = 5;
    pub const MODE: usize = 6;
    pub const SCRATCH: usize = 7;
    pub const N_LOCALS: usize = 8;
    pub const SLOTS: usize = 9;
    pub const SLOT_SHAPES: usize = SLOTS + MAX_SLOTS;
    pub const LOCAL_SHAPES: usize = SLOT_SHAPES + MAX_SLOTS;
    pub const WORDS: usize = LOCAL_SHAPES + MAX_LOCALS;
}

/// Words occupied by one skill header.
pub const HEADER_WORDS: usize = header::WORDS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("layout capacity `{0}` must be at least 1")]
    ZeroCapacity(&'static str),
    #[error("state of {total} words exceeds the maximum of {max}")]
    CapacityOverflow { total: usize, max: usize },
    #[error("out of static memory: need {needed} words, {free} free")]
    OutOfMemory { needed: usize, free: usize },
    #[error("descriptor table full ({0} entries)")]
    DescriptorTableFull(usize),
    #[error("invalid descriptor index {index} (count {count})")]
    InvalidDescriptor { index: usize, count: usize },
    #[error("skill table full ({0} entries)")]
    SkillTableFull(usize),
    #[error("invalid skill index {index} (count {count})")]
    InvalidSkill { index: usize, count: usize },
    #[error("code region full: need {needed} words, {free} free")]
    CodeRegionFull { needed: usize, free: usize },
    #[error("code length {0} is not a multiple of 4")]
    MalformedCode(usize),
    #[error("layout mismatch")]
    LayoutMismatch,
    #[error("word {index} = {value} is not an exact non-negative integer")]
    NotAnIndex { index: usize, value: Word },
    #[error("skill declares {0} slots, at most {MAX_SLOTS} supported")]
    TooManySlots(usize),
    #[error("skill declares {0} locals, at most {MAX_LOCALS} supported")]
    TooManyLocals(usize),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T, E = StateError> = std::result::Result<T, E>;

/// Returns `value` as an index if it is an exact non-negative integer.
pub fn word_to_index(value: Word) -> Option<usize> {
    if !value.is_finite() || value < -INTEGER_TOLERANCE {
        return None;
    }
    let rounded = value.round();
    if (value - rounded).abs() > INTEGER_TOLERANCE {
        return None;
    }
    Some(rounded as usize)
}

/// Region capacities. Immutable once a state exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionLayout {
    pub register_count: usize,
    pub stack_capacity: usize,
    pub descriptor_capacity: usize,
    pub skill_block_capacity: usize,
    pub code_capacity: usize,
    pub static_memory_capacity: usize,
}

impl Default for RegionLayout {
    fn default() -> Self {
        Self {
            register_count: 8,
            stack_capacity: 64,
            descriptor_capacity: 32,
            skill_block_capacity: 32,
            code_capacity: 8192,
            static_memory_capacity: 8192,
        }
    }
}

impl RegionLayout {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("register_count", self.register_count),
            ("stack_capacity", self.stack_capacity),
            ("descriptor_capacity", self.descriptor_capacity),
            ("skill_block_capacity", self.skill_block_capacity),
            ("code_capacity", self.code_capacity),
            ("static_memory_capacity", self.static_memory_capacity),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(StateError::ZeroCapacity(name));
            }
        }
        Ok(())
    }

    pub fn registers_start(&self) -> usize {
        0
    }
    pub fn stack_start(&self) -> usize {
        SYSTEM_REGISTERS + self.register_count
    }
    pub fn descriptors_start(&self) -> usize {
        self.stack_start() + self.stack_capacity
    }
    pub fn skills_start(&self) -> usize {
        self.descriptors_start() + 1 + 2 * self.descriptor_capacity
    }
    pub fn code_start(&self) -> usize {
        self.skills_start() + 2 + HEADER_WORDS * self.skill_block_capacity
    }
    pub fn memory_start(&self) -> usize {
        self.code_start() + self.code_capacity
    }

    /// Total word count, saturating so absurd layouts still fail the bound check.
    pub fn total_len(&self) -> usize {
        [
            SYSTEM_REGISTERS,
            self.register_count,
            self.stack_capacity,
            1,
            self.descriptor_capacity.saturating_mul(2),
            2,
            self.skill_block_capacity.saturating_mul(HEADER_WORDS),
            self.code_capacity,
            self.static_memory_capacity,
        ]
        .iter()
        .fold(0usize, |acc, x| acc.saturating_add(*x))
    }

    /// Number of instruction lines the code region can hold.
    pub fn code_lines(&self) -> usize {
        self.code_capacity / INSTRUCTION_WORDS
    }

    /// Which region a word index falls in.
    pub fn region_of(&self, index: usize) -> Region {
        if index < self.stack_start() {
            Region::Registers
        } else if index < self.descriptors_start() {
            Region::Stack
        } else if index < self.skills_start() {
            Region::Descriptors
        } else if index < self.code_start() {
            Region::SkillBlocks
        } else if index < self.memory_start() {
            Region::Code
        } else {
            Region::StaticMemory
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Registers,
    Stack,
    Descriptors,
    SkillBlocks,
    Code,
    StaticMemory,
}

/// An `(address, length)` reference into static memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataDescriptor {
    pub address: usize,
    pub length: usize,
}

/// Declared length of a skill slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotShape {
    /// Exactly this many words.
    Fixed(usize),
    /// Runtime length; every slot sharing the same dimension id must agree.
    Dim(usize),
}

impl SlotShape {
    fn encode(self) -> Word {
        match self {
            SlotShape::Fixed(n) => n as Word,
            SlotShape::Dim(g) => -(g as Word) - 1.0,
        }
    }

    fn decode(word: Word) -> Self {
        if word < 0.0 {
            SlotShape::Dim((-word - 1.0).round() as usize)
        } else {
            SlotShape::Fixed(word.round() as usize)
        }
    }
}

/// Declared length of a frame-local buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalShape {
    Fixed(usize),
    /// Same length as whatever is bound to this slot at call time.
    LikeSlot(usize),
}

impl LocalShape {
    fn encode(self) -> Word {
        match self {
            LocalShape::Fixed(n) => n as Word,
            LocalShape::LikeSlot(s) => -(s as Word) - 1.0,
        }
    }

    fn decode(word: Word) -> Self {
        if word < 0.0 {
            LocalShape::LikeSlot((-word - 1.0).round() as usize)
        } else {
            LocalShape::Fixed(word.round() as usize)
        }
    }
}

/// Host-side view of one skill block header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillBlockHeader {
    /// Entry line; filled in by [`State::register_skill_block`].
    pub entry: usize,
    pub code_len: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub weight_descriptor: Option<usize>,
    /// `true` selects the output path, `false` the weight-Jacobian path.
    pub output_mode: bool,
    pub scratch_words: usize,
    pub slot_shapes: Vec<SlotShape>,
    pub local_shapes: Vec<LocalShape>,
    /// Bound descriptor per slot; `None` is the UNBOUND sentinel.
    pub slots: Vec<Option<usize>>,
}

impl SkillBlockHeader {
    /// A header with every slot unbound.
    pub fn new(inputs: &[SlotShape], outputs: &[SlotShape]) -> Self {
        let slot_shapes: Vec<SlotShape> = inputs.iter().chain(outputs).copied().collect();
        Self {
            entry: 0,
            code_len: 0,
            n_inputs: inputs.len(),
            n_outputs: outputs.len(),
            weight_descriptor: None,
            output_mode: true,
            scratch_words: 16,
            slots: vec![None; slot_shapes.len()],
            slot_shapes,
            local_shapes: Vec::new(),
        }
    }

    pub fn n_slots(&self) -> usize {
        self.n_inputs + self.n_outputs
    }

    pub fn has_weights(&self) -> bool {
        self.weight_descriptor.is_some()
    }
}

/// The state vector together with its layout.
#[derive(Clone, PartialEq)]
pub struct State {
    layout: RegionLayout,
    words: Vec<Word>,
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("State")
            .field("layout", &self.layout)
            .field("registers", &&self.words[..self.layout.stack_start()])
            .field("descriptors", &self.descriptor_count())
            .field("skills", &self.skill_count())
            .finish_non_exhaustive()
    }
}

impl State {
    pub fn new(layout: RegionLayout) -> Result<Self> {
        Self::with_max_words(layout, DEFAULT_MAX_WORDS)
    }

    pub fn with_max_words(layout: RegionLayout, max_words: usize) -> Result<Self> {
        layout.validate()?;
        let total = layout.total_len();
        if total > max_words {
            return Err(StateError::CapacityOverflow {
                total,
                max: max_words,
            });
        }
        Ok(Self {
            layout,
            words: vec![0.0; total],
        })
    }

    /// Rebuilds a state from raw words, e.g. when loading a snapshot.
    pub fn from_words(layout: RegionLayout, words: Vec<Word>) -> Result<Self> {
        layout.validate()?;
        if words.len() != layout.total_len() {
            return Err(StateError::Snapshot(format!(
                "expected {} words, found {}",
                layout.total_len(),
                words.len()
            )));
        }
        Ok(Self { layout, words })
    }

    pub fn layout(&self) -> &RegionLayout {
        &self.layout
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> Word {
        self.words[index]
    }

    /// Raw write. Module operations keep invariants; callers of this do not get that for free.
    pub fn set_word(&mut self, index: usize, value: Word) {
        self.words[index] = value;
    }

    pub fn register(&self, r: usize) -> Word {
        self.words[self.layout.registers_start() + r]
    }

    pub fn set_register(&mut self, r: usize, value: Word) {
        let at = self.layout.registers_start() + r;
        self.words[at] = value;
    }

    pub fn halted(&self) -> bool {
        self.register(reg::HALT) != 0.0
    }

    /// Index of the general-purpose register `n` within the state.
    pub fn general_register_index(&self, n: usize) -> usize {
        assert!(n < self.layout.register_count);
        SYSTEM_REGISTERS + n
    }

    pub fn index_word(&self, index: usize) -> Result<usize> {
        let value = self.words[index];
        word_to_index(value).ok_or(StateError::NotAnIndex { index, value })
    }

    // ---- static memory -------------------------------------------------

    pub fn memory(&self) -> &[Word] {
        &self.words[self.layout.memory_start()..]
    }

    pub fn memory_mut(&mut self) -> &mut [Word] {
        let start = self.layout.memory_start();
        &mut self.words[start..]
    }

    // ---- descriptor table ----------------------------------------------

    pub fn descriptor_count(&self) -> usize {
        self.index_word(self.layout.descriptors_start())
            .unwrap_or(0)
    }

    fn descriptor_cell(&self, index: usize) -> usize {
        self.layout.descriptors_start() + 1 + 2 * index
    }

    pub fn descriptor(&self, index: usize) -> Result<DataDescriptor> {
        let count = self.descriptor_count();
        if index >= count {
            return Err(StateError::InvalidDescriptor { index, count });
        }
        let cell = self.descriptor_cell(index);
        Ok(DataDescriptor {
            address: self.index_word(cell)?,
            length: self.index_word(cell + 1)?,
        })
    }

    pub fn descriptors(&self) -> Vec<DataDescriptor> {
        (0..self.descriptor_count())
            .filter_map(|i| self.descriptor(i).ok())
            .collect()
    }

    /// First static-memory address not covered by a descriptor.
    pub fn heap_end(&self) -> usize {
        self.descriptors()
            .iter()
            .map(|d| d.address + d.length)
            .max()
            .unwrap_or(0)
    }

    pub fn free_memory(&self) -> usize {
        self.layout.static_memory_capacity - self.heap_end()
    }

    /// Appends `values` to static memory and returns the new descriptor index.
    pub fn write_data(&mut self, values: &[Word]) -> Result<usize> {
        let count = self.descriptor_count();
        if count >= self.layout.descriptor_capacity {
            return Err(StateError::DescriptorTableFull(
                self.layout.descriptor_capacity,
            ));
        }
        let address = self.heap_end();
        let free = self.layout.static_memory_capacity - address;
        if values.len() > free {
            return Err(StateError::OutOfMemory {
                needed: values.len(),
                free,
            });
        }
        self.memory_mut()[address..address + values.len()].copy_from_slice(values);
        let cell = self.descriptor_cell(count);
        self.words[cell] = address as Word;
        self.words[cell + 1] = values.len() as Word;
        self.words[self.layout.descriptors_start()] = (count + 1) as Word;
        Ok(count)
    }

    pub fn read_region(&self, descriptor: usize) -> Result<Vec<Word>> {
        let d = self.descriptor(descriptor)?;
        Ok(self.memory()[d.address..d.address + d.length].to_vec())
    }

    /// Overwrites the words a descriptor refers to; lengths must match.
    pub fn write_region(&mut self, descriptor: usize, values: &[Word]) -> Result<()> {
        let d = self.descriptor(descriptor)?;
        if d.length != values.len() {
            return Err(StateError::OutOfMemory {
                needed: values.len(),
                free: d.length,
            });
        }
        self.memory_mut()[d.address..d.address + d.length].copy_from_slice(values);
        Ok(())
    }

    // ---- skill table -----------------------------------------------------

    pub fn skill_count(&self) -> usize {
        self.index_word(self.layout.skills_start()).unwrap_or(0)
    }

    /// Instruction lines of the code region in use.
    pub fn code_used(&self) -> usize {
        self.index_word(self.layout.skills_start() + 1).unwrap_or(0)
    }

    pub fn header_cell(&self, skill: usize) -> usize {
        self.layout.skills_start() + 2 + HEADER_WORDS * skill
    }

    fn check_skill(&self, skill: usize) -> Result<()> {
        let count = self.skill_count();
        if skill >= count {
            return Err(StateError::InvalidSkill {
                index: skill,
                count,
            });
        }
        Ok(())
    }

    pub fn skill_header(&self, skill: usize) -> Result<SkillBlockHeader> {
        self.check_skill(skill)?;
        let base = self.header_cell(skill);
        let w = |field: usize| self.words[base + field];
        let idx = |field: usize| self.index_word(base + field);
        let n_inputs = idx(header::N_INPUTS)?;
        let n_outputs = idx(header::N_OUTPUTS)?;
        let n_slots = n_inputs + n_outputs;
        let n_locals = idx(header::N_LOCALS)?;
        let weight_descriptor = if w(header::HAS_WEIGHTS) != 0.0 {
            Some(idx(header::WEIGHT_DESCRIPTOR)?)
        } else {
            None
        };
        let slots = (0..n_slots)
            .map(|k| {
                let v = w(header::SLOTS + k);
                if v == UNBOUND {
                    None
                } else {
                    word_to_index(v)
                }
            })
            .collect();
        Ok(SkillBlockHeader {
            entry: idx(header::ENTRY)?,
            code_len: idx(header::CODE_LEN)?,
            n_inputs,
            n_outputs,
            weight_descriptor,
            output_mode: w(header::MODE) != 0.0,
            scratch_words: idx(header::SCRATCH)?,
            slot_shapes: (0..n_slots)
                .map(|k| SlotShape::decode(w(header::SLOT_SHAPES + k)))
                .collect(),
            local_shapes: (0..n_locals)
                .map(|k| LocalShape::decode(w(header::LOCAL_SHAPES + k)))
                .collect(),
            slots,
        })
    }

    fn write_header(&mut self, skill: usize, h: &SkillBlockHeader) {
        let base = self.header_cell(skill);
        let words = &mut self.words[base..base + HEADER_WORDS];
        words.fill(0.0);
        words[header::ENTRY] = h.entry as Word;
        words[header::CODE_LEN] = h.code_len as Word;
        words[header::N_INPUTS] = h.n_inputs as Word;
        words[header::N_OUTPUTS] = h.n_outputs as Word;
        words[header::HAS_WEIGHTS] = if h.has_weights() { 1.0 } else { 0.0 };
        words[header::WEIGHT_DESCRIPTOR] = h.weight_descriptor.map_or(UNBOUND, |d| d as Word);
        words[header::MODE] = if h.output_mode { 1.0 } else { 0.0 };
        words[header::SCRATCH] = h.scratch_words as Word;
        words[header::N_LOCALS] = h.local_shapes.len() as Word;
        for k in 0..MAX_SLOTS {
            words[header::SLOTS + k] = UNBOUND;
        }
        for (k, slot) in h.slots.iter().enumerate() {
            words[header::SLOTS + k] = slot.map_or(UNBOUND, |d| d as Word);
        }
        for (k, shape) in h.slot_shapes.iter().enumerate() {
            words[header::SLOT_SHAPES + k] = shape.encode();
        }
        for (k, shape) in h.local_shapes.iter().enumerate() {
            words[header::LOCAL_SHAPES + k] = shape.encode();
        }
    }

    /// Copies `code` into the code region and writes the header; returns the skill index.
    pub fn register_skill_block(
        &mut self,
        header: &SkillBlockHeader,
        code: &[Word],
    ) -> Result<usize> {
        if !code.len().is_multiple_of(INSTRUCTION_WORDS) {
            return Err(StateError::MalformedCode(code.len()));
        }
        if header.n_slots() > MAX_SLOTS || header.slot_shapes.len() != header.n_slots() {
            return Err(StateError::TooManySlots(
                header.n_slots().max(header.slot_shapes.len()),
            ));
        }
        if header.local_shapes.len() > MAX_LOCALS {
            return Err(StateError::TooManyLocals(header.local_shapes.len()));
        }
        let count = self.skill_count();
        if count >= self.layout.skill_block_capacity {
            return Err(StateError::SkillTableFull(self.layout.skill_block_capacity));
        }
        if let Some(w) = header.weight_descriptor {
            self.descriptor(w)?;
        }
        let entry = self.install_code(code)?;
        let mut h = header.clone();
        h.entry = entry;
        h.code_len = code.len() / INSTRUCTION_WORDS;
        h.slots.resize(h.n_slots(), None);
        self.write_header(count, &h);
        self.words[self.layout.skills_start()] = (count + 1) as Word;
        Ok(count)
    }

    /// Appends raw code with no skill header (a top-level program); returns its entry line.
    pub fn load_program(&mut self, code: &[Word]) -> Result<usize> {
        if !code.len().is_multiple_of(INSTRUCTION_WORDS) {
            return Err(StateError::MalformedCode(code.len()));
        }
        let entry = self.install_code(code)?;
        self.set_register(reg::L, entry as Word);
        self.set_register(reg::CB, entry as Word);
        Ok(entry)
    }

    fn install_code(&mut self, code: &[Word]) -> Result<usize> {
        let used = self.code_used();
        let free = self.layout.code_capacity - used * INSTRUCTION_WORDS;
        if code.len() > free {
            return Err(StateError::CodeRegionFull {
                needed: code.len(),
                free,
            });
        }
        let start = self.layout.code_start() + used * INSTRUCTION_WORDS;
        self.words[start..start + code.len()].copy_from_slice(code);
        self.words[self.layout.skills_start() + 1] =
            (used + code.len() / INSTRUCTION_WORDS) as Word;
        Ok(used)
    }

    /// Overwrites the bound descriptors of a skill's slots.
    pub fn set_slots(&mut self, skill: usize, slots: &[Option<usize>]) -> Result<()> {
        self.check_skill(skill)?;
        let base = self.header_cell(skill) + header::SLOTS;
        for (k, slot) in slots.iter().enumerate().take(MAX_SLOTS) {
            self.words[base + k] = slot.map_or(UNBOUND, |d| d as Word);
        }
        Ok(())
    }

    pub fn set_output_mode(&mut self, skill: usize, output_mode: bool) -> Result<()> {
        self.check_skill(skill)?;
        let at = self.header_cell(skill) + header::MODE;
        self.words[at] = if output_mode { 1.0 } else { 0.0 };
        Ok(())
    }

    /// The four words of instruction line `line`.
    pub fn instruction_words(&self, line: usize) -> Option<&[Word]> {
        if line >= self.code_used() {
            return None;
        }
        let start = self.layout.code_start() + line * INSTRUCTION_WORDS;
        Some(&self.words[start..start + INSTRUCTION_WORDS])
    }

    /// Every word whose role is an address, count, opcode or flag.
    pub fn check_integer_words(&self) -> Result<()> {
        let l = &self.layout;
        let check = |index: usize| -> Result<()> { self.index_word(index).map(|_| ()) };
        for r in [reg::L, reg::SP, reg::HALT, reg::CB, reg::FP] {
            check(l.registers_start() + r)?;
        }
        check(l.descriptors_start())?;
        for i in 0..self.descriptor_count() {
            check(self.descriptor_cell(i))?;
            check(self.descriptor_cell(i) + 1)?;
        }
        check(l.skills_start())?;
        check(l.skills_start() + 1)?;
        for s in 0..self.skill_count() {
            let base = self.header_cell(s);
            for f in [
                header::ENTRY,
                header::CODE_LEN,
                header::N_INPUTS,
                header::N_OUTPUTS,
                header::MODE,
            ] {
                check(base + f)?;
            }
        }
        for line in 0..self.code_used() {
            check(l.code_start() + line * INSTRUCTION_WORDS)?;
        }
        Ok(())
    }
}

/// One differing word between two states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordDiff {
    pub index: usize,
    pub old: Word,
    pub new: Word,
}

/// Every position where `a` and `b` differ bitwise.
pub fn diff_states(a: &State, b: &State) -> Result<Vec<WordDiff>> {
    if a.layout != b.layout {
        return Err(StateError::LayoutMismatch);
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .enumerate()
        .filter(|(_, (x, y))| x.to_bits() != y.to_bits())
        .map(|(index, (old, new))| WordDiff {
            index,
            old: *old,
            new: *new,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_layout() -> RegionLayout {
        RegionLayout {
            register_count: 8,
            stack_capacity: 64,
            descriptor_capacity: 32,
            skill_block_capacity: 8,
            code_capacity: 1024,
            static_memory_capacity: 4096,
        }
    }

    #[test]
    fn init_is_zero_and_sized() {
        let s = State::new(example_layout()).unwrap();
        let expected =
            (SYSTEM_REGISTERS + 8) + 64 + (1 + 64) + (2 + 8 * HEADER_WORDS) + 1024 + 4096;
        assert_eq!(s.len(), expected);
        assert!(s.words().iter().all(|w| *w == 0.0));
        assert_eq!(s.register(reg::HALT), 0.0);
        assert_eq!(s.descriptor_count(), 0);
    }

    #[test]
    fn init_rejects_huge_layout() {
        let layout = RegionLayout {
            static_memory_capacity: 1 << 30,
            ..example_layout()
        };
        assert!(matches!(
            State::new(layout),
            Err(StateError::CapacityOverflow { .. })
        ));
    }

    #[test]
    fn init_rejects_zero_capacity() {
        let layout = RegionLayout {
            stack_capacity: 0,
            ..example_layout()
        };
        assert_eq!(
            State::new(layout),
            Err(StateError::ZeroCapacity("stack_capacity"))
        );
    }

    #[test]
    fn write_data_allocates_contiguously() {
        let mut s = State::new(example_layout()).unwrap();
        assert_eq!(s.write_data(&[4.0, 7.0]).unwrap(), 0);
        assert_eq!(
            s.descriptor(0).unwrap(),
            DataDescriptor {
                address: 0,
                length: 2
            }
        );
        assert_eq!(s.write_data(&[1.0, 2.0, 3.0]).unwrap(), 1);
        assert_eq!(s.descriptor(1).unwrap().address, 2);
        assert_eq!(s.read_region(0).unwrap(), vec![4.0, 7.0]);
    }

    #[test]
    fn write_data_out_of_memory() {
        let layout = RegionLayout {
            static_memory_capacity: 2,
            ..example_layout()
        };
        let mut s = State::new(layout).unwrap();
        s.write_data(&[1.0, 2.0]).unwrap();
        assert_eq!(
            s.write_data(&[3.0]),
            Err(StateError::OutOfMemory { needed: 1, free: 0 })
        );
    }

    #[test]
    fn descriptor_table_full() {
        let layout = RegionLayout {
            descriptor_capacity: 1,
            ..example_layout()
        };
        let mut s = State::new(layout).unwrap();
        s.write_data(&[]).unwrap();
        assert_eq!(
            s.write_data(&[1.0]),
            Err(StateError::DescriptorTableFull(1))
        );
    }

    #[test]
    fn read_region_edges() {
        let mut s = State::new(example_layout()).unwrap();
        let d = s.write_data(&[]).unwrap();
        assert!(s.read_region(d).unwrap().is_empty());
        assert_eq!(
            s.read_region(1),
            Err(StateError::InvalidDescriptor { index: 1, count: 1 })
        );
    }

    #[test]
    fn register_skill_blocks_pack_code() {
        let mut s = State::new(example_layout()).unwrap();
        let h = SkillBlockHeader::new(&[SlotShape::Fixed(1)], &[SlotShape::Fixed(1)]);
        assert_eq!(s.register_skill_block(&h, &[0.0; 12]).unwrap(), 0);
        assert_eq!(s.skill_header(0).unwrap().entry, 0);
        assert_eq!(s.register_skill_block(&h, &[0.0; 8]).unwrap(), 1);
        let h1 = s.skill_header(1).unwrap();
        assert_eq!(h1.entry, 3);
        assert_eq!(h1.code_len, 2);
        assert_eq!(h1.slots, vec![None, None]);
        assert_eq!(
            s.register_skill_block(&h, &[0.0; 7]),
            Err(StateError::MalformedCode(7))
        );
    }

    #[test]
    fn register_skill_capacity_errors() {
        let layout = RegionLayout {
            skill_block_capacity: 1,
            code_capacity: 8,
            ..example_layout()
        };
        let mut s = State::new(layout).unwrap();
        let h = SkillBlockHeader::new(&[], &[]);
        assert!(matches!(
            s.register_skill_block(&h, &[0.0; 12]),
            Err(StateError::CodeRegionFull { .. })
        ));
        s.register_skill_block(&h, &[0.0; 4]).unwrap();
        assert_eq!(
            s.register_skill_block(&h, &[0.0; 4]),
            Err(StateError::SkillTableFull(1))
        );
    }

    #[test]
    fn header_roundtrip() {
        let mut s = State::new(example_layout()).unwrap();
        let w = s.write_data(&[1.0, 2.0]).unwrap();
        let mut h = SkillBlockHeader::new(
            &[SlotShape::Dim(0), SlotShape::Fixed(1)],
            &[SlotShape::Dim(1)],
        );
        h.weight_descriptor = Some(w);
        h.local_shapes = vec![LocalShape::LikeSlot(0), LocalShape::Fixed(3)];
        h.slots = vec![Some(0), None, Some(0)];
        let idx = s.register_skill_block(&h, &[0.0; 4]).unwrap();
        let back = s.skill_header(idx).unwrap();
        h.code_len = 1;
        assert_eq!(back, h);
    }

    #[test]
    fn diff_identity_and_write() {
        let mut s = State::new(example_layout()).unwrap();
        assert!(diff_states(&s, &s.clone()).unwrap().is_empty());
        let before = s.clone();
        s.write_data(&[9.0]).unwrap();
        let diff = diff_states(&before, &s).unwrap();
        let l = s.layout();
        let idx: Vec<usize> = diff.iter().map(|d| d.index).collect();
        // count word, length cell (address stays 0) and the memory cell.
        assert_eq!(
            idx,
            vec![
                l.descriptors_start(),
                l.descriptors_start() + 2,
                l.memory_start()
            ]
        );
    }

    #[test]
    fn diff_layout_mismatch() {
        let a = State::new(example_layout()).unwrap();
        let b = State::new(RegionLayout {
            stack_capacity: 8,
            ..example_layout()
        })
        .unwrap();
        assert_eq!(diff_states(&a, &b), Err(StateError::LayoutMismatch));
    }

    #[test]
    fn word_index_exactness() {
        assert_eq!(word_to_index(3.0), Some(3));
        assert_eq!(word_to_index(3.0 + 1e-12), Some(3));
        assert_eq!(word_to_index(3.1), None);
        assert_eq!(word_to_index(-1.0), None);
        assert_eq!(word_to_index(f64::NAN), None);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Write(Vec<i32>),
        Register(usize),
        Bind(usize),
    }

    fn op_strategy() -> impl Strategy<Value = Op> {
        prop_oneof![
            prop::collection::vec(-100i32..100, 0..16).prop_map(Op::Write),
            (0usize..4).prop_map(Op::Register),
            (0usize..4).prop_map(Op::Bind),
        ]
    }

    proptest! {
        #[test]
        fn roundtrip_write_read(values in prop::collection::vec(-1e6f64..1e6, 0..128)) {
            let mut s = State::new(example_layout()).unwrap();
            s.write_data(&[1.0]).unwrap();
            let d = s.write_data(&values).unwrap();
            prop_assert_eq!(s.read_region(d).unwrap(), values);
        }

        #[test]
        fn operations_stay_in_their_regions(ops in prop::collection::vec(op_strategy(), 1..24)) {
            let mut s = State::new(example_layout()).unwrap();
            for op in ops {
                let before = s.clone();
                let allowed: &[Region] = match &op {
                    Op::Write(v) => {
                        let vals: Vec<f64> = v.iter().map(|x| *x as f64).collect();
                        let _ = s.write_data(&vals);
                        &[Region::Descriptors, Region::StaticMemory]
                    }
                    Op::Register(n) => {
                        let h = SkillBlockHeader::new(&[SlotShape::Fixed(1)], &[SlotShape::Fixed(1)]);
                        let _ = s.register_skill_block(&h, &vec![1.0; 4 * (n + 1)]);
                        &[Region::SkillBlocks, Region::Code]
                    }
                    Op::Bind(d) => {
                        if s.skill_count() > 0 {
                            let _ = s.set_slots(0, &[Some(*d), Some(*d)]);
                        }
                        &[Region::SkillBlocks]
                    }
                };
                for change in diff_states(&before, &s).unwrap() {
                    prop_assert!(allowed.contains(&s.layout().region_of(change.index)));
                }
                prop_assert!(s.check_integer_words().is_ok());
            }
        }

        #[test]
        fn clones_are_independent(values in prop::collection::vec(-10f64..10.0, 1..32), at in 0usize..4096) {
            let mut original = State::new(example_layout()).unwrap();
            original.write_data(&values).unwrap();
            let snapshot = original.words().to_vec();
            let mut copy = original.clone();
            copy.memory_mut()[at] += 1.0;
            copy.write_data(&[5.0]).unwrap();
            prop_assert_eq!(original.words(), &snapshot[..]);
        }
    }
}
