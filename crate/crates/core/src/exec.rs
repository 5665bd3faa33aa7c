//! The execution module: single steps, fuel-limited runs, skill invocation
//! and the weight-Jacobian path.
//!
//! A step never mutates its input. The [`Executor`] trait produces the set
//! of word writes one instruction causes; [`Interpreter`] is the exact
//! implementation and anything else honouring the same contract (a learned
//! executor, say) can be dropped in.
//!
//! Calling convention: entering a skill pushes a 4-word record
//! `[return line, caller code base, caller frame pointer, host flag]` and
//! carves a zeroed frame out of the top of static memory. Frame layout
//! (offsets relative to the frame pointer):
//!
//! | offset | content                                  |
//! |--------|------------------------------------------|
//! | 0..16  | `(address, length)` per slot             |
//! | 16..18 | `(address, length)` of the weight region |
//! | 18..26 | `(address, length)` per local buffer     |
//! | 26..   | scratch words, then local buffer storage |

use crate::isa::{decode, DecodeError, Instruction, Opcode};
use crate::state::{
    reg, word_to_index, LocalShape, SkillBlockHeader, SlotShape, State, StateError, Word, WordDiff,
    MAX_LOCALS, MAX_SLOTS,
};
use std::fmt;
use thiserror::Error;

/// Frame offsets of the calling convention.
pub mod frame {
    use crate::state::{MAX_LOCALS, MAX_SLOTS};
    pub const SLOT_PAIRS: usize = 0;
    pub const WEIGHT_PAIR: usize = 2 * MAX_SLOTS;
    pub const LOCAL_PAIRS: usize = WEIGHT_PAIR + 2;
    pub const SCRATCH: usize = LOCAL_PAIRS + 2 * MAX_LOCALS;
}

/// Words pushed on the stack per call.
pub const CALL_RECORD_WORDS: usize = 4;

/// Default step budget.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Default finite-difference step for [`jacobian`].
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fuel(pub u64);

impl Default for Fuel {
    fn default() -> Self {
        Fuel(DEFAULT_FUEL)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("state is halted")]
    Halted,
    #[error("line register {0} does not address an instruction")]
    InvalidLine(Word),
    #[error("jump target {0} is outside the code region")]
    InvalidJump(Word),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("operand {0} is not a valid frame offset")]
    BadOperand(Word),
    #[error("memory address {0} is out of bounds or not an integer")]
    BadAddress(Word),
    #[error("stack overflow")]
    StackOverflow,
    #[error("stack underflow")]
    StackUnderflow,
    #[error("frame of {needed} words does not fit above the heap")]
    FrameOverflow { needed: usize },
    #[error("skill {0} does not exist")]
    UnknownSkill(Word),
    #[error("malformed call argument")]
    BadArgument,
    #[error("register {0} is corrupt")]
    CorruptRegister(&'static str),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Why a run stopped without halting.
#[derive(Debug, Clone, PartialEq)]
pub enum RunErrorKind {
    FuelExhausted,
    Step(ExecError),
}

/// A failed run, with the state and trace at the point it stopped.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", match &self.kind { RunErrorKind::FuelExhausted => "fuel exhausted".to_string(), RunErrorKind::Step(e) => e.to_string() })]
pub struct RunError {
    pub kind: RunErrorKind,
    pub state: State,
    pub trace: Vec<StepTrace>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvokeError {
    #[error("slot {0} is unbound")]
    UnboundSlot(usize),
    #[error("skill has no weights")]
    NoWeights,
    #[error("slot {slot} bound to {found} words, skill expects {expected}")]
    LengthMismatch {
        slot: usize,
        expected: usize,
        found: usize,
    },
    #[error("epsilon must be positive")]
    BadEpsilon,
    #[error("non-finite output")]
    NonFinite,
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Run(#[from] Box<RunError>),
    #[error(transparent)]
    State(#[from] StateError),
}

/// One executed instruction and everything it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub line: usize,
    pub instruction: Instruction,
    pub writes: Vec<WordDiff>,
    pub halted: bool,
}

impl StepTrace {
    /// Applies the recorded writes to `state`.
    pub fn replay(&self, state: &mut State) {
        for w in &self.writes {
            state.set_word(w.index, w.new);
        }
    }
}

/// Tab-separated trace line: step, line, instruction, writes, halted.
impl fmt::Display for StepTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let writes: Vec<String> = self
            .writes
            .iter()
            .map(|w| format!("{}:{}>{}", w.index, w.old, w.new))
            .collect();
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.step,
            self.line,
            self.instruction,
            writes.join(","),
            u8::from(self.halted)
        )
    }
}

pub fn format_trace(trace: &[StepTrace]) -> String {
    trace.iter().map(|t| format!("{t}\n")).collect()
}

/// The writes one instruction performs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub line: usize,
    pub instruction: Instruction,
    pub writes: Vec<(usize, Word)>,
}

/// Seam for the S -> S' map.
pub trait Executor {
    fn transition(&self, state: &State) -> Result<Transition, ExecError>;
}

/// Exact ISA semantics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Interpreter;

/// Reads registers and resolves operands; collects writes without applying them.
struct Machine<'s> {
    state: &'s State,
    fp: usize,
    cb: usize,
    sp: usize,
    line: usize,
    writes: Vec<(usize, Word)>,
}

fn register_index(state: &State, r: usize, name: &'static str) -> Result<usize, ExecError> {
    word_to_index(state.register(r)).ok_or(ExecError::CorruptRegister(name))
}

impl<'s> Machine<'s> {
    fn new(state: &'s State) -> Result<Self, ExecError> {
        Ok(Self {
            state,
            fp: register_index(state, reg::FP, "R_FP")?,
            cb: register_index(state, reg::CB, "R_CB")?,
            sp: register_index(state, reg::SP, "R_SP")?,
            line: register_index(state, reg::L, "R_L")?,
            writes: Vec::new(),
        })
    }

    fn cap(&self) -> usize {
        self.state.layout().static_memory_capacity
    }

    /// State index of direct operand `x` (frame-relative).
    fn direct(&self, x: Word) -> Result<usize, ExecError> {
        let off = word_to_index(x).ok_or(ExecError::BadOperand(x))?;
        let at = self
            .fp
            .checked_add(off)
            .filter(|a| *a < self.cap())
            .ok_or(ExecError::BadOperand(x))?;
        Ok(self.state.layout().memory_start() + at)
    }

    /// State index of absolute static-memory address `x`.
    fn absolute(&self, x: Word) -> Result<usize, ExecError> {
        let at = word_to_index(x)
            .filter(|a| *a < self.cap())
            .ok_or(ExecError::BadAddress(x))?;
        Ok(self.state.layout().memory_start() + at)
    }

    /// Current value at a state index, honouring pending writes.
    fn read(&self, index: usize) -> Word {
        self.writes
            .iter()
            .rev()
            .find(|(i, _)| *i == index)
            .map_or(self.state.word(index), |(_, v)| *v)
    }

    fn write(&mut self, index: usize, value: Word) {
        self.writes.push((index, value));
    }

    fn set_reg(&mut self, r: usize, value: Word) {
        self.write(self.state.layout().registers_start() + r, value);
    }

    fn jump(&mut self, target: Word) -> Result<(), ExecError> {
        let line = word_to_index(target)
            .map(|t| self.cb + t)
            .filter(|l| *l <= self.state.layout().code_lines())
            .ok_or(ExecError::InvalidJump(target))?;
        self.set_reg(reg::L, line as Word);
        Ok(())
    }

    fn advance(&mut self) {
        self.set_reg(reg::L, (self.line + 1) as Word);
    }

    /// Pushes a call record and builds the callee frame.
    fn enter(
        &mut self,
        skill: usize,
        args: &[(usize, usize)],
        return_line: usize,
        host: bool,
    ) -> Result<(), ExecError> {
        let header = self.state.skill_header(skill)?;
        if args.len() != header.n_slots() {
            return Err(ExecError::BadArgument);
        }
        let lengths: Vec<usize> = args.iter().map(|a| a.1).collect();
        let locals = local_lengths(&header, &lengths).ok_or(ExecError::BadArgument)?;
        let size = frame::SCRATCH + header.scratch_words + locals.iter().sum::<usize>();
        let top = if self.sp == 0 { self.cap() } else { self.fp };
        let new_fp = top
            .checked_sub(size)
            .filter(|fp| *fp >= self.state.heap_end())
            .ok_or(ExecError::FrameOverflow { needed: size })?;

        let layout = self.state.layout();
        if self.sp + CALL_RECORD_WORDS > layout.stack_capacity {
            return Err(ExecError::StackOverflow);
        }
        let stack = layout.stack_start() + self.sp;
        let record = [
            return_line as Word,
            self.cb as Word,
            self.fp as Word,
            if host { 1.0 } else { 0.0 },
        ];
        for (k, v) in record.into_iter().enumerate() {
            self.write(stack + k, v);
        }

        let base = layout.memory_start() + new_fp;
        for i in 0..size {
            if self.read(base + i).to_bits() != 0 {
                self.write(base + i, 0.0);
            }
        }
        let put_pair = |m: &mut Self, off: usize, (addr, len): (usize, usize)| {
            m.write(base + off, addr as Word);
            m.write(base + off + 1, len as Word);
        };
        for (k, arg) in args.iter().enumerate() {
            put_pair(self, frame::SLOT_PAIRS + 2 * k, *arg);
        }
        if let Some(w) = header.weight_descriptor {
            let d = self.state.descriptor(w)?;
            put_pair(self, frame::WEIGHT_PAIR, (d.address, d.length));
        }
        let mut storage = new_fp + frame::SCRATCH + header.scratch_words;
        for (j, len) in locals.iter().enumerate() {
            put_pair(self, frame::LOCAL_PAIRS + 2 * j, (storage, *len));
            storage += len;
        }

        self.set_reg(reg::SP, (self.sp + CALL_RECORD_WORDS) as Word);
        self.set_reg(reg::L, header.entry as Word);
        self.set_reg(reg::CB, header.entry as Word);
        self.set_reg(reg::FP, new_fp as Word);
        Ok(())
    }

    fn execute(&mut self, ins: &Instruction) -> Result<(), ExecError> {
        match ins.opcode {
            Opcode::Halt => self.set_reg(reg::HALT, 1.0),
            Opcode::Subleq => {
                let (ia, ib) = (self.direct(ins.a)?, self.direct(ins.b)?);
                let v = self.read(ib) - self.read(ia);
                self.write(ib, v);
                if v <= 0.0 {
                    self.jump(ins.c)?;
                } else {
                    self.advance();
                }
            }
            Opcode::Add | Opcode::Mul => {
                let x = self.read(self.direct(ins.a)?);
                let y = self.read(self.direct(ins.b)?);
                let v = if ins.opcode == Opcode::Add {
                    x + y
                } else {
                    x * y
                };
                let ic = self.direct(ins.c)?;
                self.write(ic, v);
                self.advance();
            }
            Opcode::Mov => {
                let v = self.read(self.direct(ins.a)?);
                let ic = self.direct(ins.c)?;
                self.write(ic, v);
                self.advance();
            }
            Opcode::Movi => {
                let ic = self.direct(ins.c)?;
                self.write(ic, ins.a);
                self.advance();
            }
            Opcode::Jlez => {
                if self.read(self.direct(ins.a)?) <= 0.0 {
                    self.jump(ins.c)?;
                } else {
                    self.advance();
                }
            }
            Opcode::Loadi => {
                let src = self.absolute(self.read(self.direct(ins.a)?))?;
                let ic = self.direct(ins.c)?;
                self.write(ic, self.read(src));
                self.advance();
            }
            Opcode::Storei => {
                let v = self.read(self.direct(ins.a)?);
                let dst = self.absolute(self.read(self.direct(ins.c)?))?;
                self.write(dst, v);
                self.advance();
            }
            Opcode::Call => {
                let skill = word_to_index(ins.a)
                    .filter(|s| *s < self.state.skill_count())
                    .ok_or(ExecError::UnknownSkill(ins.a))?;
                let n = self.state.skill_header(skill)?.n_slots();
                let mut args = Vec::with_capacity(n);
                let block = word_to_index(ins.b).ok_or(ExecError::BadOperand(ins.b))?;
                for k in 0..n {
                    let addr = self.read(self.direct((block + 2 * k) as Word)?);
                    let len = self.read(self.direct((block + 2 * k + 1) as Word)?);
                    let pair = word_to_index(addr)
                        .zip(word_to_index(len))
                        .filter(|(a, l)| a + l <= self.cap())
                        .ok_or(ExecError::BadArgument)?;
                    args.push(pair);
                }
                self.enter(skill, &args, self.line + 1, false)?;
            }
            Opcode::Ret => {
                if self.sp < CALL_RECORD_WORDS {
                    return Err(ExecError::StackUnderflow);
                }
                let top = self.state.layout().stack_start() + self.sp - CALL_RECORD_WORDS;
                let record: Vec<Word> = (0..CALL_RECORD_WORDS)
                    .map(|k| self.state.word(top + k))
                    .collect();
                let ret = word_to_index(record[0])
                    .filter(|l| *l <= self.state.layout().code_lines())
                    .ok_or(ExecError::InvalidJump(record[0]))?;
                for k in 0..CALL_RECORD_WORDS {
                    self.write(top + k, 0.0);
                }
                self.set_reg(reg::SP, (self.sp - CALL_RECORD_WORDS) as Word);
                self.set_reg(reg::L, ret as Word);
                self.set_reg(reg::CB, record[1]);
                self.set_reg(reg::FP, record[2]);
                if record[3] != 0.0 {
                    self.set_reg(reg::HALT, 1.0);
                }
            }
        }
        Ok(())
    }
}

impl Executor for Interpreter {
    fn transition(&self, state: &State) -> Result<Transition, ExecError> {
        if state.halted() {
            return Err(ExecError::Halted);
        }
        let mut m = Machine::new(state)?;
        let words = state
            .instruction_words(m.line)
            .ok_or(ExecError::InvalidLine(state.register(reg::L)))?;
        let instruction = decode(words)?;
        m.execute(&instruction)?;
        Ok(Transition {
            line: m.line,
            instruction,
            writes: m.writes,
        })
    }
}

/// Frame-local buffer lengths for the given slot lengths, or `None` if a shape refers to a missing slot.
pub fn local_lengths(header: &SkillBlockHeader, slot_lengths: &[usize]) -> Option<Vec<usize>> {
    header
        .local_shapes
        .iter()
        .map(|shape| match *shape {
            LocalShape::Fixed(n) => Some(n),
            LocalShape::LikeSlot(s) => slot_lengths.get(s).copied(),
        })
        .collect()
}

/// Checks bound lengths against the declared slot shapes.
pub fn check_slot_lengths(header: &SkillBlockHeader, lengths: &[usize]) -> Result<(), InvokeError> {
    let mut dims: [Option<usize>; MAX_SLOTS] = [None; MAX_SLOTS];
    for (slot, (shape, len)) in header.slot_shapes.iter().zip(lengths).enumerate() {
        let expected = match *shape {
            SlotShape::Fixed(n) => n,
            SlotShape::Dim(g) => *dims
                .get_mut(g.min(MAX_SLOTS - 1))
                .unwrap()
                .get_or_insert(*len),
        };
        if expected != *len {
            return Err(InvokeError::LengthMismatch {
                slot,
                expected,
                found: *len,
            });
        }
    }
    Ok(())
}

fn apply(state: &mut State, t: &Transition, step: usize) -> StepTrace {
    let mut writes: Vec<WordDiff> = Vec::with_capacity(t.writes.len());
    for &(index, new) in &t.writes {
        match writes.iter_mut().find(|w| w.index == index) {
            Some(w) => w.new = new,
            None => writes.push(WordDiff {
                index,
                old: state.word(index),
                new,
            }),
        }
    }
    writes.retain(|w| w.old.to_bits() != w.new.to_bits());
    for w in &writes {
        state.set_word(w.index, w.new);
    }
    StepTrace {
        step,
        line: t.line,
        instruction: t.instruction,
        writes,
        halted: state.halted(),
    }
}

/// Executes exactly one instruction and returns the successor state.
pub fn step(state: &State) -> Result<State, ExecError> {
    step_with(&Interpreter, state).map(|(s, _)| s)
}

pub fn step_with(exec: &dyn Executor, state: &State) -> Result<(State, StepTrace), ExecError> {
    let t = exec.transition(state)?;
    let mut next = state.clone();
    let trace = apply(&mut next, &t, 0);
    Ok((next, trace))
}

/// Steps until the halt flag is set or fuel runs out.
pub fn run(state: &State, fuel: Fuel) -> Result<(State, Vec<StepTrace>), Box<RunError>> {
    run_with(&Interpreter, state, fuel)
}

pub fn run_with(
    exec: &dyn Executor,
    state: &State,
    fuel: Fuel,
) -> Result<(State, Vec<StepTrace>), Box<RunError>> {
    let mut current = state.clone();
    let mut trace = Vec::new();
    run_in_place(exec, &mut current, fuel, &mut trace).map_err(|kind| {
        Box::new(RunError {
            kind,
            state: current.clone(),
            trace: trace.clone(),
        })
    })?;
    Ok((current, trace))
}

fn run_in_place(
    exec: &dyn Executor,
    state: &mut State,
    fuel: Fuel,
    trace: &mut Vec<StepTrace>,
) -> Result<(), RunErrorKind> {
    let mut remaining = fuel.0;
    while !state.halted() {
        if remaining == 0 {
            return Err(RunErrorKind::FuelExhausted);
        }
        let t = exec.transition(state).map_err(RunErrorKind::Step)?;
        let step = trace.len();
        trace.push(apply(state, &t, step));
        remaining -= 1;
    }
    Ok(())
}

fn bound_args(
    state: &State,
    header: &SkillBlockHeader,
) -> Result<Vec<(usize, usize)>, InvokeError> {
    header
        .slots
        .iter()
        .enumerate()
        .map(|(k, slot)| {
            let d = state.descriptor(slot.ok_or(InvokeError::UnboundSlot(k))?)?;
            Ok((d.address, d.length))
        })
        .collect()
}

/// Runs a skill's output code against its bound slots, ignoring the mode flag.
pub fn invoke_output(
    state: &State,
    skill: usize,
    fuel: Fuel,
) -> Result<(State, Vec<StepTrace>), InvokeError> {
    let header = state.skill_header(skill)?;
    let args = bound_args(state, &header)?;
    let lengths: Vec<usize> = args.iter().map(|a| a.1).collect();
    check_slot_lengths(&header, &lengths)?;
    if state.halted() {
        return Err(ExecError::Halted.into());
    }
    let mut m = Machine::new(state)?;
    let return_line = m.line;
    m.enter(skill, &args, return_line, true)?;
    let mut current = state.clone();
    let setup = Transition {
        line: return_line,
        instruction: Instruction::new(Opcode::Call, skill as Word, 0.0, 0.0),
        writes: m.writes,
    };
    apply(&mut current, &setup, 0);

    let mut trace = Vec::new();
    if let Err(kind) = run_in_place(&Interpreter, &mut current, fuel, &mut trace) {
        return Err(Box::new(RunError {
            kind,
            state: current,
            trace,
        })
        .into());
    }
    if trace
        .last()
        .is_some_and(|t| t.instruction.opcode == Opcode::Ret)
    {
        current.set_register(reg::HALT, 0.0);
    }
    Ok((current, trace))
}

/// Runs a skill: the output path when its mode flag is 1, otherwise writes the
/// weight Jacobian of its outputs into the first output region.
pub fn invoke_skill(
    state: &State,
    skill: usize,
    fuel: Fuel,
) -> Result<(State, Vec<StepTrace>), InvokeError> {
    let header = state.skill_header(skill)?;
    if let Some(k) = header.slots.iter().position(Option::is_none) {
        return Err(InvokeError::UnboundSlot(k));
    }
    if header.output_mode {
        return invoke_output(state, skill, fuel);
    }
    if !header.has_weights() {
        return Err(InvokeError::NoWeights);
    }
    if header.n_outputs == 0 {
        return Err(InvokeError::LengthMismatch {
            slot: header.n_inputs,
            expected: 1,
            found: 0,
        });
    }
    // Output values go to scratch in the probe state; the real first output receives the matrix.
    let sink_slot = header.n_inputs;
    let sink = header.slots[sink_slot].unwrap();
    let mut lengths: Vec<usize> = header
        .slots
        .iter()
        .map(|s| state.descriptor(s.unwrap()).map(|d| d.length))
        .collect::<Result<_, _>>()?;
    let value_len = match header.slot_shapes[sink_slot] {
        SlotShape::Fixed(n) => n,
        SlotShape::Dim(g) => header
            .slot_shapes
            .iter()
            .zip(&lengths)
            .enumerate()
            .find(|(k, (s, _))| *k != sink_slot && **s == SlotShape::Dim(g))
            .map(|(_, (_, l))| *l)
            .ok_or(InvokeError::LengthMismatch {
                slot: sink_slot,
                expected: 0,
                found: lengths[sink_slot],
            })?,
    };
    let mut probe = state.clone();
    let scratch = probe.write_data(&vec![0.0; value_len])?;
    let mut slots = header.slots.clone();
    slots[sink_slot] = Some(scratch);
    probe.set_slots(skill, &slots)?;
    lengths[sink_slot] = value_len;
    let outputs: Vec<usize> = slots[header.n_inputs..]
        .iter()
        .map(|s| s.unwrap())
        .collect();
    let matrix = jacobian_over(&probe, skill, DEFAULT_EPSILON, &outputs, fuel)?;

    let flat: Vec<Word> = matrix.into_iter().flatten().collect();
    let target = state.descriptor(sink)?;
    if target.length != flat.len() {
        return Err(InvokeError::LengthMismatch {
            slot: sink_slot,
            expected: flat.len(),
            found: target.length,
        });
    }
    let mut out = state.clone();
    out.write_region(sink, &flat)?;
    Ok((out, Vec::new()))
}

/// Central-difference Jacobian of the skill's bound outputs with respect to its weights.
/// Rows are output words (all output regions concatenated), columns weight words.
pub fn jacobian(state: &State, skill: usize, epsilon: f64) -> Result<Vec<Vec<f64>>, InvokeError> {
    let header = state.skill_header(skill)?;
    let outputs = header.slots[header.n_inputs..]
        .iter()
        .enumerate()
        .map(|(k, s)| s.ok_or(InvokeError::UnboundSlot(header.n_inputs + k)))
        .collect::<Result<Vec<_>, _>>()?;
    jacobian_over(state, skill, epsilon, &outputs, Fuel::default())
}

fn jacobian_over(
    state: &State,
    skill: usize,
    epsilon: f64,
    outputs: &[usize],
    fuel: Fuel,
) -> Result<Vec<Vec<f64>>, InvokeError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(InvokeError::BadEpsilon);
    }
    let header = state.skill_header(skill)?;
    let weights = header.weight_descriptor.ok_or(InvokeError::NoWeights)?;
    let w = state.descriptor(weights)?;
    let base = state.layout().memory_start() + w.address;

    let evaluate = |j: usize, delta: f64| -> Result<Vec<f64>, InvokeError> {
        let mut probe = state.clone();
        probe.set_output_mode(skill, true)?;
        let at = base + j;
        probe.set_word(at, probe.word(at) + delta);
        let (after, _) = invoke_output(&probe, skill, fuel)?;
        let mut values = Vec::new();
        for d in outputs {
            values.extend(after.read_region(*d)?);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InvokeError::NonFinite);
        }
        Ok(values)
    };

    let mut columns = Vec::with_capacity(w.length);
    for j in 0..w.length {
        let plus = evaluate(j, epsilon)?;
        let minus = evaluate(j, -epsilon)?;
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * epsilon))
                .collect::<Vec<_>>(),
        );
    }
    let rows = columns.first().map_or_else(
        || {
            let n: usize = outputs
                .iter()
                .map(|d| state.descriptor(*d).map_or(0, |d| d.length))
                .sum();
            n
        },
        Vec::len,
    );
    Ok((0..rows)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect())
}

const _: () = assert!(frame::SCRATCH == 2 * MAX_SLOTS + 2 + 2 * MAX_LOCALS);
