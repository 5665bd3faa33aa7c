//! Standard atomic skills.
//!
//! Each skill is written against the frame layout in [`crate::exec::frame`]:
//! slot `k` is the pair at offsets `2k, 2k+1`, scratch starts at 26.
//! Every extended-ISA skill has a twin that does all arithmetic and control
//! flow with SUBLEQ; the twins still use LOADI/STOREI to follow slot
//! pointers and MOVI to seed constants. The multiplying twins
//! (`mul2`, `mul_ew`) count by repeated addition and need integer data.

use crate::asm::{assemble, AsmError};
use crate::exec::{frame, invoke_skill, Fuel, InvokeError};
use crate::state::{
    LocalShape, RegionLayout, SkillBlockHeader, SlotShape, State, StateError, Word,
};
use serde::{Deserialize, Serialize};

/// Everything needed to install a skill into a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillDef {
    pub name: String,
    pub code: Vec<Word>,
    pub inputs: Vec<SlotShape>,
    pub outputs: Vec<SlotShape>,
    #[serde(default)]
    pub locals: Vec<LocalShape>,
    pub scratch_words: usize,
    #[serde(default)]
    pub weights: Option<Vec<Word>>,
}

impl SkillDef {
    pub fn from_source(
        name: &str,
        source: &str,
        inputs: &[SlotShape],
        outputs: &[SlotShape],
    ) -> Result<Self, AsmError> {
        Ok(Self {
            name: name.to_string(),
            code: assemble(source)?,
            inputs: inputs.to_vec(),
            outputs: outputs.to_vec(),
            locals: Vec::new(),
            scratch_words: DEFAULT_SCRATCH,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<Word>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn n_slots(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    pub fn slot_shapes(&self) -> Vec<SlotShape> {
        self.inputs.iter().chain(&self.outputs).copied().collect()
    }

    pub fn header(&self) -> SkillBlockHeader {
        let mut h = SkillBlockHeader::new(&self.inputs, &self.outputs);
        h.local_shapes = self.locals.clone();
        h.scratch_words = self.scratch_words;
        h
    }

    /// Writes weights (if any) and registers the block; returns the skill index.
    pub fn install(&self, state: &mut State) -> Result<usize, StateError> {
        let mut h = self.header();
        if let Some(w) = &self.weights {
            h.weight_descriptor = Some(state.write_data(w)?);
        }
        state.register_skill_block(&h, &self.code)
    }
}

/// Scratch words reserved by the hand-written skills (offsets 26..42).
pub const DEFAULT_SCRATCH: usize = 16;

const N: SlotShape = SlotShape::Dim(0);
const ONE: SlotShape = SlotShape::Fixed(1);

const ADD2: &str = "\
; add2: out = a + b
    LOADI 0 0 26
    LOADI 2 0 27
    ADD 26 27 28
    STOREI 28 0 4
    RET
";

const MUL2: &str = "\
; mul2: out = a * b
    LOADI 0 0 26
    LOADI 2 0 27
    MUL 26 27 28
    STOREI 28 0 4
    RET
";

const MOV: &str = "\
; mov: out = x
    LOADI 0 0 26
    STOREI 26 0 2
    RET
";

const NEG: &str = "\
; neg: out = -x
    LOADI 0 0 26
    MOVI -1 0 27
    MUL 26 27 28
    ADD 28 29 28      ; -0 + 0 = 0, same as 0 - x
    STOREI 28 0 2
    RET
";

fn elementwise(op: &str) -> String {
    format!(
        "\
; {name}: out[i] = x[i] {sym} y[i], n = len(x)
    MOV 1 0 26        ; n
    MOV 0 0 27        ; x cursor
    MOV 2 0 28        ; y cursor
    MOV 4 0 29        ; out cursor
    MOVI 1 0 30
    MOVI -1 0 31
loop:
    JLEZ 26 0 done
    LOADI 27 0 32
    LOADI 28 0 33
    {op} 32 33 34
    STOREI 34 0 29
    ADD 27 30 27
    ADD 28 30 28
    ADD 29 30 29
    ADD 26 31 26
    JLEZ 35 0 loop
done:
    RET
",
        name = if op == "ADD" { "add_ew" } else { "mul_ew" },
        sym = if op == "ADD" { "+" } else { "*" },
    )
}

const FOLD_ADD: &str = "\
; fold_add: out = x[0] + x[1] + ... , n = len(x)
    MOV 1 0 26
    MOV 0 0 27
    MOVI 1 0 30
    MOVI -1 0 31
loop:
    JLEZ 26 0 done
    LOADI 27 0 32
    ADD 33 32 33
    ADD 27 30 27
    ADD 26 31 26
    JLEZ 35 0 loop
done:
    STOREI 33 0 2
    RET
";

const NOP: &str = "\
; nop: leaves the state as it is
    RET
";

const LINEAR: &str = "\
; linear: out = w[0..n] . x + w[n], weights from the skill's weight region
    MOV 1 0 26
    MOV 0 0 27
    MOV 16 0 28
    MOVI 1 0 30
    MOVI -1 0 31
loop:
    JLEZ 26 0 done
    LOADI 27 0 32
    LOADI 28 0 33
    MUL 32 33 34
    ADD 35 34 35
    ADD 27 30 27
    ADD 28 30 28
    ADD 26 31 26
    JLEZ 36 0 loop
done:
    LOADI 28 0 33
    ADD 35 33 35
    STOREI 35 0 2
    RET
";

/// Names of the shipped atomic skills.
pub const STANDARD_NAMES: [&str; 8] = [
    "mov", "add2", "mul2", "add_ew", "mul_ew", "fold_add", "neg", "nop",
];

/// Extended-ISA form of a standard atomic skill.
pub fn standard_skill(name: &str) -> Option<SkillDef> {
    let (src, inputs, outputs): (String, Vec<SlotShape>, Vec<SlotShape>) = match name {
        "mov" => (MOV.into(), vec![ONE], vec![ONE]),
        "add2" => (ADD2.into(), vec![ONE, ONE], vec![ONE]),
        "mul2" => (MUL2.into(), vec![ONE, ONE], vec![ONE]),
        "add_ew" => (elementwise("ADD"), vec![N, N], vec![N]),
        "mul_ew" => (elementwise("MUL"), vec![N, N], vec![N]),
        "fold_add" => (FOLD_ADD.into(), vec![N], vec![ONE]),
        "neg" => (NEG.into(), vec![ONE], vec![ONE]),
        "nop" => (NOP.into(), vec![], vec![]),
        _ => return None,
    };
    Some(SkillDef::from_source(name, &src, &inputs, &outputs).expect("standard skill assembles"))
}

pub fn standard_library() -> Vec<SkillDef> {
    STANDARD_NAMES
        .iter()
        .map(|n| standard_skill(n).unwrap())
        .collect()
}

/// `out = w[0..n] . x + w[n]`: the canonical weighted skill.
pub fn linear_skill(weights: Vec<Word>) -> SkillDef {
    SkillDef::from_source("linear", LINEAR, &[N], &[ONE])
        .unwrap()
        .with_weights(weights)
}

/// Builds SUBLEQ-core sources with symbolic jump targets.
#[derive(Default)]
struct Subleq {
    lines: Vec<String>,
    labels: usize,
}

/// Twins keep their constants and temporaries in offsets 26..50.
const TWIN_SCRATCH: usize = 24;

/// Cells used by the twins: a zero cell and the constants +1 / -1.
const Z: usize = 40;
const PLUS1: usize = 41;
const MINUS1: usize = 42;

impl Subleq {
    fn new() -> Self {
        let mut p = Self::default();
        p.raw(format!("MOVI 1 0 {PLUS1}"));
        p.raw(format!("MOVI -1 0 {MINUS1}"));
        p
    }

    fn raw(&mut self, line: impl Into<String>) {
        self.lines.push(format!("    {}", line.into()));
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.labels += 1;
        format!("{stem}_{}", self.labels)
    }

    fn label(&mut self, name: &str) {
        self.lines.push(format!("{name}:"));
    }

    /// `M[b] -= M[a]`, falling through either way.
    fn sub(&mut self, a: usize, b: usize) {
        let next = self.fresh("n");
        self.raw(format!("SUBLEQ {a} {b} {next}"));
        self.label(&next);
    }

    fn sub_jump(&mut self, a: usize, b: usize, target: &str) {
        self.raw(format!("SUBLEQ {a} {b} {target}"));
    }

    fn jump(&mut self, target: &str) {
        self.sub_jump(Z, Z, target);
    }

    fn clear(&mut self, x: usize) {
        self.sub(x, x);
    }

    /// `dst = src` through the zero cell.
    fn copy(&mut self, src: usize, dst: usize) {
        self.clear(dst);
        self.sub(src, Z);
        self.sub(Z, dst);
        self.clear(Z);
    }

    /// `acc += x`.
    fn add_into(&mut self, x: usize, acc: usize) {
        self.sub(x, Z);
        self.sub(Z, acc);
        self.clear(Z);
    }

    /// `out = a * b` for integer `b`, by repeated addition. Clobbers 43..47.
    fn int_mul(&mut self, a: usize, b: usize, out: usize) {
        let (neg_a, neg_b, count) = (43, 44, 45);
        let pos = self.fresh("pos");
        let neg = self.fresh("neg");
        let neg_loop = self.fresh("negloop");
        let end = self.fresh("end");
        self.clear(out);
        self.clear(neg_a);
        self.sub(a, neg_a);
        self.clear(neg_b);
        self.sub(b, neg_b);
        self.clear(count);
        self.sub(neg_b, count);
        self.sub_jump(Z, count, &neg);
        self.label(&pos);
        self.sub(neg_a, out);
        self.sub_jump(PLUS1, count, &end);
        self.jump(&pos);
        self.label(&neg);
        self.sub_jump(Z, neg_b, &end);
        self.label(&neg_loop);
        self.sub(a, out);
        self.sub_jump(PLUS1, neg_b, &end);
        self.jump(&neg_loop);
        self.label(&end);
    }

    fn finish(mut self, comment: &str) -> String {
        self.raw("RET");
        let mut out = format!("; {comment}\n");
        for l in self.lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

fn twin_binary(kind: &str) -> String {
    let mut p = Subleq::new();
    p.raw("LOADI 0 0 26");
    p.raw("LOADI 2 0 27");
    if kind == "add" {
        p.copy(26, 28);
        p.add_into(27, 28);
    } else {
        p.int_mul(26, 27, 28);
    }
    p.raw("STOREI 28 0 4");
    p.finish(&format!("{kind}2, SUBLEQ core"))
}

fn twin_unary(kind: &str) -> String {
    let mut p = Subleq::new();
    p.raw("LOADI 0 0 26");
    p.clear(27);
    if kind == "mov" {
        p.add_into(26, 27);
    } else {
        p.sub(26, 27);
    }
    p.raw("STOREI 27 0 2");
    p.finish(&format!("{kind}, SUBLEQ core"))
}

fn twin_elementwise(kind: &str) -> String {
    let mut p = Subleq::new();
    let top = p.fresh("loop");
    let done = p.fresh("done");
    p.copy(1, 26);
    p.copy(0, 27);
    p.copy(2, 28);
    p.copy(4, 29);
    p.label(&top);
    p.sub_jump(Z, 26, &done);
    p.raw("LOADI 27 0 32");
    p.raw("LOADI 28 0 33");
    if kind == "add" {
        p.copy(32, 34);
        p.add_into(33, 34);
    } else {
        p.int_mul(32, 33, 34);
    }
    p.raw("STOREI 34 0 29");
    for cursor in [27, 28, 29] {
        p.sub(MINUS1, cursor);
    }
    p.sub(PLUS1, 26);
    p.jump(&top);
    p.label(&done);
    p.finish(&format!("{kind}_ew, SUBLEQ core"))
}

fn twin_fold_add() -> String {
    let mut p = Subleq::new();
    let top = p.fresh("loop");
    let done = p.fresh("done");
    p.copy(1, 26);
    p.copy(0, 27);
    p.clear(33);
    p.label(&top);
    p.sub_jump(Z, 26, &done);
    p.raw("LOADI 27 0 32");
    p.add_into(32, 33);
    p.sub(MINUS1, 27);
    p.sub(PLUS1, 26);
    p.jump(&top);
    p.label(&done);
    p.raw("STOREI 33 0 2");
    p.finish("fold_add, SUBLEQ core")
}

/// SUBLEQ-core twin of a standard skill (same name, same signature).
pub fn subleq_twin(name: &str) -> Option<SkillDef> {
    let base = standard_skill(name)?;
    let src = match name {
        "mov" | "neg" => twin_unary(name),
        "add2" => twin_binary("add"),
        "mul2" => twin_binary("mul"),
        "add_ew" => twin_elementwise("add"),
        "mul_ew" => twin_elementwise("mul"),
        "fold_add" => twin_fold_add(),
        "nop" => NOP.to_string(),
        _ => return None,
    };
    Some(SkillDef {
        code: assemble(&src).expect("twin assembles"),
        scratch_words: TWIN_SCRATCH,
        ..base
    })
}

pub fn subleq_library() -> Vec<SkillDef> {
    STANDARD_NAMES
        .iter()
        .map(|n| subleq_twin(n).unwrap())
        .collect()
}

/// Twins whose arithmetic is only exact for integer-valued inputs.
pub fn twin_needs_integers(name: &str) -> bool {
    matches!(name, "mul2" | "mul_ew")
}

/// A layout just large enough for `skills` plus `memory` words of static memory.
pub fn layout_for(skills: &[SkillDef], memory: usize) -> RegionLayout {
    let code: usize = skills.iter().map(|s| s.code.len()).sum();
    RegionLayout {
        skill_block_capacity: skills.len().max(1),
        code_capacity: code.max(crate::state::INSTRUCTION_WORDS),
        static_memory_capacity: memory,
        ..RegionLayout::default()
    }
}

/// Installs `skills` into a fresh state and runs `skills[index]` on the given
/// input regions; returns the output regions.
pub fn run_isolated(
    skills: &[SkillDef],
    index: usize,
    inputs: &[Vec<Word>],
    output_lengths: &[usize],
    fuel: Fuel,
) -> Result<Vec<Vec<Word>>, InvokeError> {
    let data: usize =
        inputs.iter().map(Vec::len).sum::<usize>() + output_lengths.iter().sum::<usize>();
    let mut state = State::new(layout_for(skills, 4096 + 2 * data))?;
    for s in skills {
        s.install(&mut state)?;
    }
    let mut slots = Vec::new();
    for x in inputs {
        slots.push(Some(state.write_data(x)?));
    }
    for n in output_lengths {
        slots.push(Some(state.write_data(&vec![0.0; *n])?));
    }
    state.set_slots(index, &slots)?;
    state.set_output_mode(index, true)?;
    let (after, _) = invoke_skill(&state, index, fuel)?;
    slots[inputs.len()..]
        .iter()
        .map(|d| Ok(after.read_region(d.unwrap())?))
        .collect()
}

const _: () = assert!(frame::SCRATCH == 26 && 46 < frame::SCRATCH + TWIN_SCRATCH);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{decode_program, Opcode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn run(def: &SkillDef, inputs: &[Vec<f64>], outs: &[usize]) -> Vec<Vec<f64>> {
        run_isolated(std::slice::from_ref(def), 0, inputs, outs, Fuel::default()).unwrap()
    }

    /// Plain-Rust reference for each standard skill.
    fn reference(name: &str, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match name {
            "mov" => vec![vec![x[0][0]]],
            "neg" => vec![vec![0.0 - x[0][0]]],
            "add2" => vec![vec![x[0][0] + x[1][0]]],
            "mul2" => vec![vec![x[0][0] * x[1][0]]],
            "add_ew" => vec![x[0].iter().zip(&x[1]).map(|(a, b)| a + b).collect()],
            "mul_ew" => vec![x[0].iter().zip(&x[1]).map(|(a, b)| a * b).collect()],
            "fold_add" => vec![vec![x[0].iter().fold(0.0, |acc, v| acc + v)]],
            "nop" => vec![],
            _ => unreachable!(),
        }
    }

    fn random_inputs(
        def: &SkillDef,
        rng: &mut ChaCha8Rng,
        integers: bool,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let n = rng.random_range(1..6);
        let len = |s: &SlotShape| match s {
            SlotShape::Fixed(k) => *k,
            SlotShape::Dim(_) => n,
        };
        let draw = |rng: &mut ChaCha8Rng| {
            if integers {
                rng.random_range(-20..=20) as f64
            } else {
                rng.random_range(-100.0..100.0)
            }
        };
        let inputs = def
            .inputs
            .iter()
            .map(|s| (0..len(s)).map(|_| draw(rng)).collect())
            .collect();
        (inputs, def.outputs.iter().map(len).collect())
    }

    fn numerically_equal(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p == q))
    }

    #[test]
    fn standard_skills_match_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for def in standard_library() {
            for _ in 0..50 {
                let (inputs, outs) = random_inputs(&def, &mut rng, false);
                assert!(
                    numerically_equal(&run(&def, &inputs, &outs), &reference(&def.name, &inputs)),
                    "{}",
                    def.name
                );
            }
        }
    }

    #[test]
    fn add2_example() {
        let out = run(
            &standard_skill("add2").unwrap(),
            &[vec![4.0], vec![7.0]],
            &[1],
        );
        assert_eq!(out, vec![vec![11.0]]);
    }

    #[test]
    fn twins_use_only_the_core_set() {
        for def in subleq_library() {
            for ins in decode_program(&def.code).unwrap() {
                assert!(
                    matches!(
                        ins.opcode,
                        Opcode::Subleq
                            | Opcode::Loadi
                            | Opcode::Storei
                            | Opcode::Movi
                            | Opcode::Ret
                    ),
                    "{} uses {:?}",
                    def.name,
                    ins.opcode
                );
            }
        }
    }

    #[test]
    fn twins_match_extended_skills() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in STANDARD_NAMES {
            let (ext, twin) = (standard_skill(name).unwrap(), subleq_twin(name).unwrap());
            for _ in 0..100 {
                let (inputs, outs) = random_inputs(&ext, &mut rng, twin_needs_integers(name));
                assert!(
                    numerically_equal(&run(&ext, &inputs, &outs), &run(&twin, &inputs, &outs)),
                    "{name} on {inputs:?}"
                );
            }
        }
    }

    #[test]
    fn linear_computes_affine_map() {
        let out = run(&linear_skill(vec![0.5, -1.0, 2.0]), &[vec![2.0, 3.0]], &[1]);
        assert_eq!(out, vec![vec![0.5 * 2.0 + -3.0 + 2.0]]);
    }

    #[test]
    fn all_standard_skills_install_together() {
        let lib = standard_library();
        let mut s = State::new(layout_for(&lib, 64)).unwrap();
        for (k, def) in lib.iter().enumerate() {
            assert_eq!(def.install(&mut s).unwrap(), k);
        }
    }
}
