use super::{DecodedInstr, Op, OpClass};

/// Base latency of DIV/DIVU/REM/REMU.
pub const DIV_CYCLES: u32 = 37;

/// What happened while an instruction executed that affects its latency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimingOutcome {
    pub branch_taken: bool,
    /// Extra bus transactions caused by accesses straddling a word boundary
    /// (misaligned loads/stores, 32-bit instructions at pc % 4 == 2).
    pub split_accesses: u32,
    /// Cycles the bus made us wait beyond grant-now/respond-next-cycle.
    pub wait_states: u32,
}

fn base_cycles(instr: &DecodedInstr, taken: bool) -> u32 {
    match instr.class() {
        OpClass::Alu | OpClass::Csr | OpClass::Fence | OpClass::Mul => 1,
        OpClass::Branch => {
            if taken {
                2
            } else {
                1
            }
        }
        OpClass::Jal | OpClass::Jalr => 2,
        OpClass::Load | OpClass::Store => 2,
        OpClass::Div => DIV_CYCLES,
        OpClass::System => {
            if instr.op == Op::Mret {
                2
            } else {
                1
            }
        }
    }
}

/// Cycles consumed by one instruction: decision-table base plus one cycle per
/// split access plus observed wait states.
pub fn timing_cycles(instr: &DecodedInstr, outcome: TimingOutcome) -> u32 {
    base_cycles(instr, outcome.branch_taken) + outcome.split_accesses + outcome.wait_states
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::decode;

    fn cycles(word: u32, taken: bool) -> u32 {
        timing_cycles(
            &decode(word).unwrap(),
            TimingOutcome {
                branch_taken: taken,
                ..Default::default()
            },
        )
    }

    #[test]
    fn decision_table() {
        assert_eq!(cycles(0x0050_0093, false), 1); // addi
        assert_eq!(cycles(0x0000_006F, true), 2); // jal x0, 0
        assert_eq!(cycles(0x0000_A103, false), 2); // lw
        assert_eq!(cycles(0x0020_A023, false), 2); // sw
        assert_eq!(cycles(0xFE00_0EE3, false), 1); // beq not taken
        assert_eq!(cycles(0xFE00_0EE3, true), 2); // beq taken
        assert_eq!(cycles(0x0220_81B3, false), 1); // mul
        assert_eq!(cycles(0x0200_C1B3, false), 37); // div
        assert_eq!(cycles(0x3000_22F3, false), 1); // csrrs
        assert_eq!(cycles(0x0FF0_000F, false), 1); // fence
    }

    #[test]
    fn waits_and_splits_add_up() {
        let lw = decode(0x0000_A103).unwrap();
        let t = TimingOutcome {
            branch_taken: false,
            split_accesses: 1,
            wait_states: 3,
        };
        assert_eq!(timing_cycles(&lw, t), 6);
    }
}
