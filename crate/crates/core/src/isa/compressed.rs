use super::{DecodeError, DecodedInstr, Op};

fn bit(h: u32, n: u32) -> u32 {
    (h >> n) & 1
}

fn field(h: u32, hi: u32, lo: u32) -> u32 {
    (h >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn sext(value: u32, width: u32) -> i32 {
    let shift = 32 - width;
    ((value << shift) as i32) >> shift
}

/// 3-bit register field of the CIW/CL/CS/CB formats (x8..x15).
fn creg(h: u32, lo: u32) -> u8 {
    (field(h, lo + 2, lo) + 8) as u8
}

fn imm6(h: u32) -> i32 {
    sext((bit(h, 12) << 5) | field(h, 6, 2), 6)
}

fn cj_offset(h: u32) -> i32 {
    let v = (bit(h, 12) << 11)
        | (bit(h, 11) << 4)
        | (field(h, 10, 9) << 8)
        | (bit(h, 8) << 10)
        | (bit(h, 7) << 6)
        | (bit(h, 6) << 7)
        | (field(h, 5, 3) << 1)
        | (bit(h, 2) << 5);
    sext(v, 12)
}

fn cb_offset(h: u32) -> i32 {
    let v =
        (bit(h, 12) << 8) | (field(h, 11, 10) << 3) | (field(h, 6, 5) << 6) | (field(h, 4, 3) << 1) | (bit(h, 2) << 5);
    sext(v, 9)
}

fn instr(op: Op, rd: u8, rs1: u8, rs2: u8, imm: i32) -> DecodedInstr {
    DecodedInstr {
        op,
        rd,
        rs1,
        rs2,
        imm,
        csr: 0,
        compressed: true,
    }
}

/// Expand a 16-bit RV32C parcel into its canonical 32-bit equivalent.
///
/// HINT encodings (e.g. `c.addi x0, n`) decode to their no-op expansion;
/// reserved encodings and the floating-point forms are illegal.
pub fn decode_compressed(half: u16) -> Result<DecodedInstr, DecodeError> {
    let h = half as u32;
    let illegal = Err(DecodeError::IllegalInstruction(h));
    let rd_full = field(h, 11, 7) as u8;
    let rs2_full = field(h, 6, 2) as u8;

    let d = match (h & 0b11, field(h, 15, 13)) {
        (0b11, _) => return Err(DecodeError::NotCompressed(half)),
        // c.addi4spn
        (0b00, 0b000) => {
            let uimm = (field(h, 12, 11) << 4) | (field(h, 10, 7) << 6) | (bit(h, 6) << 2) | (bit(h, 5) << 3);
            if uimm == 0 {
                return illegal;
            }
            instr(Op::Addi, creg(h, 2), 2, 0, uimm as i32)
        }
        // c.lw / c.sw
        (0b00, 0b010) | (0b00, 0b110) => {
            let uimm = (field(h, 12, 10) << 3) | (bit(h, 6) << 2) | (bit(h, 5) << 6);
            if field(h, 15, 13) == 0b010 {
                instr(Op::Lw, creg(h, 2), creg(h, 7), 0, uimm as i32)
            } else {
                instr(Op::Sw, 0, creg(h, 7), creg(h, 2), uimm as i32)
            }
        }
        (0b00, _) => return illegal,
        // c.addi / c.nop
        (0b01, 0b000) => instr(Op::Addi, rd_full, rd_full, 0, imm6(h)),
        // c.jal
        (0b01, 0b001) => instr(Op::Jal, 1, 0, 0, cj_offset(h)),
        // c.li
        (0b01, 0b010) => instr(Op::Addi, rd_full, 0, 0, imm6(h)),
        (0b01, 0b011) => {
            if rd_full == 2 {
                // c.addi16sp
                let v =
                    (bit(h, 12) << 9) | (bit(h, 6) << 4) | (bit(h, 5) << 6) | (field(h, 4, 3) << 7) | (bit(h, 2) << 5);
                if v == 0 {
                    return illegal;
                }
                instr(Op::Addi, 2, 2, 0, sext(v, 10))
            } else {
                // c.lui
                let v = (bit(h, 12) << 17) | (field(h, 6, 2) << 12);
                if v == 0 {
                    return illegal;
                }
                instr(Op::Lui, rd_full, 0, 0, sext(v, 18))
            }
        }
        (0b01, 0b100) => {
            let rd = creg(h, 7);
            match field(h, 11, 10) {
                0b00 | 0b01 => {
                    if bit(h, 12) != 0 {
                        return illegal;
                    }
                    let op = if field(h, 11, 10) == 0 { Op::Srli } else { Op::Srai };
                    instr(op, rd, rd, 0, field(h, 6, 2) as i32)
                }
                0b10 => instr(Op::Andi, rd, rd, 0, imm6(h)),
                _ => {
                    if bit(h, 12) != 0 {
                        return illegal;
                    }
                    let op = match field(h, 6, 5) {
                        0b00 => Op::Sub,
                        0b01 => Op::Xor,
                        0b10 => Op::Or,
                        _ => Op::And,
                    };
                    instr(op, rd, rd, creg(h, 2), 0)
                }
            }
        }
        // c.j
        (0b01, 0b101) => instr(Op::Jal, 0, 0, 0, cj_offset(h)),
        // c.beqz / c.bnez
        (0b01, 0b110) => instr(Op::Beq, 0, creg(h, 7), 0, cb_offset(h)),
        (0b01, 0b111) => instr(Op::Bne, 0, creg(h, 7), 0, cb_offset(h)),
        // c.slli
        (0b10, 0b000) => {
            if bit(h, 12) != 0 {
                return illegal;
            }
            instr(Op::Slli, rd_full, rd_full, 0, field(h, 6, 2) as i32)
        }
        // c.lwsp
        (0b10, 0b010) => {
            if rd_full == 0 {
                return illegal;
            }
            let uimm = (bit(h, 12) << 5) | (field(h, 6, 4) << 2) | (field(h, 3, 2) << 6);
            instr(Op::Lw, rd_full, 2, 0, uimm as i32)
        }
        (0b10, 0b100) => match (bit(h, 12), rd_full, rs2_full) {
            (0, 0, 0) => return illegal,
            // c.jr
            (0, rs1, 0) => instr(Op::Jalr, 0, rs1, 0, 0),
            // c.mv
            (0, rd, rs2) => instr(Op::Add, rd, 0, rs2, 0),
            (_, 0, 0) => instr(Op::Ebreak, 0, 0, 0, 0),
            // c.jalr
            (_, rs1, 0) => instr(Op::Jalr, 1, rs1, 0, 0),
            // c.add
            (_, rd, rs2) => instr(Op::Add, rd, rd, rs2, 0),
        },
        // c.swsp
        (0b10, 0b110) => {
            let uimm = (field(h, 12, 9) << 2) | (field(h, 8, 7) << 6);
            instr(Op::Sw, 0, 2, rs2_full, uimm as i32)
        }
        _ => return illegal,
    };
    Ok(d)
}
