use super::{DecodeError, DecodedInstr, Op};

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn imm_i(word: u32) -> i32 {
    (word as i32) >> 20
}

fn imm_s(word: u32) -> i32 {
    (((word & 0xFE00_0000) as i32) >> 20) | bits(word, 11, 7) as i32
}

fn imm_b(word: u32) -> i32 {
    (((word & 0x8000_0000) as i32) >> 19)
        | (bits(word, 7, 7) << 11) as i32
        | (bits(word, 30, 25) << 5) as i32
        | (bits(word, 11, 8) << 1) as i32
}

fn imm_u(word: u32) -> i32 {
    (word & 0xFFFF_F000) as i32
}

fn imm_j(word: u32) -> i32 {
    (((word & 0x8000_0000) as i32) >> 11)
        | (bits(word, 19, 12) << 12) as i32
        | (bits(word, 20, 20) << 11) as i32
        | (bits(word, 30, 21) << 1) as i32
}

/// Decode a 32-bit instruction word.
///
/// Words whose low two bits are not `0b11` are not 32-bit encodings and are
/// rejected here; callers holding a 16-bit parcel use
/// [`decode_compressed`](super::decode_compressed).
pub fn decode(word: u32) -> Result<DecodedInstr, DecodeError> {
    let illegal = Err(DecodeError::IllegalInstruction(word));
    if word & 0b11 != 0b11 || bits(word, 4, 2) == 0b111 {
        return illegal;
    }
    let rd = bits(word, 11, 7) as u8;
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let funct3 = bits(word, 14, 12);
    let funct7 = bits(word, 31, 25);

    let mut d = DecodedInstr::new(Op::Add);
    let op = match bits(word, 6, 0) {
        0b0110111 => {
            d.rd = rd;
            d.imm = imm_u(word);
            Op::Lui
        }
        0b0010111 => {
            d.rd = rd;
            d.imm = imm_u(word);
            Op::Auipc
        }
        0b1101111 => {
            d.rd = rd;
            d.imm = imm_j(word);
            Op::Jal
        }
        0b1100111 => {
            if funct3 != 0 {
                return illegal;
            }
            d.rd = rd;
            d.rs1 = rs1;
            d.imm = imm_i(word);
            Op::Jalr
        }
        0b1100011 => {
            d.rs1 = rs1;
            d.rs2 = rs2;
            d.imm = imm_b(word);
            match funct3 {
                0b000 => Op::Beq,
                0b001 => Op::Bne,
                0b100 => Op::Blt,
                0b101 => Op::Bge,
                0b110 => Op::Bltu,
                0b111 => Op::Bgeu,
                _ => return illegal,
            }
        }
        0b0000011 => {
            d.rd = rd;
            d.rs1 = rs1;
            d.imm = imm_i(word);
            match funct3 {
                0b000 => Op::Lb,
                0b001 => Op::Lh,
                0b010 => Op::Lw,
                0b100 => Op::Lbu,
                0b101 => Op::Lhu,
                _ => return illegal,
            }
        }
        0b0100011 => {
            d.rs1 = rs1;
            d.rs2 = rs2;
            d.imm = imm_s(word);
            match funct3 {
                0b000 => Op::Sb,
                0b001 => Op::Sh,
                0b010 => Op::Sw,
                _ => return illegal,
            }
        }
        0b0010011 => {
            d.rd = rd;
            d.rs1 = rs1;
            d.imm = imm_i(word);
            match funct3 {
                0b000 => Op::Addi,
                0b010 => Op::Slti,
                0b011 => Op::Sltiu,
                0b100 => Op::Xori,
                0b110 => Op::Ori,
                0b111 => Op::Andi,
                0b001 if funct7 == 0 => {
                    d.imm = rs2 as i32;
                    Op::Slli
                }
                0b101 if funct7 == 0 => {
                    d.imm = rs2 as i32;
                    Op::Srli
                }
                0b101 if funct7 == 0b0100000 => {
                    d.imm = rs2 as i32;
                    Op::Srai
                }
                _ => return illegal,
            }
        }
        0b0110011 => {
            d.rd = rd;
            d.rs1 = rs1;
            d.rs2 = rs2;
            match (funct7, funct3) {
                (0, 0b000) => Op::Add,
                (0b0100000, 0b000) => Op::Sub,
                (0, 0b001) => Op::Sll,
                (0, 0b010) => Op::Slt,
                (0, 0b011) => Op::Sltu,
                (0, 0b100) => Op::Xor,
                (0, 0b101) => Op::Srl,
                (0b0100000, 0b101) => Op::Sra,
                (0, 0b110) => Op::Or,
                (0, 0b111) => Op::And,
                (1, 0b000) => Op::Mul,
                (1, 0b001) => Op::Mulh,
                (1, 0b010) => Op::Mulhsu,
                (1, 0b011) => Op::Mulhu,
                (1, 0b100) => Op::Div,
                (1, 0b101) => Op::Divu,
                (1, 0b110) => Op::Rem,
                (1, 0b111) => Op::Remu,
                _ => return illegal,
            }
        }
        0b0001111 => {
            // FENCE only; FENCE.I (Zifencei) is not part of this profile.
            if funct3 != 0 {
                return illegal;
            }
            d.rd = rd;
            d.rs1 = rs1;
            d.imm = imm_i(word);
            Op::Fence
        }
        0b1110011 => {
            if funct3 == 0 {
                if rd != 0 || rs1 != 0 {
                    return illegal;
                }
                match bits(word, 31, 20) {
                    0x000 => Op::Ecall,
                    0x001 => Op::Ebreak,
                    0x302 => Op::Mret,
                    0x105 => Op::Wfi,
                    _ => return illegal,
                }
            } else {
                d.rd = rd;
                d.rs1 = rs1;
                d.csr = bits(word, 31, 20) as u16;
                match funct3 {
                    0b001 => Op::Csrrw,
                    0b010 => Op::Csrrs,
                    0b011 => Op::Csrrc,
                    0b101 => Op::Csrrwi,
                    0b110 => Op::Csrrsi,
                    0b111 => Op::Csrrci,
                    _ => return illegal,
                }
            }
        }
        _ => return illegal,
    };
    d.op = op;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::DecodeError;

    #[test]
    fn addi_x1_x0_5() {
        let d = decode(0x0050_0093).unwrap();
        assert_eq!(d.op, Op::Addi);
        assert_eq!((d.rd, d.rs1, d.imm), (1, 0, 5));
        assert_eq!(d.to_string(), "addi x1, x0, 5");
    }

    #[test]
    fn canonical_nop() {
        let d = decode(0x0000_0013).unwrap();
        assert_eq!(d.op, Op::Addi);
        assert_eq!((d.rd, d.rs1, d.imm), (0, 0, 0));
    }

    #[test]
    fn all_zero_and_all_one_words_are_illegal() {
        assert_eq!(decode(0), Err(DecodeError::IllegalInstruction(0)));
        assert_eq!(decode(0xFFFF_FFFF), Err(DecodeError::IllegalInstruction(0xFFFF_FFFF)));
    }

    #[test]
    fn shift_with_reserved_funct7_is_illegal() {
        // slli x1, x1, 1 with bit 25 set
        assert!(decode(0x0210_9093).is_err());
    }

    #[test]
    fn negative_branch_offset() {
        // beq x0, x0, -4
        let d = decode(0xFE00_0EE3).unwrap();
        assert_eq!(d.op, Op::Beq);
        assert_eq!(d.imm, -4);
    }
}
