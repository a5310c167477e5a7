use super::{DecodedInstr, Op};

fn r_type(f7: u32, rs2: u8, rs1: u8, f3: u32, rd: u8, opcode: u32) -> u32 {
    (f7 << 25) | ((rs2 as u32) << 20) | ((rs1 as u32) << 15) | (f3 << 12) | ((rd as u32) << 7) | opcode
}

fn i_type(imm: i32, rs1: u8, f3: u32, rd: u8, opcode: u32) -> u32 {
    (((imm as u32) & 0xFFF) << 20) | ((rs1 as u32) << 15) | (f3 << 12) | ((rd as u32) << 7) | opcode
}

fn s_type(imm: i32, rs2: u8, rs1: u8, f3: u32, opcode: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 5) & 0x7F) << 25)
        | ((rs2 as u32) << 20)
        | ((rs1 as u32) << 15)
        | (f3 << 12)
        | ((imm & 0x1F) << 7)
        | opcode
}

fn b_type(imm: i32, rs2: u8, rs1: u8, f3: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 12) & 1) << 31)
        | (((imm >> 5) & 0x3F) << 25)
        | ((rs2 as u32) << 20)
        | ((rs1 as u32) << 15)
        | (f3 << 12)
        | (((imm >> 1) & 0xF) << 8)
        | (((imm >> 11) & 1) << 7)
        | 0b1100011
}

fn j_type(imm: i32, rd: u8) -> u32 {
    let imm = imm as u32;
    (((imm >> 20) & 1) << 31)
        | (((imm >> 1) & 0x3FF) << 21)
        | (((imm >> 11) & 1) << 20)
        | (((imm >> 12) & 0xFF) << 12)
        | ((rd as u32) << 7)
        | 0b1101111
}

/// Produce the 32-bit encoding of an instruction (compressed instructions
/// encode to their expansion). Inverse of [`decode`](super::decode) for every
/// legal word.
pub fn encode(d: &DecodedInstr) -> u32 {
    use Op::*;
    let (rd, rs1, rs2, imm) = (d.rd, d.rs1, d.rs2, d.imm);
    match d.op {
        Lui => ((imm as u32) & 0xFFFF_F000) | ((rd as u32) << 7) | 0b0110111,
        Auipc => ((imm as u32) & 0xFFFF_F000) | ((rd as u32) << 7) | 0b0010111,
        Jal => j_type(imm, rd),
        Jalr => i_type(imm, rs1, 0, rd, 0b1100111),
        Beq => b_type(imm, rs2, rs1, 0b000),
        Bne => b_type(imm, rs2, rs1, 0b001),
        Blt => b_type(imm, rs2, rs1, 0b100),
        Bge => b_type(imm, rs2, rs1, 0b101),
        Bltu => b_type(imm, rs2, rs1, 0b110),
        Bgeu => b_type(imm, rs2, rs1, 0b111),
        Lb => i_type(imm, rs1, 0b000, rd, 0b0000011),
        Lh => i_type(imm, rs1, 0b001, rd, 0b0000011),
        Lw => i_type(imm, rs1, 0b010, rd, 0b0000011),
        Lbu => i_type(imm, rs1, 0b100, rd, 0b0000011),
        Lhu => i_type(imm, rs1, 0b101, rd, 0b0000011),
        Sb => s_type(imm, rs2, rs1, 0b000, 0b0100011),
        Sh => s_type(imm, rs2, rs1, 0b001, 0b0100011),
        Sw => s_type(imm, rs2, rs1, 0b010, 0b0100011),
        Addi => i_type(imm, rs1, 0b000, rd, 0b0010011),
        Slti => i_type(imm, rs1, 0b010, rd, 0b0010011),
        Sltiu => i_type(imm, rs1, 0b011, rd, 0b0010011),
        Xori => i_type(imm, rs1, 0b100, rd, 0b0010011),
        Ori => i_type(imm, rs1, 0b110, rd, 0b0010011),
        Andi => i_type(imm, rs1, 0b111, rd, 0b0010011),
        Slli => i_type(imm & 0x1F, rs1, 0b001, rd, 0b0010011),
        Srli => i_type(imm & 0x1F, rs1, 0b101, rd, 0b0010011),
        Srai => i_type((imm & 0x1F) | 0x400, rs1, 0b101, rd, 0b0010011),
        Add => r_type(0, rs2, rs1, 0b000, rd, 0b0110011),
        Sub => r_type(0b0100000, rs2, rs1, 0b000, rd, 0b0110011),
        Sll => r_type(0, rs2, rs1, 0b001, rd, 0b0110011),
        Slt => r_type(0, rs2, rs1, 0b010, rd, 0b0110011),
        Sltu => r_type(0, rs2, rs1, 0b011, rd, 0b0110011),
        Xor => r_type(0, rs2, rs1, 0b100, rd, 0b0110011),
        Srl => r_type(0, rs2, rs1, 0b101, rd, 0b0110011),
        Sra => r_type(0b0100000, rs2, rs1, 0b101, rd, 0b0110011),
        Or => r_type(0, rs2, rs1, 0b110, rd, 0b0110011),
        And => r_type(0, rs2, rs1, 0b111, rd, 0b0110011),
        Mul => r_type(1, rs2, rs1, 0b000, rd, 0b0110011),
        Mulh => r_type(1, rs2, rs1, 0b001, rd, 0b0110011),
        Mulhsu => r_type(1, rs2, rs1, 0b010, rd, 0b0110011),
        Mulhu => r_type(1, rs2, rs1, 0b011, rd, 0b0110011),
        Div => r_type(1, rs2, rs1, 0b100, rd, 0b0110011),
        Divu => r_type(1, rs2, rs1, 0b101, rd, 0b0110011),
        Rem => r_type(1, rs2, rs1, 0b110, rd, 0b0110011),
        Remu => r_type(1, rs2, rs1, 0b111, rd, 0b0110011),
        Fence => i_type(imm, rs1, 0b000, rd, 0b0001111),
        Ecall => 0x0000_0073,
        Ebreak => 0x0010_0073,
        Mret => 0x3020_0073,
        Wfi => 0x1050_0073,
        Csrrw => i_type(d.csr as i32, rs1, 0b001, rd, 0b1110011),
        Csrrs => i_type(d.csr as i32, rs1, 0b010, rd, 0b1110011),
        Csrrc => i_type(d.csr as i32, rs1, 0b011, rd, 0b1110011),
        Csrrwi => i_type(d.csr as i32, rs1, 0b101, rd, 0b1110011),
        Csrrsi => i_type(d.csr as i32, rs1, 0b110, rd, 0b1110011),
        Csrrci => i_type(d.csr as i32, rs1, 0b111, rd, 0b1110011),
    }
}
