//! Assembles a short custom-instruction sequence and prints its listing,
//! then decodes the CFU words back into their fields.

use cfu_sim::isa::{assemble_at, decode_word, listing_line, Instruction};

const SOURCE: &str = "
    lw   a5, 8(sp)
    cfu  0, 0, a5, a5, a3
    cfu  1, 0, a5, a5, a3
    sw   a5, 8(sp)
";

fn main() {
    let image = assemble_at(SOURCE, 0x4000_01a0).expect("source assembles");
    for (i, &word) in image.words.iter().enumerate() {
        println!("{}", listing_line(image.origin + 4 * i as u32, word));
    }
    println!();
    for &word in &image.words {
        if let Instruction::Cfu(c) = decode_word(word) {
            println!(
                "{word:#010x}: funct3={} funct7={} rd=x{} rs1=x{} rs2=x{}",
                c.funct3, c.funct7, c.rd, c.rs1, c.rs2
            );
        }
    }
}
