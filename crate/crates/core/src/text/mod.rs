//! Text formats: programs, ground dumps, network and likes tables, JSON
//! reports.

mod lexer;
mod network;
mod parser;
mod print;
mod report;

pub use network::{parse_likes, parse_network, write_likes, write_network, Like};
pub use parser::parse_program;
pub use print::{atom_text, print_ground, print_program, quote_const, rule_text};
pub use report::{interpretation_json, interpretation_report, json_number, round_sig};
