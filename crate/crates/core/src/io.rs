//! Small CSV helpers shared by trajectory and report export.

use std::io::{self, Write};

/// 17 significant digits; parsing the text back gives the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_row<W: Write + ?Sized>(w: &mut W, cells: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}
