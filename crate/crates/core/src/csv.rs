//! Minimal CSV rendering: header row, optional `#` comment lines and
//! round-trip exact floating point text.

use std::fmt::Write;

/// Shortest decimal text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct Table {
    out: String,
}

impl Table {
    pub fn new(comments: &[String], header: &[&str]) -> Table {
        let mut out = String::new();
        for c in comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(out, "{}", header.join(","));
        Table { out }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.out, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_numbers() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678, f64::INFINITY] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn layout() {
        let mut t = Table::new(&["seed = 3".to_string()], &["a", "b"]);
        t.row(&[num(1.0), num(0.5)]);
        assert_eq!(t.finish(), "# seed = 3\na,b\n1.0,0.5\n");
    }
}
