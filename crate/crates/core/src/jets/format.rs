//! Line-based jet files:
//!
//! ```text
//! # comment
//! dim 1
//! pcap 2
//! point 0
//! point 1
//! val 0 0 0.0
//! val 0 1 0.0
//! ...
//! ```
//!
//! `val <point> <a1> … <an> <value>` refers to points by their 0-based order
//! of appearance.

use super::{Jet, MultiIndex};
use crate::error::{Error, Result};
use crate::numeric::fmt_sig;

fn data_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::JetData(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| data_err(line, format!("cannot parse {what} `{tok}`")))
}

pub fn parse_jet(text: &str) -> Result<Jet> {
    let mut dim: Option<usize> = None;
    let mut pcap: Option<u32> = None;
    let mut points = Vec::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "dim" | "pcap" if toks.len() != 2 => return Err(data_err(line, format!("`{}` takes one value", toks[0]))),
            "dim" if dim.is_some() => return Err(data_err(line, "repeated `dim`")),
            "pcap" if pcap.is_some() => return Err(data_err(line, "repeated `pcap`")),
            "dim" => dim = Some(num(line, toks[1], "dimension")?),
            "pcap" => pcap = Some(num(line, toks[1], "pcap")?),
            "point" => {
                let n = dim.ok_or_else(|| data_err(line, "`point` before `dim`"))?;
                if toks.len() != n + 1 {
                    return Err(data_err(line, format!("expected {n} coordinates")));
                }
                let coords = toks[1..].iter().map(|t| num(line, t, "coordinate")).collect::<Result<Vec<f64>>>()?;
                points.push(coords);
            }
            "val" => {
                let n = dim.ok_or_else(|| data_err(line, "`val` before `dim`"))?;
                if toks.len() != n + 3 {
                    return Err(data_err(line, format!("expected a point index, {n} multi-index entries and a value")));
                }
                let pt: usize = num(line, toks[1], "point index")?;
                let alpha = toks[2..2 + n].iter().map(|t| num(line, t, "multi-index entry")).collect::<Result<Vec<u32>>>()?;
                let v: f64 = num(line, toks[n + 2], "value")?;
                entries.push((pt, MultiIndex(alpha), v));
            }
            other => return Err(data_err(line, format!("unknown record `{other}`"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::JetData("missing `dim` header".into()))?;
    let pcap = pcap.ok_or_else(|| Error::JetData("missing `pcap` header".into()))?;
    Jet::from_entries(dim, points, pcap, entries)
}

impl Jet {
    /// Serializes in the format read by [`parse_jet`], with 17 significant
    /// digits so values round-trip.
    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}\npcap {}\n", self.dim, self.pcap);
        for p in &self.points {
            let coords: Vec<String> = p.iter().map(|c| fmt_sig(*c, 17)).collect();
            out.push_str(&format!("point {}\n", coords.join(" ")));
        }
        for pt in 0..self.points.len() {
            for (i, alpha) in self.indices.iter().enumerate() {
                let a: Vec<String> = alpha.0.iter().map(u32::to_string).collect();
                out.push_str(&format!("val {pt} {} {}\n", a.join(" "), fmt_sig(self.at(pt, i), 17)));
            }
        }
        out
    }
}

impl std::str::FromStr for Jet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_jet(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "# x^2 on {0, 1}\ndim 1\npcap 2\npoint 0\npoint 1\n\nval 0 0 0\nval 0 1 0\nval 0 2 2\nval 1 0 1\nval 1 1 2\nval 1 2 2 # last\n";

    #[test]
    fn parses_and_round_trips() {
        let jet = parse_jet(SQUARE).unwrap();
        assert_eq!(jet.remainder(0, 1, &MultiIndex(vec![0]), 1).unwrap(), 1.0);
        let again = parse_jet(&jet.to_text()).unwrap();
        assert_eq!(again, jet);
    }

    #[test]
    fn two_dimensional_round_trip() {
        let jet = Jet::from_fn(2, vec![vec![0.0, 0.0], vec![0.5, -1.0 / 3.0]], 3, |x, a| {
            (x[0] + 2.0 * x[1]).exp() * 2f64.powi(a.0[1] as i32)
        })
        .unwrap();
        assert_eq!(parse_jet(&jet.to_text()).unwrap(), jet);
    }

    #[test]
    fn rejects_bad_files() {
        let dup = SQUARE.replace("val 1 2 2 # last", "val 1 2 2\nval 1 2 3");
        assert!(matches!(parse_jet(&dup), Err(Error::JetData(m)) if m.contains("duplicate")));
        let missing = SQUARE.replace("val 1 2 2 # last", "");
        assert!(matches!(parse_jet(&missing), Err(Error::JetData(m)) if m.contains("point 1, alpha (2)")));
        assert!(matches!(parse_jet("pcap 1\n"), Err(Error::JetData(m)) if m.contains("dim")));
        assert!(matches!(parse_jet("dim 1\npcap 0\npoint 0 1\n"), Err(Error::JetData(m)) if m.starts_with("line 3")));
        assert!(parse_jet("dim 1\npcap 0\nfoo\n").is_err());
        assert!(parse_jet("dim 1\npcap 0\npoint 0\nval 0 0 abc\n").is_err());
    }
}
