//! Plain-text reports: a header with every default in effect, then ordered
//! sections of `key = value` lines and comma-separated tables. Numbers are
//! printed with 12 significant digits, so equal inputs give equal bytes.

use std::fmt;

use crate::numeric::fmt_sig;
use crate::weights::Verdict;

pub const REPORT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => f.write_str(&fmt_sig(*v, REPORT_DIGITS)),
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v.into())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Verdict> for Value {
    fn from(v: Verdict) -> Self {
        Value::Text(v.as_str().to_string())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or_else(|| Value::Text("none".into()), Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Panics if the row width differs from the header; rows are built in code.
    pub fn row(&mut self, values: Vec<Value>) -> &mut Self {
        assert_eq!(values.len(), self.columns.len(), "row width of table `{}`", self.name);
        self.rows.push(values);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, Value)>,
    pub tables: Vec<Table>,
}

impl Section {
    pub fn kv(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub defaults: Vec<(String, Value)>,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report { command: command.into(), defaults: Vec::new(), sections: Vec::new() }
    }

    pub fn default_value(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.defaults.push((key.to_string(), value.into()));
        self
    }

    pub fn section(&mut self, name: &str) -> &mut Section {
        self.sections.push(Section { name: name.to_string(), ..Section::default() });
        self.sections.last_mut().unwrap()
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# ultradiff {}", self.command)?;
        writeln!(f, "[defaults]")?;
        for (k, v) in &self.defaults {
            writeln!(f, "{k} = {v}")?;
        }
        for s in &self.sections {
            writeln!(f, "\n[{}]", s.name)?;
            for (k, v) in &s.entries {
                writeln!(f, "{k} = {v}")?;
            }
            for t in &s.tables {
                writeln!(f, "\ntable {} ({} rows)", t.name, t.rows.len())?;
                writeln!(f, "{}", t.columns.join(","))?;
                for r in &t.rows {
                    let cells: Vec<String> = r.iter().map(Value::to_string).collect();
                    writeln!(f, "{}", cells.join(","))?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut r = Report::new("demo");
        r.default_value("tol", 1e-8).default_value("grid", "10:1e12:200");
        let s = r.section("result");
        s.kv("gamma", 2.0000000000004).kv("verdict", Verdict::HoldsEmpirically).kv("argmax", None::<f64>);
        let mut t = Table::new("witnesses", &["t", "value"]);
        t.row(vec![10.0.into(), (1.0 / 3.0).into()]);
        s.table(t);
        let text = r.render();
        assert_eq!(
            text,
            "# ultradiff demo\n[defaults]\ntol = 1e-08\ngrid = 10:1e12:200\n\n[result]\ngamma = 2\n\
             verdict = holds-empirically\nargmax = none\n\ntable witnesses (1 rows)\nt,value\n10,0.333333333333\n"
        );
        assert_eq!(text, r.clone().render());
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_panic() {
        Table::new("x", &["a", "b"]).row(vec![1.0.into()]);
    }
}
