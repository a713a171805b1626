//! Result tables written as CSV.
//!
//! Every row starts with the provenance columns
//! `schema_version, seed, J, dt, T, lambda, beta, mode`; floats are written
//! in scientific notation with 17 significant digits.

use std::path::Path;

use crate::dynamics::DynamicsConfig;

use super::config::SCHEMA_VERSION;

pub const PROVENANCE_COLUMNS: [&str; 8] = ["schema_version", "seed", "J", "dt", "T", "lambda", "beta", "mode"];

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Float(v) => format_float(*v),
            Value::Int(v) => v.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Provenance of one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub j: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub mode: Option<&'static str>,
}

impl Provenance {
    pub fn seed_only(seed: u64) -> Self {
        Self { seed, j: None, dt: None, t_final: None, lambda: None, beta: None, mode: None }
    }

    pub fn of(cfg: &DynamicsConfig) -> Self {
        Self {
            seed: cfg.seed,
            j: Some(cfg.particles),
            dt: Some(cfg.dt),
            t_final: Some(cfg.t_final),
            lambda: Some(cfg.lambda),
            beta: Some(cfg.beta),
            mode: Some(cfg.mode.as_str()),
        }
    }

    fn values(&self) -> [Value; 8] {
        [
            Value::Int(SCHEMA_VERSION as u64),
            self.seed.into(),
            self.j.into(),
            self.dt.into(),
            self.t_final.into(),
            self.lambda.into(),
            self.beta.into(),
            self.mode.into(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<(Provenance, Vec<Value>)>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, provenance: Provenance, values: Vec<Value>) {
        assert_eq!(values.len(), self.columns.len(), "row width does not match the header");
        self.rows.push((provenance, values));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Value of `name` in the last row.
    pub fn last(&self, name: &str) -> Option<&Value> {
        let k = self.column(name)?;
        self.rows.last().map(|(_, v)| &v[k])
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = PROVENANCE_COLUMNS.iter().copied().chain(self.columns.iter().map(String::as_str)).collect();
        w.write_record(&header).expect("writing to memory");
        for (prov, values) in &self.rows {
            let record: Vec<String> = prov.values().iter().chain(values).map(Value::render).collect();
            w.write_record(&record).expect("writing to memory");
        }
        w.into_inner().expect("flushing to memory")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_float(f64::NAN), "NaN");
        let v = 1.0 / 3.0;
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new(["kind", "x"]);
        t.push(Provenance::seed_only(9), vec!["a,b".into(), 0.5.into()]);
        let text = String::from_utf8(t.to_csv_bytes()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "schema_version,seed,J,dt,T,lambda,beta,mode,kind,x");
        assert_eq!(lines.next().unwrap(), "1,9,,,,,,,\"a,b\",5.0000000000000000e-1");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_rejected() {
        let mut t = ResultTable::new(["x"]);
        t.push(Provenance::seed_only(0), vec![]);
    }
}
