//! Tidy output tables with CSV and JSON emitters.

use std::io::{self, Write};

use serde_json::{Map, Number, Value};

use crate::inference::TestResult;
use crate::montecarlo::{DispersionRow, IndicatorRow, JointStats, PowerCell, RelativePowerCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(u64),
    /// Estimated or computed quantity, printed at the table's precision.
    Real(f64),
    /// Input parameter, printed exactly as given.
    Param(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Field {
    fn csv(&self, decimals: usize) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Real(v) => format!("{v:.decimals$}"),
            Field::Param(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Int(v) => Value::from(*v),
            Field::Real(v) | Field::Param(v) => {
                Number::from_f64(*v).map_or(Value::Null, Value::Number)
            }
            Field::Text(s) => Value::from(s.as_str()),
            Field::Bool(b) => Value::from(*b),
            Field::Missing => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    columns: Vec<String>,
    rows: Vec<Vec<Field>>,
    decimals: usize,
}

impl ExperimentTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            decimals: 6,
        }
    }

    pub fn with_decimals(mut self, decimals: usize) -> Self {
        self.decimals = decimals;
        self
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Field>] {
        &self.rows
    }

    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        if header {
            w.write_record(&self.columns)?;
        }
        for row in &self.rows {
            w.write_record(row.iter().map(|f| f.csv(self.decimals)))?;
        }
        w.flush()
    }

    /// Array of objects keyed by column name.
    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Field::json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut out, &records)?;
        out.write_all(b"\n")
    }

    pub fn write<W: Write>(&self, out: W, format: Format, header: bool) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out, header),
            Format::Json => self.write_json(out),
        }
    }

    pub fn to_string(&self, format: Format, header: bool) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, format, header)
            .expect("writing to memory");
        String::from_utf8(buf).expect("csv and json output is utf-8")
    }
}

/// Conversion of a result record into a table row.
pub trait TableRow {
    const COLUMNS: &'static [&'static str];
    fn fields(&self) -> Vec<Field>;

    fn table(rows: &[Self]) -> ExperimentTable
    where
        Self: Sized,
    {
        let mut t = ExperimentTable::new(Self::COLUMNS.iter().copied());
        for r in rows {
            t.push(r.fields());
        }
        t
    }
}

impl TableRow for PowerCell {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "rho",
        "power_matching",
        "power_pearson",
        "reps",
        "mc_stderr",
    ];
    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Int(self.n as u64),
            Field::Param(self.rho),
            Field::Real(self.power_matching),
            Field::Real(self.power_pearson),
            Field::Int(self.reps_used),
            Field::Real(self.mc_stderr),
        ]
    }
}

impl TableRow for RelativePowerCell {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "rho",
        "nominal_power",
        "power_matching",
        "power_pearson",
        "reps",
        "mc_stderr",
    ];
    fn fields(&self) -> Vec<Field> {
        let mut f = self.cell.fields();
        f.insert(2, Field::Param(self.nominal_power));
        f
    }
}

impl TableRow for JointStats {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "corr_m_rho",
        "corr_rho_tau",
        "std_slope",
        "r_squared",
        "sd_m",
        "sd_rho",
    ];
    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Int(self.n as u64),
            Field::Real(self.corr_m_rho),
            Field::Real(self.corr_rho_tau),
            Field::Real(self.std_slope_m_rho),
            Field::Real(self.r_squared_m_rho),
            Field::Real(self.sd_m),
            Field::Real(self.sd_rho),
        ]
    }
}

impl TableRow for DispersionRow {
    const COLUMNS: &'static [&'static str] = &["n", "sd_m", "sd_rho"];
    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Int(self.n as u64),
            Field::Real(self.sd_m),
            Field::Real(self.sd_rho),
        ]
    }
}

impl TableRow for IndicatorRow {
    const COLUMNS: &'static [&'static str] = &["n", "rho", "bucket", "prob_overestimate", "count"];
    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Int(self.n as u64),
            Field::Param(self.rho),
            Field::Text(self.m_bucket.as_str().to_string()),
            self.prob_overestimate.map_or(Field::Missing, Field::Real),
            Field::Int(self.bucket_count),
        ]
    }
}

impl TableRow for TestResult {
    const COLUMNS: &'static [&'static str] =
        &["statistic", "p_value", "mode", "alpha", "reject", "n"];
    fn fields(&self) -> Vec<Field> {
        vec![
            // m is an integer; r is a real.
            if self.statistic.fract() == 0.0 && self.mode != crate::inference::TestMode::TTest {
                Field::Int(self.statistic as u64)
            } else {
                Field::Real(self.statistic)
            },
            Field::Real(self.p_value),
            Field::Text(self.mode.as_str().to_string()),
            Field::Param(self.alpha),
            Field::Bool(self.reject),
            Field::Int(self.n as u64),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_shapes() {
        let mut t = ExperimentTable::new(["a", "b", "c"]);
        t.push(vec![Field::Int(3), Field::Real(0.5), Field::Missing]);
        assert_eq!(t.to_string(Format::Csv, true), "a,b,c\n3,0.500000,\n");
        assert_eq!(t.to_string(Format::Csv, false), "3,0.500000,\n");
        let v: Value = serde_json::from_str(&t.to_string(Format::Json, true)).unwrap();
        assert_eq!(v[0]["a"], 3);
        assert_eq!(v[0]["b"], 0.5);
        assert!(v[0]["c"].is_null());
    }

    #[test]
    fn precision_is_configurable() {
        let mut t = ExperimentTable::new(["p"]).with_decimals(4);
        t.push(vec![Field::Real(0.0)]);
        t.push(vec![Field::Real(1.0 / 24.0)]);
        assert_eq!(t.to_string(Format::Csv, false), "0.0000\n0.0417\n");
    }
}
