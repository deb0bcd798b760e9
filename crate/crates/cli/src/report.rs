//! Fixed-format output: every float is written with 17 significant digits
//! so that identical runs produce byte-identical files.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use pendavg::State4;

/// `v` in scientific notation with 17 significant digits; `-0` prints as `0`.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

/// A float serialized through [`fmt_f64`]; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(fmt_f64(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(serializer)
        } else {
            serializer.serialize_none()
        }
    }
}

pub fn nums<const N: usize>(v: [f64; N]) -> [Num; N] {
    v.map(Num)
}

pub fn state_nums(s: &State4) -> [Num; 4] {
    nums(s.to_array())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize infallibly");
    s.push('\n');
    s
}

/// CSV with a header row, `,` separators and LF line endings.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{}", fmt_f64(*v));
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn trajectory_csv(samples: &[(f64, State4)]) -> String {
    let mut csv = Csv::new(&["tau", "th1", "th1d", "th2", "th2d"]);
    for (tau, s) in samples {
        csv.row(&[*tau, s.th1, s.th1d, s.th2, s.th2d]);
    }
    csv.into_string()
}
