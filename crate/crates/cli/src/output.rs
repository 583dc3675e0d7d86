//! Trace CSV and JSON writers. Every float is printed with 17 significant digits.

use std::io::{self, Write};
use std::path::Path;

use geoprox::{IterationTrace, Manifold};
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Wraps a serde_json formatter so that floats are written as `{:.16e}`.
struct Sci<F>(F);

impl<F: Formatter> Formatter for Sci<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn serialize_with<T: Serialize + ?Sized, F: Formatter>(value: &T, f: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci(f));
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serialize_with(value, PrettyFormatter::new());
    s.push('\n');
    s
}

pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> String {
    serialize_with(value, CompactFormatter)
}

/// Writes one row per trace; points are given in intrinsic coordinates.
pub fn write_trace_csv(path: &Path, m: &Manifold, traces: &[IterationTrace], n_refs: usize) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = m.dim();
    let mut header: Vec<String> = [
        "k",
        "mu_k",
        "lambda_k",
        "step_dist",
        "bregman_step",
        "inner_iterations",
        "inner_gap",
        "inner_stationarity",
        "inner_converged",
        "limsup_term",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n).map(|i| format!("x_k_{i}")));
    header.extend((0..n).map(|i| format!("x_next_{i}")));
    header.extend((0..n_refs).map(|j| format!("d_ref_{j}")));
    w.write_record(&header)?;
    for t in traces {
        let mut row = vec![
            t.k.to_string(),
            fmt_f64(t.mu_k),
            fmt_f64(t.lambda_k),
            fmt_f64(t.step_dist),
            fmt_f64(t.bregman_step),
            t.inner.iterations.to_string(),
            fmt_f64(t.inner.gap),
            fmt_f64(t.inner.stationarity),
            t.inner.converged.to_string(),
            t.limsup_term.map(fmt_f64).unwrap_or_default(),
        ];
        row.extend(m.intrinsic(&t.x_k).iter().map(|&v| fmt_f64(v)));
        row.extend(m.intrinsic(&t.x_next).iter().map(|&v| fmt_f64(v)));
        row.extend(t.d_to_refs.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let s = to_json_line(&json!({"a": 0.1, "b": [1.0, -2.5], "n": 3, "z": f64::NAN}));
        assert_eq!(s, r#"{"a":1.0000000000000001e-1,"b":[1.0000000000000000e0,-2.5000000000000000e0],"n":3,"z":null}"#);
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn pretty_output_parses() {
        let s = to_json_pretty(&json!({"x": [0.5, 1e-300]}));
        assert!(s.contains("\n  \"x\": [\n"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"][1].as_f64(), Some(1e-300));
    }
}
