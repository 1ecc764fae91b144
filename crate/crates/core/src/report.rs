//! Canonical JSON emission shared by all reports.
//!
//! Objects are written with lexicographically sorted keys and two-space
//! indentation; floats are written with a fixed number of decimals so that
//! reports are byte-stable across runs and platforms.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

pub const DEFAULT_FLOAT_DECIMALS: usize = 6;

struct FixedFloatFormatter<'a> {
    inner: PrettyFormatter<'a>,
    decimals: usize,
}

impl FixedFloatFormatter<'_> {
    fn float<W: ?Sized + io::Write>(&self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(crate::tf_graph::fixed(v, self.decimals).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
}

impl Formatter for FixedFloatFormatter<'_> {
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.float(w, v as f64)
    }
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        self.float(w, v)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes `value` as canonical JSON with `decimals` digits per float.
pub fn to_canonical_json_with<T: Serialize + ?Sized>(
    value: &T,
    decimals: usize,
) -> serde_json::Result<String> {
    // Round-tripping through `Value` sorts object keys.
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let fmt = FixedFloatFormatter {
        inner: PrettyFormatter::with_indent(b"  "),
        decimals,
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    tree.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    to_canonical_json_with(value, DEFAULT_FLOAT_DECIMALS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let v = json!({"zeta": 1, "alpha": 0.1, "mid": {"b": -0.0000001, "a": [1.5, 2]}});
        let s = to_canonical_json(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"alpha\": 0.100000,\n  \"mid\": {\n    \"a\": [\n      1.500000,\n      2\n    ],\n    \"b\": 0.000000\n  },\n  \"zeta\": 1\n}\n"
        );
    }

    #[test]
    fn non_finite_is_null() {
        let s = to_canonical_json(&[f64::NAN]).unwrap();
        assert!(s.contains("null"));
    }
}
