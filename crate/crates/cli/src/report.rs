//! Key-value report tree.
//!
//! ```text
//! [germ_analysis.order]
//! nu = 2  # exact
//! [petal_numerics.solve]
//! residual.max_abs = 2.37e-9  # tol 1e-8
//! ```
//!
//! Sections are named `<module>.<operation>`.  Every numeric value carries
//! either `exact` or the tolerance it was checked against; text values are
//! quoted.  Rendering is a pure function of the tree, so equal trees give
//! byte-identical output.

use std::fmt::{self, Write as _};

use parabolic_core::series::{fmt_c64, fmt_qc, Scalar, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    /// Exact number or exact combinatorial datum.
    Exact(String),
    /// Float with the tolerance it is reported to.
    Approx {
        value: String,
        tol: f64,
    },
    /// Float that is only informative (no pass/fail attached).
    Measured(String),
    Text(String),
    Flag(bool),
}

impl Value {
    pub fn exact(v: impl fmt::Display) -> Self {
        Value::Exact(v.to_string())
    }

    pub fn exact_f64(v: f64) -> Self {
        Value::Exact(fmt_f64(v))
    }

    pub fn approx(v: f64, tol: f64) -> Self {
        Value::Approx { value: fmt_f64(v), tol }
    }

    pub fn measured(v: f64) -> Self {
        Value::Measured(fmt_f64(v))
    }

    pub fn text(v: impl Into<String>) -> Self {
        Value::Text(v.into())
    }

    /// A coefficient: exact in exact mode, tagged with `tol` in float mode.
    pub fn scalar<S: Scalar>(s: &S, tol: f64) -> Self {
        match s.to_qc() {
            Some(q) if S::MODE == parabolic_core::series::Mode::Exact => Value::Exact(fmt_qc(&q)),
            _ => Value::Approx {
                value: fmt_c64(s.to_c64()),
                tol,
            },
        }
    }

    pub fn complex(z: C64, tol: f64) -> Self {
        Value::Approx { value: fmt_c64(z), tol }
    }
}

/// Shortest round-trip formatting in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, Value)>,
}

impl Section {
    pub fn put(&mut self, key: impl Into<String>, v: Value) -> &mut Self {
        self.entries.push((key.into(), v));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub sections: Vec<Section>,
}

impl Report {
    /// Appends a section (a repeated name gets a new block, not a merge).
    pub fn section(&mut self, name: impl Into<String>) -> &mut Section {
        self.sections.push(Section {
            name: name.into(),
            entries: Vec::new(),
        });
        self.sections.last_mut().unwrap()
    }

    pub fn find(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.find(section).and_then(|s| s.get(key))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, s) in self.sections.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", s.name);
            for (key, v) in &s.entries {
                let _ = match v {
                    Value::Exact(x) => writeln!(out, "{key} = {x}  # exact"),
                    Value::Approx { value, tol } => writeln!(out, "{key} = {value}  # tol {}", fmt_f64(*tol)),
                    Value::Measured(x) => writeln!(out, "{key} = {x}  # measured"),
                    Value::Text(t) => writeln!(out, "{key} = {}", quote(t)),
                    Value::Flag(b) => writeln!(out, "{key} = {b}"),
                };
            }
        }
        out
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Reads a rendered report back (used by tests and scripts).
pub fn parse_report(text: &str) -> Vec<(String, String, String)> {
    let mut section = String::new();
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.to_string();
        } else if let Some((k, v)) = line.split_once(" = ") {
            let v = match v.find("  # ") {
                Some(p) if !v.starts_with('"') => &v[..p],
                _ => v,
            };
            out.push((section.clone(), k.to_string(), v.trim_matches('"').to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_tags_every_number() {
        let mut r = Report::default();
        r.section("germ_analysis.order")
            .put("nu", Value::exact(2))
            .put("dicritical", Value::Flag(false));
        r.section("petal_numerics.solve")
            .put("residual", Value::approx(2.5e-9, 1e-8))
            .put("note", Value::text("a \"b\""));
        let t = r.render();
        assert_eq!(
            t,
            "[germ_analysis.order]\nnu = 2  # exact\ndicritical = false\n\n[petal_numerics.solve]\nresidual = 2.5e-9  # tol 1e-8\nnote = \"a \\\"b\\\"\"\n"
        );
        let back = parse_report(&t);
        assert_eq!(back[0], ("germ_analysis.order".into(), "nu".into(), "2".into()));
        assert_eq!(back[2].2, "2.5e-9");
    }
}
