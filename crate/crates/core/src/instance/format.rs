//! Line-oriented text format for instances.
//!
//! ```text
//! gls <n> <k>
//! group
//! e <u> <v> <w>      # Laplacian edge, w > 0
//! d <u> <val>        # extra diagonal entry, val >= 0
//! s <u> <val>        # fixed potential coordinate (default 0)
//! f <w> <u> <c> ...  # squared form w * (sum c_u x_u)^2
//! ```
//!
//! `#` starts a comment. LF and CRLF line endings are accepted.

use std::fmt::Write as _;

use crate::error::{GlsError, Result};
use crate::instance::{Group, Instance};
use crate::linalg::{Row, SddMatrix, SparseVector, SquaredForm};

#[derive(Default)]
struct GroupBuilder {
    edges: Vec<(usize, usize, f64)>,
    diag: Vec<(usize, f64)>,
    forms: Vec<SquaredForm>,
    s: Vec<(usize, f64)>,
    line: usize,
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut header: Option<(usize, usize)> = None;
    let mut groups: Vec<GroupBuilder> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| GlsError::Parse { line: line_no, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tok = content.split_whitespace();
        let directive = tok.next().unwrap_or_default();
        let args: Vec<&str> = tok.collect();

        let Some((n, _k)) = header else {
            if directive != "gls" || args.len() != 2 {
                return Err(err("expected header `gls <n> <k>`".into()));
            }
            header = Some((parse_usize(args[0], line_no)?, parse_usize(args[1], line_no)?));
            continue;
        };

        if directive == "group" {
            if !args.is_empty() {
                return Err(err("`group` takes no arguments".into()));
            }
            groups.push(GroupBuilder {
                line: line_no,
                ..Default::default()
            });
            continue;
        }
        let Some(g) = groups.last_mut() else {
            return Err(err(format!("`{directive}` before the first `group`")));
        };
        let index = |s: &str| -> Result<usize> {
            let u = parse_usize(s, line_no)?;
            if u >= n {
                return Err(GlsError::Parse {
                    line: line_no,
                    msg: format!("index {u} out of range for n = {n}"),
                });
            }
            Ok(u)
        };
        match directive {
            "e" => {
                expect_args(&args, 3, line_no)?;
                let (u, v, w) = (index(args[0])?, index(args[1])?, parse_f64(args[2], line_no)?);
                if u == v {
                    return Err(err("edge endpoints must differ".into()));
                }
                if !(w > 0.0) {
                    return Err(err(format!("edge weight must be positive, got {w}")));
                }
                g.edges.push((u, v, w));
            }
            "d" => {
                expect_args(&args, 2, line_no)?;
                let (u, d) = (index(args[0])?, parse_f64(args[1], line_no)?);
                if !(d >= 0.0) {
                    return Err(err(format!("diagonal entry must be nonnegative, got {d}")));
                }
                g.diag.push((u, d));
            }
            "s" => {
                expect_args(&args, 2, line_no)?;
                g.s.push((index(args[0])?, parse_f64(args[1], line_no)?));
            }
            "f" => {
                if args.len() < 3 || args.len().is_multiple_of(2) {
                    return Err(err("expected `f <w> <u> <c> [<u> <c> ...]`".into()));
                }
                let w = parse_f64(args[0], line_no)?;
                if !(w > 0.0) {
                    return Err(err(format!("form weight must be positive, got {w}")));
                }
                let coeffs = args[1..]
                    .chunks(2)
                    .map(|p| Ok((index(p[0])?, parse_f64(p[1], line_no)?)))
                    .collect::<Result<Vec<_>>>()?;
                g.forms.push(SquaredForm::new(w, coeffs));
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }

    let Some((n, k)) = header else {
        return Err(GlsError::Parse {
            line: 1,
            msg: "missing header `gls <n> <k>`".into(),
        });
    };
    if groups.len() != k {
        return Err(GlsError::Parse {
            line: text.lines().count().max(1),
            msg: format!("header declares {k} groups but {} were given", groups.len()),
        });
    }
    let groups = groups
        .into_iter()
        .map(|b| {
            let line = b.line;
            let wrap = |e: GlsError| GlsError::Parse {
                line,
                msg: e.to_string(),
            };
            let l = SddMatrix::assemble_laplacian(n, &b.edges, &b.diag)
                .and_then(|m| m.with_forms(b.forms))
                .map_err(wrap)?;
            let s = SparseVector::from_pairs(n, b.s).map_err(wrap)?;
            Ok(Group::new(l, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(n, groups)
}

pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "gls {} {}", inst.n(), inst.k());
    for g in inst.groups() {
        out.push_str("group\n");
        for row in g.matrix().rows() {
            let _ = match row {
                Row::Edge(e) => writeln!(out, "e {} {} {}", e.u, e.v, e.w),
                Row::Diag(u, d) => writeln!(out, "d {u} {d}"),
                Row::Form(f) => {
                    let _ = write!(out, "f {}", f.weight);
                    for &(j, c) in &f.coeffs {
                        let _ = write!(out, " {j} {c}");
                    }
                    writeln!(out)
                }
            };
        }
        for &(u, v) in g.potentials().entries() {
            let _ = writeln!(out, "s {u} {v}");
        }
    }
    out
}

fn expect_args(args: &[&str], count: usize, line: usize) -> Result<()> {
    if args.len() == count {
        Ok(())
    } else {
        Err(GlsError::Parse {
            line,
            msg: format!("expected {count} arguments, got {}", args.len()),
        })
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| GlsError::Parse {
        line,
        msg: format!("expected a nonnegative integer, got `{s}`"),
    })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(GlsError::Parse {
            line,
            msg: format!("expected a finite number, got `{s}`"),
        }),
    }
}
