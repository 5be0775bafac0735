//! Parsers for the compact flag syntaxes.

use crate::config::{FunctionSpec, Span};
use wonderchar::group::{GroupElement, GroupKind, Mat2, ProfileKind};
use wonderchar::quad::QuadSpec;
use wonderchar::symbol::GridSpec;
use wonderchar::{Error, Result};

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

pub fn number(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| bad(format!("'{s}' is not a number")))
}

pub fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(number).collect()
}

/// `v` for a single value or `a:b:n` for n uniform samples.
pub fn span(s: &str) -> Result<Span> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(Span::single(number(v)?)),
        [a, b, n] => {
            let count = n.trim().parse::<usize>().map_err(|_| bad(format!("'{n}' is not a sample count")))?;
            if count == 0 {
                return Err(bad("sample count must be positive".into()));
            }
            Ok(Span { start: number(a)?, end: number(b)?, count })
        }
        _ => Err(bad(format!("'{s}' must be a value or START:END:COUNT"))),
    }
}

/// `R,h` or `R:h`.
pub fn xi_grid(s: &str) -> Result<GridSpec> {
    let (a, b) = s
        .split_once(',')
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| bad(format!("ξ-grid '{s}' must look like EXTENT,STEP")))?;
    GridSpec::new(number(a)?, number(b)?).map_err(|e| bad(e.to_string()))
}

fn profile(s: &str) -> Result<ProfileKind> {
    match s.trim() {
        "gauss" | "gaussian-log" => Ok(ProfileKind::GaussianLog),
        "bump" => Ok(ProfileKind::Bump),
        "gauss-bump" | "gaussian-log-bump" => Ok(ProfileKind::GaussianLogBump),
        other => Err(bad(format!("unknown test-function kind '{other}'"))),
    }
}

/// `KIND[:c=C1,C2,..][:w=W1,..][:unit-mass]`.
pub fn function(s: &str) -> Result<FunctionSpec> {
    let mut parts = s.split(':');
    let mut spec = FunctionSpec { kind: profile(parts.next().unwrap_or(""))?, ..FunctionSpec::default() };
    for p in parts {
        match p.trim().split_once('=') {
            Some(("c", v)) => spec.center = numbers(v)?,
            Some(("w", v)) => spec.widths = numbers(v)?,
            None if p.trim() == "unit-mass" => spec.unit_mass = true,
            _ => return Err(bad(format!("unknown test-function field '{p}'"))),
        }
    }
    Ok(spec)
}

/// `nodes=N1,N2,..[:refine=K][:tol=T][:floor=F]`, or a bare node list.
pub fn quad(s: &str) -> Result<QuadSpec> {
    let mut spec = QuadSpec::default();
    for p in s.split(':') {
        let (key, v) = p.trim().split_once('=').unwrap_or(("nodes", p.trim()));
        match key {
            "nodes" => {
                spec.nodes = v
                    .split(',')
                    .map(|n| n.trim().parse::<usize>().ok().filter(|&n| n > 0))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad(format!("'{v}' is not a list of positive node counts")))?
            }
            "refine" => {
                spec.max_refinements = v.trim().parse().map_err(|_| bad(format!("'{v}' is not a refinement cap")))?
            }
            "tol" => spec.tol = number(v)?,
            "floor" => spec.abs_floor = number(v)?,
            _ => return Err(bad(format!("unknown quadrature field '{key}'"))),
        }
    }
    Ok(spec)
}

/// `diag:a,d`, `rot:θ`, `mat:a,b,c,d`, `torus:t1,..`, or `coords:x1,..` in
/// the group's own coordinates.
pub fn element(s: &str, group: GroupKind) -> Result<GroupElement> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad(format!("group element '{s}' needs KIND:VALUES")))?;
    let v = numbers(rest)?;
    let need = |n: usize| {
        if v.len() == n {
            Ok(())
        } else {
            Err(bad(format!("'{kind}' takes {n} values, got {}", v.len())))
        }
    };
    let g = match kind.trim() {
        "diag" => {
            need(2)?;
            GroupElement::diag(v[0], v[1])?
        }
        "rot" => {
            need(1)?;
            GroupElement::rotation(v[0])
        }
        "mat" => {
            need(4)?;
            GroupElement::sl2_from_gl(Mat2::new(v[0], v[1], v[2], v[3]))?
        }
        "torus" => {
            if v.iter().any(|t| !(*t > 0.0)) {
                return Err(bad("torus entries must be positive".into()));
            }
            GroupElement::Torus(v)
        }
        "coords" => {
            need(group.dim())?;
            group.from_coords(&v)
        }
        other => return Err(bad(format!("unknown group element kind '{other}'"))),
    };
    if !lies_in(&g, group) {
        return Err(bad(format!("element '{s}' does not lie in the model group {group:?}")));
    }
    Ok(g)
}

fn lies_in(g: &GroupElement, group: GroupKind) -> bool {
    match (g, group) {
        (GroupElement::Torus(t), GroupKind::Torus { rank }) => t.len() == rank,
        (GroupElement::Sl2(_), GroupKind::Sl2) => true,
        (GroupElement::Sl2(m), GroupKind::Borel) => m[(1, 0)] == 0.0,
        (GroupElement::Pair(..), GroupKind::Sl2Pair) => true,
        _ => false,
    }
}
