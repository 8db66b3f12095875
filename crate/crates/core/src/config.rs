//! JSON model files.
//!
//! ```json
//! {
//!   "name": "flip",
//!   "kind": "markov",
//!   "d": 1,
//!   "jump": [[1], [-1]],
//!   "coins": [[[[1,0],[0,0]], [[0,0],[1,0]]], [[[0,0],[1,0]], [[1,0],[0,0]]]],
//!   "p": [0.5, 0.5],
//!   "P": [[0.5, 0.5], [0.5, 0.5]],
//!   "sigma_generators": [[0, 1]],
//!   "initial": {"vector": [[1,0], [0,0]]},
//!   "expect": {"assumption_s": true}
//! }
//! ```
//!
//! Complex entries are `[re, im]`, matrices row-major. `P` may be nested or
//! flat. Missing `sigma_generators` means the trivial representation; a
//! missing `P` means independent draws from `p`. `kind: "uncorrelated"` builds
//! a tensor model from `coins`, `p` and a vector initial state.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, FieldError, Result};
use crate::lattice::SiteRepresentation;
use crate::linalg::{c, CMat, CVec};
use crate::model::{
    validate_model, CoinEnsemble, Initial, JumpFunction, KernelEntry, ValidationReport, WalkModel,
};
use crate::permutation::{as_permutation, PermutationModel};
use crate::uncorrelated::TensorModel;

#[derive(Clone, Debug)]
pub enum LoadedModel {
    Walk(WalkModel),
    Permutation(PermutationModel),
    Tensor(TensorModel),
}

impl LoadedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedModel::Walk(_) => "walk",
            LoadedModel::Permutation(_) => "permutation",
            LoadedModel::Tensor(_) => "uncorrelated",
        }
    }

    /// The underlying walk model (the embedding for tensor models).
    pub fn walk(&self) -> Result<WalkModel> {
        match self {
            LoadedModel::Walk(m) => Ok(m.clone()),
            LoadedModel::Permutation(p) => Ok(p.base.clone()),
            LoadedModel::Tensor(t) => t.to_walk(),
        }
    }
}

/// Fixture metadata: outcomes a check is expected to produce.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Expectations {
    pub assumption_s: Option<bool>,
    pub degenerate: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub name: Option<String>,
    pub model: LoadedModel,
    pub validation: Option<ValidationReport>,
    pub warnings: Vec<String>,
    pub expect: Expectations,
}

struct Reader {
    errors: Vec<FieldError>,
}

impl Reader {
    fn err(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn int(&mut self, v: &Value, field: &str) -> Option<i64> {
        let r = v.as_i64();
        if r.is_none() {
            self.err(field, "expected an integer");
        }
        r
    }

    fn num(&mut self, v: &Value, field: &str) -> Option<f64> {
        let r = v.as_f64();
        if r.is_none() {
            self.err(field, "expected a number");
        }
        r
    }

    fn array<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a Vec<Value>> {
        let r = v.as_array();
        if r.is_none() {
            self.err(field, "expected an array");
        }
        r
    }

    fn complex(&mut self, v: &Value, field: &str) -> Option<crate::linalg::C64> {
        if let Some(x) = v.as_f64() {
            return Some(c(x, 0.0));
        }
        match v.as_array() {
            Some(a) if a.len() == 2 && a[0].is_number() && a[1].is_number() => {
                Some(c(a[0].as_f64().unwrap(), a[1].as_f64().unwrap()))
            }
            _ => {
                self.err(field, "expected a complex number [re, im]");
                None
            }
        }
    }

    fn cvec(&mut self, v: &Value, field: &str) -> Option<CVec> {
        let a = self.array(v, field)?;
        let mut out = Vec::with_capacity(a.len());
        let mut ok = true;
        for (i, z) in a.iter().enumerate() {
            match self.complex(z, &format!("{field}[{i}]")) {
                Some(z) => out.push(z),
                None => ok = false,
            }
        }
        ok.then(|| CVec::from_vec(out))
    }

    fn cmat(&mut self, v: &Value, field: &str) -> Option<CMat> {
        let rows = self.array(v, field)?;
        let n = rows.len();
        let mut data = Vec::new();
        let mut ok = true;
        for (i, row) in rows.iter().enumerate() {
            let f = format!("{field}[{i}]");
            match self.array(row, &f) {
                Some(r) if r.len() == n => {
                    for (j, z) in r.iter().enumerate() {
                        match self.complex(z, &format!("{f}[{j}]")) {
                            Some(z) => data.push(z),
                            None => ok = false,
                        }
                    }
                }
                Some(r) => {
                    self.err(
                        &f,
                        format!("row has {} entries, matrix must be {n}x{n}", r.len()),
                    );
                    ok = false;
                }
                None => ok = false,
            }
        }
        ok.then(|| CMat::from_row_slice(n, n, &data))
    }

    fn ivec(&mut self, v: &Value, field: &str) -> Option<Vec<i64>> {
        let a = self.array(v, field)?;
        let mut out = Vec::new();
        let mut ok = true;
        for (i, x) in a.iter().enumerate() {
            match self.int(x, &format!("{field}[{i}]")) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn fvec(&mut self, v: &Value, field: &str) -> Option<Vec<f64>> {
        let a = self.array(v, field)?;
        let mut out = Vec::new();
        let mut ok = true;
        for (i, x) in a.iter().enumerate() {
            match self.num(x, &format!("{field}[{i}]")) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }
}

fn matrix_field(r: &mut Reader, v: &Value, f: usize) -> Option<Vec<Vec<f64>>> {
    let a = r.array(v, "P")?;
    if a.iter().all(|x| x.is_number()) {
        let flat = r.fvec(v, "P")?;
        if flat.len() != f * f {
            r.err(
                "P",
                format!("flat P has {} entries, expected {}", flat.len(), f * f),
            );
            return None;
        }
        return Some(flat.chunks(f).map(|c| c.to_vec()).collect());
    }
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, row) in a.iter().enumerate() {
        match r.fvec(row, &format!("P[{i}]")) {
            Some(x) => rows.push(x),
            None => ok = false,
        }
    }
    ok.then_some(rows)
}

/// Parses and validates a model. Every problem found is reported, not only
/// the first.
pub fn parse_config(text: &str) -> Result<Config> {
    let root: Value = serde_json::from_str(text)?;
    let mut r = Reader { errors: Vec::new() };
    let mut warnings = Vec::new();
    let obj = root.as_object().ok_or_else(|| {
        Error::InvalidModel(vec![FieldError {
            field: "$".into(),
            message: "expected an object".into(),
        }])
    })?;
    let name = obj.get("name").and_then(|v| v.as_str()).map(str::to_string);
    let kind = obj
        .get("kind")
        .and_then(|v| v.as_str())
        .unwrap_or("markov")
        .to_string();
    if kind != "markov" && kind != "uncorrelated" {
        r.err(
            "kind",
            format!("unknown kind {kind:?} (expected \"markov\" or \"uncorrelated\")"),
        );
    }
    let get = |k: &str| obj.get(k);
    let d = match get("d") {
        Some(v) => match r.int(v, "d") {
            Some(d) if d >= 1 => Some(d),
            Some(_) => {
                r.err("d", "must be at least 1");
                None
            }
            None => None,
        },
        None => {
            r.err("d", "missing");
            None
        }
    };
    let jump = match (get("jump"), d) {
        (Some(v), Some(d)) => r.array(v, "jump").and_then(|rows| {
            let mut out = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                out.push(r.ivec(row, &format!("jump[{i}]"))?);
            }
            match JumpFunction::new(d as usize, out) {
                Ok(j) => Some(j),
                Err(Error::InvalidModel(es)) => {
                    r.errors.extend(es);
                    None
                }
                Err(e) => {
                    r.err("jump", e.to_string());
                    None
                }
            }
        }),
        (None, Some(d)) => {
            warnings.push("jump missing; using nearest-neighbour jumps".into());
            Some(JumpFunction::nearest_neighbour(d as usize))
        }
        _ => None,
    };
    let coins: Option<Vec<CMat>> = match get("coins") {
        Some(v) => r.array(v, "coins").and_then(|list| {
            let mut out = Vec::new();
            let mut ok = true;
            for (i, m) in list.iter().enumerate() {
                match r.cmat(m, &format!("coins[{i}]")) {
                    Some(m) => out.push(m),
                    None => ok = false,
                }
            }
            if out.is_empty() && ok {
                r.err("coins", "at least one coin is required");
                ok = false;
            }
            ok.then_some(out)
        }),
        None => {
            r.err("coins", "missing");
            None
        }
    };
    let f = coins.as_ref().map(|c| c.len());
    let p = match get("p") {
        Some(v) => r.fvec(v, "p"),
        None => match f {
            Some(1) => Some(vec![1.0]),
            _ => {
                r.err("p", "missing");
                None
            }
        },
    };
    let kernel = match (get("P"), f) {
        (Some(v), Some(f)) => matrix_field(&mut r, v, f),
        (None, Some(_)) => {
            if kind == "markov" {
                warnings.push("P missing; coins are drawn independently from p".into());
            }
            p.as_ref().map(|p| vec![p.clone(); p.len()])
        }
        _ => None,
    };
    let initial = match get("initial") {
        None => {
            r.err("initial", "missing");
            None
        }
        Some(v) => {
            if let Some(vec) = v.get("vector") {
                r.cvec(vec, "initial.vector").map(Initial::Vector)
            } else if let Some(ker) = v.get("kernel") {
                r.array(ker, "initial.kernel").and_then(|entries| {
                    let mut out = Vec::new();
                    let mut ok = true;
                    for (i, e) in entries.iter().enumerate() {
                        let fld = format!("initial.kernel[{i}]");
                        let x = e.get("x").and_then(|x| r.ivec(x, &format!("{fld}.x")));
                        let y = e.get("y").and_then(|y| r.ivec(y, &format!("{fld}.y")));
                        let m = e
                            .get("matrix")
                            .and_then(|m| r.cmat(m, &format!("{fld}.matrix")));
                        match (x, y, m) {
                            (Some(x), Some(y), Some(m)) => out.push(KernelEntry { x, y, m }),
                            _ => {
                                r.err(&fld, "entries need x, y and matrix");
                                ok = false;
                            }
                        }
                    }
                    ok.then_some(Initial::Kernel(out))
                })
            } else {
                r.err("initial", "expected {\"vector\": ...} or {\"kernel\": ...}");
                None
            }
        }
    };
    let generators = match (get("sigma_generators"), d) {
        (Some(v), _) => r.array(v, "sigma_generators").and_then(|gs| {
            let mut out = Vec::new();
            for (i, g) in gs.iter().enumerate() {
                let g = r.ivec(g, &format!("sigma_generators[{i}]"))?;
                if g.iter().any(|&x| x < 0) {
                    r.err(&format!("sigma_generators[{i}]"), "negative index");
                    return None;
                }
                out.push(g.into_iter().map(|x| x as usize).collect::<Vec<_>>());
            }
            Some(out)
        }),
        (None, Some(d)) => {
            if kind == "markov" {
                warnings
                    .push("sigma_generators missing; using the trivial site representation".into());
            }
            f.map(|f| vec![(0..f).collect(); d as usize])
        }
        _ => None,
    };
    let mut expect = Expectations::default();
    if let Some(e) = get("expect") {
        expect.assumption_s = e.get("assumption_s").and_then(|v| v.as_bool());
        expect.degenerate = e.get("degenerate").and_then(|v| v.as_bool());
    }
    if !r.errors.is_empty() {
        return Err(Error::InvalidModel(r.errors));
    }
    let (jump, coins, p, kernel, initial) = (
        jump.unwrap(),
        coins.unwrap(),
        p.unwrap(),
        kernel.unwrap(),
        initial.unwrap(),
    );

    if kind == "uncorrelated" {
        let Initial::Vector(phi0) = initial else {
            return Err(Error::InvalidModel(vec![FieldError {
                field: "initial".into(),
                message: "uncorrelated models need a vector initial state".into(),
            }]));
        };
        let tm = TensorModel::new(jump, coins, p, phi0)?;
        let validation = validate_model(&tm.to_walk()?);
        reject_failures(&validation)?;
        return Ok(Config {
            name,
            model: LoadedModel::Tensor(tm),
            validation: Some(validation),
            warnings,
            expect,
        });
    }

    let ensemble = CoinEnsemble::new(coins, p, kernel)?;
    let repr = SiteRepresentation::new(generators.unwrap(), ensemble.len())?;
    let model = WalkModel::new(jump, ensemble, repr, initial)?;
    let validation = validate_model(&model);
    reject_failures(&validation)?;
    let permutation = model
        .coins
        .coins
        .iter()
        .all(|m| as_permutation(m).is_some())
        && matches!(model.initial, Initial::Vector(_));
    let model = if permutation {
        LoadedModel::Permutation(PermutationModel::new(model)?)
    } else {
        LoadedModel::Walk(model)
    };
    Ok(Config {
        name,
        model,
        validation: Some(validation),
        warnings,
        expect,
    })
}

fn reject_failures(v: &ValidationReport) -> Result<()> {
    let errs: Vec<FieldError> = v
        .failures()
        .iter()
        .map(|c| FieldError {
            field: c.name.clone(),
            message: format!(
                "residual {:.3e} exceeds tolerance {:.0e}",
                c.residual, c.tolerance
            ),
        })
        .collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(errs))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// JSON for a complex matrix, row-major `[re, im]` entries.
pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}
