//! File formats.
//!
//! A map file is a JSON object `{"n": int, "k": int, "blocks": [int...]?,
//! "choi": [[re, im], ...]}` with the Choi matrix in row-major order, length
//! `(nk)²`. Floats are written in shortest round-trip form, so reading back a
//! written file reproduces the Choi data bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counterexample::ProjectionFamily;
use crate::cpmap::MatLinMap;
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, CVector, C64};

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn complex_pair(v: &Value, field: &str) -> Result<C64> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(field, format!("expected [re, im], found {v}")))?;
    if arr.len() != 2 {
        return Err(parse_err(field, format!("expected 2 numbers, found {}", arr.len())));
    }
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| parse_err(format!("{field}[0]"), format!("not a number: {}", arr[0])))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| parse_err(format!("{field}[1]"), format!("not a number: {}", arr[1])))?;
    Ok(C64::new(re, im))
}

fn usize_field(obj: &serde_json::Map<String, Value>, name: &str) -> Result<usize> {
    let v = obj
        .get(name)
        .ok_or_else(|| parse_err(name, "missing field"))?;
    v.as_u64()
        .filter(|&x| x > 0)
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(name, format!("expected a positive integer, found {v}")))
}

pub fn map_to_json(map: &MatLinMap) -> String {
    let choi = map.choi();
    let dim = choi.nrows();
    let mut entries = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for col in 0..dim {
            let z = choi[(r, col)];
            entries.push(json!([z.re, z.im]));
        }
    }
    let mut obj = serde_json::Map::new();
    obj.insert("n".into(), json!(map.dom_dim()));
    obj.insert("k".into(), json!(map.cod_dim()));
    if map.blocks().len() > 1 {
        obj.insert("blocks".into(), json!(map.blocks()));
    }
    obj.insert("choi".into(), Value::Array(entries));
    Value::Object(obj).to_string()
}

pub fn map_from_json(text: &str) -> Result<MatLinMap> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        parse_err(
            "<document>",
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| parse_err("<document>", "expected a JSON object"))?;
    let n = usize_field(obj, "n")?;
    let k = usize_field(obj, "k")?;
    let dim = n * k;
    let raw = obj
        .get("choi")
        .ok_or_else(|| parse_err("choi", "missing field"))?
        .as_array()
        .ok_or_else(|| parse_err("choi", "expected an array"))?;
    if raw.len() != dim * dim {
        return Err(parse_err(
            "choi",
            format!("expected {} entries for n={n}, k={k}, found {}", dim * dim, raw.len()),
        ));
    }
    let mut choi = CMatrix::zeros(dim, dim);
    for (idx, v) in raw.iter().enumerate() {
        choi[(idx / dim, idx % dim)] = complex_pair(v, &format!("choi[{idx}]"))?;
    }
    let map = MatLinMap::from_choi(n, k, choi)?;
    match obj.get("blocks") {
        None | Some(Value::Null) => Ok(map),
        Some(Value::Array(items)) => {
            let blocks = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_u64().filter(|&x| x > 0).map(|x| x as usize).ok_or_else(|| {
                        parse_err(format!("blocks[{i}]"), format!("expected a positive integer, found {v}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            map.with_blocks(blocks)
                .map_err(|e| parse_err("blocks", e.to_string()))
        }
        Some(other) => Err(parse_err("blocks", format!("expected an array, found {other}"))),
    }
}

pub fn write_map(path: &Path, map: &MatLinMap) -> Result<()> {
    std::fs::write(path, map_to_json(map))?;
    Ok(())
}

pub fn read_map(path: &Path) -> Result<MatLinMap> {
    map_from_json(&std::fs::read_to_string(path)?)
}

/// On-disk form of a [`ProjectionFamily`]: complement vectors plus the covering record.
#[derive(Serialize, Deserialize)]
struct FamilyFile {
    n: usize,
    seed: u64,
    budget: usize,
    target_radius: Option<f64>,
    covering_radius_estimate: f64,
    covering_samples: usize,
    complements: Vec<Vec<[f64; 2]>>,
}

pub fn family_to_json(family: &ProjectionFamily) -> String {
    let file = FamilyFile {
        n: family.n,
        seed: family.seed,
        budget: family.budget,
        target_radius: family.target_radius.is_finite().then_some(family.target_radius),
        covering_radius_estimate: family.covering_radius_estimate,
        covering_samples: family.covering_samples,
        complements: family
            .complements
            .iter()
            .map(|u| u.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("family serializes")
}

pub fn family_from_json(text: &str) -> Result<ProjectionFamily> {
    let file: FamilyFile = serde_json::from_str(text).map_err(|e| {
        parse_err(
            "<family>",
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let complements = file
        .complements
        .iter()
        .enumerate()
        .map(|(i, u)| {
            if u.len() != file.n {
                return Err(parse_err(
                    format!("complements[{i}]"),
                    format!("expected {} entries, found {}", file.n, u.len()),
                ));
            }
            Ok(CVector::from_iterator(
                file.n,
                u.iter().map(|p| C64::new(p[0], p[1])),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    if complements.is_empty() {
        return Err(parse_err("complements", "empty family"));
    }
    Ok(ProjectionFamily {
        n: file.n,
        complements,
        covering_radius_estimate: file.covering_radius_estimate,
        covering_samples: file.covering_samples,
        target_radius: file.target_radius.unwrap_or(f64::NAN),
        seed: file.seed,
        budget: file.budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let id = MatLinMap::identity(2);
        let back = map_from_json(&map_to_json(&id)).unwrap();
        assert_eq!(back.choi(), id.choi());
    }

    #[test]
    fn random_choi_round_trip_is_exact() {
        let mut rng = crate::random::rng_from_seed(8);
        let m = MatLinMap::from_choi(2, 3, crate::random::ginibre(6, 6, &mut rng)).unwrap();
        let back = map_from_json(&map_to_json(&m)).unwrap();
        assert_eq!(back.choi(), m.choi());
    }

    #[test]
    fn blocks_round_trip() {
        let m = MatLinMap::direct_sum(&[MatLinMap::identity(2), MatLinMap::depolarizing(2)]).unwrap();
        let back = map_from_json(&map_to_json(&m)).unwrap();
        assert_eq!(back.blocks(), &[2, 2]);
        assert_eq!(back.choi(), m.choi());
    }

    #[test]
    fn wrong_size_rejected() {
        let err = map_from_json(r#"{"n":2,"k":2,"choi":[[1,0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "choi"), "{err}");
    }

    #[test]
    fn non_numeric_entry_names_field() {
        let mut entries = vec!["[0,0]".to_string(); 16];
        entries[5] = r#"["x",0]"#.into();
        let text = format!(r#"{{"n":2,"k":2,"choi":[{}]}}"#, entries.join(","));
        let err = map_from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "choi[5][0]"), "{err}");
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = map_from_json("{\"n\": 2,\n \"k\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn family_round_trip() {
        let fam = crate::counterexample::projection_family(5, 0.9, 3, 100).unwrap();
        let back = family_from_json(&family_to_json(&fam)).unwrap();
        assert_eq!(back.complements, fam.complements);
        assert_eq!(back.covering_radius_estimate, fam.covering_radius_estimate);
    }
}
