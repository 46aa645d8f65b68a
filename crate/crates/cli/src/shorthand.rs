//! Command-line shorthand for models, Morse functions and complex numbers.

use crate::config::ModelSpec;
use foliage::calc::{MorseKind, Term, C64};
use foliage::models::{self, Preset};
use std::collections::BTreeMap;

/// Parses `a`, `a+bi`, `a-bi`, `bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse complex number '{s}'");
    if s.is_empty() {
        return Err(err());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| err())? };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| err())?,
    };
    Ok(C64::new(re, im))
}

pub fn parse_complex_list(s: &str, sep: char) -> Result<Vec<C64>, String> {
    s.split(sep).map(parse_complex).collect()
}

fn key_values(s: &str) -> Result<BTreeMap<&str, &str>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got '{part}'"))?;
        out.insert(k.trim(), v.trim());
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(kv: &BTreeMap<&str, &str>, key: &str, default: T) -> Result<T, String> {
    kv.get(key).map_or(Ok(default), |v| v.parse().map_err(|_| format!("cannot parse {key}='{v}'")))
}

/// A parsed model together with the level polynomial of its leaves, when one
/// is known.
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub spec: ModelSpec,
    pub level: Option<Vec<Term>>,
}

fn from_preset(p: Preset) -> ParsedModel {
    let spec = ModelSpec::from_model(&p.model);
    let level = match (&spec, p.level) {
        (ModelSpec::FirstIntegral { .. }, _) | (_, None) => None,
        (_, Some(l)) => Some(l.components()[0].clone()),
    };
    ParsedModel { spec, level }
}

/// Models:
/// `fermat:n=2,k=3[,lambda=1;1+1i]`, `pham:p=3,q=4`, `pham2:q=4`, `rotation`,
/// `quadric`, `linear:1,1+1i`, `siegel`, `simplex[:m=2]`,
/// `twisted_i[:l=1;2,a=2;3]`, `twisted_ii[:...]`, `twisted_iii[:l=3;1;1;1]`.
pub fn parse_model(s: &str) -> Result<ParsedModel, String> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let err = |e: foliage::foliation::FoliationError| e.to_string();
    let pair = |v: Vec<C64>, what: &str| -> Result<[C64; 2], String> {
        <[C64; 2]>::try_from(v).map_err(|_| format!("{what} needs two entries"))
    };
    match name {
        "fermat" => {
            let kv = key_values(args)?;
            let n: usize = take(&kv, "n", 2)?;
            let k: u32 = take(&kv, "k", 3)?;
            let lambda = match kv.get("lambda") {
                Some(l) => parse_complex_list(l, ';')?,
                None => vec![C64::new(1.0, 0.0); n],
            };
            if lambda.len() != n {
                return Err(format!("lambda has {} entries for n = {n}", lambda.len()));
            }
            models::fermat(&lambda, k).map(from_preset).map_err(err)
        }
        "pham" | "pham2" => {
            let kv = key_values(args)?;
            let p: u32 = if name == "pham2" { 2 } else { take(&kv, "p", 3)? };
            let q: u32 = take(&kv, "q", 4)?;
            if p < 2 || q < 2 {
                return Err(format!("need p, q >= 2, got p = {p}, q = {q}"));
            }
            models::pham(p, q).map(from_preset).map_err(err)
        }
        "rotation" => models::rotation().map(from_preset).map_err(err),
        "quadric" => {
            let f = foliage::calc::PolyMap::fermat(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], 2).map_err(|e| e.to_string())?;
            Ok(ParsedModel {
                spec: ModelSpec::FirstIntegral { n: 2, terms: f.components()[0].clone() },
                level: None,
            })
        }
        "linear" => {
            let lambda = parse_complex_list(args, ',')?;
            models::linear(&lambda).map(from_preset).map_err(err)
        }
        "siegel" => models::siegel_cube_roots().map(from_preset).map_err(err),
        "simplex" => {
            let kv = key_values(args)?;
            models::simplex_action(take(&kv, "m", 2)?).map(from_preset).map_err(err)
        }
        "twisted_i" | "twisted_ii" => {
            let kv = key_values(args)?;
            let l = pair(parse_complex_list(kv.get("l").copied().unwrap_or("1;2"), ';')?, "l")?;
            let a: Vec<u32> = kv
                .get("a")
                .copied()
                .unwrap_or("2;3")
                .split(';')
                .map(|x| x.parse().map_err(|_| format!("cannot parse exponent '{x}'")))
                .collect::<Result<_, _>>()?;
            let a = <[u32; 2]>::try_from(a).map_err(|_| "a needs two entries".to_string())?;
            let p = if name == "twisted_i" { models::twisted_diagonal(l, a) } else { models::twisted_swap(l, a) };
            p.map(from_preset).map_err(err)
        }
        "twisted_iii" => {
            let kv = key_values(args)?;
            let l = parse_complex_list(kv.get("l").copied().unwrap_or("3;1;1;1"), ';')?;
            let l = <[C64; 4]>::try_from(l).map_err(|_| "l needs four entries".to_string())?;
            models::twisted_cycle(l).map(from_preset).map_err(err)
        }
        other => Err(format!("unknown model '{other}'")),
    }
}

/// `round` or `weighted:a=2,1;b=2,1`.
pub fn parse_morse(s: &str) -> Result<MorseKind, String> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    match name {
        "round" => Ok(MorseKind::Round),
        "weighted" => {
            let mut a = None;
            let mut b = None;
            for part in args.split(';') {
                let (k, v) = part.split_once('=').ok_or_else(|| format!("expected a=... or b=..., got '{part}'"))?;
                let vals: Vec<f64> = v
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| format!("cannot parse weight '{x}'")))
                    .collect::<Result<_, _>>()?;
                match k.trim() {
                    "a" => a = Some(vals),
                    "b" => b = Some(vals),
                    other => return Err(format!("unknown weight key '{other}'")),
                }
            }
            match (a, b) {
                (Some(a), Some(b)) => Ok(MorseKind::Weighted { a, b }),
                _ => Err("weighted needs both a= and b=".into()),
            }
        }
        other => Err(format!("unknown morse function '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = |re, im| C64::new(re, im);
        assert_eq!(parse_complex("1").unwrap(), c(1., 0.));
        assert_eq!(parse_complex("1+1i").unwrap(), c(1., 1.));
        assert_eq!(parse_complex("-2.5-0.5i").unwrap(), c(-2.5, -0.5));
        assert_eq!(parse_complex("i").unwrap(), c(0., 1.));
        assert_eq!(parse_complex("-i").unwrap(), c(0., -1.));
        assert_eq!(parse_complex("3i").unwrap(), c(0., 3.));
        assert_eq!(parse_complex("1e-3+2e-1i").unwrap(), c(1e-3, 0.2));
        assert_eq!(parse_complex("1-i").unwrap(), c(1., -1.));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("").is_err());
        assert!(parse_complex("x1").is_err());
    }

    #[test]
    fn model_shorthand() {
        let m = parse_model("fermat:n=2,k=3").unwrap();
        assert!(matches!(m.spec, ModelSpec::FirstIntegral { n: 2, .. }));
        let m = parse_model("pham:p=3,q=4").unwrap();
        assert!(matches!(m.spec, ModelSpec::VectorField { n: 2, .. }));
        assert_eq!(m.level.unwrap().len(), 2);
        let m = parse_model("linear:1,1+1i").unwrap();
        let ModelSpec::LinearAction { rows } = m.spec else { panic!() };
        assert_eq!(rows[0][1], C64::new(1., 1.));
        for s in ["rotation", "quadric", "siegel", "simplex", "twisted_i", "twisted_ii:l=1;2,a=2;3", "twisted_iii", "pham2:q=4"] {
            parse_model(s).unwrap().spec.build().unwrap();
        }
        assert!(parse_model("fermat:n=2,lambda=1").is_err());
        assert!(parse_model("nope").is_err());
    }

    #[test]
    fn morse_shorthand() {
        assert_eq!(parse_morse("round").unwrap(), MorseKind::Round);
        assert_eq!(
            parse_morse("weighted:a=2,1;b=2,1").unwrap(),
            MorseKind::Weighted { a: vec![2., 1.], b: vec![2., 1.] }
        );
        assert!(parse_morse("weighted:a=1").is_err());
    }
}
