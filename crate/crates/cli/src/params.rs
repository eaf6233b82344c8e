use std::collections::BTreeMap;

use weakmeas::{HermitianObservable, QuantumState, C64};

use crate::error::CliError;

/// Typed access to the raw string parameters of a config.
#[derive(Debug, Clone, Copy)]
pub struct Params<'a>(pub &'a BTreeMap<String, String>);

impl<'a> Params<'a> {
    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        let values = raw
            .split(',')
            .map(|s| {
                let s = s.trim();
                let v: f64 = match s {
                    "inf" => f64::INFINITY,
                    _ => s
                        .parse()
                        .map_err(|_| CliError::config(key, format!("not a number: {s:?}")))?,
                };
                if v.is_nan() {
                    return Err(CliError::config(key, "NaN is not allowed"));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(values))
    }

    /// Comma list of non-negative integers; `a..b` ranges are inclusive.
    pub fn list_usize(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config(key, format!("not a non-negative integer: {s:?}")))
        };
        let mut out = Vec::new();
        for part in raw.split(',') {
            match part.split_once("..") {
                Some((a, b)) => {
                    let (a, b) = (int(a)?, int(b)?);
                    if a > b {
                        return Err(CliError::config(key, format!("empty range {part:?}")));
                    }
                    out.extend(a..=b);
                }
                None => out.push(int(part)?),
            }
        }
        Ok(Some(out))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.list_f64(key)? {
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(CliError::config(key, "expected a single value")),
            None => Ok(None),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.raw(key)
            .map(|s| {
                s.trim().parse::<u64>().map_err(|_| {
                    CliError::config(key, format!("not a non-negative integer: {s:?}"))
                })
            })
            .transpose()
    }

    pub fn state(&self, key: &str) -> Result<Option<QuantumState>, CliError> {
        self.raw(key).map(|s| parse_state(key, s)).transpose()
    }

    pub fn observable(&self, key: &str) -> Result<Option<HermitianObservable>, CliError> {
        self.raw(key)
            .map(|s| match s.trim() {
                "sx" => Ok(HermitianObservable::sigma_x()),
                "sy" => Ok(HermitianObservable::sigma_y()),
                "sz" => Ok(HermitianObservable::sigma_z()),
                other => Err(CliError::config(
                    key,
                    format!("unknown observable {other:?}; expected sx, sy or sz"),
                )),
            })
            .transpose()
    }
}

/// `zero`, `one`, `plus`, `minus`, `plus_i`, `minus_i` or `bloch:THETA:PHI`.
pub fn parse_state(key: &str, text: &str) -> Result<QuantumState, CliError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let ci = |re: f64, im: f64| C64::new(re, im);
    let s = match text.trim() {
        "zero" => QuantumState::zero(),
        "one" => QuantumState::one(),
        "plus" => QuantumState::plus(),
        "minus" => QuantumState::minus(),
        "plus_i" => {
            QuantumState::from_amplitudes(vec![ci(h, 0.0), ci(0.0, h)]).expect("normalized")
        }
        "minus_i" => {
            QuantumState::from_amplitudes(vec![ci(h, 0.0), ci(0.0, -h)]).expect("normalized")
        }
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            let angle = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::config(key, format!("bad angle in {other:?}")))
            };
            match parts.as_slice() {
                ["bloch", theta, phi] => QuantumState::bloch(angle(theta)?, angle(phi)?),
                _ => {
                    return Err(CliError::config(
                        key,
                        format!(
                            "unknown state {other:?}; expected zero, one, plus, minus, plus_i, minus_i or bloch:THETA:PHI"
                        ),
                    ))
                }
            }
        }
    };
    Ok(s)
}
