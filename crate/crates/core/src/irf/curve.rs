use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::transform::ShockTransform;
use crate::error::{Error, Result};
use crate::panel::{Outcome, ShockKind};

/// Which regression a curve comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecLabel {
    Linear,
    /// Absolute-value transform.
    Sign,
    /// Threshold transform.
    Size,
}

impl SpecLabel {
    pub const ALL: [SpecLabel; 3] = [SpecLabel::Linear, SpecLabel::Sign, SpecLabel::Size];

    pub fn name(self) -> &'static str {
        match self {
            SpecLabel::Linear => "linear",
            SpecLabel::Sign => "sign",
            SpecLabel::Size => "size",
        }
    }

    pub fn of(transform: Option<ShockTransform>) -> SpecLabel {
        match transform {
            None | Some(ShockTransform::Identity) => SpecLabel::Linear,
            Some(ShockTransform::AbsValue) => SpecLabel::Sign,
            Some(ShockTransform::ThresholdShift { .. }) => SpecLabel::Size,
        }
    }
}

impl fmt::Display for SpecLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpecLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SpecLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "specification label",
                input: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Flavor {
    Unconditional,
    ConditionalPos,
    ConditionalNeg,
    Scaled(f64),
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Unconditional => f.write_str("unconditional"),
            Flavor::ConditionalPos => f.write_str("conditional_pos"),
            Flavor::ConditionalNeg => f.write_str("conditional_neg"),
            Flavor::Scaled(a) => write!(f, "scaled({a})"),
        }
    }
}

impl FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            what: "IRF flavor",
            input: s.to_string(),
        };
        match s {
            "unconditional" => Ok(Flavor::Unconditional),
            "conditional_pos" => Ok(Flavor::ConditionalPos),
            "conditional_neg" => Ok(Flavor::ConditionalNeg),
            _ => {
                let inner = s.strip_prefix("scaled(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
                inner.parse().map(Flavor::Scaled).map_err(|_| bad())
            }
        }
    }
}

/// Response of one outcome to one shock over horizons `0..values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfCurve {
    pub shock: ShockKind,
    pub outcome: Outcome,
    pub spec: SpecLabel,
    pub flavor: Flavor,
    pub values: Vec<f64>,
    pub delta: f64,
}

pub const IRF_HEADER: [&str; 7] = ["shock", "outcome", "spec", "flavor", "h", "value", "delta"];

/// Long format, one row per horizon.
pub fn write_irf_csv<W: Write>(curves: &[IrfCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(IRF_HEADER)?;
    for c in curves {
        for (h, v) in c.values.iter().enumerate() {
            w.write_record([
                c.shock.name().to_string(),
                c.outcome.name().to_string(),
                c.spec.name().to_string(),
                c.flavor.to_string(),
                h.to_string(),
                v.to_string(),
                c.delta.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads curves back; horizons of each curve must run 0, 1, 2, ... without gaps.
pub fn read_irf_csv<R: Read>(reader: R) -> Result<Vec<IrfCurve>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != IRF_HEADER {
        return Err(Error::Invalid(format!("IRF header must be {}", IRF_HEADER.join(","))));
    }
    let mut curves: Vec<IrfCurve> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                what: "IRF value",
                input: rec[i].to_string(),
            })
        };
        let shock: ShockKind = rec[0].parse()?;
        let outcome: Outcome = rec[1].parse()?;
        let spec: SpecLabel = rec[2].parse()?;
        let flavor: Flavor = rec[3].parse()?;
        let h: usize = rec[4].parse().map_err(|_| Error::Parse {
            what: "horizon",
            input: rec[4].to_string(),
        })?;
        let (value, delta) = (num(5)?, num(6)?);
        let same = curves.last().is_some_and(|c| {
            c.shock == shock && c.outcome == outcome && c.spec == spec && c.flavor == flavor
        });
        if same {
            let c = curves.last_mut().unwrap();
            if h != c.values.len() {
                return Err(Error::Invalid(format!("IRF horizons out of sequence at h={h}")));
            }
            c.values.push(value);
        } else {
            if h != 0 {
                return Err(Error::Invalid(format!("IRF curve starts at h={h}")));
            }
            curves.push(IrfCurve {
                shock,
                outcome,
                spec,
                flavor,
                values: vec![value],
                delta,
            });
        }
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let curves = vec![
            IrfCurve {
                shock: ShockKind::Information,
                outcome: Outcome::Cpi,
                spec: SpecLabel::Size,
                flavor: Flavor::Scaled(0.75),
                values: vec![0.1, -0.25, 1e-9],
                delta: 0.93,
            },
            IrfCurve {
                shock: ShockKind::Monetary,
                outcome: Outcome::Reer,
                spec: SpecLabel::Sign,
                flavor: Flavor::ConditionalNeg,
                values: vec![2.0],
                delta: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_irf_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("shock,outcome,spec,flavor,h,value,delta\ninformation,cpi,size,scaled(0.75),0,0.1,0.93\n"));
        assert_eq!(read_irf_csv(buf.as_slice()).unwrap(), curves);
    }

    #[test]
    fn gaps_are_rejected() {
        let text = "shock,outcome,spec,flavor,h,value,delta\nmonetary,cpi,linear,unconditional,0,1,1\nmonetary,cpi,linear,unconditional,2,1,1\n";
        assert!(read_irf_csv(text.as_bytes()).is_err());
    }
}
