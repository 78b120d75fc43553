//! Compact environment descriptors, e.g. `iid-two-point:1,2,0.5` or
//! `flow:2,0,1/1,0,0`. A descriptor starting with `{` is read as JSON.

use super::continuous::ContinuousFamily;
use super::discrete::DiscreteFamily;
use super::profile::Profile;
use super::EnvError;

fn fail(input: &str, reason: impl Into<String>) -> EnvError {
    EnvError::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn numbers(input: &str, list: &str) -> Result<Vec<f64>, EnvError> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| fail(input, format!("'{}' is not a number", s.trim())))
        })
        .collect()
}

fn exactly<const N: usize>(input: &str, list: &str, usage: &str) -> Result<[f64; N], EnvError> {
    let v = numbers(input, list)?;
    v.try_into().map_err(|_| fail(input, format!("expected {usage}")))
}

fn split(input: &str) -> Result<(&str, &str), EnvError> {
    input
        .split_once(':')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| fail(input, "expected 'family:parameters' or a JSON object"))
}

/// Parse a discrete environment descriptor.
///
/// | descriptor | family |
/// |---|---|
/// | `constant:V` | constant conductance `V` |
/// | `iid-two-point:A,B,P` | `A` with probability `P`, else `B` |
/// | `iid-uniform:LO,HI` | uniform on `(LO, HI]` |
/// | `iid-pareto:EXP` | `P(c > x) = x^-EXP` |
/// | `rotation:ALPHA,MEAN,COS,SIN[,PHASE]` | `MEAN + COS cos 2πu + SIN sin 2πu` along `u = ω + kα` |
/// | `markov:R0;R1;.../V0,V1,...` | rows of the transition matrix, then state values |
pub fn parse_discrete(input: &str) -> Result<DiscreteFamily, EnvError> {
    let trimmed = input.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| fail(input, e.to_string()));
    }
    let (family, params) = split(trimmed)?;
    Ok(match family {
        "constant" => {
            let [value] = exactly(input, params, "constant:V")?;
            DiscreteFamily::Constant { value }
        }
        "iid-two-point" => {
            let [a, b, p] = exactly(input, params, "iid-two-point:A,B,P")?;
            DiscreteFamily::IidTwoPoint { a, b, p }
        }
        "iid-uniform" => {
            let [lo, hi] = exactly(input, params, "iid-uniform:LO,HI")?;
            DiscreteFamily::IidUniform { lo, hi }
        }
        "iid-pareto" => {
            let [exponent] = exactly(input, params, "iid-pareto:EXPONENT")?;
            DiscreteFamily::IidPareto { exponent }
        }
        "rotation" => {
            let v = numbers(input, params)?;
            if !(v.len() == 4 || v.len() == 5) {
                return Err(fail(input, "expected rotation:ALPHA,MEAN,COS,SIN[,PHASE]"));
            }
            DiscreteFamily::Rotation {
                alpha: v[0],
                profile: Profile::new(v[1], v[2], v[3]),
                phase: v.get(4).copied(),
            }
        }
        "markov" => {
            let (rows, values) = params
                .split_once('/')
                .ok_or_else(|| fail(input, "expected markov:ROW;ROW;.../VALUES"))?;
            let transition = rows
                .split(';')
                .map(|r| numbers(input, r))
                .collect::<Result<Vec<_>, _>>()?;
            DiscreteFamily::Markov {
                transition,
                values: numbers(input, values)?,
            }
        }
        other => {
            return Err(fail(
                input,
                format!(
                    "unknown family '{other}'; expected one of constant, iid-two-point, \
                     iid-uniform, iid-pareto, rotation, markov"
                ),
            ))
        }
    })
}

/// Parse a continuous environment descriptor.
///
/// `constant:LAMBDA,GAMMA`, or `flow:LM,LC,LS[/GM,GC,GS[/PHASE]]` where each
/// triple is `mean, cos, sin` of a period-1 profile (γ defaults to 1).
pub fn parse_continuous(input: &str) -> Result<ContinuousFamily, EnvError> {
    let trimmed = input.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| fail(input, e.to_string()));
    }
    let (family, params) = split(trimmed)?;
    match family {
        "constant" => {
            let [lambda, gamma] = exactly(input, params, "constant:LAMBDA,GAMMA")?;
            Ok(ContinuousFamily::Constant { lambda, gamma })
        }
        "flow" | "rotation-flow" => {
            let parts: Vec<&str> = params.split('/').collect();
            if parts.is_empty() || parts.len() > 3 {
                return Err(fail(input, "expected flow:LM,LC,LS[/GM,GC,GS[/PHASE]]"));
            }
            let [lm, lc, ls] = exactly(input, parts[0], "three lambda coefficients MEAN,COS,SIN")?;
            let gamma = match parts.get(1) {
                Some(g) => {
                    let [gm, gc, gs] = exactly(input, g, "three gamma coefficients MEAN,COS,SIN")?;
                    Profile::new(gm, gc, gs)
                }
                None => Profile::constant(1.0),
            };
            let phase = match parts.get(2) {
                Some(p) => Some(exactly::<1>(input, p, "a single phase")?[0]),
                None => None,
            };
            Ok(ContinuousFamily::RotationFlow {
                lambda: Profile::new(lm, lc, ls),
                gamma,
                phase,
            })
        }
        other => Err(fail(
            input,
            format!("unknown family '{other}'; expected constant or flow"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_discrete_forms() {
        assert_eq!(
            parse_discrete("iid-two-point:1,2,0.5").unwrap(),
            DiscreteFamily::IidTwoPoint {
                a: 1.0,
                b: 2.0,
                p: 0.5
            }
        );
        assert_eq!(
            parse_discrete("constant:1").unwrap(),
            DiscreteFamily::Constant { value: 1.0 }
        );
        assert_eq!(
            parse_discrete("markov:0.9,0.1;0.2,0.8/1,3").unwrap(),
            DiscreteFamily::Markov {
                transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                values: vec![1.0, 3.0]
            }
        );
        assert!(matches!(
            parse_discrete("rotation:0.41,2,1,0,0.25").unwrap(),
            DiscreteFamily::Rotation { phase: Some(p), .. } if p == 0.25
        ));
    }

    #[test]
    fn json_form_matches_compact_form() {
        let json = r#"{"family":"iid-uniform","lo":0,"hi":1}"#;
        assert_eq!(
            parse_discrete(json).unwrap(),
            parse_discrete("iid-uniform:0,1").unwrap()
        );
        let family = parse_discrete("rotation:0.3,2,1,0").unwrap();
        let text = serde_json::to_string(&family).unwrap();
        assert_eq!(parse_discrete(&text).unwrap(), family);
    }

    #[test]
    fn continuous_forms() {
        let f = parse_continuous("flow:2,0,1").unwrap();
        assert_eq!(
            f,
            ContinuousFamily::RotationFlow {
                lambda: Profile::new(2.0, 0.0, 1.0),
                gamma: Profile::constant(1.0),
                phase: None
            }
        );
        assert!(matches!(
            parse_continuous("flow:2,0,1/1,0,0/0").unwrap(),
            ContinuousFamily::RotationFlow { phase: Some(p), .. } if p == 0.0
        ));
        assert_eq!(
            parse_continuous("constant:1,1").unwrap(),
            ContinuousFamily::Constant {
                lambda: 1.0,
                gamma: 1.0
            }
        );
    }

    #[test]
    fn errors_name_the_problem() {
        let e = parse_discrete("iid-two-point:1,2").unwrap_err().to_string();
        assert!(e.contains("iid-two-point:A,B,P"), "{e}");
        let e = parse_discrete("gaussian:0,1").unwrap_err().to_string();
        assert!(e.contains("unknown family"), "{e}");
        assert!(parse_discrete("constant").is_err());
        assert!(parse_continuous("flow:a,b,c").is_err());
    }
}
