//! Scenario files: flat `key = value` lines plus one per-subtrial table.
//!
//! ```text
//! name = scenario4
//! n_per_arm = 25
//! sigma1 = 0.5
//! rho = 0.3
//!
//! [subtrials]
//! subtrial gamma1 gamma2 theta1 theta2 rr_control rr_treatment true_lor beta1 beta2
//! 1  0.5 -0.1  0.5 0.3  0.19 0.39  1.00  -  -
//! ```
//!
//! `#` starts a comment; `-` in the beta columns means "not calibrated".
//! Rows must cover subtrials 1..K in order.

use std::path::Path;

use augbin_core::simlab::{ScenarioSpec, SubtrialScenario};

use crate::errors::{CliError, CliResult};

const TABLE_COLUMNS: [&str; 10] = [
    "subtrial",
    "gamma1",
    "gamma2",
    "theta1",
    "theta2",
    "rr_control",
    "rr_treatment",
    "true_lor",
    "beta1",
    "beta2",
];

pub fn parse_scenario(text: &str, origin: &str) -> CliResult<ScenarioSpec> {
    let mut name: Option<String> = None;
    let mut n_per_arm: Option<usize> = None;
    let mut sigma1: Option<f64> = None;
    let mut rho: Option<f64> = None;
    let mut subtrials: Vec<SubtrialScenario> = Vec::new();
    let mut in_table = false;
    let mut saw_table_header = false;

    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |msg: String| CliError::malformed(format!("{origin}, line {}: {msg}", li + 1));

        if line == "[subtrials]" {
            if in_table {
                return Err(fail("duplicate [subtrials] section".into()));
            }
            in_table = true;
            continue;
        }

        if !in_table {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = || {
                value
                    .parse::<f64>()
                    .map_err(|_| fail(format!("`{key}` must be a number, got `{value}`")))
            };
            match key {
                "name" => name = Some(value.to_string()),
                "n_per_arm" => {
                    n_per_arm = Some(value.parse::<usize>().map_err(|_| {
                        fail(format!("`n_per_arm` must be a positive integer, got `{value}`"))
                    })?)
                }
                "sigma1" => sigma1 = Some(parse_f64()?),
                "rho" => rho = Some(parse_f64()?),
                other => return Err(fail(format!("unknown key `{other}`"))),
            }
            continue;
        }

        let fields: Vec<&str> = line.split_whitespace().collect();
        if !saw_table_header {
            if fields != TABLE_COLUMNS {
                return Err(fail(format!(
                    "table header must be `{}`",
                    TABLE_COLUMNS.join(" ")
                )));
            }
            saw_table_header = true;
            continue;
        }
        if fields.len() != TABLE_COLUMNS.len() {
            return Err(fail(format!(
                "expected {} columns, got {}",
                TABLE_COLUMNS.len(),
                fields.len()
            )));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| fail(format!("subtrial index must be an integer, got `{}`", fields[0])))?;
        if idx != subtrials.len() + 1 {
            return Err(fail(format!(
                "subtrial rows must be 1..K in order; expected {}, got {idx}",
                subtrials.len() + 1
            )));
        }
        let num = |j: usize| -> CliResult<f64> {
            fields[j]
                .parse::<f64>()
                .map_err(|_| fail(format!("column `{}`: not a number `{}`", TABLE_COLUMNS[j], fields[j])))
        };
        let opt = |j: usize| -> CliResult<Option<f64>> {
            if fields[j] == "-" {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        let beta = match (opt(8)?, opt(9)?) {
            (Some(a), Some(b)) => Some([a, b]),
            (None, None) => None,
            _ => return Err(fail("beta1 and beta2 must both be set or both be `-`".into())),
        };
        subtrials.push(SubtrialScenario {
            gamma: [num(1)?, num(2)?],
            theta: [num(3)?, num(4)?],
            target_rr_control: num(5)?,
            target_rr_treatment: num(6)?,
            true_lor: num(7)?,
            paper_beta: beta.unwrap_or([1.0, 0.0]),
            beta,
        });
    }

    if !saw_table_header || subtrials.is_empty() {
        return Err(CliError::malformed(format!(
            "{origin}: missing or empty [subtrials] table"
        )));
    }
    let spec = ScenarioSpec {
        name: name.unwrap_or_else(|| "unnamed".to_string()),
        subtrials,
        sigma1: sigma1.unwrap_or(0.5),
        rho: rho.unwrap_or(0.3),
        n_per_arm: n_per_arm.unwrap_or(25),
    };
    spec.validate()
        .map_err(|e| CliError::malformed(format!("{origin}: {e}")))?;
    Ok(spec)
}

pub fn read_scenario(path: &Path) -> CliResult<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string())
}

/// Render a scenario back to the file grammar; floats print in shortest
/// round-trip form so write/read cycles are lossless.
pub fn render_scenario(spec: &ScenarioSpec, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("name = {}\n", spec.name));
    out.push_str(&format!("n_per_arm = {}\n", spec.n_per_arm));
    out.push_str(&format!("sigma1 = {}\n", spec.sigma1));
    out.push_str(&format!("rho = {}\n\n", spec.rho));
    out.push_str("[subtrials]\n");
    out.push_str(&TABLE_COLUMNS.join(" "));
    out.push('\n');
    for (i, s) in spec.subtrials.iter().enumerate() {
        let beta = match s.beta {
            Some([a, b]) => format!("{a} {b}"),
            None => "- -".to_string(),
        };
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {beta}\n",
            i + 1,
            s.gamma[0],
            s.gamma[1],
            s.theta[0],
            s.theta[1],
            s.target_rr_control,
            s.target_rr_treatment,
            s.true_lor,
        ));
    }
    out
}

pub fn write_scenario(path: &Path, spec: &ScenarioSpec, comments: &[String]) -> CliResult<()> {
    std::fs::write(path, render_scenario(spec, comments))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use augbin_core::simlab::scenario_library;

    #[test]
    fn parses_the_documented_example() {
        let text = "\
# demo\nname = scenario4\nn_per_arm = 25\nsigma1 = 0.5\nrho = 0.3\n\n[subtrials]\n\
subtrial gamma1 gamma2 theta1 theta2 rr_control rr_treatment true_lor beta1 beta2\n\
1  0.5 -0.1  0.5 0.3  0.19 0.39  1.00  -  -\n\
2  0.5 -0.1  0.5 0.3  0.19 0.39  1.00  0.93 0.18\n";
        let spec = parse_scenario(text, "inline").unwrap();
        assert_eq!(spec.name, "scenario4");
        assert_eq!(spec.subtrials.len(), 2);
        assert_eq!(spec.subtrials[0].beta, None);
        assert_eq!(spec.subtrials[1].beta, Some([0.93, 0.18]));
        assert_eq!(spec.subtrials[0].theta, [0.5, 0.3]);
    }

    #[test]
    fn round_trips_every_library_scenario() {
        for (_, spec) in scenario_library() {
            let rendered = render_scenario(&spec, &["round trip".into()]);
            let parsed = parse_scenario(&rendered, "render").unwrap();
            assert_eq!(parsed.name, spec.name);
            assert_eq!(parsed.sigma1, spec.sigma1);
            assert_eq!(parsed.rho, spec.rho);
            assert_eq!(parsed.n_per_arm, spec.n_per_arm);
            for (a, b) in parsed.subtrials.iter().zip(&spec.subtrials) {
                assert_eq!(a.gamma, b.gamma);
                assert_eq!(a.theta, b.theta);
                assert_eq!(a.target_rr_control, b.target_rr_control);
                assert_eq!(a.target_rr_treatment, b.target_rr_treatment);
                assert_eq!(a.true_lor, b.true_lor);
                assert_eq!(a.beta, b.beta);
            }
        }
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(parse_scenario("name = x\n", "t").is_err());
        let bad_header = "name = x\n[subtrials]\nsubtrial gamma1\n1 0.5\n";
        assert!(parse_scenario(bad_header, "t").unwrap_err().message.contains("header"));
        let bad_order = "\
name = x\n[subtrials]\n\
subtrial gamma1 gamma2 theta1 theta2 rr_control rr_treatment true_lor beta1 beta2\n\
2 0.5 -0.1 0 0 0.2 0.2 0 - -\n";
        assert!(parse_scenario(bad_order, "t").unwrap_err().message.contains("expected 1"));
        let bad_target = "\
name = x\n[subtrials]\n\
subtrial gamma1 gamma2 theta1 theta2 rr_control rr_treatment true_lor beta1 beta2\n\
1 0.5 -0.1 0 0 1.2 0.2 0 - -\n";
        let err = parse_scenario(bad_target, "t").unwrap_err();
        assert_eq!(err.code, 2);
    }
}
