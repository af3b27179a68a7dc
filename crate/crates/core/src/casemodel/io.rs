use std::fs;
use std::path::Path;

use super::{CaseData, CaseError};

pub fn from_toml_str(text: &str) -> Result<CaseData, CaseError> {
    Ok(toml::from_str(text)?)
}

pub fn to_toml_string(case: &CaseData) -> Result<String, CaseError> {
    Ok(toml::to_string_pretty(case)?)
}

/// Reads a TOML case file (MW/MVAr units).
pub fn read_case(path: impl AsRef<Path>) -> Result<CaseData, CaseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml_str(&text)
}

pub fn write_case(case: &CaseData, path: impl AsRef<Path>) -> Result<(), CaseError> {
    let path = path.as_ref();
    fs::write(path, to_toml_string(case)?).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casemodel::builtin_case;

    #[test]
    fn builtin_cases_round_trip() {
        for name in ["five_bus", "rts24"] {
            let case = builtin_case(name).unwrap();
            let text = to_toml_string(&case).unwrap();
            assert!(text.contains("[[aggregators]]"));
            assert_eq!(from_toml_str(&text).unwrap(), case);
        }
    }

    #[test]
    fn minimal_file_parses() {
        let text = r#"
s_base = 100.0

[[buses]]
id = 1
is_slack = true
v_min = 0.95
v_max = 1.05

[[generators]]
bus = 1
a = 1.0
b = 0.0
c = 0.0
p_min = 0.0
p_max = 50.0
q_min = -10.0
q_max = 10.0

[[aggregators]]
bus = 1
sigma = 1.0
gamma = 10.0
mu = 1.0
p_n = 20.0
p_c = 0.0
q_n = 1.0
q_c = 0.0
"#;
        let case = from_toml_str(text).unwrap();
        assert!(case.lines.is_empty());
        assert_eq!(case.aggregators[0].gamma, 10.0);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_case("/nonexistent/case.toml"),
            Err(CaseError::Io { .. })
        ));
    }
}
