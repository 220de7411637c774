use serde::{Deserialize, Serialize};

use super::{Instance, JobId, JobSpec, PrecedenceDag};
use crate::exact::{serde_rational, Rational};

const TOP_LEVEL_FIELDS: [&str; 5] = ["machines", "no_surprises", "allow_zero_size", "jobs", "edges"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    id: JobId,
    #[serde(with = "serde_rational")]
    size: Rational,
    #[serde(with = "serde_rational")]
    weight: Rational,
    #[serde(with = "serde_rational")]
    release: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    machines: u32,
    no_surprises: bool,
    allow_zero_size: bool,
    jobs: Vec<RawJob>,
    edges: Vec<(JobId, JobId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// Required top-level fields absent from the input.
    pub missing: Vec<String>,
}

/// Canonical JSON: jobs sorted by id, edges sorted, rationals as `"num/den"`.
pub fn serialize_instance(inst: &Instance) -> Vec<u8> {
    let mut inst = inst.clone();
    inst.canonicalize();
    let raw = RawInstance {
        machines: inst.machines,
        no_surprises: inst.no_surprises,
        allow_zero_size: inst.allow_zero_size,
        jobs: inst
            .jobs
            .into_iter()
            .map(|j| RawJob {
                id: j.id,
                size: j.size,
                weight: j.weight,
                release: j.release,
            })
            .collect(),
        edges: inst.dag.edges,
    };
    let mut out = serde_json::to_vec_pretty(&raw).expect("instance serializes");
    out.push(b'\n');
    out
}

/// Parses the canonical format. Duplicate jobs or edges are kept so that
/// validation can report them.
pub fn parse_instance(bytes: &[u8]) -> Result<Instance, ParseError> {
    let text = String::from_utf8_lossy(bytes);
    let raw: RawInstance = serde_json::from_str(&text).map_err(|e| {
        let missing: Vec<String> = TOP_LEVEL_FIELDS
            .iter()
            .filter(|f| !text.contains(&format!("\"{f}\"")))
            .map(|f| f.to_string())
            .collect();
        let mut message = e.to_string();
        if e.is_eof() && !missing.is_empty() {
            message = format!("{message}; missing field(s): {}", missing.join(", "));
        }
        ParseError {
            line: e.line(),
            column: e.column(),
            message,
            missing,
        }
    })?;
    Ok(Instance {
        jobs: raw
            .jobs
            .into_iter()
            .map(|j| JobSpec {
                id: j.id,
                size: j.size,
                weight: j.weight,
                release: j.release,
            })
            .collect(),
        dag: PrecedenceDag { edges: raw.edges },
        machines: raw.machines,
        no_surprises: raw.no_surprises,
        allow_zero_size: raw.allow_zero_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn single() -> Instance {
        Instance {
            jobs: vec![JobSpec::new(0, int(1), int(1), int(0))],
            dag: PrecedenceDag::default(),
            machines: 1,
            no_surprises: true,
            allow_zero_size: false,
        }
    }

    #[test]
    fn single_job_round_trips_byte_identical() {
        let bytes = serialize_instance(&single());
        let back = parse_instance(&bytes).unwrap();
        assert_eq!(back, single());
        assert_eq!(serialize_instance(&back), bytes);
    }

    #[test]
    fn rational_sizes_survive() {
        let mut inst = single();
        inst.jobs[0].size = rat(1, 3);
        let bytes = serialize_instance(&inst);
        assert!(String::from_utf8_lossy(&bytes).contains("\"1/3\""));
        assert_eq!(parse_instance(&bytes).unwrap().jobs[0].size, rat(1, 3));
    }

    #[test]
    fn truncated_input_names_missing_field() {
        let bytes = serialize_instance(&single());
        let text = String::from_utf8(bytes).unwrap();
        let cut = text.find("\"edges\"").unwrap();
        let err = parse_instance(text[..cut].as_bytes()).unwrap_err();
        assert_eq!(err.missing, vec!["edges".to_string()]);
        assert!(err.to_string().contains("edges"));
        assert!(err.line > 1);
    }

    #[test]
    fn missing_field_in_complete_document() {
        let err = parse_instance(br#"{"machines": 1, "no_surprises": true, "allow_zero_size": false, "jobs": []}"#)
            .unwrap_err();
        assert!(err.message.contains("edges"), "{}", err.message);
    }

    #[test]
    fn floats_are_rejected() {
        let err = parse_instance(
            br#"{"machines":1,"no_surprises":true,"allow_zero_size":false,
                "jobs":[{"id":0,"size":1.5,"weight":"1/1","release":"0/1"}],"edges":[]}"#,
        )
        .unwrap_err();
        assert_eq!(err.line, 2);
    }
}
