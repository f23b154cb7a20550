use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{LlmClient, LlmError};
use crate::runtime::{embeds_data, CandidateProgram, DataMode};

pub const COT_SYSTEM: &str = "You are an optimization expert who solves problems with step-by-step reasoning.";
pub const EXTRACTION_SYSTEM: &str = "You extract numerical data from optimization problem descriptions into JSON.";
const BASE_SYSTEM: &str = "You are an optimization expert who writes gurobipy code.";

const COT_HEAD: &str = "Solve this optimization problem using chain-of-thought reasoning.

## Problem
";

const COT_STEPS_1_2: &str = "
---
## STEP 1: UNDERSTAND THE PROBLEM
First, analyze the problem:
- What is the objective? (minimize cost / maximize profit / etc.)
- What decisions need to be made?
- What constraints exist?
- What parameters are given?

## STEP 2: FORMULATE THE MATHEMATICAL MODEL
Write the formal model:
- Sets and indices
";

const PARAMS_SELF: &str = "- Parameters (extract all numerical values from the problem
  description)
";
const PARAMS_DATA: &str = "- Parameters (reference the data keys listed below)
";

const COT_STEP_2_REST: &str = "- Decision variables with domains
  **Variable Type**: For each variable, explicitly decide CONTINUOUS,
  INTEGER, or BINARY. Look for context where fractional values would
  be physically meaningless (e.g., number of trucks, workers to hire,
  items to select). State your choice and reasoning.
- Constraints in mathematical notation
- Objective function

## STEP 3: GENERATE GUROBI CODE
";

const STEP3_SELF: &str = "Write self-contained Python code using gurobipy.

**CRITICAL RULES:**
1. Define ALL data within your code (extract numbers from the problem
   description above)
";
const STEP3_DATA: &str = "Write Python code using gurobipy.

**CRITICAL RULES:**
1. The `data` variable is PRE-LOADED with the problem data. Do NOT define or redefine `data`. Just use `data[\"key\"]` directly.
";

const RULES_2_6: &str = "2. Model variable must be named `m`
3. Set `m.Params.OutputFlag = 0`
4. Print exactly: `print(f\"status: {m.Status}\")` and
   `print(f\"objective: {m.ObjVal}\")`
5. Implement ALL constraints mentioned in the problem description
   (not just those in Step 2 -- re-read the problem to ensure
   nothing is missed)
6. Include ALL cost/revenue terms from the problem in the objective
   function
";
const RULE_7: &str = "7. Do NOT use `import json` or `json.loads()`. Data is already a Python dict.
";

const GUIDELINES: &str = "
**Big-M Guidelines (if using indicator/logical constraints):**
- NEVER hardcode Big-M values like `M = 1e6`
- ALWAYS compute M dynamically from data parameters

**Edge Case Handling:**
- Check array length before iteration
- Avoid division by zero: `max(value, 1e-6)`
";

const STEP4_HEAD: &str = "
## STEP 4: VERIFY COMPLETENESS
Before finalizing, cross-check your code against the original problem:
- Does the objective include EVERY cost/revenue term mentioned in the
  problem?
- Is EVERY constraint from the problem implemented in the code?
";
const STEP4_SELF: &str = "- Are all numerical values correctly extracted from the problem
  description?
";
const STEP4_DATA: &str = "- Are data keys accessed correctly?
";

const COT_TAIL: &str = "If anything is missing, fix the code before returning it.

---
Now solve the problem. Show your reasoning for Steps 1-2, then
provide the final code in a ```python block.
";

/// Four-step generation prompt. With `schema` the code must read the
/// pre-loaded `data` record; without it the code embeds its own data.
pub fn cot_prompt(problem: &str, schema: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str(COT_HEAD);
    out.push_str(problem);
    out.push('\n');
    out.push_str(COT_STEPS_1_2);
    out.push_str(if schema.is_some() { PARAMS_DATA } else { PARAMS_SELF });
    out.push_str(COT_STEP_2_REST);
    out.push_str(if schema.is_some() { STEP3_DATA } else { STEP3_SELF });
    out.push_str(RULES_2_6);
    if schema.is_some() {
        out.push_str(RULE_7);
    }
    out.push_str(GUIDELINES);
    if let Some(schema) = schema {
        out.push_str("\n## Available Data Keys\n");
        out.push_str(schema.trim_end());
        out.push('\n');
    }
    out.push_str(STEP4_HEAD);
    out.push_str(if schema.is_some() { STEP4_DATA } else { STEP4_SELF });
    out.push_str(COT_TAIL);
    out
}

/// Direct generation without the reasoning scaffold.
pub fn base_prompt(problem: &str) -> String {
    format!(
        "{problem}\n\nWrite Python code using gurobipy that solves this problem. Name the model `m`, set `m.Params.OutputFlag = 0`, and print exactly `print(f\"status: {{m.Status}}\")` and `print(f\"objective: {{m.ObjVal}}\")`. Return the code in a ```python block.\n"
    )
}

pub fn extraction_prompt(problem: &str) -> String {
    format!(
        "Extract every numerical parameter of the optimization problem below into one JSON object.

## Problem
{problem}

## Rules
- Use descriptive snake_case keys
- Values are numbers, lists of numbers, or objects keyed by entity name
- Keep entity names (products, locations, periods) as object keys or string lists
- Do not invent values that are not stated in the problem

Return ONLY the JSON object in a ```json block.
"
    )
}

/// Type-level description of a record: keys, types and sizes but no values.
pub fn describe_schema(record: &Value) -> String {
    match record.as_object() {
        Some(map) => map
            .iter()
            .map(|(k, v)| format!("- {k}: {}", describe(v, 0)))
            .collect::<Vec<_>>()
            .join("\n"),
        None => format!("- <root>: {}", describe(record, 0)),
    }
}

fn describe(v: &Value, depth: usize) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(_) => "bool".into(),
        Value::Number(n) if n.is_i64() || n.is_u64() => "int".into(),
        Value::Number(_) => "float".into(),
        Value::String(_) => "str".into(),
        Value::Array(items) => match items.first() {
            Some(first) if depth < 4 => format!("list[{}] of {}", items.len(), describe(first, depth + 1)),
            Some(_) => format!("list[{}]", items.len()),
            None => "list[0]".into(),
        },
        Value::Object(map) => {
            if depth >= 4 || map.is_empty() {
                return format!("dict[{}]", map.len());
            }
            let keys: Vec<&str> = map.keys().map(String::as_str).collect();
            let same_shape = map.values().all(|x| describe(x, depth + 1) == describe(map.values().next().unwrap(), depth + 1));
            if same_shape && keys.len() > 1 && !map.values().next().unwrap().is_object() {
                format!("dict{{{}}} of {}", keys.join(", "), describe(map.values().next().unwrap(), depth + 1))
            } else {
                let inner: Vec<String> = map.iter().map(|(k, x)| format!("{k}: {}", describe(x, depth + 1))).collect();
                format!("{{{}}}", inner.join("; "))
            }
        }
    }
}

/// Contents of the last fenced block, preferring the final code over any
/// sketches that precede it.
pub fn extract_code(reply: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in reply.lines() {
        let trimmed = line.trim_start();
        match current.as_mut() {
            None if trimmed.starts_with("```") => current = Some(Vec::new()),
            None => {}
            Some(body) if trimmed.starts_with("```") => {
                blocks.push(body.join("\n"));
                current = None;
            }
            Some(body) => body.push(line),
        }
    }
    blocks.into_iter().rev().find(|b| !b.trim().is_empty()).map(|mut b| {
        b.push('\n');
        b
    })
}

/// Parse an extraction reply into a non-empty JSON object.
pub fn parse_extracted_record(reply: &str) -> Option<Value> {
    let candidates = [extract_code(reply), slice_object(reply)];
    candidates
        .into_iter()
        .flatten()
        .filter_map(|text| serde_json::from_str::<Value>(text.trim()).ok())
        .find(|v| v.as_object().is_some_and(|m| !m.is_empty()))
}

fn slice_object(text: &str) -> Option<String> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| text[start..=end].to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStyle {
    #[default]
    Cot,
    Base,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub stage: String,
    pub system: String,
    pub user: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedProgram {
    pub program: CandidateProgram,
    /// Record the program expects as `data` (external mode only).
    pub data: Option<Value>,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("no code block in the model reply")]
    NoCode { exchanges: Vec<Exchange> },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

fn ask(
    llm: &dyn LlmClient,
    stage: &str,
    system: &str,
    user: String,
    log: &mut Vec<Exchange>,
) -> Result<String, LlmError> {
    let reply = llm.complete(system, &user)?;
    log.push(Exchange {
        stage: stage.into(),
        system: system.into(),
        user,
        reply: reply.clone(),
    });
    Ok(reply)
}

fn self_contained(
    problem: &str,
    llm: &dyn LlmClient,
    style: GenerationStyle,
    mut log: Vec<Exchange>,
) -> Result<GeneratedProgram, GenerationError> {
    let (system, user) = match style {
        GenerationStyle::Cot => (COT_SYSTEM, cot_prompt(problem, None)),
        GenerationStyle::Base => (BASE_SYSTEM, base_prompt(problem)),
    };
    let reply = ask(llm, "generate_self_contained", system, user, &mut log)?;
    match extract_code(&reply) {
        Some(code) => Ok(GeneratedProgram {
            program: CandidateProgram::self_contained(code),
            data: None,
            exchanges: log,
        }),
        None => Err(GenerationError::NoCode { exchanges: log }),
    }
}

/// Data-reference generation against a known record, with the
/// self-contained fallback when the reply has no usable code.
pub fn generate_with_data(
    problem: &str,
    data: Value,
    llm: &dyn LlmClient,
    style: GenerationStyle,
) -> Result<GeneratedProgram, GenerationError> {
    generate_referencing(problem, data, llm, style, Vec::new())
}

fn generate_referencing(
    problem: &str,
    data: Value,
    llm: &dyn LlmClient,
    style: GenerationStyle,
    mut log: Vec<Exchange>,
) -> Result<GeneratedProgram, GenerationError> {
    if style == GenerationStyle::Base {
        return self_contained(problem, llm, style, log);
    }
    let schema = describe_schema(&data);
    let reply = ask(llm, "generate_data_reference", COT_SYSTEM, cot_prompt(problem, Some(&schema)), &mut log)?;
    match extract_code(&reply) {
        Some(code) if !embeds_data(&code) => Ok(GeneratedProgram {
            program: CandidateProgram {
                source: code,
                data_mode: DataMode::ExternalDict,
            },
            data: Some(data),
            exchanges: log,
        }),
        _ => self_contained(problem, llm, style, log),
    }
}

/// Extraction-first generation: pull the numbers into a record, generate
/// code that reads it, and fall back to self-contained code on any failure.
pub fn generate(problem: &str, llm: &dyn LlmClient, style: GenerationStyle) -> Result<GeneratedProgram, GenerationError> {
    if style == GenerationStyle::Base {
        return self_contained(problem, llm, style, Vec::new());
    }
    let mut log = Vec::new();
    let reply = ask(llm, "extract_data", EXTRACTION_SYSTEM, extraction_prompt(problem), &mut log)?;
    match parse_extracted_record(&reply) {
        Some(record) => generate_referencing(problem, record, llm, style, log),
        None => self_contained(problem, llm, style, log),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;
    use serde_json::json;

    #[test]
    fn variants_differ_as_documented() {
        let own = cot_prompt("P", None);
        let data = cot_prompt("P", Some("- capacity: int"));
        assert!(own.contains("Define ALL data within your code"));
        assert!(own.contains("Write self-contained Python code using gurobipy."));
        assert!(!own.contains("Available Data Keys"));
        assert!(data.contains("The `data` variable is PRE-LOADED"));
        assert!(data.contains("7. Do NOT use `import json` or `json.loads()`."));
        assert!(data.contains("## Available Data Keys\n- capacity: int\n\n## STEP 4"));
        assert!(data.contains("- Are data keys accessed correctly?"));
        assert!(data.contains("- Parameters (reference the data keys listed below)"));
        for p in [&own, &data] {
            assert!(p.contains("## STEP 4: VERIFY COMPLETENESS"));
            assert!(p.contains("NEVER hardcode Big-M values like `M = 1e6`"));
            assert!(p.contains("print(f\"status: {m.Status}\")"));
            assert!(p.ends_with("provide the final code in a ```python block.\n"));
        }
        assert_eq!(cot_prompt("P", None), own);
    }

    #[test]
    fn last_fence_wins() {
        let reply = "sketch\n```python\nx = 1\n```\nfinal:\n```python\nprint('status: 2')\n```\n";
        assert_eq!(extract_code(reply).unwrap(), "print('status: 2')\n");
        assert_eq!(extract_code("no code here"), None);
    }

    #[test]
    fn schema_hides_values() {
        let s = describe_schema(&json!({
            "capacity": 500,
            "demand": {"A": [1.5, 2.0], "B": [3.0, 4.0]},
            "names": ["A", "B"]
        }));
        assert_eq!(s, "- capacity: int\n- demand: dict{A, B} of list[2] of float\n- names: list[2] of str");
        assert!(!s.contains("500"));
    }

    #[test]
    fn extraction_success_yields_external_program() {
        let llm = ScriptedClient::new([
            "```json\n{\"capacity\": 500}\n```",
            "reasoning\n```python\nprint(data['capacity'])\n```",
        ]);
        let g = generate("problem", &llm, GenerationStyle::Cot).unwrap();
        assert_eq!(g.program.data_mode, DataMode::ExternalDict);
        assert_eq!(g.data, Some(json!({"capacity": 500})));
        assert_eq!(g.exchanges.len(), 2);
        assert!(llm.calls()[1].1.contains("- capacity: int"));
    }

    #[test]
    fn prose_extraction_falls_back() {
        let llm = ScriptedClient::new(["I could not find numbers.", "```python\ncapacity = 500\n```"]);
        let g = generate("problem", &llm, GenerationStyle::Cot).unwrap();
        assert_eq!(g.program.data_mode, DataMode::SelfContained);
        assert!(g.data.is_none());
        assert!(llm.calls()[1].1.contains("Define ALL data within your code"));
    }

    #[test]
    fn embedded_parse_triggers_fallback() {
        let llm = ScriptedClient::new([
            "{\"a\": 1}",
            "```python\nimport json\ndata = json.loads('{}')\n```",
            "```python\na = 1\n```",
        ]);
        let g = generate("problem", &llm, GenerationStyle::Cot).unwrap();
        assert_eq!(g.program.source, "a = 1\n");
        assert_eq!(g.program.data_mode, DataMode::SelfContained);
    }

    #[test]
    fn missing_fence_is_generation_error() {
        let llm = ScriptedClient::new(["nope", "still no code"]);
        assert!(matches!(
            generate("problem", &llm, GenerationStyle::Cot),
            Err(GenerationError::NoCode { .. })
        ));
    }
}
