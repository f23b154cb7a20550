use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::llm::{LlmClient, LlmError};

/// System line used for both extraction calls.
pub const EXTRACTION_SYSTEM: &str = "You are an optimization modeling analyst.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintType {
    Capacity,
    Demand,
    Balance,
    Other,
}

impl ConstraintType {
    fn parse(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "capacity" => ConstraintType::Capacity,
            "demand" => ConstraintType::Demand,
            "balance" => ConstraintType::Balance,
            _ => ConstraintType::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermRole {
    Cost,
    Revenue,
    Other,
}

impl TermRole {
    fn parse(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "cost" => TermRole::Cost,
            "revenue" => TermRole::Revenue,
            _ => TermRole::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConstraint {
    pub description: String,
    pub ctype: ConstraintType,
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateObjectiveTerm {
    pub description: String,
    pub role: TermRole,
    pub parameters: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("extraction reply contains no JSON array")]
    NoArray,
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// `['a', 'b']`, the way the key list prints in Python.
pub fn python_key_list(keys: &[String]) -> String {
    let quoted: Vec<String> = keys.iter().map(|k| format!("'{}'", k.replace('\'', "\\'"))).collect();
    format!("[{}]", quoted.join(", "))
}

pub fn constraint_extraction_prompt(problem: &str, keys: &[String]) -> String {
    format!(
        r#"Analyze this optimization problem and extract the KEY CONSTRAINTS
that should be present in the model.

## Problem Description
{problem}

## Available Data Parameters
{keys}

## Task
Identify constraints that are REQUIRED by the problem. Focus on:
1. Capacity constraints (resource limits, maximum values)
2. Demand constraints (minimum requirements, must-satisfy conditions)
3. Balance constraints (flow balance, inventory balance)

## Output Format
Return ONLY a JSON array with this exact format:
```json
[
  {{"description": "minimum protein requirement",
   "type": "demand", "parameters": ["min_protein"]}},
  {{"description": "capacity limit on production",
   "type": "capacity", "parameters": ["capacity"]}}
]
```

Return ONLY the JSON array, no explanation.
"#,
        keys = python_key_list(keys)
    )
}

pub fn objective_extraction_prompt(problem: &str, keys: &[String]) -> String {
    format!(
        r#"Analyze this optimization problem and extract the KEY OBJECTIVE
FUNCTION TERMS (cost and revenue components) that should be present
in the model's objective function.

## Problem Description
{problem}

## Available Data Parameters
{keys}

## Task
Identify cost and revenue terms that MUST appear in the objective
function. Focus on:
1. **Cost terms**: purchasing/procurement cost, holding/storage cost,
   transportation cost, shortage/backorder cost, setup/fixed cost,
   penalty cost
2. **Revenue terms**: sales revenue, demand revenue, return/salvage
   value

For each term, identify which data parameter(s) provide its
coefficient.

## Output Format
Return ONLY a JSON array with this exact format:
```json
[
  {{"description": "unit purchasing cost",
   "role": "cost", "parameters": ["unit_cost"]}},
  {{"description": "sales revenue per unit",
   "role": "revenue", "parameters": ["selling_price"]}}
]
```

Return ONLY the JSON array, no explanation.
"#,
        keys = python_key_list(keys)
    )
}

/// First JSON array found in a fenced block or in the raw text.
pub fn parse_json_array(reply: &str) -> Option<Vec<Value>> {
    let mut sources = Vec::new();
    if let Some(code) = crate::llm::extract_code(reply) {
        sources.push(code);
    }
    if let (Some(a), Some(b)) = (reply.find('['), reply.rfind(']')) {
        if b > a {
            sources.push(reply[a..=b].to_string());
        }
    }
    sources
        .into_iter()
        .find_map(|s| serde_json::from_str::<Value>(s.trim()).ok()?.as_array().cloned())
}

fn entry_fields(v: &Value, label_key: &str) -> Option<(String, String, Vec<String>)> {
    let obj = v.as_object()?;
    let description = obj.get("description")?.as_str()?.trim().to_string();
    let label = obj.get(label_key).and_then(Value::as_str).unwrap_or("other").to_string();
    let parameters: Vec<String> = obj
        .get("parameters")?
        .as_array()?
        .iter()
        .filter_map(|p| p.as_str().map(|s| s.trim().to_string()))
        .filter(|s| !s.is_empty())
        .collect();
    (!description.is_empty() && !parameters.is_empty()).then_some((description, label, parameters))
}

pub fn parse_constraints(reply: &str, max: usize) -> Result<Vec<CandidateConstraint>, ExtractionError> {
    let items = parse_json_array(reply).ok_or(ExtractionError::NoArray)?;
    Ok(items
        .iter()
        .filter_map(|v| entry_fields(v, "type"))
        .map(|(description, label, parameters)| CandidateConstraint {
            description,
            ctype: ConstraintType::parse(&label),
            parameters,
        })
        .take(max)
        .collect())
}

pub fn parse_objective_terms(reply: &str, max: usize) -> Result<Vec<CandidateObjectiveTerm>, ExtractionError> {
    let items = parse_json_array(reply).ok_or(ExtractionError::NoArray)?;
    Ok(items
        .iter()
        .filter_map(|v| entry_fields(v, "role"))
        .map(|(description, label, parameters)| CandidateObjectiveTerm {
            description,
            role: TermRole::parse(&label),
            parameters,
        })
        .take(max)
        .collect())
}

pub fn extract_constraints(
    problem: &str,
    keys: &[String],
    llm: &dyn LlmClient,
    max: usize,
) -> Result<(Vec<CandidateConstraint>, String, String), ExtractionError> {
    let prompt = constraint_extraction_prompt(problem, keys);
    let reply = llm.complete(EXTRACTION_SYSTEM, &prompt)?;
    Ok((parse_constraints(&reply, max)?, prompt, reply))
}

pub fn extract_objective_terms(
    problem: &str,
    keys: &[String],
    llm: &dyn LlmClient,
    max: usize,
) -> Result<(Vec<CandidateObjectiveTerm>, String, String), ExtractionError> {
    let prompt = objective_extraction_prompt(problem, keys);
    let reply = llm.complete(EXTRACTION_SYSTEM, &prompt)?;
    Ok((parse_objective_terms(&reply, max)?, prompt, reply))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_reply_parses() {
        let reply = "```json\n[{\"description\": \"minimum protein requirement\", \"type\": \"demand\", \"parameters\": [\"min_protein\"]}]\n```";
        let c = parse_constraints(reply, 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].ctype, ConstraintType::Demand);
        assert_eq!(c[0].parameters, vec!["min_protein"]);
    }

    #[test]
    fn prose_reply_is_error_and_empty_array_is_empty() {
        assert!(matches!(parse_constraints("no constraints", 10), Err(ExtractionError::NoArray)));
        assert!(parse_objective_terms("[]", 10).unwrap().is_empty());
    }

    #[test]
    fn truncates_to_max_and_drops_malformed() {
        let mut items: Vec<String> = (0..14)
            .map(|i| format!("{{\"description\": \"c{i}\", \"type\": \"capacity\", \"parameters\": [\"p{i}\"]}}"))
            .collect();
        items.insert(0, "{\"description\": \"no params\", \"type\": \"capacity\", \"parameters\": []}".into());
        items.insert(1, "42".into());
        let reply = format!("[{}]", items.join(","));
        let c = parse_constraints(&reply, 10).unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!(c[0].description, "c0");
    }

    #[test]
    fn unknown_labels_map_to_other() {
        let r = "[{\"description\": \"x\", \"role\": \"penalty\", \"parameters\": [\"k\"]}]";
        assert_eq!(parse_objective_terms(r, 10).unwrap()[0].role, TermRole::Other);
    }

    #[test]
    fn prompts_carry_python_key_list() {
        let keys = vec!["capacity".to_string(), "cost".to_string()];
        let p = constraint_extraction_prompt("P", &keys);
        assert!(p.contains("## Available Data Parameters\n['capacity', 'cost']\n"));
        assert!(p.contains("{\"description\": \"minimum protein requirement\","));
        let o = objective_extraction_prompt("P", &keys);
        assert!(o.contains("\"role\": \"cost\", \"parameters\": [\"unit_cost\"]}"));
    }
}
