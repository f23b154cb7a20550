use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LlmClient, LlmError};

/// One recorded exchange, stored as `<key>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub system: String,
    pub user: String,
    pub reply: String,
}

/// SHA-256 over the request text; fixtures are provider-independent.
pub fn request_key(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update((system.len() as u64).to_le_bytes());
    h.update(system.as_bytes());
    h.update(user.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn fixture_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

fn load(dir: &Path, system: &str, user: &str) -> Result<Option<String>, LlmError> {
    let path = fixture_path(dir, &request_key(system, user));
    match std::fs::read_to_string(&path) {
        Ok(text) => {
            let fx: Fixture = serde_json::from_str(&text)
                .map_err(|e| LlmError::Transport(format!("corrupt fixture {}: {e}", path.display())))?;
            Ok(Some(fx.reply))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(LlmError::Transport(e.to_string())),
    }
}

pub(crate) fn store(dir: &Path, fixture: &Fixture) -> Result<(), LlmError> {
    std::fs::create_dir_all(dir).map_err(|e| LlmError::Transport(e.to_string()))?;
    let path = fixture_path(dir, &request_key(&fixture.system, &fixture.user));
    let mut text = serde_json::to_string_pretty(fixture).expect("fixture serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| LlmError::Transport(e.to_string()))
}

/// Serves replies from a fixture directory; a miss is an error.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    dir: PathBuf,
}

impl ReplayClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayClient { dir: dir.into() }
    }

    /// Write a fixture so that `(system, user)` replays as `reply`.
    pub fn seed(&self, system: &str, user: &str, reply: &str) -> Result<(), LlmError> {
        store(
            &self.dir,
            &Fixture {
                system: system.into(),
                user: user.into(),
                reply: reply.into(),
            },
        )
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        load(&self.dir, system, user)?.ok_or_else(|| LlmError::MissingFixture(request_key(system, user)))
    }
}

/// Replays known requests and records misses from the wrapped client.
pub struct RecordingClient<C> {
    dir: PathBuf,
    inner: C,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(dir: impl Into<PathBuf>, inner: C) -> Self {
        RecordingClient { dir: dir.into(), inner }
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        if let Some(reply) = load(&self.dir, system, user)? {
            return Ok(reply);
        }
        let reply = self.inner.complete(system, user)?;
        store(
            &self.dir,
            &Fixture {
                system: system.into(),
                user: user.into(),
                reply: reply.clone(),
            },
        )?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;

    #[test]
    fn record_then_replay_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let reply = "```python\nprint('status: 2')\n```\n\u{00e9}  trailing  ";
        let rec = RecordingClient::new(dir.path(), ScriptedClient::new([reply]));
        assert_eq!(rec.complete("sys", "user").unwrap(), reply);
        // Second call is served from disk, the script is already empty.
        assert_eq!(rec.complete("sys", "user").unwrap(), reply);
        let replay = ReplayClient::new(dir.path());
        assert_eq!(replay.complete("sys", "user").unwrap(), reply);
        assert!(matches!(replay.complete("sys", "other"), Err(LlmError::MissingFixture(_))));
    }

    #[test]
    fn key_separates_system_and_user() {
        assert_ne!(request_key("ab", "c"), request_key("a", "bc"));
        assert_eq!(request_key("a", "b").len(), 64);
    }
}
