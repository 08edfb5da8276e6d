use std::fs;
use std::path::Path;

use crate::agent::Agent;
use crate::error::Result;

/// Full agent state (heads, statistics, generator) as JSON.
pub fn save_checkpoint(agent: &Agent, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string(agent)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Agent> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes `critic_reward.txt`, `critic_punish.txt` and `policy.txt` head snapshots into `dir`.
pub fn export_heads(agent: &Agent, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (r, q) = agent.critics();
    for (name, head) in [
        ("critic_reward", &r.head),
        ("critic_punish", &q.head),
        ("policy", &agent.policy().head),
    ] {
        fs::write(dir.join(format!("{name}.txt")), head.export_text(name))?;
    }
    Ok(())
}
