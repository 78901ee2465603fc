use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::ComposeError;

/// One external command: executable plus argument template.
///
/// Arguments may contain `{name}` placeholders. An argument that is exactly
/// `{inputs}` expands to one argument per input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCommand {
    pub path: String,
    #[serde(default)]
    pub args: Vec<String>,
}

/// Contents of `toolconfig.json`: command entries by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolConfig {
    pub tools: BTreeMap<String, ToolCommand>,
}

pub const TYPESETTER: &str = "typesetter";
pub const RASTERIZER: &str = "rasterizer";
pub const MERGER: &str = "merger";

impl ToolConfig {
    pub fn from_json(text: &str) -> Result<ToolConfig, ComposeError> {
        serde_json::from_str(text).map_err(|e| ComposeError::InvalidConfig(format!("tool config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ToolConfig, ComposeError> {
        let text = fs::read_to_string(path).map_err(|e| ComposeError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn get(&self, name: &str) -> Option<&ToolCommand> {
        self.tools.get(name)
    }

    /// The named command with its executable resolved, or `ToolNotFound`.
    pub fn require(&self, name: &str) -> Result<ResolvedTool, ComposeError> {
        let cmd = self.get(name).ok_or_else(|| ComposeError::ToolNotFound {
            tool: name.to_string(),
            path: None,
        })?;
        let exe = resolve_executable(&cmd.path).ok_or_else(|| ComposeError::ToolNotFound {
            tool: name.to_string(),
            path: Some(cmd.path.clone()),
        })?;
        Ok(ResolvedTool {
            name: name.to_string(),
            exe,
            args: cmd.args.clone(),
        })
    }
}

fn resolve_executable(path: &str) -> Option<PathBuf> {
    let p = Path::new(path);
    if p.components().count() > 1 || p.is_absolute() {
        return p.is_file().then(|| p.to_path_buf());
    }
    env::split_paths(&env::var_os("PATH")?)
        .map(|dir| dir.join(p))
        .find(|c| c.is_file())
}

#[derive(Debug, Clone)]
pub struct ResolvedTool {
    pub name: String,
    pub exe: PathBuf,
    args: Vec<String>,
}

impl ResolvedTool {
    /// Argument list with placeholders filled in. Unknown placeholders are
    /// left as written.
    pub fn expand_args(&self, vars: &[(&str, &str)], inputs: &[PathBuf]) -> Vec<String> {
        let mut out = Vec::with_capacity(self.args.len());
        for arg in &self.args {
            if arg == "{inputs}" {
                out.extend(inputs.iter().map(|p| p.display().to_string()));
                continue;
            }
            let mut a = arg.clone();
            for (k, v) in vars {
                a = a.replace(&format!("{{{k}}}"), v);
            }
            out.push(a);
        }
        out
    }

    /// Runs to completion; a nonzero exit becomes `ToolFailed` with stderr.
    pub fn run(
        &self,
        vars: &[(&str, &str)],
        inputs: &[PathBuf],
        cwd: Option<&Path>,
    ) -> Result<(), ComposeError> {
        let mut cmd = Command::new(&self.exe);
        cmd.args(self.expand_args(vars, inputs));
        if let Some(dir) = cwd {
            cmd.current_dir(dir);
        }
        let output = cmd.output().map_err(|e| ComposeError::ToolFailed {
            tool: self.name.clone(),
            status: None,
            stderr: e.to_string(),
        })?;
        if output.status.success() {
            Ok(())
        } else {
            Err(ComposeError::ToolFailed {
                tool: self.name.clone(),
                status: output.status.code(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            })
        }
    }
}
