use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{LpError, LpResult, LpSolver, SolverOptions, StandardFormLp};

/// Request document written to an external solver's stdin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    pub lp: StandardFormLp,
    pub options: SolverOptions,
}

/// Delegates to an external program speaking JSON over stdio: it reads a
/// [`SolveRequest`] on stdin and prints an [`LpResult`] on stdout.
#[derive(Debug, Clone)]
pub struct ProcessSolver {
    program: String,
    args: Vec<String>,
}

impl ProcessSolver {
    pub fn new(
        program: impl Into<String>,
        args: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl LpSolver for ProcessSolver {
    fn solve(&self, lp: &StandardFormLp, opts: &SolverOptions) -> Result<LpResult, LpError> {
        lp.validate()?;
        let ext = |e: String| LpError::External(format!("{}: {e}", self.program));
        let request = serde_json::to_vec(&SolveRequest {
            lp: lp.clone(),
            options: *opts,
        })
        .map_err(|e| ext(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ext(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&request)
            .map_err(|e| ext(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| ext(e.to_string()))?;
        if !out.status.success() {
            return Err(ext(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let result: LpResult =
            serde_json::from_slice(&out.stdout).map_err(|e| ext(format!("bad response: {e}")))?;
        if result.x.len() != lp.num_vars()
            || result.ineq_duals.len() != lp.ineq_rhs.len()
            || result.eq_duals.len() != lp.eq_rhs.len()
        {
            return Err(ext("response dimensions do not match the LP".into()));
        }
        Ok(result)
    }
}
