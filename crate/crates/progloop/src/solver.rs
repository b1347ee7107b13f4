//! Running an external solver on candidate systems.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use progloop_core::etr::{
    encode, for_each_candidate, interval_refutation, BackendError, BackendReply, EnumMode, FFormula,
    SolverBackend,
};
use wait_timeout::ChildExt;

/// Environment variable holding the default command template.
pub const SOLVER_ENV: &str = "PROGLOOP_SOLVER";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

pub fn candidate_file_name(index: usize) -> String {
    format!("candidate-{:05}.smt2", index)
}

/// A solver run as `argv` with `{file}` replaced by the script path.
///
/// The template is split on whitespace; without a `{file}` placeholder the
/// path is appended.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    argv: Vec<String>,
    timeout: Duration,
    dump_dir: Option<PathBuf>,
}

impl CommandBackend {
    pub fn new(template: &str) -> Result<Self, BackendError> {
        let mut argv: Vec<String> = template.split_whitespace().map(String::from).collect();
        if argv.is_empty() {
            return Err(BackendError("empty solver command".into()));
        }
        if !argv.iter().any(|a| a.contains("{file}")) {
            argv.push("{file}".into());
        }
        Ok(CommandBackend { argv, timeout: DEFAULT_TIMEOUT, dump_dir: None })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Keep every script in `dir` instead of a temporary file.
    pub fn with_dump_dir(mut self, dir: PathBuf) -> Self {
        self.dump_dir = Some(dir);
        self
    }

    fn launch(&self, path: &Path) -> Result<BackendReply, BackendError> {
        let file = path.to_string_lossy();
        let args: Vec<String> = self.argv[1..].iter().map(|a| a.replace("{file}", &file)).collect();
        let mut child = Command::new(&self.argv[0])
            .args(&args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError(format!("cannot launch `{}`: {}", self.argv[0], e)))?;
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let status = child.wait_timeout(self.timeout).map_err(|e| BackendError(e.to_string()))?;
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(BackendReply::Timeout);
        };
        let text = out.join().unwrap_or_default();
        let diag = err.join().unwrap_or_default();
        // z3 exits nonzero after `unsat` when get-value has no model, so the
        // status alone decides nothing
        if text.trim().is_empty() && !status.success() {
            return Err(BackendError(format!("`{}` exited with {}: {}", self.argv[0], status, diag.trim())));
        }
        Ok(BackendReply::Output(text))
    }
}

impl SolverBackend for CommandBackend {
    fn run(&mut self, index: usize, script: &str) -> Result<BackendReply, BackendError> {
        let (path, keep) = match &self.dump_dir {
            Some(dir) => (dir.join(candidate_file_name(index)), true),
            None => {
                let name = format!("progloop-{}-{}", std::process::id(), candidate_file_name(index));
                (std::env::temp_dir().join(name), false)
            }
        };
        std::fs::write(&path, script)
            .map_err(|e| BackendError(format!("cannot write {}: {}", path.display(), e)))?;
        let reply = self.launch(&path);
        if !keep {
            let _ = std::fs::remove_file(&path);
        }
        reply
    }
}

/// Writes the system of every candidate that survives interval refutation
/// to `dir`, numbered in enumeration order. Returns `(written, refuted)`.
pub fn emit_candidates(
    phi: &FFormula,
    n: usize,
    mode: EnumMode,
    dir: &Path,
) -> std::io::Result<(usize, usize)> {
    std::fs::create_dir_all(dir)?;
    let (mut written, mut refuted, mut index) = (0, 0, 0);
    let mut failure = None;
    let _ = for_each_candidate(phi, n, mode, |c| {
        let sys = encode(&c, phi);
        let i = index;
        index += 1;
        if interval_refutation(&sys).is_some() {
            refuted += 1;
            return std::ops::ControlFlow::Continue(());
        }
        match std::fs::write(dir.join(candidate_file_name(i)), sys.to_smtlib()) {
            Ok(()) => {
                written += 1;
                std::ops::ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                std::ops::ControlFlow::Break(())
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok((written, refuted)),
    }
}
