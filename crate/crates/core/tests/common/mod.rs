//! Checks shared by the focused test files and the acceptance report.
#![allow(dead_code)]

pub mod agents;
pub mod dynamics;
pub mod gradients;
pub mod reward;

/// `Ok(summary)` on pass, `Err(reason)` on failure.
pub type Outcome = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
