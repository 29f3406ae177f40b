use std::process::ExitCode;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use rib_core::Error;

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub inputs: Value,
    pub outputs: Value,
    pub timing_ms: f64,
    pub version: &'static str,
}

impl RunReport {
    pub fn new(command: &'static str, inputs: Value, outputs: Value, started: Instant) -> Self {
        Self {
            command,
            inputs,
            outputs,
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            version: rib_core::VERSION,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn print(&self) {
        println!("{}", self.to_json());
    }
}

/// An error together with its exit code and, for budget failures, a report for stdout.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub report: Option<Box<RunReport>>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
            report: None,
        }
    }

    pub fn emit(self) -> ExitCode {
        if let Some(report) = &self.report {
            report.print();
        }
        eprintln!("error: {}", self.message);
        ExitCode::from(self.code)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_budget_failure() {
            EXIT_BUDGET
        } else {
            EXIT_INPUT
        };
        Self {
            code,
            message: e.to_string(),
            report: None,
        }
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("outputs serialize")
}
