#![allow(dead_code)]

use std::path::PathBuf;

use hessflow::cli::config::ProblemFile;
use hessflow::operator::ProblemSpec;
use hessflow::solver::{solve_ibvp, Trajectory};

pub const FIXTURES: [&str; 4] = ["heat_torus", "ma_patch", "disk_annulus", "logp2_torus"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.toml"))
}

pub fn fixture(name: &str) -> ProblemFile {
    ProblemFile::load(&fixture_path(name)).unwrap().0
}

pub fn solved(file: &ProblemFile, scale: usize) -> (ProblemSpec, Trajectory) {
    let p = file.problem(scale).unwrap();
    let t = solve_ibvp(&p, &file.solver).unwrap();
    (p, t)
}
