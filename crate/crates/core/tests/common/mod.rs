#![allow(dead_code)]

pub mod fixtures;
pub mod recognizer_oracles;
