#![allow(dead_code)]

pub mod fixtures;
pub mod fuzz;
pub mod sc;
