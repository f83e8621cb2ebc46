#![allow(dead_code)]

pub mod meas_oracle;
