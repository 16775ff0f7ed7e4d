pub mod oracles;
pub mod stats_oracles;
pub mod date_oracle;
