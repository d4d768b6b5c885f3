//! Holds the `acceptance` test target. Run it with
//! `cargo test -p nomocomp-validation --test acceptance`; pass criterion
//! numbers after `--` to run a subset.
